import numpy as np
import pytest

from fracneumann import build_box_mesh, build_interval_mesh


def test_interval_example_nodes():
    mesh = build_interval_mesh(-1.0, 1.0, 0.5, 10.0)
    np.testing.assert_allclose(mesh.interior_nodes.ravel(),
                               [-0.75, -0.25, 0.25, 0.75])
    assert mesh.n_exterior == 40
    assert mesh.cell_volume == 0.5


@pytest.mark.parametrize("h", [0.5, 0.25, 0.1, 0.05])
def test_interval_volume_partition(h):
    mesh = build_interval_mesh(-1.0, 1.0, h, 4.0)
    assert mesh.n_interior * h == pytest.approx(2.0, rel=1e-14)


def test_interval_collar_too_thin():
    with pytest.raises(ValueError, match="collar too thin"):
        build_interval_mesh(0.0, 1.0, 0.1, 0.05)


def test_interval_bad_spacing():
    with pytest.raises(ValueError, match="positive"):
        build_interval_mesh(0.0, 1.0, -0.1, 2.0)
    with pytest.raises(ValueError, match="degenerate"):
        build_interval_mesh(1.0, 0.0, 0.1, 2.0)


def test_box_example_counts():
    mesh = build_box_mesh(((0.0, 1.0), (0.0, 1.0)), 0.25, 2.0)
    assert mesh.n_interior == 16
    assert mesh.n_interior * mesh.cell_volume == pytest.approx(1.0, rel=1e-14)


def test_box_degenerate_bounds():
    with pytest.raises(ValueError, match="degenerate"):
        build_box_mesh(((1.0, 0.0), (0.0, 1.0)), 0.25, 4.0)


def test_box_collar_too_thin():
    with pytest.raises(ValueError, match="collar too thin"):
        build_box_mesh(((0.0, 1.0), (0.0, 1.0)), 0.25, 1.0)


@pytest.mark.parametrize("builder,kwargs,dim", [
    (build_interval_mesh, dict(a=-1.0, b=1.0, h=0.1, r_ext=3.0), 1),
    (build_box_mesh, dict(bounds=((0.0, 1.0), (-1.0, 0.5)), h=0.1, r_ext=2.0), 2),
])
def test_node_disjointness_and_containment(builder, kwargs, dim):
    mesh = builder(**kwargs)
    assert mesh.dim == dim
    assert np.all(mesh.contains(mesh.interior_nodes))
    assert not np.any(mesh.contains(mesh.exterior_nodes))
    dist = mesh.distance_to_domain(mesh.exterior_nodes)
    assert np.all(dist > 0.0)
    assert np.all(dist <= mesh.r_ext + 1e-12)
    # no coincident nodes across the two sets
    allpts = mesh.nodes
    diffs = np.linalg.norm(allpts[:, None, :] - allpts[None, :, :], axis=-1)
    np.fill_diagonal(diffs, 1.0)
    assert diffs.min() > mesh.h / 2.0


@pytest.mark.parametrize("dim", [1, 2])
def test_refinement_doubles_counts(dim):
    if dim == 1:
        coarse = build_interval_mesh(-1.0, 1.0, 0.1, 2.0)
        fine = build_interval_mesh(-1.0, 1.0, 0.05, 2.0)
    else:
        coarse = build_box_mesh(((0.0, 1.0), (0.0, 1.0)), 0.2, 2.0)
        fine = build_box_mesh(((0.0, 1.0), (0.0, 1.0)), 0.1, 2.0)
    assert fine.n_interior == coarse.n_interior * 2**dim
