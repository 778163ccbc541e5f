"""Shared meshes, operators, and one solved problem for the test suite."""

import numpy as np
import pytest

import fracneumann as fn


@pytest.fixture(scope="session")
def mesh_1d():
    return fn.build_interval_mesh(-1.0, 1.0, 0.01, 4.0)


@pytest.fixture(scope="session")
def op_1d(mesh_1d):
    return fn.assemble(mesh_1d, s=0.25, eps=0.3)


@pytest.fixture(scope="session")
def mesh_2d():
    return fn.build_box_mesh(((0.0, 1.0), (0.0, 1.0)), 0.2, 2.0)


@pytest.fixture(scope="session")
def op_2d(mesh_2d):
    return fn.assemble(mesh_2d, s=0.4, eps=0.5)


@pytest.fixture(scope="session")
def spec_1d(mesh_1d, op_1d):
    return fn.ProblemSpec(mesh_1d, op_1d, fn.power_nonlinearity(3.0))


@pytest.fixture(scope="session")
def solved_problem():
    """A converged mountain-pass solve on a coarse mesh, reused by the
    certificate and ladder tests."""
    mesh = fn.build_interval_mesh(-1.0, 1.0, 0.02, 2.0)
    op = fn.assemble(mesh, s=0.25, eps=0.1)
    spec = fn.ProblemSpec(mesh, op, fn.power_nonlinearity(3.0))
    phi = fn.phi_eps(mesh, 0.1)
    tent = fn.thresholds(spec, phi)
    e = fn.endpoint(spec, phi, tent)
    sobolev = fn.estimate_sobolev_constant(op)
    embedding = fn.estimate_embedding_constant(op)
    cfg = fn.MPAConfig(grad_tol=1e-9, max_outer=20000)
    report = fn.mountain_pass_solve(spec, e, cfg, sobolev_constant=sobolev)
    assert report.converged
    return {"spec": spec, "report": report, "tent": tent, "phi": phi,
            "endpoint": e, "sobolev": sobolev, "embedding": embedding}


def random_grid_function(mesh, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(mesh.n_total)
