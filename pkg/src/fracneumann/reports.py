"""Deterministic report files: CSV, JSON summaries, and solution snapshots.

Every file carries a manifest (code version and the sha256 of the config
text that produced it) and no timestamps, so a rerun with the same config
and seed is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .mesh import DomainMesh

__all__ = [
    "manifest_dict",
    "write_json",
    "write_csv",
    "write_solution",
    "read_solution",
    "write_gnuplot_recipe",
]


def manifest_dict(config_sha256: str) -> dict:
    return {"tool": "fracneumann", "version": __version__,
            "config_sha256": config_sha256}


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_json(path: Path, payload: dict, config_sha256: str) -> None:
    body = {"manifest": manifest_dict(config_sha256)}
    body.update(payload)
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, columns: list[str], rows: list[tuple],
              config_sha256: str) -> None:
    lines = [f"# fracneumann {__version__} config_sha256={config_sha256}"]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_solution(path: Path, mesh: DomainMesh, values: np.ndarray,
                   config_sha256: str, eps: float | None = None) -> None:
    """Plain-text solution snapshot.

    Comment lines first (manifest and, when given, the eps the solution was
    computed at), then the header ``dim h node_count``, then one line per
    node: coordinates followed by the value, interior block first.
    """
    if values.shape != (mesh.n_total,):
        raise ValueError(
            f"solution has {values.shape} values, mesh has {mesh.n_total} nodes"
        )
    lines = [f"# fracneumann {__version__} config_sha256={config_sha256}"]
    if eps is not None:
        lines.append(f"# eps={_fmt(eps)}")
    lines.append(f"{mesh.dim} {_fmt(mesh.h)} {mesh.n_total}")
    coords = mesh.nodes
    for i in range(mesh.n_total):
        xs = " ".join(_fmt(c) for c in coords[i])
        lines.append(f"{xs} {_fmt(values[i])}")
    path.write_text("\n".join(lines) + "\n")


def read_solution(path: Path, mesh: DomainMesh | None = None) -> tuple[dict, np.ndarray, np.ndarray]:
    """Read a solution snapshot; returns (header, coordinates, values).

    If ``mesh`` is given, the node count and coordinates are checked against
    it (to 1e-12) so a stored solution cannot silently be replayed on the
    wrong mesh.
    """
    path = Path(path)
    comments, raw = [], []
    for ln in path.read_text().splitlines():
        if not ln.strip():
            continue
        (comments if ln.lstrip().startswith("#") else raw).append(ln)
    if not raw:
        raise ValueError(f"solution file {path} is empty")
    head = raw[0].split()
    if len(head) != 3:
        raise ValueError(
            f"solution file {path}: header must be 'dim h node_count', got '{raw[0]}'"
        )
    header = {"dim": int(head[0]), "h": float(head[1]), "n_total": int(head[2])}
    for ln in comments:
        body = ln.lstrip("# ").strip()
        if body.startswith("eps="):
            header["eps"] = float(body.split("=", 1)[1])
    if len(raw) - 1 != header["n_total"]:
        raise ValueError(
            f"solution file {path}: header says {header['n_total']} nodes, "
            f"found {len(raw) - 1} data lines"
        )
    data = np.array([[float(tok) for tok in ln.split()] for ln in raw[1:]])
    if data.shape[1] != header["dim"] + 1:
        raise ValueError(
            f"solution file {path}: expected {header['dim']} coordinates + value per line"
        )
    coords, values = data[:, :-1], data[:, -1]
    if mesh is not None:
        if header["n_total"] != mesh.n_total or header["dim"] != mesh.dim:
            raise ValueError(
                f"solution file {path} was written for a different mesh "
                f"(dim {header['dim']}, {header['n_total']} nodes; configured mesh "
                f"has dim {mesh.dim}, {mesh.n_total} nodes)"
            )
        if not np.allclose(coords, mesh.nodes, atol=1e-12, rtol=0.0):
            raise ValueError(
                f"solution file {path}: node coordinates do not match the "
                "configured mesh"
            )
    return header, coords, values


def write_gnuplot_recipe(path: Path, csv_name: str, config_sha256: str) -> None:
    lines = [
        f"# fracneumann {__version__} config_sha256={config_sha256}",
        f"# gnuplot recipe for the sweep report {csv_name}",
        "# (column 1 = eps, 3 = level/eps^N, 7 = norm^2/eps^N)",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key left top autotitle columnheader",
        "set logscale x",
        "set xlabel 'eps'",
        "set ylabel 'scaled level and norm'",
        f"plot '{csv_name}' using 1:3 with linespoints, \\",
        f"     '{csv_name}' using 1:7 with linespoints",
    ]
    path.write_text("\n".join(lines) + "\n")
