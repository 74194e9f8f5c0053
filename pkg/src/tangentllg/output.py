"""CSV time series and legacy-VTK snapshots."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import Mesh

CSV_HEADER = "t,E_total,E_exch,E_stray,E_zeeman,E_aniso,v_l2,tangency_residual,energy_law_slack"

VTK_TETRA = 10


def _f(x: float) -> str:
    return f"{x:.17g}"


def write_csv(path, records, comments=()) -> None:
    """One row per step record; ``comments`` become leading ``#`` lines."""
    with Path(path).open("w", newline="\n") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(CSV_HEADER + "\n")
        for r in records:
            e = r.energy
            row = (r.t, e.total, e.exchange, e.stray, e.zeeman, e.aniso, r.v_l2, r.tangency_residual, r.energy_law_slack)
            fh.write(",".join(_f(x) for x in row) + "\n")


def read_csv(path) -> np.ndarray:
    """Load the numeric table of a CSV written by :func:`write_csv`."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError(f"{path}: missing or unexpected CSV header")
    return np.loadtxt(lines[1:], delimiter=",", ndmin=2)


def write_vtk(path, mesh: Mesh, point_vectors: dict, title: str = "tangentllg snapshot") -> None:
    """Legacy ASCII unstructured grid with tetra cells and vector point data."""
    n = mesh.num_vertices
    with Path(path).open("w", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title.replace("\n", " ")[:255] + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        for p in mesh.vertices:
            fh.write(" ".join(_f(x) for x in p) + "\n")
        fh.write(f"CELLS {mesh.num_tets} {5 * mesh.num_tets}\n")
        for t in mesh.tets:
            fh.write("4 " + " ".join(str(int(i)) for i in t) + "\n")
        fh.write(f"CELL_TYPES {mesh.num_tets}\n")
        fh.write(f"{VTK_TETRA}\n" * mesh.num_tets)
        if point_vectors:
            fh.write(f"POINT_DATA {n}\n")
            for name, vals in point_vectors.items():
                vals = np.asarray(vals, dtype=float).reshape(n, 3)
                fh.write(f"VECTORS {name} double\n")
                for v in vals:
                    fh.write(" ".join(_f(x) for x in v) + "\n")


def read_vtk(path) -> tuple[np.ndarray, np.ndarray, dict]:
    """Read back a file written by :func:`write_vtk`: points, tets, point vectors."""
    tokens = Path(path).read_text().split("\n")
    it = iter(tokens)
    points = tets = None
    vectors = {}
    npts = 0
    for line in it:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            npts = int(parts[1])
            points = np.array([[float(x) for x in next(it).split()] for _ in range(npts)])
        elif key == "CELLS":
            ncell = int(parts[1])
            rows = [[int(x) for x in next(it).split()] for _ in range(ncell)]
            tets = np.array([r[1:] for r in rows], dtype=np.int64)
        elif key == "VECTORS":
            vectors[parts[1]] = np.array([[float(x) for x in next(it).split()] for _ in range(npts)])
    return points, tets, vectors
