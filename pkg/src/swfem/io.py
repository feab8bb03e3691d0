"""CSV diagnostics, legacy-VTK field output, config files and manifests.

CSV files use shortest round-trip float formatting, so reading a file
back reproduces the written values bit-exactly.  Fields are written to
VTK legacy ASCII unstructured grids with each triangle subdivided into
four, which keeps quadratic fields visually faithful; constant-per-cell
fields become cell data, everything else point data.
"""

import configparser
import json
from pathlib import Path

import numpy as np

from .timeint import RunRecord


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(data, path, header=None):
    """Write a RunRecord or (header, rows) table as CSV."""
    if isinstance(data, RunRecord):
        header = RunRecord.COLUMNS
        rows = data.rows()
    else:
        rows = data
        if header is None:
            raise ValueError("header required for generic tables")
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path):
    """Read a CSV written by write_csv; numeric cells become int/float."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = tuple(lines[0].split(","))
    rows = []
    for ln in lines[1:]:
        row = []
        for cell in ln.split(","):
            try:
                row.append(int(cell))
            except ValueError:
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(cell)
        rows.append(tuple(row))
    return header, rows


# ---------------------------------------------------------------------------
# VTK legacy ASCII output
# ---------------------------------------------------------------------------

_SUB_POINTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
                        [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
_SUB_TRIS = np.array([[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]])


def write_vtk(field, path, name="field"):
    """Write one Field on its mesh, each triangle split into four.

    Point data is sampled per cell (corners and edge midpoints are
    duplicated between cells, which renders discontinuous fields
    honestly); vector fields get a zero third component.
    """
    space = field.space
    mesh = space.mesh
    ncells = mesh.num_cells
    pts = (mesh.cell_coords[:, 0, None, :]
           + np.einsum("cab,qb->cqa", mesh.jac, _SUB_POINTS))
    npts = ncells * len(_SUB_POINTS)
    conn = (_SUB_TRIS[None, :, :]
            + (np.arange(ncells) * len(_SUB_POINTS))[:, None, None])
    conn = conn.reshape(-1, 3)

    dg0 = (space.is_discontinuous and space.element.ndof == 1)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 2.0\n")
        fh.write(f"{name}\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {npts} double\n")
        for c in range(ncells):
            for p in pts[c]:
                fh.write(f"{p[0]:.16g} {p[1]:.16g} 0\n")
        fh.write(f"CELLS {len(conn)} {4 * len(conn)}\n")
        for tri in conn:
            fh.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")
        fh.write(f"CELL_TYPES {len(conn)}\n")
        fh.write("5\n" * len(conn))
        if dg0:
            vals = np.repeat(field.coeffs, 4)
            fh.write(f"CELL_DATA {len(conn)}\n")
            fh.write(f"SCALARS {name} double\nLOOKUP_TABLE default\n")
            for v in vals:
                fh.write(f"{v:.16g}\n")
            return
        fh.write(f"POINT_DATA {npts}\n")
        if space.is_vector:
            fh.write(f"VECTORS {name} double\n")
            for c in range(ncells):
                vals = field.evaluate(c, _SUB_POINTS)
                for v in vals:
                    fh.write(f"{v[0]:.16g} {v[1]:.16g} 0\n")
        else:
            fh.write(f"SCALARS {name} double\nLOOKUP_TABLE default\n")
            for c in range(ncells):
                vals = field.evaluate(c, _SUB_POINTS)
                for v in vals:
                    fh.write(f"{v:.16g}\n")


# ---------------------------------------------------------------------------
# Experiment configuration and manifests
# ---------------------------------------------------------------------------


class ConfigError(Exception):
    pass


def load_config(path):
    """Read a sectioned key=value experiment config into a flat dict."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config {path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            out[f"{section}.{key}"] = value.strip()
    return out


def write_manifest(path, payload):
    """Deterministic JSON manifest of one experiment run."""
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
