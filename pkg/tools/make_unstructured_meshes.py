"""Generate the unstructured periodic-conforming MSH fixtures.

Writes gmsh ASCII v2.2 triangulations of [0,1]^2 whose boundary nodes
match periodically: opposite sides carry identical node offsets, interior
nodes sit on a jittered near-hexagonal lattice (mimicking the
near-equilateral output of frontal mesh generators), and the cells come
from a Delaunay of the combined point set.  Lattice sizes are tuned so
the triangle counts land near the classic target-element-size sequence
1/8 ... 1/32 (roughly 160, 416, 736, 1488 and 2744 triangles).

Usage: python tools/make_unstructured_meshes.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

# lattice columns per nominal element-size label
SIZES = {"8": 8, "12": 13, "16": 18, "24": 25, "32": 35}
JITTER = 0.15
SEED = 20240915


def hex_lattice_points(m, jitter, rng):
    """Near-equilateral interior lattice (alternating row offsets) with
    periodically matching boundary nodes.  High element quality keeps the
    cell-size spread small, which tight floating-point identities on
    assembled operators appreciate."""
    rows = int(round(m * 2 / np.sqrt(3)))
    pts = [np.column_stack([np.arange(m + 1) / m, np.zeros(m + 1)]),
           np.column_stack([np.arange(m + 1) / m, np.ones(m + 1)])]
    ys = np.arange(1, rows) / rows
    pts.append(np.column_stack([np.zeros(rows - 1), ys]))
    pts.append(np.column_stack([np.ones(rows - 1), ys]))
    interior = []
    for r in range(1, rows):
        off = 0.5 / m if r % 2 else 0.25 / m
        xs = (np.arange(m) + off) / m
        xs = xs[(xs > 0.02) & (xs < 0.98)]
        for x in xs:
            interior.append((x, r / rows))
    interior = np.asarray(interior)
    interior += rng.uniform(-jitter / m, jitter / m, interior.shape)
    pts.append(interior)
    return np.vstack(pts)


def write_msh(points, tris, path):
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write(f"$Nodes\n{len(points)}\n")
        for k, (x, y) in enumerate(points):
            fh.write(f"{k + 1} {x:.17g} {y:.17g} 0\n")
        fh.write("$EndNodes\n")
        fh.write(f"$Elements\n{len(tris)}\n")
        for k, (a, b, c) in enumerate(tris):
            fh.write(f"{k + 1} 2 2 0 1 {a + 1} {b + 1} {c + 1}\n")
        fh.write("$EndElements\n")


def _triangulate(pts):
    tris = Delaunay(pts).simplices
    d1 = pts[tris[:, 1]] - pts[tris[:, 0]]
    d2 = pts[tris[:, 2]] - pts[tris[:, 0]]
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    flip = cross < 0
    tris[flip, 1], tris[flip, 2] = tris[flip, 2], tris[flip, 1].copy()
    return tris


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)
    for label, m in SIZES.items():
        pts = hex_lattice_points(m, JITTER, rng)
        tris = _triangulate(pts)
        path = outdir / f"unstructured_{label}.msh"
        write_msh(pts, tris, path)
        print(f"{path}: {len(pts)} nodes, {len(tris)} triangles")
    pts = hex_lattice_points(7, 0.1, np.random.default_rng(11))
    tris = _triangulate(pts)
    path = outdir / "unstructured_coarse.msh"
    write_msh(pts, tris, path)
    print(f"{path}: {len(pts)} nodes, {len(tris)} triangles")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
