"""Generate the shipped three-component mesh (disk of radius 3 minus two holes).

Interior nodes come from a hexagonal lattice, boundary nodes are equispaced on
the circles, and the triangulation is Delaunay, so angles stay well away
from 90 degrees and the discrete maximum principle holds for a = 0, h = 1.

    python scripts/make_multihole_mesh.py [--h 0.15] [--out PATH]
"""
import argparse
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from nonlocal_bvp.geometry import Mesh, validate_mesh, write_mesh

OUTER = ((0.0, 0.0), 3.0)
HOLES = [((0.0, 0.0), 0.5), ((1.8, 0.0), 0.5)]


def circle_points(center, radius, h):
    n = max(12, int(np.ceil(2 * np.pi * radius / h)))
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def build(h):
    circles = [OUTER] + HOLES
    bnd = [circle_points(c, r, h) for c, r in circles]
    # hexagonal lattice
    rows = np.arange(-OUTER[1], OUTER[1] + h, h * np.sqrt(3) / 2)
    pts = []
    for k, y in enumerate(rows):
        xs = np.arange(-OUTER[1], OUTER[1] + h, h) + (h / 2 if k % 2 else 0.0)
        pts.append(np.column_stack([xs, np.full_like(xs, y)]))
    lat = np.vstack(pts)
    keep = np.linalg.norm(lat - OUTER[0], axis=1) < OUTER[1] - 0.6 * h
    for c, r in HOLES:
        keep &= np.linalg.norm(lat - c, axis=1) > r + 0.6 * h
    nodes = np.vstack(bnd + [lat[keep]])
    tri = Delaunay(nodes).simplices
    cent = nodes[tri].mean(axis=1)
    inside = np.linalg.norm(cent - OUTER[0], axis=1) < OUTER[1]
    for c, r in HOLES:
        inside &= np.linalg.norm(cent - c, axis=1) > r
    tri = tri[inside]
    # counterclockwise orientation
    p = nodes[tri]
    area = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    tri[area < 0] = tri[area < 0][:, [0, 2, 1]]
    # boundary edges: consecutive circle points, oriented with the domain on the left
    edges, tags = [], []
    start = 0
    for tag, pts_ in enumerate(bnd):
        n = len(pts_)
        idx = start + np.arange(n)
        e = np.column_stack([idx, np.roll(idx, -1)])
        if tag > 0:
            e = e[:, ::-1]
        edges.append(e)
        tags.append(np.full(n, tag))
        start += n
    mesh = Mesh(nodes, tri.astype(np.int64), np.vstack(edges), np.concatenate(tags))
    return validate_mesh(mesh)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=0.15)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/nonlocal_bvp/data/three_component.mesh"))
    args = ap.parse_args()
    mesh = build(args.h)
    write_mesh(mesh, args.out)
    print(f"{args.out}: {mesh.n_nodes} nodes, {len(mesh.triangles)} triangles, "
          f"min angle {np.degrees(mesh.min_angle()):.1f} deg")


if __name__ == "__main__":
    main()
