"""Domains, meshes and analytic geometric quantities.

Boundary tags: 0 is the outer component, 1..m are the inner ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    GeometryError,
    InvalidRadii,
    InvalidResolution,
    InvariantViolation,
    MeshParseError,
    NonPositiveScale,
    PointOutsideDomain,
)

MESH_HEADER = "NONLOCAL-MESH v1"


# --- domain specifications -------------------------------------------------

@dataclass(frozen=True)
class Annulus:
    inner_radius: float
    outer_radius: float
    dimension: int = 2

    def __post_init__(self):
        if not (0 < self.inner_radius < self.outer_radius) or not math.isfinite(self.outer_radius):
            raise InvalidRadii(f"need 0 < R1 < R2, got ({self.inner_radius}, {self.outer_radius})")
        if self.dimension < 2:
            raise GeometryError("dimension must be >= 2")

    @property
    def components(self):
        return 2


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise InvalidRadii(f"disk radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class MultiHole:
    """Outer disk minus ``m`` disjoint closed hole disks (tags 1..m in order)."""

    outer: Disk
    holes: tuple

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(self.holes))
        if not self.holes:
            raise GeometryError("MultiHole needs at least one hole")
        c0 = np.array(self.outer.center)
        for i, h in enumerate(self.holes):
            if np.linalg.norm(np.array(h.center) - c0) + h.radius >= self.outer.radius:
                raise GeometryError(f"hole {i + 1} not inside the open outer disk")
            for j in range(i):
                o = self.holes[j]
                if np.linalg.norm(np.subtract(h.center, o.center)) <= h.radius + o.radius:
                    raise GeometryError(f"holes {j + 1} and {i + 1} intersect")
        # origin must not lie in the closed region
        if np.linalg.norm(c0) <= self.outer.radius and not any(
            np.linalg.norm(h.center) < h.radius for h in self.holes
        ):
            raise GeometryError("origin lies in the closure of the domain")

    @property
    def components(self):
        return 1 + len(self.holes)

    @property
    def dimension(self):
        return 2


@dataclass(frozen=True)
class ExternalMesh:
    path: str
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise NonPositiveScale(f"scale must be positive, got {self.scale}")

    @property
    def dimension(self):
        return 2


def scale(spec, lam: float):
    """Dilate ``spec`` by ``lam`` (x -> lam * x)."""
    if not lam > 0:
        raise NonPositiveScale(f"lambda must be positive, got {lam}")
    if isinstance(spec, Annulus):
        return Annulus(lam * spec.inner_radius, lam * spec.outer_radius, spec.dimension)
    if isinstance(spec, MultiHole):
        def s(d):
            return Disk((lam * d.center[0], lam * d.center[1]), lam * d.radius)
        return MultiHole(s(spec.outer), tuple(s(h) for h in spec.holes))
    if isinstance(spec, ExternalMesh):
        return replace(spec, scale=spec.scale * lam)
    raise TypeError(f"unknown domain spec {spec!r}")


def annulus_capacity(r1: float, r2: float) -> float:
    """H^1-capacity 2*pi/ln(R2/R1) of the planar annulus R1 < |x| < R2."""
    if not (0 < r1 < r2):
        raise InvalidRadii(f"need 0 < R1 < R2, got ({r1}, {r2})")
    return 2.0 * math.pi / math.log(r2 / r1)


def capacity_scaling(dimension: int, lam: float, cap_base: float) -> float:
    if dimension < 2 or not lam > 0 or cap_base < 0:
        raise ValueError("need N >= 2, lambda > 0, cap >= 0")
    return lam ** (dimension - 2) * cap_base


def dist_to_boundary(spec, x, tol: float = 1e-12):
    """Euclidean distance from point(s) ``x`` to the boundary of ``spec``.

    ``x`` may be one point or an ``(n, d)`` array. Points outside the closed
    domain (beyond ``tol`` relative) raise :class:`PointOutsideDomain`.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if isinstance(spec, Annulus):
        r = np.linalg.norm(pts, axis=1)
        d_in = r - spec.inner_radius
        d_out = spec.outer_radius - r
        scale_ = spec.outer_radius
    elif isinstance(spec, MultiHole):
        c0 = np.array(spec.outer.center)
        d_out = spec.outer.radius - np.linalg.norm(pts - c0, axis=1)
        d_in = np.min(
            [np.linalg.norm(pts - np.array(h.center), axis=1) - h.radius for h in spec.holes],
            axis=0,
        )
        scale_ = spec.outer.radius
    else:
        raise TypeError("dist_to_boundary needs an Annulus or MultiHole; use Mesh.boundary_distance")
    d = np.minimum(d_in, d_out)
    if np.any(d < -tol * scale_):
        raise PointOutsideDomain(f"point {pts[np.argmin(d)].tolist()} outside domain")
    d = np.maximum(d, 0.0)
    return float(d[0]) if single else d


# --- meshes --------------------------------------------------------------

@dataclass(eq=False)
class Mesh:
    """Planar triangulation with tagged boundary edges.

    ``circles`` maps a tag to ``(cx, cy, R)`` when that boundary component is
    an exact circle; :func:`refine` projects new boundary nodes onto it.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    circles: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float).reshape(-1, 2)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        self.boundary_tags = np.ascontiguousarray(self.boundary_tags, dtype=np.int64).ravel()

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.boundary_edges, other.boundary_edges)
            and np.array_equal(self.boundary_tags, other.boundary_tags)
        )

    __hash__ = None

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_components(self):
        return int(self.boundary_tags.max()) + 1 if len(self.boundary_tags) else 0

    def signed_areas(self):
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self):
        return float(self.signed_areas().sum())

    def boundary_nodes(self, tag):
        return np.unique(self.boundary_edges[self.boundary_tags == tag])

    def all_boundary_nodes(self):
        return np.unique(self.boundary_edges)

    def edge_lengths(self):
        p = self.nodes[self.triangles]
        return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)

    def max_edge_length(self):
        return float(self.edge_lengths().max())

    def min_angle(self):
        p = self.nodes[self.triangles]
        angles = []
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            cosang = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.arccos(np.clip(cosang, -1, 1)))
        return float(np.min(angles))

    def boundary_distance(self, points):
        """Distance from each point to the union of boundary edges."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.nodes[self.boundary_edges[:, 0]]
        b = self.nodes[self.boundary_edges[:, 1]]
        ab = b - a
        best = np.full(len(pts), np.inf)
        # chunk to bound memory
        for s in range(0, len(pts), 2048):
            q = pts[s:s + 2048, None, :]
            t = np.clip(np.sum((q - a) * ab, axis=2) / np.sum(ab * ab, axis=1), 0.0, 1.0)
            proj = a + t[..., None] * ab
            best[s:s + 2048] = np.min(np.linalg.norm(q - proj, axis=2), axis=1)
        return best

    def scaled(self, lam):
        if not lam > 0:
            raise NonPositiveScale(f"lambda must be positive, got {lam}")
        circles = {t: (lam * c[0], lam * c[1], lam * c[2]) for t, c in self.circles.items()}
        return Mesh(lam * self.nodes, self.triangles.copy(), self.boundary_edges.copy(),
                    self.boundary_tags.copy(), circles)


def validate_mesh(mesh: Mesh) -> Mesh:
    """Check every mesh invariant; raise :class:`InvariantViolation` on failure."""
    n = mesh.n_nodes
    if n == 0 or len(mesh.triangles) == 0:
        raise InvariantViolation("mesh has no nodes or no triangles")
    if not np.all(np.isfinite(mesh.nodes)):
        raise InvariantViolation("non-finite node coordinates")
    for name, arr in (("triangle", mesh.triangles), ("boundary edge", mesh.boundary_edges)):
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise InvariantViolation(f"{name} references a node index out of range")
    areas = mesh.signed_areas()
    total = float(areas.sum())
    if not total > 0:
        raise InvariantViolation("non-positive total area")
    bad = np.flatnonzero(areas <= 1e-14 * total)
    if bad.size:
        raise InvariantViolation(f"triangle {bad[0]} has non-positive or negligible area "
                                 "(must be counterclockwise)")

    tri_edges = np.sort(np.concatenate([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]],
                                        mesh.triangles[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(tri_edges, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise InvariantViolation("an edge is shared by more than two triangles")
    free = {tuple(e) for e in uniq[counts == 1]}
    tagged = [tuple(e) for e in np.sort(mesh.boundary_edges, axis=1)]
    if len(set(tagged)) != len(tagged):
        raise InvariantViolation("duplicate boundary edge")
    if set(tagged) != free:
        missing = free - set(tagged)
        if missing:
            raise InvariantViolation(f"untagged boundary edge {sorted(missing)[0]}")
        raise InvariantViolation("a tagged boundary edge is not on the boundary of exactly one triangle")

    tags = np.unique(mesh.boundary_tags)
    if tags.size == 0 or not np.array_equal(tags, np.arange(tags.size)):
        raise InvariantViolation(f"boundary tags must be 0..m without gaps, got {tags.tolist()}")
    loop_areas = []
    for t in tags:
        edges = mesh.boundary_edges[mesh.boundary_tags == t]
        loop_areas.append(_check_single_loop(mesh.nodes, edges, int(t)))
    if len(loop_areas) > 1 and loop_areas[0] < max(loop_areas[1:]):
        raise InvariantViolation("tag 0 must be the outer boundary component")
    return mesh


def _check_single_loop(nodes, edges, tag):
    """Verify ``edges`` form one closed simple loop; return its enclosed area."""
    if len(edges) < 3:
        raise InvariantViolation(f"tag {tag}: fewer than 3 edges cannot close a loop")
    adj = {}
    for a, b in edges:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    if any(len(v) != 2 for v in adj.values()):
        raise InvariantViolation(f"tag {tag}: boundary edges do not form a simple loop")
    start = int(edges[0, 0])
    order = [start]
    prev, cur = None, start
    while True:
        nbrs = adj[cur]
        nxt = nbrs[0] if nbrs[0] != prev else nbrs[1]
        if nxt == start:
            break
        order.append(nxt)
        prev, cur = cur, nxt
        if len(order) > len(adj):
            break
    if len(order) != len(adj):
        raise InvariantViolation(f"tag {tag}: boundary edges form more than one loop")
    p = nodes[order]
    return 0.5 * abs(float(np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])))


def generate_annulus_mesh(r1: float, r2: float, nr: int, ntheta: int, grading: str = "uniform") -> Mesh:
    """Structured polar triangulation of ``r1 < |x| < r2``.

    Node ``i * ntheta + j`` sits at radius ``r_i`` and angle ``2 pi j / ntheta``;
    each polar cell is cut along one diagonal. With ``grading="uniform"``
    ``r_i = r1 + i (r2 - r1) / nr``; with ``"geometric"`` ``r_i = r1 (r2/r1)^(i/nr)``
    (log-polar cells of equal shape).
    """
    if grading not in ("uniform", "geometric"):
        raise InvalidResolution(f"unknown radial grading {grading!r}")
    if not (0 < r1 < r2):
        raise InvalidRadii(f"need 0 < R1 < R2, got ({r1}, {r2})")
    if nr < 1 or ntheta < 3:
        raise InvalidResolution(f"need nr >= 1 and ntheta >= 3, got ({nr}, {ntheta})")
    if grading == "uniform":
        radii = r1 + np.arange(nr + 1) * ((r2 - r1) / nr)
    else:
        radii = r1 * (r2 / r1) ** (np.arange(nr + 1) / nr)
    radii[0], radii[-1] = r1, r2
    theta = 2.0 * np.pi * np.arange(ntheta) / ntheta
    rr, tt = np.meshgrid(radii, theta, indexing="ij")
    nodes = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])

    i, j = np.meshgrid(np.arange(nr), np.arange(ntheta), indexing="ij")
    i, j = i.ravel(), j.ravel()
    jn = (j + 1) % ntheta
    a = i * ntheta + j
    b = (i + 1) * ntheta + j
    c = (i + 1) * ntheta + jn
    d = i * ntheta + jn
    triangles = np.column_stack([np.column_stack([a, b, c]), np.column_stack([a, c, d])]).reshape(-1, 3)

    js = np.arange(ntheta)
    outer = np.column_stack([nr * ntheta + js, nr * ntheta + (js + 1) % ntheta])
    inner = np.column_stack([(js + 1) % ntheta, js])
    edges = np.vstack([outer, inner])
    tags = np.concatenate([np.zeros(ntheta, int), np.ones(ntheta, int)])
    return Mesh(nodes, triangles, edges, tags, {0: (0.0, 0.0, float(r2)), 1: (0.0, 0.0, float(r1))})


def refine(mesh: Mesh) -> Mesh:
    """Split every triangle into four through its edge midpoints.

    New boundary nodes are pushed onto the exact circle of their component
    when ``mesh.circles`` knows it.
    """
    tri = mesh.triangles
    t = len(tri)
    all_edges = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(all_edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    n = mesh.n_nodes

    # locate the midpoint index of every boundary edge
    keys = uniq[:, 0] * n + uniq[:, 1]
    be = np.sort(mesh.boundary_edges, axis=1)
    bmid = np.searchsorted(keys, be[:, 0] * n + be[:, 1])
    for tag, (cx, cy, radius) in mesh.circles.items():
        sel = bmid[mesh.boundary_tags == tag]
        v = mids[sel] - (cx, cy)
        mids[sel] = (cx, cy) + v * (radius / np.linalg.norm(v, axis=1))[:, None]

    nodes = np.vstack([mesh.nodes, mids])
    m01, m12, m20 = inv[:t] + n, inv[t:2 * t] + n, inv[2 * t:] + n
    new_tri = np.vstack([
        np.column_stack([tri[:, 0], m01, m20]),
        np.column_stack([m01, tri[:, 1], m12]),
        np.column_stack([m20, m12, tri[:, 2]]),
        np.column_stack([m01, m12, m20]),
    ])
    bm = bmid + n
    e = mesh.boundary_edges
    new_edges = np.vstack([np.column_stack([e[:, 0], bm]), np.column_stack([bm, e[:, 1]])])
    new_tags = np.concatenate([mesh.boundary_tags, mesh.boundary_tags])
    return Mesh(nodes, new_tri, new_edges, new_tags, dict(mesh.circles))


def write_mesh(mesh: Mesh, path) -> None:
    lines = [MESH_HEADER, f"nodes {mesh.n_nodes}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes]
    lines.append(f"triangles {len(mesh.triangles)}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"boundary_edges {len(mesh.boundary_edges)}")
    lines += [f"{i} {j} {t}" for (i, j), t in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    """Read a mesh file and validate it."""
    raw = Path(path).read_text().splitlines()
    rows = []
    for lineno, line in enumerate(raw, start=1):
        content = line.split("#", 1)[0].strip()
        if content:
            rows.append((lineno, content))
    if not rows or rows[0][1] != MESH_HEADER:
        raise MeshParseError(f"expected header {MESH_HEADER!r}", rows[0][0] if rows else 1)
    pos = 1

    def section(name, width, conv):
        nonlocal pos
        if pos >= len(rows):
            raise MeshParseError(f"missing '{name}' section", raw and len(raw) or 1)
        lineno, content = rows[pos]
        parts = content.split()
        if len(parts) != 2 or parts[0] != name or not parts[1].isdigit():
            raise MeshParseError(f"expected '{name} <count>'", lineno)
        count = int(parts[1])
        pos += 1
        out = []
        for _ in range(count):
            if pos >= len(rows):
                raise MeshParseError(f"'{name}' section ended early", len(raw))
            lineno, content = rows[pos]
            parts = content.split()
            if len(parts) != width:
                raise MeshParseError(f"expected {width} values", lineno)
            try:
                out.append([conv(p) for p in parts])
            except ValueError:
                raise MeshParseError("malformed number", lineno) from None
            pos += 1
        return out

    nodes = section("nodes", 2, float)
    tris = section("triangles", 3, int)
    edges = section("boundary_edges", 3, int)
    if pos != len(rows):
        raise MeshParseError("trailing content", rows[pos][0])
    e = np.array(edges, dtype=np.int64).reshape(-1, 3)
    mesh = Mesh(np.array(nodes, float).reshape(-1, 2), np.array(tris, np.int64).reshape(-1, 3), e[:, :2], e[:, 2])
    return validate_mesh(mesh)


def mesh_for_domain(spec, nr: int = 16, ntheta: int = 64, grading: str = "uniform") -> Mesh:
    """Mesh a domain spec: annuli are generated, file meshes are read."""
    if isinstance(spec, Annulus):
        if spec.dimension != 2:
            raise GeometryError("the finite element path is two-dimensional")
        return generate_annulus_mesh(spec.inner_radius, spec.outer_radius, nr, ntheta, grading)
    if isinstance(spec, ExternalMesh):
        mesh = read_mesh(spec.path)
        return mesh if spec.scale == 1.0 else mesh.scaled(spec.scale)
    raise GeometryError(f"no built-in mesher for {type(spec).__name__}; supply a mesh file")


def circles_for(spec: MultiHole) -> dict:
    """Tag -> circle map of a MultiHole spec, for refinement projection."""
    out = {0: (*spec.outer.center, spec.outer.radius)}
    for k, h in enumerate(spec.holes, start=1):
        out[k] = (*h.center, h.radius)
    return out
