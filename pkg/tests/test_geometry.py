import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocal_bvp import geometry as G
from nonlocal_bvp.errors import (
    InvalidRadii,
    InvariantViolation,
    MeshParseError,
    NonPositiveScale,
    PointOutsideDomain,
)


def test_scale_annulus():
    assert G.scale(G.Annulus(1, 2), 3) == G.Annulus(3, 6)
    assert G.scale(G.Annulus(1, 2), 1) == G.Annulus(1, 2)
    with pytest.raises(NonPositiveScale):
        G.scale(G.Annulus(1, 2), 0)


def test_scale_multihole():
    spec = G.MultiHole(G.Disk((0, 0), 5), (G.Disk((0, 0), 1), G.Disk((2.5, 0), 0.5)))
    s = G.scale(spec, 2)
    assert s.holes[1].center == (5, 0) and s.holes[1].radius == 1.0
    assert s.outer.radius == 10


def test_invalid_radii():
    with pytest.raises(InvalidRadii):
        G.Annulus(2, 1)
    with pytest.raises(InvalidRadii):
        G.annulus_capacity(0, 1)


@pytest.mark.parametrize("lam", [0.5, 1.0, 7.3])
def test_capacity_dilation_invariant(lam):
    assert G.annulus_capacity(lam, 2 * lam) == pytest.approx(2 * math.pi / math.log(2), rel=1e-14)


def test_capacity_values():
    assert G.annulus_capacity(1, math.e) == pytest.approx(2 * math.pi, rel=1e-15)
    caps = [G.annulus_capacity(1, lam) for lam in (1.5, 2, 4, 10, 100)]
    assert all(a > b for a, b in zip(caps, caps[1:]))


def test_capacity_scaling():
    assert G.capacity_scaling(2, 17.0, 3.5) == 3.5
    assert G.capacity_scaling(3, 2, 5) == 10
    assert G.capacity_scaling(4, 3, 1) == 9


def test_dist_to_boundary():
    a = G.Annulus(1, 2)
    assert G.dist_to_boundary(a, (1.5, 0)) == pytest.approx(0.5)
    assert G.dist_to_boundary(a, (0, 2)) == 0
    lam = 3.7
    assert G.dist_to_boundary(G.Annulus(lam, 2 * lam), (1.5 * lam, 0)) == pytest.approx(lam / 2)
    with pytest.raises(PointOutsideDomain):
        G.dist_to_boundary(a, (0.5, 0))


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(1, 2), st.floats(0, 2 * math.pi), st.floats(1, 2))
def test_dist_is_lipschitz(t1, r1, t2, r2):
    a = G.Annulus(1, 2)
    p = np.array([r1 * math.cos(t1), r1 * math.sin(t1)])
    q = np.array([r2 * math.cos(t2), r2 * math.sin(t2)])
    assert abs(G.dist_to_boundary(a, p) - G.dist_to_boundary(a, q)) <= np.linalg.norm(p - q) + 1e-12


def test_annulus_mesh_counts():
    m = G.generate_annulus_mesh(1, 2, 4, 8)
    assert m.n_nodes == 40
    assert len(m.triangles) == 64
    assert len(m.boundary_edges) == 16
    assert m.n_components == 2
    assert np.all(m.signed_areas() > 0)
    r = np.hypot(*m.nodes.T)
    levels = 1 + np.arange(5) / 4
    assert np.all(np.min(np.abs(r[:, None] - levels[None, :]), axis=1) < 1e-14)


def test_geometric_grading():
    m = G.generate_annulus_mesh(1, 4, 4, 8, grading="geometric")
    r = np.unique(np.round(np.hypot(*m.nodes.T), 12))
    assert np.allclose(r, 4 ** (np.arange(5) / 4))


def test_boundary_nodes_and_area():
    m = G.generate_annulus_mesh(1, 2, 8, 64)
    assert np.allclose(np.hypot(*m.nodes[m.boundary_nodes(1)].T), 1)
    assert np.allclose(np.hypot(*m.nodes[m.boundary_nodes(0)].T), 2)
    assert m.area() == pytest.approx(3 * math.pi, rel=5e-3)


def test_round_trip(tmp_path):
    m = G.generate_annulus_mesh(1, 2, 3, 12, grading="geometric")
    G.write_mesh(m, tmp_path / "a.mesh")
    assert G.read_mesh(tmp_path / "a.mesh") == m


def _write_lines(path, nodes, tris, edges):
    lines = [G.MESH_HEADER, f"nodes {len(nodes)}"] + [f"{x} {y}" for x, y in nodes]
    lines += [f"triangles {len(tris)}"] + [" ".join(map(str, t)) for t in tris]
    lines += [f"boundary_edges {len(edges)}"] + [" ".join(map(str, e)) for e in edges]
    path.write_text("\n".join(lines) + "\n")


def _square():
    nodes = [(0, 0), (1, 0), (1, 1), (0, 1)]
    tris = [(0, 1, 2), (0, 2, 3)]
    edges = [(0, 1, 0), (1, 2, 0), (2, 3, 0), (3, 0, 0)]
    return nodes, tris, edges


def test_read_valid_square(tmp_path):
    _write_lines(tmp_path / "s.mesh", *_square())
    m = G.read_mesh(tmp_path / "s.mesh")
    assert m.area() == pytest.approx(1.0)


def test_zero_area_triangle(tmp_path):
    nodes, tris, edges = _square()
    nodes = nodes + [(0.5, 0)]
    tris = tris + [(0, 4, 1)]
    _write_lines(tmp_path / "z.mesh", nodes, tris, edges)
    with pytest.raises(InvariantViolation):
        G.read_mesh(tmp_path / "z.mesh")


def test_tag_gap(tmp_path):
    nodes, tris, edges = _square()
    edges = [(a, b, 3) if k == 0 else (a, b, t) for k, (a, b, t) in enumerate(edges)]
    _write_lines(tmp_path / "t.mesh", nodes, tris, edges)
    with pytest.raises(InvariantViolation):
        G.read_mesh(tmp_path / "t.mesh")


def test_parse_error_line(tmp_path):
    p = tmp_path / "bad.mesh"
    p.write_text(f"{G.MESH_HEADER}\nnodes 2\n0 0\n1 x\n")
    with pytest.raises(MeshParseError) as info:
        G.read_mesh(p)
    assert info.value.line == 4


def test_refine_counts_and_invariants():
    m = G.generate_annulus_mesh(1, 2, 4, 16)
    f = G.refine(m)
    assert len(f.triangles) == 4 * len(m.triangles)
    assert len(f.boundary_edges) == 2 * len(m.boundary_edges)
    G.validate_mesh(f)
    # new boundary nodes sit on the circles
    assert np.allclose(np.hypot(*f.nodes[f.boundary_nodes(1)].T), 1, atol=1e-14)
    assert np.allclose(np.hypot(*f.nodes[f.boundary_nodes(0)].T), 2, atol=1e-14)


def test_refine_angle_counterexample():
    # boundary projection on a very coarse ring: the midpoint sagitta is a
    # large fraction of the radial spacing and the angle drops by more than 2x
    m = G.generate_annulus_mesh(1, 2, 4, 8)
    assert m.min_angle() / G.refine(m).min_angle() > 2


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 8), st.integers(8, 48), st.floats(1.2, 4.0))
def test_refine_keeps_shape_regularity(nr, ntheta, ratio):
    dr = (ratio - 1) / nr
    sagitta = ratio * (1 - math.cos(math.pi / ntheta))
    if sagitta > dr / 4:
        return
    m = G.generate_annulus_mesh(1, ratio, nr, ntheta)
    assert G.refine(m).min_angle() >= m.min_angle() / 2


def test_shipped_multihole_mesh():
    from importlib.resources import files

    m = G.read_mesh(files("nonlocal_bvp").joinpath("data").joinpath("three_component.mesh"))
    assert m.n_components == 3
    assert math.degrees(m.min_angle()) > 30
    assert m.area() == pytest.approx(math.pi * (9 - 2 * 0.25), rel=2e-2)
