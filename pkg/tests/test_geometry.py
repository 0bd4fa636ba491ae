"""Domain construction: graph functions, lattices, boxes, clips, frames."""
from __future__ import annotations

import numpy as np
import pytest

from k13lab.geometry import (
    TAG_GRAPH, TAG_INTERIOR, TAG_WALL,
    BoxDomain, Cylinder, build_box_domain, build_graph_domain,
    cylinder_clip, load_domain, make_graph_fn, surface_frame,
)


def test_flat_graph_is_zero_everywhere():
    g = make_graph_fn("flat")
    rng = np.random.default_rng(0)
    x, y = rng.uniform(-0.7, 0.7, (2, 50))
    assert np.all(g.value(x, y) == 0.0)
    assert np.all(g.grad(x, y) == 0.0)
    assert g.lip == 0.0 and g.lip2 == 0.0


@pytest.mark.parametrize("a", [0.15, 0.4, 0.95])
def test_paraboloid_seminorms_and_values(a):
    g = make_graph_fn("paraboloid", a=a)
    x, y = np.array([0.3]), np.array([-0.2])
    assert g.value(x, y)[0] == pytest.approx(a * (0.3 ** 2 + 0.2 ** 2) / 2.0)
    assert g.grad(x, y)[0, 0] == pytest.approx(a * 0.3)
    # sup |grad| over the unit disk = a, attained on the rim
    assert g.lip == pytest.approx(a)
    assert g.lip2 == pytest.approx(a)


def test_sinusoid_seminorms_are_sampled_sups():
    g = make_graph_fn("sinusoid", a=0.3, omega=2.0)
    rng = np.random.default_rng(1)
    th = rng.uniform(0, 2 * np.pi, 400)
    r = np.sqrt(rng.uniform(0, 1, 400))
    gr = g.grad(r * np.cos(th), r * np.sin(th))
    assert np.max(np.hypot(gr[:, 0], gr[:, 1])) <= g.lip + 1e-12
    hs = g.hess(r * np.cos(th), r * np.sin(th))
    assert np.max(np.abs(hs)) <= g.lip2 + 1e-12


def test_steep_graph_rejected():
    with pytest.raises(ValueError):
        make_graph_fn("paraboloid", a=1.2)


def test_tabulated_matches_its_source():
    a = 0.35
    src = make_graph_fn("paraboloid", a=a)
    ax = np.linspace(-1.1, 1.1, 45)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    g = make_graph_fn("tabulated", xs=ax, ys=ax,
                      vals=src.value(X.ravel(), Y.ravel()).reshape(X.shape))
    x, y = np.array([0.31]), np.array([-0.44])
    assert g.value(x, y)[0] == pytest.approx(src.value(x, y)[0], abs=1e-6)
    assert np.allclose(g.grad(x, y), src.grad(x, y), atol=1e-5)


def test_tabulated_must_vanish_at_origin():
    ax = np.linspace(-1.1, 1.1, 25)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    with pytest.raises(ValueError):
        make_graph_fn("tabulated", xs=ax, ys=ax, vals=X * 0 + 0.2)


def test_unknown_graph_kind():
    with pytest.raises(ValueError):
        make_graph_fn("pyramid")


# ---------------------------------------------------------------------------
# graph domains

@pytest.mark.parametrize("h", [0.3, 0.125 + 1e-3, 1.0 / 7.0])
def test_bad_spacings_rejected(h):
    # h must divide 1 exactly and be at most 1/8
    with pytest.raises(ValueError):
        build_graph_domain(make_graph_fn("flat"), h)


def test_flat_domain_structure():
    dom = build_graph_domain(make_graph_fn("flat"), 0.125)
    assert set(np.unique(dom.tags)) <= {TAG_INTERIOR, TAG_GRAPH, TAG_WALL}
    # bottom plane is wall
    assert np.all(dom.tags[dom.coords[:, 2] == -1.0] == TAG_WALL)
    # graph nodes sit exactly on the surface (flat: z = 0)
    g = dom.graph_nodes
    assert len(g) > 0
    assert np.all(dom.coords[g, 2] == 0.0)
    # every column is k-ascending and contiguous in node id
    for c in range(len(dom.col_start)):
        s, n = dom.col_start[c], dom.col_len[c]
        z = dom.coords[s:s + n, 2]
        assert np.all(np.diff(z) > 0)


def test_rim_columns_are_wall():
    h = 0.125
    dom = build_graph_domain(make_graph_fn("flat"), h)
    x, y = dom.coords[:, 0], dom.coords[:, 1]
    # a column with a lateral neighbor strictly outside the closed disk
    rim = np.zeros(dom.n_nodes, bool)
    for dx, dy in ((h, 0), (-h, 0), (0, h), (0, -h)):
        rim |= np.hypot(x + dx, y + dy) > 1.0 + 1e-12
    assert np.any(rim)
    assert np.all(dom.tags[rim] == TAG_WALL)


def test_graph_nodes_snap_to_surface():
    g = make_graph_fn("paraboloid", a=0.4)
    dom = build_graph_domain(g, 0.125)
    ids = dom.graph_nodes
    z = g.value(dom.coords[ids, 0], dom.coords[ids, 1])
    assert np.max(np.abs(dom.coords[ids, 2] - z)) < 1e-14


def test_neighbor_table_is_symmetric():
    dom = build_graph_domain(make_graph_fn("flat"), 0.125)
    nbr = dom.neighbor_table()
    pairs = [(0, 1), (2, 3), (4, 5)]
    for lo, hi in pairs:
        for i in range(dom.n_nodes):
            j = nbr[i, hi]
            if j >= 0:
                assert nbr[j, lo] == i


def test_descriptor_round_trip():
    g = make_graph_fn("paraboloid", a=0.25)
    dom = build_graph_domain(g, 0.125)
    clone = load_domain(dom.descriptor())
    assert clone.n_nodes == dom.n_nodes
    assert np.array_equal(clone.coords, dom.coords)
    assert np.array_equal(clone.tags, dom.tags)


def test_domain_json_round_trip(tmp_path):
    dom = build_graph_domain(make_graph_fn("flat"), 0.125)
    p = tmp_path / "dom.json"
    dom.to_json(p)
    clone = load_domain(str(p))
    assert np.array_equal(clone.coords, dom.coords)


# ---------------------------------------------------------------------------
# boxes, cylinders

def test_box_domain_shape_and_bounds():
    dom = build_box_domain(1.0, 1.0, 0.25, hz=0.125)
    assert isinstance(dom, BoxDomain)
    assert dom.shape == (5, 5, 17)
    assert dom.n_nodes == 5 * 5 * 17
    c = dom.coords
    assert c[:, 0].min() == 0.0 and c[:, 0].max() == 1.0
    assert c[:, 2].min() == -1.0 and c[:, 2].max() == 1.0


def test_box_divisibility_enforced():
    with pytest.raises(ValueError):
        build_box_domain(1.0, 1.0, 0.3)


def test_cylinder_membership_is_a_product_of_strict_bands():
    cyl = Cylinder((0.1, 0.0, -0.4), 0.3)
    pts = np.array([[0.1, 0.0, -0.4],     # center
                    [0.1 + 0.3, 0.0, -0.4],  # on the lateral boundary: out
                    [0.1, 0.0, -0.4 + 0.3],  # on the cap: out
                    [0.3, 0.1, -0.3]])
    m = cyl.contains(pts)
    assert m.tolist() == [True, False, False, True]


def test_cylinder_clip_matches_brute_force():
    dom = build_graph_domain(make_graph_fn("flat"), 0.125)
    cyl = Cylinder((0.0, 0.0, -0.5), 0.3)
    clip = cylinder_clip(dom, cyl)
    brute = np.flatnonzero(cyl.contains(dom.coords))
    assert np.array_equal(clip["nodes"], brute)
    n = (len(clip["interior"]) + len(clip["graph"]) + len(clip["wall"]))
    assert n == len(brute)


def test_cylinder_clip_radius_floor():
    dom = build_graph_domain(make_graph_fn("flat"), 0.125)
    with pytest.raises(ValueError):
        cylinder_clip(dom, Cylinder((0.0, 0.0, -0.5), 0.2))


# ---------------------------------------------------------------------------
# surface frames

def test_frame_normal_and_tangents_paraboloid():
    a = 0.4
    g = make_graph_fn("paraboloid", a=a)
    pts = np.array([[0.5, -0.3]])
    fr = surface_frame(g, pts)
    p, q = a * 0.5, a * -0.3
    w = np.sqrt(1 + p * p + q * q)
    assert np.allclose(fr.nu[0], np.array([-p, -q, 1.0]) / w)
    # orthonormal frame
    assert fr.nu[0] @ fr.t1[0] == pytest.approx(0.0, abs=1e-14)
    assert fr.nu[0] @ fr.t2[0] == pytest.approx(0.0, abs=1e-14)
    assert np.linalg.norm(fr.t1[0]) == pytest.approx(1.0)
    assert np.linalg.norm(fr.t2[0]) == pytest.approx(1.0)


def test_shape_operator_matches_normal_finite_differences():
    g = make_graph_fn("sinusoid", a=0.3, omega=1.7)
    rng = np.random.default_rng(7)
    pts = rng.uniform(-0.5, 0.5, (20, 2))
    fr = surface_frame(g, pts)
    eps = 1e-6
    for j in range(2):
        step = np.zeros(2)
        step[j] = eps
        dnu = (surface_frame(g, pts + step).nu
               - surface_frame(g, pts - step).nu) / (2 * eps)
        assert np.max(np.abs(dnu - fr.shape_op[:, j, :])) < 1e-7


def test_shape_operator_bound_three_lip2():
    # |d nu / d x| <= 3 lip2 entrywise, the bound every suite leans on
    for kind, kw in (("paraboloid", {"a": 0.8}),
                     ("sinusoid", {"a": 0.4, "omega": 2.2})):
        g = make_graph_fn(kind, **kw)
        rng = np.random.default_rng(11)
        th = rng.uniform(0, 2 * np.pi, 300)
        r = np.sqrt(rng.uniform(0, 1, 300)) * 0.95
        fr = surface_frame(g, np.stack([r * np.cos(th), r * np.sin(th)], -1))
        assert np.max(np.abs(fr.shape_op)) <= 3.0 * g.lip2 + 1e-12
