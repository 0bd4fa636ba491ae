"""Explicit fields: steep layers, vortices, rotations, projections, ledgers."""
from __future__ import annotations

import numpy as np
import pytest

from k13lab.fields import SphereField
from k13lab.geometry import build_box_domain, build_graph_domain, make_graph_fn
from k13lab.constructions import (
    BlowupParams, ProjectionQuery, closed_form_blowup_energy, equator_pattern,
    equator_rotation_trace, genus_boundary_field, oldano_barbero_field,
    projection_dnu, projection_dy, projection_dz, rotation_field,
    tangent_line_projection, tangential_trace, tilt_profile, vortex_field,
    vortex_index, vortex_trace, w1p_vortex_norm,
)

RNG = np.random.default_rng(20260822)


# ---------------------------------------------------------------------------
# steep boundary layer

def test_blowup_params_validation():
    BlowupParams(rho0=np.pi / 4, eps=0.2)
    with pytest.raises(ValueError):
        BlowupParams(rho0=0.5, eps=1.5)
    with pytest.raises(ValueError):
        # eps must stay below sqrt(d)
        BlowupParams(rho0=0.5, eps=0.85, d=0.64)
    with pytest.raises(ValueError):
        BlowupParams(rho0=0.5, eps=0.1, l=0.0)


def test_tilt_profile_branches():
    rho0, eps, d = np.pi / 4, 0.1, 1.0
    assert tilt_profile(0.0, rho0, eps, d) == pytest.approx(rho0 + eps, abs=1e-15)
    assert tilt_profile(d, rho0, eps, d) == pytest.approx(rho0, abs=1e-14)
    assert tilt_profile(-d, rho0, eps, d) == pytest.approx(rho0, abs=1e-14)
    # both branches meet at the layer edge
    zc = d - eps ** 2
    assert tilt_profile(zc - 1e-12, rho0, eps, d) == pytest.approx(
        tilt_profile(zc + 1e-12, rho0, eps, d), abs=1e-9)
    # even in z
    zs = np.linspace(-d, d, 41)
    assert np.allclose(tilt_profile(zs, rho0, eps, d),
                       tilt_profile(-zs, rho0, eps, d), atol=1e-15)


def test_tilt_profile_layer_slope():
    rho0, eps, d = 0.6, 0.1, 1.0
    dz = 1e-7
    slope = (tilt_profile(d, rho0, eps, d)
             - tilt_profile(d - dz, rho0, eps, d)) / dz
    assert slope == pytest.approx(-2.0 / eps, rel=1e-5)


def test_tilt_profile_rejects_out_of_range():
    with pytest.raises(ValueError):
        tilt_profile(1.5, 0.5, 0.1, 1.0)


def test_layer_field_values_and_validation():
    bp = BlowupParams(rho0=np.pi / 4, eps=0.1)
    dom = build_box_domain(1.0, 1.0, 0.25, hz=bp.eps ** 2 / 4)
    f = oldano_barbero_field(dom, bp)
    nrm = np.linalg.norm(f.values, axis=1)
    assert np.max(np.abs(nrm - 1.0)) < 1e-14
    assert np.max(np.abs(f.values[:, 1])) == 0.0
    mid = np.flatnonzero(np.abs(dom.coords[:, 2]) < 1e-12)
    assert len(mid) > 0
    want = [np.cos(np.pi / 4 + 0.1), 0.0, np.sin(np.pi / 4 + 0.1)]
    assert np.allclose(f.values[mid], want, atol=1e-14)
    coarse = build_box_domain(1.0, 1.0, 0.25, hz=0.01)
    with pytest.raises(ValueError):
        oldano_barbero_field(coarse, bp)  # hz > eps^2/4 cannot resolve the layer


@pytest.mark.parametrize("eps,total", [(0.2, -26.0 / 3.0), (0.1, -56.0 / 3.0),
                                       (0.05, -116.0 / 3.0)])
def test_closed_form_energy_frozen_values(eps, total):
    bp = BlowupParams(rho0=np.pi / 4, eps=eps)
    assert closed_form_blowup_energy(bp, 1.0, 1.0) == pytest.approx(total, rel=1e-13)


def test_closed_form_energy_special_cases():
    bp = BlowupParams(rho0=np.pi / 4, eps=0.1, l=1.5)
    # no surface coupling: 4 K l^2 / 3, independent of eps
    assert closed_form_blowup_energy(bp, 2.0, 0.0) == pytest.approx(
        4.0 * 2.0 * 1.5 ** 2 / 3.0, rel=1e-13)
    a = closed_form_blowup_energy(BlowupParams(rho0=np.pi / 2, eps=0.2), 1.0, 1.0)
    b = closed_form_blowup_energy(BlowupParams(rho0=np.pi / 2, eps=0.05), 1.0, 1.0)
    assert a == pytest.approx(b, abs=1e-14)
    assert a == pytest.approx(4.0 / 3.0, rel=1e-13)


# ---------------------------------------------------------------------------
# planar vortices

def test_vortex_field_values():
    assert np.allclose(vortex_field([[1.0, 0.0]], "plus"), [[0.0, 1.0]])
    assert np.allclose(vortex_field([[0.0, 1.0]], "plus"), [[-1.0, 0.0]])
    assert np.allclose(vortex_field([[1.0, 0.0]], "tilde"), [[0.0, -1.0]])
    assert np.allclose(vortex_field([[0.0, 1.0]], "saddle"), [[0.0, -1.0]])
    pts = RNG.normal(size=(64, 2)) + 3.0
    for kind in ("plus", "tilde", "saddle"):
        v = vortex_field(pts, kind)
        assert np.allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-14)


def test_vortex_field_integer_aliases():
    pts = RNG.normal(size=(16, 2)) + 2.0
    assert np.array_equal(vortex_field(pts, 1), vortex_field(pts, "plus"))
    assert np.array_equal(vortex_field(pts, -1), vortex_field(pts, "tilde"))


def test_vortex_field_errors():
    with pytest.raises(ValueError):
        vortex_field([[0.0, 0.0]], "plus")
    with pytest.raises(ValueError):
        vortex_field([[1.0, 0.0]], "spiral")


def _loop(n, r=0.5):
    th = 2.0 * np.pi * np.arange(n) / n
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


def test_winding_of_each_pattern():
    pts = _loop(64)
    assert vortex_index(vortex_field(pts, "plus")) == 1
    # the reflected pattern still winds +1 in the plane; it represents -1
    # only through an orientation-reversing chart
    assert vortex_index(vortex_field(pts, "tilde")) == 1
    assert vortex_index(vortex_field(pts, "tilde"), chart_sign=-1) == -1
    assert vortex_index(vortex_field(pts, "saddle")) == -1
    assert vortex_index(np.tile([0.3, 0.7], (32, 1))) == 0


def test_winding_resolution_guards():
    th = 2.0 * np.pi * np.arange(64) / 64
    quad = np.stack([np.cos(4 * th), np.sin(4 * th)], axis=-1)
    assert vortex_index(quad) == 4
    with pytest.raises(ValueError, match="under-resolved"):
        # 8 samples of a winding-4 loop step by exactly pi
        vortex_index(quad[::8])
    with pytest.raises(ValueError, match="8"):
        vortex_index(_loop(6))


def test_vortex_gradient_norms():
    # radial integral of r^{1-p}: finite below p=2, log-divergent at p=2
    rich = w1p_vortex_norm(1.5, 1.0 / 64.0, richardson=True)
    assert rich == pytest.approx(4.0 * np.pi, rel=0.03)
    assert w1p_vortex_norm(1.0, 1.0 / 128.0) == pytest.approx(2.0 * np.pi, rel=0.03)
    h = 1.0 / 64.0
    gap = w1p_vortex_norm(2.0, h / 2) - w1p_vortex_norm(2.0, h)
    assert gap == pytest.approx(2.0 * np.pi * np.log(2.0), rel=0.10)


def test_vortex_norm_rejects_bad_exponents():
    with pytest.raises(ValueError):
        w1p_vortex_norm(2.5, 0.01)
    with pytest.raises(ValueError):
        w1p_vortex_norm(2.0, 0.01, richardson=True)


# ---------------------------------------------------------------------------
# rotation to the equator plane

def test_rotation_is_identity_on_flat():
    g = make_graph_fn("flat")
    pts = RNG.uniform(-0.9, 0.9, size=(40, 2))
    rf = rotation_field(g, pts)
    assert np.array_equal(rf.Q, np.broadcast_to(np.eye(3), (40, 3, 3)))
    assert np.all(rf.cos_tilt == 1.0)
    assert np.all(rf.sin_tilt == 0.0)


def test_rotation_sends_normal_to_vertical():
    g = make_graph_fn("paraboloid", a=1.0)
    rf = rotation_field(g, [[1.0, 0.0]])   # slope (1, 0) here
    nu = np.array([-1.0, 0.0, 1.0]) / np.sqrt(2.0)
    assert np.linalg.norm(rf.Q[0] @ nu - [0.0, 0.0, 1.0]) < 1e-12
    assert rf.cos_tilt[0] == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-14)


def test_rotation_orthogonality_and_tilt_cache():
    g = make_graph_fn("sinusoid", a=0.4, omega=2.2)
    pts = RNG.uniform(-0.9, 0.9, size=(80, 2))
    rf = rotation_field(g, pts)
    eye = np.eye(3)
    for Q in rf.Q:
        assert np.max(np.abs(Q.T @ Q - eye)) < 1e-12
        assert np.linalg.det(Q) == pytest.approx(1.0, abs=1e-12)
    gg = g.grad(pts[:, 0], pts[:, 1])
    s2 = np.sum(gg * gg, axis=1)
    assert np.allclose(rf.cos_tilt, 1.0 / np.sqrt(1.0 + s2), atol=1e-14)
    assert np.allclose(rf.sin_tilt ** 2 + rf.cos_tilt ** 2
                       - s2 * rf.cos_tilt ** 2, 1.0 - s2 / (1.0 + s2),
                       atol=1e-12)


# ---------------------------------------------------------------------------
# tangential traces

def test_equator_trace_reduces_to_pattern_on_flat():
    dom = build_graph_domain(make_graph_fn("flat"), 0.125)
    f = equator_rotation_trace(dom, 1.3)
    want = equator_pattern(dom.coords[:, :2], 1.3)
    assert np.allclose(f.values, want, atol=1e-15)


def test_tangential_trace_is_exactly_tangent():
    dom = build_graph_domain(make_graph_fn("sinusoid", a=0.3, omega=2.0), 0.125)

    def planar(pts):
        th = 0.7 * pts[:, 0] - 0.2 * pts[:, 1]
        return np.stack([np.cos(th), np.sin(th), np.zeros(len(pts))], axis=-1)

    vals = tangential_trace(dom, planar)
    g = dom.graph_nodes
    nu = dom.graph_frame.nu
    assert np.max(np.abs(np.sum(vals[g] * nu, axis=1))) < 1e-14
    assert np.allclose(np.linalg.norm(vals, axis=1), 1.0, atol=1e-14)


def test_vortex_trace_windings_and_tangency():
    dom = build_graph_domain(make_graph_fn("flat"), 0.0625)
    f = vortex_trace(dom, [(0.4, 0.0), (-0.4, 0.0)], [1, 1])
    g = dom.graph_nodes
    nu = dom.graph_frame.nu
    assert np.max(np.abs(np.sum(f.values[g] * nu, axis=1))) < 1e-13
    # nearest-node sampling around each center recovers the winding
    plan = dom.coords[g, :2]
    for cx in (0.4, -0.4):
        th = 2.0 * np.pi * np.arange(48) / 48
        ring = np.stack([cx + 0.22 * np.cos(th), 0.22 * np.sin(th)], axis=-1)
        ids = [int(np.argmin(np.hypot(plan[:, 0] - p[0], plan[:, 1] - p[1])))
               for p in ring]
        assert vortex_index(f.values[g][ids][:, :2]) == 1


def test_vortex_trace_rejects_center_on_column():
    dom = build_graph_domain(make_graph_fn("flat"), 0.125)
    with pytest.raises(ValueError, match="collides"):
        vortex_trace(dom, [(0.25, 0.0)], [1])


# ---------------------------------------------------------------------------
# tangent-line projection

def test_projection_hand_values():
    y = np.array([1.0, 0.0, 0.0])
    nu = np.array([0.0, 0.0, 1.0])
    assert np.allclose(tangent_line_projection(y, nu, [1.0, 2.0, 3.0]),
                       [1.0, 2.0, 0.0], atol=1e-15)
    # z orthogonal to the line direction contributes nothing
    assert np.allclose(tangent_line_projection(y, nu, [5.0, 0.0, -2.0]),
                       y, atol=1e-15)
    m = np.cross(y, nu)   # unit here
    assert np.allclose(tangent_line_projection(y, nu, m), y + m, atol=1e-15)


def test_projection_query_equivalence_and_validation():
    q = ProjectionQuery(x=np.zeros(3), y=np.array([1.0, 0.2, 0.0]),
                        nu=np.array([0.0, 0.1, 1.0]), z=np.array([0.3, -1.0, 2.0]))
    assert np.array_equal(tangent_line_projection(q),
                          tangent_line_projection(q.y, q.nu, q.z))
    with pytest.raises(ValueError, match="inadmissible"):
        ProjectionQuery(x=np.zeros(3), y=np.array([0.0, 0.0, 1.0]),
                        nu=np.array([0.0, 0.0, 1.0]), z=np.ones(3))
    with pytest.raises(ValueError):
        tangent_line_projection([0.0, 0.0, 2.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0])


def test_projection_derivatives_match_finite_differences():
    y = np.array([0.9, -0.3, 0.1])
    nu = np.array([0.1, 0.2, 0.97])
    z = np.array([0.4, 1.1, -0.6])
    e = 1e-6
    Pz = projection_dz(y, nu)
    for j in range(3):
        dz = np.zeros(3); dz[j] = e
        fd = (tangent_line_projection(y, nu, z + dz)
              - tangent_line_projection(y, nu, z - dz)) / (2 * e)
        assert np.allclose(Pz[:, j], fd, atol=1e-8)
        fdy = (tangent_line_projection(y + dz, nu, z)
               - tangent_line_projection(y - dz, nu, z)) / (2 * e)
        assert np.allclose(projection_dy(y, nu, z, j), fdy, atol=1e-7)
    dn = np.array([0.02, -0.05, 0.0])
    fdn = (tangent_line_projection(y, nu + e * dn, z)
           - tangent_line_projection(y, nu - e * dn, z)) / (2 * e)
    assert np.allclose(projection_dnu(y, nu, z, dn), fdn, atol=1e-7)


# ---------------------------------------------------------------------------
# closed-surface tangent data

@pytest.mark.parametrize("k,chi,nvort", [(0, 2, 2), (1, 0, 0), (2, -2, 6)])
def test_genus_ledger_sums_to_euler_characteristic(k, chi, nvort):
    data = genus_boundary_field(k, n_u=48, n_v=24)
    assert data.chi == chi
    assert data.ledger_sum() == chi
    assert len(data.vortices) == nvort
    assert data.tangency_violation() <= 1e-10
    assert np.allclose(np.linalg.norm(data.values, axis=1), 1.0, atol=1e-12)


def test_sphere_vortices_sit_at_poles():
    data = genus_boundary_field(0, n_u=48, n_v=24)
    zs = sorted(float(v.center[2]) for v in data.vortices)
    assert zs == pytest.approx([-1.0, 1.0], abs=1e-12)
    assert all(v.winding == 1 for v in data.vortices)


def test_genus_boundary_field_rejects_unsupported():
    with pytest.raises(ValueError):
        genus_boundary_field(3)


def test_boundary_data_csv_round_trip(tmp_path):
    data = genus_boundary_field(1, n_u=24, n_v=12)
    p = tmp_path / "g1.csv"
    data.to_csv(p)
    back = np.loadtxt(p, delimiter=",", skiprows=1)
    assert back.shape == (len(data.positions), 10)
    assert np.array_equal(back[:, 1:4], data.positions)
    assert np.array_equal(back[:, 4:7], data.normals)
    assert np.array_equal(back[:, 7:10], data.values)
