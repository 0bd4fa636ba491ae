"""Projected descent loop, its trace bookkeeping, and critical-point checks."""
from __future__ import annotations

import numpy as np
import pytest

from k13lab.fields import EnergyParams, SphereField, make_field
from k13lab.geometry import (
    TAG_INTERIOR, build_box_domain, build_graph_domain, make_graph_fn,
)
from k13lab.energy import reduced_energy, reduced_energy_gradient
from k13lab.constructions import equator_pattern, equator_rotation_trace
from k13lab.optimizer import (
    MinimizeOptions, StallError, boundary_alignment, euler_lagrange_residual,
    gradient_check, minimize_reduced_energy,
)


@pytest.fixture(scope="module")
def flat_dom():
    return build_graph_domain(make_graph_fn("flat"), 0.125)


def test_options_validation():
    MinimizeOptions(step0=0.5)
    for bad in (dict(backtrack=0.0), dict(backtrack=1.0), dict(step0=0.0),
                dict(armijo_c=0.0), dict(boundary_mode="mixed")):
        with pytest.raises(ValueError):
            MinimizeOptions(**bad)


def test_descent_is_monotone_with_consistent_trace(flat_dom):
    f = equator_rotation_trace(flat_dom, 1.0)
    p = EnergyParams(K=1.0, K13=0.0)
    out, tr = minimize_reduced_energy(f, p, MinimizeOptions(max_iters=40))
    n = tr.iterations
    assert n > 0
    assert len(tr.energies) == n + 1
    assert len(tr.grad_norms) == n + 1
    assert len(tr.steps) == n == len(tr.backtracks)
    assert len(tr.unit_violations) == n + 1 == len(tr.tangency_violations)
    assert np.all(np.diff(tr.energies) < 0)
    assert np.max(tr.unit_violations) < 1e-12
    assert np.max(tr.tangency_violations) < 1e-12
    assert tr.energies[-1] == pytest.approx(reduced_energy(out, p).total, abs=1e-14)


def test_tangential_mode_freezes_wall_only(flat_dom):
    f = equator_rotation_trace(flat_dom, 1.0)
    p = EnergyParams(K=1.0, K13=0.0)
    out, tr = minimize_reduced_energy(f, p, MinimizeOptions(max_iters=10))
    wall = np.flatnonzero(flat_dom.tags != TAG_INTERIOR)
    wall = np.setdiff1d(wall, flat_dom.graph_nodes)
    assert np.array_equal(out.values[wall], f.values[wall])
    moved = out.values[flat_dom.graph_nodes] - f.values[flat_dom.graph_nodes]
    assert np.max(np.abs(moved)) > 1e-6   # the trace itself may slide


def test_fixed_trace_mode_freezes_every_boundary_row():
    dom = build_graph_domain(make_graph_fn("sinusoid", a=0.3, omega=2.0), 0.125)
    f = equator_rotation_trace(dom, 1.0)
    p = EnergyParams(K=1.0, K13=0.0)
    opts = MinimizeOptions(max_iters=10, boundary_mode="fixed-trace")
    out, _ = minimize_reduced_energy(f, p, opts)
    bd = np.flatnonzero(dom.tags != TAG_INTERIOR)
    assert np.array_equal(out.values[bd], f.values[bd])
    inn = np.flatnonzero(dom.tags == TAG_INTERIOR)
    assert not np.array_equal(out.values[inn], f.values[inn])


def test_looser_tolerance_never_runs_longer(flat_dom):
    f = equator_rotation_trace(flat_dom, 1.0)
    p = EnergyParams(K=1.0, K13=0.0)
    _, loose = minimize_reduced_energy(f, p, MinimizeOptions(max_iters=200,
                                                             grad_tol=5e-2))
    _, tight = minimize_reduced_energy(f, p, MinimizeOptions(max_iters=200,
                                                             grad_tol=1e-3))
    assert loose.iterations <= tight.iterations
    assert loose.converged and tight.converged
    assert loose.reason == "gradient below tolerance"
    assert tight.grad_norms[-1] <= 1e-3


def test_line_search_matches_small_step_descent_oracle(flat_dom):
    # a fixed tiny-step projected descent must not land meaningfully lower
    f = equator_rotation_trace(flat_dom, 1.0)
    p = EnergyParams(K=1.0, K13=0.0)
    out, tr = minimize_reduced_energy(f, p, MinimizeOptions(max_iters=60))

    dom = flat_dom
    wall = np.setdiff1d(np.flatnonzero(dom.tags != TAG_INTERIOR),
                        dom.graph_nodes)
    u = f.values.copy()
    g_ids = dom.graph_nodes
    nu = dom.graph_frame.nu
    for _ in range(2000):
        g = reduced_energy_gradient(SphereField(dom, u), p)
        g[wall] = 0.0
        u = u - 0.02 * g
        u[g_ids] -= nu * np.sum(u[g_ids] * nu, axis=1, keepdims=True)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        u[wall] = f.values[wall]
    e_oracle = reduced_energy(SphereField(dom, u), p).total
    e0 = tr.energies[0]
    assert tr.energies[-1] <= e_oracle + 0.02 * (e0 - e_oracle)


def test_trace_grad_norms_cover_final_iterate(flat_dom):
    f = equator_rotation_trace(flat_dom, 1.0)
    p = EnergyParams(K=1.0, K13=0.0)
    _, tr = minimize_reduced_energy(f, p, MinimizeOptions(max_iters=3))
    assert not tr.converged
    assert tr.reason == "max iterations reached"
    assert tr.iterations == 3
    assert len(tr.grad_norms) == len(tr.energies) == 4


def test_stall_raises_with_partial_trace(flat_dom):
    f = equator_rotation_trace(flat_dom, 1.0)
    p = EnergyParams(K=1.0, K13=0.0)
    opts = MinimizeOptions(step0=1e30, max_backtracks=0)
    with pytest.raises(StallError) as exc:
        minimize_reduced_energy(f, p, opts)
    assert exc.value.trace.reason == "stalled"
    assert len(exc.value.trace.energies) == 1


def test_gradient_check_flat_and_curved(flat_dom):
    f = equator_rotation_trace(flat_dom, 1.0)
    assert gradient_check(f, EnergyParams(K=1.0, K13=0.0)) <= 1e-6
    dom = build_graph_domain(make_graph_fn("paraboloid", a=0.4), 0.125)
    g = equator_rotation_trace(dom, 1.0)
    assert gradient_check(g, EnergyParams(K=1.0, K13=1.0)) <= 1e-5


def test_gradient_check_validation(flat_dom):
    f = equator_rotation_trace(flat_dom, 1.0)
    p = EnergyParams(K=1.0)
    with pytest.raises(ValueError):
        gradient_check(f, p, step=0.0)
    with pytest.raises(ValueError):
        gradient_check(f, p, boundary_mode="loose")


def test_residual_shrinks_quadratically_on_graph():
    reps = []
    for h in (0.125, 0.0625):
        dom = build_graph_domain(make_graph_fn("flat"), h)
        reps.append(euler_lagrange_residual(equator_rotation_trace(dom, 1.0)))
    ratio = reps[0].max_norm / reps[1].max_norm
    assert 3.4 <= ratio <= 4.6
    # the rotating pattern solves the continuum equation; leading error alpha^4 h^2 / 4
    assert reps[0].max_norm == pytest.approx(0.125 ** 2 / 4.0, rel=0.01)
    assert reps[0].spacing == 0.125
    assert reps[0].l2_norm > 0
    dom = build_graph_domain(make_graph_fn("flat"), 0.125)
    assert np.all(dom.tags[reps[0].node_ids] == TAG_INTERIOR)


def test_residual_shrinks_quadratically_on_box():
    reps = []
    for hx in (0.25, 0.125):
        dom = build_box_domain(1.0, 0.5, hx, hz=hx / 2)
        f = make_field(dom, lambda c: equator_pattern(c[:, :2], 1.0))
        reps.append(euler_lagrange_residual(f))
    ratio = reps[0].max_norm / reps[1].max_norm
    assert 3.4 <= ratio <= 4.6


def test_boundary_alignment_extremes(flat_dom):
    tang = equator_rotation_trace(flat_dom, 1.0)
    a = boundary_alignment(tang)
    assert a.shape == (len(flat_dom.graph_nodes),)
    assert np.max(a) < 1e-14
    tilt = np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)
    f = make_field(flat_dom, lambda c: np.tile(tilt, (len(c), 1)))
    b = boundary_alignment(f)
    assert np.allclose(b, 1.0 - 1.0 / np.sqrt(2.0), atol=1e-14)
    box = build_box_domain(1.0, 0.5, 0.25, hz=0.125)
    bf = make_field(box, lambda c: np.tile([0.0, 0.0, 1.0], (len(c), 1)))
    assert boundary_alignment(bf).size == 0


def test_box_minimization_requires_fixed_trace():
    box = build_box_domain(1.0, 0.5, 0.25, hz=0.125)
    f = make_field(box, lambda c: equator_pattern(c[:, :2], 1.0))
    p = EnergyParams(K=1.0, K13=0.0)
    with pytest.raises(ValueError):
        minimize_reduced_energy(f, p, MinimizeOptions(max_iters=5))
    out, tr = minimize_reduced_energy(
        f, p, MinimizeOptions(max_iters=5, boundary_mode="fixed-trace"))
    assert np.all(np.diff(tr.energies) < 0)
