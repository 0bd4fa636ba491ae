"""Verification suites for the geometric inequalities, plus regularity scans.

Each suite samples an inequality over random admissible inputs and reduces to
a BoundReport: theoretical cap, measured extremum, margin, and the worst
sample seen.  A passing report has margin >= 0; these inequalities are proven
facts, so a negative margin is a hard failure somewhere upstream.

The regularity side measures how the local Dirichlet energy of a field decays
around a center (cylinder clips at dyadic radii) and flags columns whose
renormalized local energy stays above a calibrated threshold at every scale.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .constructions import projection_dnu, projection_dy, projection_dz, \
    rotation_field, tangent_line_projection
from .energy import DecayProfile, decay_fit, dirichlet_energy, _cell_centers
from .fields import SphereField, boundary_mean, make_field
from .geometry import GraphDomain, GraphFn, build_graph_domain, \
    make_graph_fn, surface_frame

_EPS = np.finfo(float).eps


@dataclass
class BoundReport:
    name: str
    cap: float            # largest theoretical cap among the samples
    measured: float       # largest measured value among the samples
    margin: float         # smallest per-sample (cap - measured)
    samples: int
    worst: dict = dc_field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return self.margin >= 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "cap": self.cap, "measured": self.measured,
                "margin": self.margin, "samples": self.samples,
                "satisfied": bool(self.satisfied), "worst": self.worst}


def _pack_bound(vals: np.ndarray, caps: np.ndarray, describe) -> tuple:
    """(max measured, max cap, min margin, count, worst sample) for one batch."""
    margins = caps - vals
    k = int(np.argmin(margins))
    return (float(np.max(vals)), float(np.max(caps)), float(margins[k]),
            len(vals), describe(k))


def _merge_bound(name: str, parts: list) -> BoundReport:
    k = min(range(len(parts)), key=lambda i: parts[i][2])
    return BoundReport(name=name,
                       cap=max(p[1] for p in parts),
                       measured=max(p[0] for p in parts),
                       margin=parts[k][2],
                       samples=sum(p[3] for p in parts),
                       worst=parts[k][4])


def _run_jobs(worker, jobs, pool=None) -> list:
    """Map jobs to results in submission order, optionally on an executor."""
    if pool is None:
        return [worker(*j) for j in jobs]
    futs = [pool.submit(worker, *j) for j in jobs]
    return [f.result() for f in futs]


# ---------------------------------------------------------------------------
# graph sampling

def random_graph_suite(n: int, seed: int = 0, lip_max: float = 1.0) -> list:
    """Random admissible graphs: alternating paraboloids and sinusoids.

    Every returned graph has sup |grad phi| <= lip_max (paraboloids by
    construction, sinusoids by rescaling against the sampled seminorm).
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        if i % 2 == 0:
            a = rng.uniform(0.05, 0.95) * lip_max
            out.append(make_graph_fn("paraboloid", a=a))
        else:
            om = rng.uniform(1.0, 5.0)
            trial = make_graph_fn("sinusoid", a=1.0 / om, omega=om)
            scale = rng.uniform(0.3, 0.95) * lip_max / trial.lip
            out.append(make_graph_fn("sinusoid", a=scale / om, omega=om))
    return out


def _disk_points(rng, n: int, rmax: float = 0.92) -> np.ndarray:
    r = rmax * np.sqrt(rng.uniform(0.0, 1.0, n))
    th = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


# ---------------------------------------------------------------------------
# rotation-map bound suite

def _opnorm(mats: np.ndarray) -> np.ndarray:
    return np.linalg.svd(mats, compute_uv=False)[..., 0]


_ROTATION_BOUNDS = (("qi", "rotation-vs-identity"),
                    ("dq", "rotation-derivative"),
                    ("qsup", "rotation-entry-sup"),
                    ("shape", "normal-derivative"))


def _rotation_worker(graph: GraphFn, gi: int, n: int, seed: int,
                     fd_step: float) -> dict:
    rng = np.random.default_rng((seed, gi))
    pts = _disk_points(rng, n)
    Q = rotation_field(graph, pts).Q

    def describe(k):
        return {"graph": graph.descriptor(), "point": pts[k].tolist()}

    out = {}
    v = _opnorm(Q - np.eye(3))
    out["qi"] = _pack_bound(v, np.full_like(v, 9.0 * graph.lip), describe)

    dq = np.zeros(len(pts))
    for j in range(2):
        step = np.zeros(2); step[j] = fd_step
        d = (rotation_field(graph, pts + step).Q
             - rotation_field(graph, pts - step).Q) / (2.0 * fd_step)
        dq = np.maximum(dq, np.max(np.abs(d), axis=(1, 2)))
    out["dq"] = _pack_bound(dq, np.full_like(dq, 6.0 * graph.lip2), describe)

    qs = np.max(np.abs(Q), axis=(1, 2))
    out["qsup"] = _pack_bound(qs, np.ones_like(qs), describe)

    sh = np.max(np.abs(surface_frame(graph, pts).shape_op), axis=(1, 2))
    out["shape"] = _pack_bound(sh, np.full_like(sh, 3.0 * graph.lip2), describe)
    return out


def verify_rotation_bounds(graphs, samples_per_graph: int = 1000,
                           seed: int = 0, fd_step: float = 1e-6,
                           pool=None) -> list:
    """Four sampled inequalities for the normal-straightening rotation.

    Per sample x on each graph: |Q(x)v - v| <= 9 lip (operator norm of Q - I),
    entrywise |dQ/dx_j| <= 6 lip2 (centered differences), sup |Q_ij| <= 1,
    and entrywise |d nu / dx| <= 3 lip2 (the analytic normal-derivative
    matrix).  Returns one BoundReport per inequality.  Graphs are evaluated
    independently on ``pool`` when given; merge order is fixed, so the result
    is identical with any worker count.
    """
    jobs = [(g, i, samples_per_graph, seed, fd_step)
            for i, g in enumerate(graphs)]
    parts = _run_jobs(_rotation_worker, jobs, pool)
    return [_merge_bound(name, [p[key] for p in parts])
            for key, name in _ROTATION_BOUNDS]


# ---------------------------------------------------------------------------
# tangent-line projection bound suite

def _admissible_triples(rng, n: int, floor: float = 0.1):
    """Random (y, nu, z) with |y x nu| >= floor, |z| <= 2."""
    ys = np.empty((n, 3)); nus = np.empty((n, 3)); zs = np.empty((n, 3))
    made = 0
    while made < n:
        nu = rng.standard_normal(3)
        nu /= np.linalg.norm(nu)
        y = rng.uniform(0.2, 2.0) * _unit(rng.standard_normal(3))
        if np.linalg.norm(np.cross(y, nu)) < floor:
            continue
        ys[made] = y; nus[made] = nu
        zs[made] = rng.uniform(-2.0, 2.0, 3)
        made += 1
    return ys, nus, zs


def _unit(v):
    return v / np.linalg.norm(v)


def _proj_op(y, nu):
    m = np.cross(y, nu)
    return np.outer(m, m) / np.dot(m, m)


def _fd_error(y, nu, z, step: float) -> float:
    """Worst relative mismatch of the three analytic derivative families."""
    worst = 0.0

    def rel(an, fd):
        return np.max(np.abs(an - fd)) / max(1.0, float(np.max(np.abs(an))))

    e = np.eye(3)
    dz_an = projection_dz(y, nu)
    for j in range(3):
        fd = (tangent_line_projection(y, nu, z + step * e[j])
              - tangent_line_projection(y, nu, z - step * e[j])) / (2 * step)
        worst = max(worst, rel(dz_an[:, j], fd))
        fd = (tangent_line_projection(y + step * e[j], nu, z)
              - tangent_line_projection(y - step * e[j], nu, z)) / (2 * step)
        worst = max(worst, rel(projection_dy(y, nu, z, j), fd))
        fd = (tangent_line_projection(y, nu + step * e[j], z)
              - tangent_line_projection(y, nu - step * e[j], z)) / (2 * step)
        worst = max(worst, rel(projection_dnu(y, nu, z, e[j]), fd))
    return worst


_PROJ_CHUNK = 500


def _projection_fd_worker(chunk: int, count: int, seed: int,
                          fd_step: float) -> dict:
    """Derivative-vs-FD errors and projector norms for one sample chunk."""
    rng = np.random.default_rng((seed, 1, chunk))
    ys, nus, zs = _admissible_triples(rng, count)

    errs = np.array([_fd_error(ys[i], nus[i], zs[i], fd_step)
                     for i in range(count)])

    def describe(k):
        return {"y": ys[k].tolist(), "nu": nus[k].tolist(), "z": zs[k].tolist()}

    out = {"fd": _pack_bound(errs, np.full_like(errs, 1e-6), describe)}

    sv = _opnorm(np.stack([_proj_op(ys[i], nus[i]) for i in range(count)]))
    # svd carries +-ulp noise around the exact unit norm; snap readings within
    # 8 ulps of the cap back onto it (the operator itself cannot exceed 1)
    snap = (sv > 1.0) & (sv <= 1.0 + 8 * _EPS)
    sv[snap] = 1.0
    n_snap = int(np.count_nonzero(snap))

    def describe_dz(k):
        return {"y": ys[k].tolist(), "nu": nus[k].tolist(),
                "ulp_snapped": n_snap}

    out["dz"] = _pack_bound(sv, np.ones_like(sv), describe_dz)
    return out


def _projection_crossy_worker(chunk: int, count: int, seed: int) -> dict:
    """Projector-difference bound on one chunk of random (y1, y2, nu)."""
    rng = np.random.default_rng((seed, 2, chunk))
    nu = np.empty((count, 3)); y1 = np.empty((count, 3)); y2 = np.empty((count, 3))
    made = 0
    while made < count:
        v = rng.standard_normal(3)
        v /= np.linalg.norm(v)
        perp = rng.standard_normal(3)
        perp -= v * np.dot(perp, v)
        if np.linalg.norm(perp) < 1e-8:
            continue
        a = rng.uniform(1.05, 1.3) * _unit(perp)   # |a x v| = |a| >= 1.05
        b = a + rng.uniform(0.0, 0.6) * _unit(rng.standard_normal(3))
        if np.linalg.norm(np.cross(b, v)) < 0.1:
            continue
        nu[made], y1[made], y2[made] = v, a, b
        made += 1
    dv = _opnorm(np.stack([_proj_op(y1[i], nu[i]) - _proj_op(y2[i], nu[i])
                           for i in range(count)]))
    dc = np.linalg.norm(y1 - y2, axis=1)

    def describe(k):
        return {"y1": y1[k].tolist(), "y2": y2[k].tolist(), "nu": nu[k].tolist()}

    return {"crossy": _pack_bound(dv, dc, describe)}


def _projection_quotient(seed: int, count: int, delta: float) -> float:
    """Worst projector-difference quotient across nu perturbations of size delta."""
    rng = np.random.default_rng((seed, 3))
    ys, nus, _ = _admissible_triples(rng, count)
    worst = 0.0
    for i in range(count):
        n2 = _unit(nus[i] + delta * rng.standard_normal(3))
        if np.linalg.norm(np.cross(ys[i], n2)) < 0.1:
            continue
        d = np.linalg.norm(nus[i] - n2)
        if d < 1e-12:
            continue
        q = _opnorm(_proj_op(ys[i], nus[i]) - _proj_op(ys[i], n2)) / d
        worst = max(worst, float(q))
    return worst


def _chunks(total: int, size: int) -> list:
    return [(i, min(size, total - i * size))
            for i in range((total + size - 1) // size)]


def verify_projection_bounds(n_fd: int = 1000, n_triples: int = 10000,
                             seed: int = 0, fd_step: float = 1e-6,
                             pool=None) -> list:
    """Derivative validation plus the three projection inequalities.

    Reports, in order: finite-difference agreement of the analytic derivative
    formulas (cap 1e-6 relative); operator norm of dPi/dz <= 1; operator-norm
    difference of the two line projectors <= |y1 - y2| (the second base point
    is sampled so |y1 x nu| >= 1, which the two-projection comparison needs);
    and refinement stability of the x-difference quotient (capped at 1.25x
    the coarse-scale constant).  Sample chunks are seeded independently, so
    results are identical with any ``pool`` worker count.
    """
    fd_parts = _run_jobs(_projection_fd_worker,
                         [(c, n, seed, fd_step) for c, n in _chunks(n_fd, _PROJ_CHUNK)],
                         pool)
    cy_parts = _run_jobs(_projection_crossy_worker,
                         [(c, n, seed) for c, n in _chunks(n_triples, _PROJ_CHUNK)],
                         pool)
    c_coarse = _projection_quotient(seed, 400, 1e-2)
    c_fine = _projection_quotient(seed, 400, 5e-3)

    reports = [_merge_bound("projection-derivative-fd", [p["fd"] for p in fd_parts]),
               _merge_bound("projection-dz-norm", [p["dz"] for p in fd_parts]),
               _merge_bound("projection-cross-y", [p["crossy"] for p in cy_parts]),
               BoundReport(name="projection-difference-in-x",
                           cap=1.25 * c_coarse, measured=c_fine,
                           margin=1.25 * c_coarse - c_fine, samples=800,
                           worst={"coarse_constant": c_coarse,
                                  "fine_constant": c_fine})]
    return reports


# ---------------------------------------------------------------------------
# Poincare-type uniformity experiment

def _random_field_fns(n: int, seed: int):
    rng = np.random.default_rng(seed)
    fns = []
    for _ in range(n):
        base = rng.uniform(-1.0, 1.0, 3)
        base = 2.0 * _unit(base)             # dominant constant part: never 0
        amp = rng.uniform(0.1, 0.3, (3, 3))
        frq = rng.uniform(0.5, 2.5, (3, 3))
        phs = rng.uniform(0.0, 2.0 * np.pi, (3, 3))

        def f(coords, base=base, amp=amp, frq=frq, phs=phs):
            vals = np.tile(base, (len(coords), 1))
            for c in range(3):
                for a in range(3):
                    vals[:, c] += amp[c, a] * np.sin(
                        frq[c, a] * coords[:, a] + phs[c, a])
            return vals / np.linalg.norm(vals, axis=1, keepdims=True)

        fns.append(f)
    return fns


def _mean_deviation_integral(fld: SphereField, ubar: np.ndarray) -> float:
    dom = fld.domain
    low = fld.values[dom.cells[:, 0]]
    d = low - ubar
    return float(dom.h ** 3 * np.sum(d * d))


def _poincare_worker(graph: GraphFn, fns, h: float) -> tuple:
    out = []
    for spacing in (h, h / 2.0):
        dom = build_graph_domain(graph, spacing)
        worst = 0.0
        for fn in fns:
            fld = make_field(dom, fn)
            den = dirichlet_energy(fld, 1.0)
            if den < 1e-14:
                continue   # constant field: ratio undefined, skipped
            num = _mean_deviation_integral(fld, boundary_mean(fld))
            worst = max(worst, num / den)
        out.append(worst)
    return tuple(out)


def poincare_experiment(graphs, fields_per_graph: int = 5, h: float = 0.125,
                        seed: int = 0, pool=None) -> BoundReport:
    """Uniformity of the mean-deviation / Dirichlet ratio across graphs.

    For each graph (Lip <= 1/2) and smooth random unit field, the ratio
    integral |u - ubar|^2 / integral |grad u|^2 is computed with ubar the
    area-weighted surface mean; the report compares the max ratio at spacing h
    against h/2 and caps the relative change at 20%.
    """
    for g in graphs:
        if g.lip > 0.5 + 1e-12:
            raise ValueError("uniformity experiment requires Lip <= 1/2")
    fns = _random_field_fns(fields_per_graph, seed)
    parts = _run_jobs(_poincare_worker, [(g, fns, h) for g in graphs], pool)
    m_h = max(p[0] for p in parts)
    m_h2 = max(p[1] for p in parts)
    if m_h == 0.0:
        return BoundReport(name="poincare-uniformity", cap=0.20, measured=0.0,
                           margin=0.20, samples=0,
                           worst={"note": "all sampled fields were constant"})
    change = abs(m_h2 - m_h) / m_h
    return BoundReport(name="poincare-uniformity", cap=0.20,
                       measured=float(change), margin=float(0.20 - change),
                       samples=2 * len(graphs) * fields_per_graph,
                       worst={"max_ratio_h": m_h, "max_ratio_h_over_2": m_h2,
                              "h": h})


# ---------------------------------------------------------------------------
# decay scans and singular detection

@dataclass
class DecayResult:
    profile: DecayProfile
    exponent: float
    residual: float


def _clip_energies(fld: SphereField, centers: np.ndarray,
                   radii: np.ndarray) -> np.ndarray:
    """E_r = r^{-1} * clipped Dirichlet integral, all centers x radii at once."""
    dom = fld.domain
    _, cells = dirichlet_energy(fld, 1.0, return_cells=True)
    cells = np.ravel(cells)
    cc = _cell_centers(dom)
    out = np.empty((len(centers), len(radii)))
    for i, a in enumerate(centers):
        lat = np.hypot(cc[:, 0] - a[0], cc[:, 1] - a[1])
        ver = np.abs(cc[:, 2] - a[2])
        for j, r in enumerate(radii):
            out[i, j] = np.sum(cells[(lat < r) & (ver < r)]) / r
    return out


def decay_scan(fld: SphereField, centers, R: float, levels: int = 5) -> list:
    """Dyadic decay profiles R/2^k around each center, with fitted exponents.

    The fit is the log-log slope of the clipped Dirichlet integral against the
    radius; smooth fields land near 3, gradient concentration along a column
    drags the slope toward 1.
    """
    dom = fld.domain
    hmin = dom.h if isinstance(dom, GraphDomain) else min(dom.hx, dom.hz)
    radii = R / 2.0 ** np.arange(levels)
    if radii[-1] < 2.0 * hmin - 1e-12:
        raise ValueError(f"finest radius {radii[-1]} below 2h = {2 * hmin}")
    centers = np.atleast_2d(np.asarray(centers, float))
    ers = _clip_energies(fld, centers, radii)
    out = []
    for i, a in enumerate(centers):
        prof = DecayProfile(center=tuple(a), radii=radii, values=ers[i])
        slope, resid = decay_fit(prof)
        out.append(DecayResult(profile=prof, exponent=slope, residual=resid))
    return out


@dataclass
class SingularReport:
    flagged: np.ndarray          # node ids whose E_r clears the threshold at every radius
    smallest_radius: np.ndarray  # per flagged node: smallest tested r above threshold
    threshold: float
    radii: np.ndarray
    meta: dict = dc_field(default_factory=dict)


def singular_threshold(h: float, r_coarse: float, kappa: float = 0.25) -> float:
    """Threshold calibrated from the explicit unit-vortex energy density.

    A vertical vortex column has density 1/rho^2 in the plan distance rho;
    integrating over a boundary cylinder of radius r (depth r below the
    surface) and renormalizing by r gives about 2 pi log(r/h) with the lattice
    core cut at h.  The threshold is that value at the coarsest tested radius,
    scaled by the safety factor kappa.
    """
    if r_coarse <= h:
        raise ValueError("coarse radius must exceed the lattice spacing")
    return kappa * 2.0 * np.pi * np.log(r_coarse / h)


def detect_singular(fld: SphereField, threshold: float, r_min: float,
                    levels: int = 3, candidates: Optional[np.ndarray] = None) -> SingularReport:
    """Flag nodes whose renormalized local energy stays large at all scales.

    Tests radii r_min * 2^k for k < levels at every candidate node (default:
    all top-surface nodes); a node is flagged when E_r >= threshold for every
    tested radius.  Raising the threshold can only shrink the flagged set.
    """
    dom = fld.domain
    if not isinstance(dom, GraphDomain):
        raise ValueError("singular detection expects a graph domain")
    if r_min < 2.0 * dom.h - 1e-12:
        raise ValueError(f"r_min {r_min} below 2h = {2 * dom.h}")
    if candidates is None:
        candidates = dom.graph_nodes
    candidates = np.asarray(candidates, int)
    radii = r_min * 2.0 ** np.arange(levels)
    ers = _clip_energies(fld, dom.coords[candidates], radii)
    hit = np.all(ers >= threshold, axis=1)
    flagged = candidates[hit]
    return SingularReport(flagged=flagged,
                          smallest_radius=np.full(len(flagged), radii[0]),
                          threshold=threshold, radii=radii,
                          meta={"candidates": int(len(candidates)),
                                "levels": int(levels)})
