"""Closed-form test constructions: boundary-layer fields, vortices, rotations.

Everything here has a hand-computable answer that the test suites freeze:
the boundary-layer family with its exact energy, planar vortex patterns with
exact Sobolev integrals, the graph-adapted rotation that maps the surface
normal to e3, the tangent-line projection with analytic derivatives, and
tangent boundary data on closed surfaces of genus 0, 1, 2 whose vortex
windings book-keep the Euler characteristic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fields import SphereField, make_field
from .geometry import BoxDomain, GraphDomain, GraphFn


# ---------------------------------------------------------------------------
# boundary-layer (blow-up) family

@dataclass(frozen=True)
class BlowupParams:
    """Tilt rho0, layer scale eps, box half-sizes; requires eps^2 < d."""

    rho0: float
    eps: float
    l: float = 1.0
    d: float = 1.0

    def __post_init__(self):
        if not (self.l > 0 and self.d > 0):
            raise ValueError("box dimensions must be positive")
        if not (0.0 < self.eps < min(1.0, np.sqrt(self.d))):
            raise ValueError(f"need 0 < eps < min(1, sqrt(d)), got eps={self.eps}, d={self.d}")


def tilt_profile(z, rho0: float, eps: float, d: float) -> np.ndarray:
    """Piecewise-quadratic tilt angle: constant plateau, parabolic layers.

    Equals rho0 at z = +-d, rho0 + eps on the plateau |z| <= d - eps^2, and
    interpolates by exact quadratic arcs in the two layers.
    """
    z = np.asarray(z, float)
    if np.any(np.abs(z) > d + 1e-12):
        raise ValueError(f"height sample outside [-d, d] with d={d}")
    out = np.full_like(z, rho0 + eps)
    top = z >= d - eps ** 2
    bot = z <= -d + eps ** 2
    out = np.where(top, rho0 + eps - (z - d + eps ** 2) ** 2 / eps ** 3, out)
    out = np.where(bot, rho0 + eps - (z + d - eps ** 2) ** 2 / eps ** 3, out)
    return out


def oldano_barbero_field(domain: BoxDomain, bp: BlowupParams) -> SphereField:
    """The z-only boundary-layer director (cos rho, 0, sin rho) on a box.

    Requires the vertical spacing to resolve the layer: hz <= eps^2 / 4.
    """
    if domain.hz > bp.eps ** 2 / 4.0 + 1e-15:
        raise ValueError(f"vertical spacing {domain.hz} does not resolve the "
                         f"layer (need <= eps^2/4 = {bp.eps ** 2 / 4.0})")

    def f(coords):
        r = tilt_profile(coords[:, 2], bp.rho0, bp.eps, domain.d)
        return np.stack([np.cos(r), np.zeros_like(r), np.sin(r)], axis=-1)

    return make_field(domain, f)


def closed_form_blowup_energy(bp: BlowupParams, K: float, K13: float) -> float:
    """Exact full energy of the boundary-layer field: 4 l^2 (K/3 - K13 sin(2 rho0)/(2 eps))."""
    return float(4.0 * bp.l ** 2
                 * (K / 3.0 - K13 * np.sin(2.0 * bp.rho0) / (2.0 * bp.eps)))


# ---------------------------------------------------------------------------
# planar vortices

_VORTEX_PATTERNS = ("plus", "tilde", "saddle")


def vortex_field(pts: np.ndarray, kind: str | int = "plus") -> np.ndarray:
    """Unit planar vortex pattern at the origin.

    * ``plus``  (alias ``+1``): (-x2,  x1)/|x|, planar winding +1
    * ``tilde`` (alias ``-1``): ( x2, -x1)/|x|, planar winding also +1 (it
      is the plus pattern seen through a reflection; it realizes index -1
      only when composed with an orientation-reversing chart)
    * ``saddle``:               ( x1, -x2)/|x|, planar winding -1
    """
    if kind == 1:
        kind = "plus"
    elif kind == -1:
        kind = "tilde"
    pts = np.atleast_2d(np.asarray(pts, float))
    r = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(r == 0):
        raise ValueError("vortex field is singular at the origin")
    x, y = pts[:, 0], pts[:, 1]
    if kind == "plus":
        return np.stack([-y, x], axis=-1) / r[:, None]
    if kind == "tilde":
        return np.stack([y, -x], axis=-1) / r[:, None]
    if kind == "saddle":
        return np.stack([x, -y], axis=-1) / r[:, None]
    raise ValueError(f"kind must be one of {_VORTEX_PATTERNS}, got {kind!r}")


def w1p_vortex_norm(p: float, h: float, richardson: bool = False) -> float:
    """Grid quadrature of |grad(vortex)|^p = |x|^{-p} over the unit disk.

    Cells are squares of side h centered on lattice points; the cell holding
    the origin is excluded.  With ``richardson`` the h and h/2 sums are
    combined with the known boundary exponent 2 - p (p < 2).
    """
    if p > 2.0 + 1e-12:
        raise ValueError(f"only p <= 2 is meaningful here, got {p}")

    def raw(hh):
        n = int(np.ceil(1.0 / hh))
        ax = hh * np.arange(-n, n + 1)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        r = np.hypot(X, Y)
        m = (r <= 1.0) & (r > 0)
        return float(np.sum(r[m] ** (-p)) * hh * hh)

    if not richardson:
        return raw(h)
    if p >= 2.0 - 1e-12:
        raise ValueError("richardson extrapolation needs p < 2")
    alpha = 2.0 - p
    a, b = raw(h), raw(h / 2)
    return (b - 2.0 ** (-alpha) * a) / (1.0 - 2.0 ** (-alpha))


def vortex_index(loop_values: np.ndarray, chart_sign: int = 1) -> int:
    """Winding number from planar field samples around a closed loop.

    ``loop_values`` is (P,2) sampled in loop order (the closure edge is added
    here).  Any wrapped angle increment of magnitude >= pi aborts: the loop is
    under-resolved and the count would be unreliable.  ``chart_sign`` is the
    handedness of the chart against the oriented surface (+1 or -1).
    """
    v = np.asarray(loop_values, float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 8:
        raise ValueError("need at least 8 planar samples around the loop")
    ang = np.arctan2(v[:, 1], v[:, 0])
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    if np.max(np.abs(d)) >= np.pi - 1e-9:
        raise ValueError("loop under-resolved: an angle increment reached pi; "
                         "sample more points or shrink the loop")
    w = np.sum(d) / (2.0 * np.pi)
    wi = int(np.rint(w))
    if abs(w - wi) > 1e-6:
        raise ValueError(f"winding {w} is not close to an integer")
    return chart_sign * wi


# ---------------------------------------------------------------------------
# graph-adapted rotation

@dataclass(frozen=True)
class RotationField:
    """Per-point rotations taking the surface normal to e3, with cached tilt.

    ``Q`` is (P,3,3); ``cos_tilt`` / ``sin_tilt`` are the cosine and sine of
    the angle between the normal and e3 (cos = 1/sqrt(1+|grad phi|^2)).
    """

    Q: np.ndarray
    cos_tilt: np.ndarray
    sin_tilt: np.ndarray

    def __len__(self) -> int:
        return len(self.Q)


def rotation_field(graph: GraphFn, pts: np.ndarray) -> RotationField:
    """Rotation matrices mapping the graph normal to e3, identity when flat.

    The matrices satisfy Q nu = e3; at points with |grad phi| < 1e-10 the
    exact identity is returned to avoid the 0/0 limit.
    """
    pts = np.atleast_2d(np.asarray(pts, float))
    gg = graph.grad(pts[:, 0], pts[:, 1])
    p, q = gg[:, 0], gg[:, 1]
    s2 = p * p + q * q
    out = np.zeros((len(p), 3, 3))
    out[:, 0, 0] = out[:, 1, 1] = out[:, 2, 2] = 1.0
    ct = np.ones(len(p))
    m = np.sqrt(s2) >= 1e-10
    if np.any(m):
        pm, qm, s2m = p[m], q[m], s2[m]
        c = 1.0 / np.sqrt(s2m + 1.0)          # cos of the tilt angle
        ct[m] = c
        out[m, 0, 0] = (qm * qm + pm * pm * c) / s2m
        out[m, 0, 1] = -pm * qm * (1.0 - c) / s2m
        out[m, 0, 2] = pm * c                 # sin(tau)/|grad| = cos(tau)
        out[m, 1, 0] = out[m, 0, 1]
        out[m, 1, 1] = (pm * pm + qm * qm * c) / s2m
        out[m, 1, 2] = qm * c
        out[m, 2, 0] = -pm * c
        out[m, 2, 1] = -qm * c
        out[m, 2, 2] = c
    return RotationField(Q=out, cos_tilt=ct, sin_tilt=np.sqrt(s2) * ct)


def equator_pattern(pts: np.ndarray, alpha: float) -> np.ndarray:
    """Horizontal unit field (cos(alpha x1), sin(alpha x1), 0)."""
    pts = np.atleast_2d(np.asarray(pts, float))
    a = alpha * pts[:, 0]
    return np.stack([np.cos(a), np.sin(a), np.zeros_like(a)], axis=-1)


def tangential_trace(domain: GraphDomain, planar_fn: Callable) -> np.ndarray:
    """Lift a horizontal pattern to a surface-tangent field via Q^T.

    ``planar_fn`` maps (N,2) planar points to unit horizontal vectors
    (third component zero); Q^T carries them into the tangent plane of the
    graph at every node's plan-view position, so graph nodes are exactly
    tangent while wall and interior nodes get a smooth z-independent extension.
    """
    pts = domain.coords[:, :2]
    w = planar_fn(pts)
    Q = rotation_field(domain.graph, pts).Q
    return np.einsum("pji,pj->pi", Q, w)


def equator_rotation_trace(domain: GraphDomain, alpha: float) -> SphereField:
    """Tangential trace of the rotating equator pattern; smooth benchmark data."""
    vals = tangential_trace(domain, lambda pts: equator_pattern(pts, alpha))
    return SphereField(domain, vals)


def vortex_trace(domain: GraphDomain, centers, orientations) -> SphereField:
    """Tangential boundary data carrying planar vortices at given centers.

    The horizontal pattern sums the angle fields of each vortex (orientation
    +-1 flips the angle sign) and is then lifted by Q^T, so its restriction to
    the graph surface is exactly tangent.  Centers must sit strictly between
    node columns.
    """
    centers = np.atleast_2d(np.asarray(centers, float))
    orientations = np.asarray(orientations, int)
    plan = domain.coords[:, :2]
    for c in centers:
        gap = np.min(np.hypot(plan[:, 0] - c[0], plan[:, 1] - c[1]))
        if gap < 1e-9:
            raise ValueError(f"vortex center {tuple(c)} collides with a node column")

    def pattern(pts):
        th = np.zeros(len(pts))
        for c, s in zip(centers, orientations):
            th = th + s * np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0])
        th = th + 0.5 * np.pi   # vortex convention: (-y, x)/r at a +1 center
        return np.stack([np.cos(th), np.sin(th), np.zeros_like(th)], axis=-1)

    vals = tangential_trace(domain, pattern)
    return SphereField(domain, vals)


# ---------------------------------------------------------------------------
# tangent-line projection

@dataclass(frozen=True)
class ProjectionQuery:
    """A projection evaluation point: base x, near-equator y, input z, normal nu.

    Admissible only when |y x nu| > 1e-8; the line direction degenerates below.
    """

    x: np.ndarray
    y: np.ndarray
    nu: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        m = np.cross(np.asarray(self.y, float), np.asarray(self.nu, float))
        if float(np.dot(m, m)) <= 1e-16:
            raise ValueError(f"inadmissible query: |y x nu| = "
                             f"{float(np.linalg.norm(m)):.2e} <= 1e-8")


def tangent_line_projection(y, nu: np.ndarray | None = None,
                            z: np.ndarray | None = None) -> np.ndarray:
    """Project z onto the line spanned by y x nu, then translate by y.

    Accepts either a ProjectionQuery or the (y, nu, z) triple.  Admissible
    only when |y x nu| > 1e-8; smaller cross products are rejected because
    the line direction degenerates.
    """
    if isinstance(y, ProjectionQuery):
        y, nu, z = y.y, y.nu, y.z
    y = np.asarray(y, float); nu = np.asarray(nu, float); z = np.asarray(z, float)
    m = np.cross(y, nu)
    mm = float(np.dot(m, m))
    if mm <= 1e-16:
        raise ValueError(f"inadmissible query: |y x nu| = {np.sqrt(mm):.2e} <= 1e-8")
    return m * (np.dot(m, z) / mm) + y


def projection_dz(y, nu) -> np.ndarray:
    """d Pi / d z: the rank-one projector (y x nu)(y x nu)^T / |y x nu|^2."""
    m = np.cross(y, nu)
    return np.outer(m, m) / np.dot(m, m)


def _projection_chain(y, nu, z, dm) -> np.ndarray:
    m = np.cross(y, nu)
    mm = np.dot(m, m)
    return ((np.dot(z, dm) * m + np.dot(z, m) * dm) / mm
            - 2.0 * np.dot(m, dm) * np.dot(z, m) * m / mm ** 2)


def projection_dy(y, nu, z, j: int) -> np.ndarray:
    """Analytic d Pi / d y^j (includes the translation term)."""
    e = np.zeros(3); e[j] = 1.0
    return _projection_chain(y, nu, z, np.cross(e, nu)) + e


def projection_dnu(y, nu, z, dnu_j) -> np.ndarray:
    """Chain-rule derivative of Pi through nu (used for x-derivatives)."""
    return _projection_chain(y, nu, z, np.cross(y, dnu_j))


# ---------------------------------------------------------------------------
# tangent boundary data on closed surfaces

@dataclass
class VortexRecord:
    center: np.ndarray     # (3,) position on the surface
    chart: str             # "plus" or "tilde" pattern label
    chart_sign: int        # handedness of the chart vs surface orientation
    winding: int           # index computed on the oriented surface


@dataclass
class TangentBoundaryData:
    """Sampled tangent unit field on a closed surface plus its vortex ledger."""

    genus: int
    positions: np.ndarray  # (P,3)
    normals: np.ndarray    # (P,3)
    values: np.ndarray     # (P,3) unit, tangent outside vortex cells
    vortices: list
    meta: dict = field(default_factory=dict)

    @property
    def chi(self) -> int:
        return 2 * (1 - self.genus)

    def ledger_sum(self) -> int:
        return int(sum(v.winding for v in self.vortices))

    def tangency_violation(self) -> float:
        if len(self.positions) == 0:
            return 0.0
        return float(np.max(np.abs(np.sum(self.values * self.normals, axis=1))))

    def to_csv(self, path) -> None:
        import csv as _csv
        with open(path, "w", newline="") as f:
            wr = _csv.writer(f)
            wr.writerow(["node", "x", "y", "z", "nux", "nuy", "nuz",
                         "gx", "gy", "gz"])
            for i, (p, n, g) in enumerate(zip(self.positions, self.normals,
                                              self.values)):
                wr.writerow([i] + [repr(float(v)) for v in (*p, *n, *g)])


def _tangential_e3(normals: np.ndarray) -> np.ndarray:
    v = np.zeros_like(normals)
    v[:, 2] = 1.0
    v = v - normals * normals[:, 2:3]
    nrm = np.linalg.norm(v, axis=1, keepdims=True)
    return v / nrm


_WHEEL_R, _WHEEL_r = 1.0, 0.4


def _wheel(u, v, zc):
    """Upright torus (axis horizontal): big circle in the xz-plane."""
    pos = np.stack([(_WHEEL_R + _WHEEL_r * np.cos(v)) * np.cos(u),
                    _WHEEL_r * np.sin(v),
                    zc + (_WHEEL_R + _WHEEL_r * np.cos(v)) * np.sin(u)], axis=-1)
    nrm = np.stack([np.cos(v) * np.cos(u), np.sin(v), np.cos(v) * np.sin(u)],
                   axis=-1)
    return pos, nrm


def _surface_winding(pos_fn, nrm_fn, field_fn, u0, v0, delta=0.05, nsamp=720):
    """Index of a tangent field at an isolated zero of a parametric surface.

    Samples the field around a parameter-space loop, expresses it in an
    oriented tangent frame at the zero, and corrects for chart handedness.
    """
    n0 = np.asarray(nrm_fn(np.array([u0]), np.array([v0])))[0]
    t1 = np.array([1.0, 0.0, 0.0]) if abs(n0[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = t1 - n0 * np.dot(t1, n0)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n0, t1)

    # chart handedness: sign of (p_u x p_v) . n at the zero
    e = 1e-6
    pu = (pos_fn(np.array([u0 + e]), np.array([v0]))[0]
          - pos_fn(np.array([u0 - e]), np.array([v0]))[0]) / (2 * e)
    pv = (pos_fn(np.array([u0]), np.array([v0 + e]))[0]
          - pos_fn(np.array([u0]), np.array([v0 - e]))[0]) / (2 * e)
    sgn = int(np.sign(np.dot(np.cross(pu, pv), n0)))

    th = 2.0 * np.pi * np.arange(nsamp) / nsamp
    us = u0 + delta * np.cos(th)
    vs = v0 + delta * np.sin(th)
    g = field_fn(us, vs)
    planar = np.stack([g @ t1, g @ t2], axis=-1)
    return vortex_index(planar, chart_sign=sgn)


def genus_boundary_field(k: int, n_u: int = 96, n_v: int = 48) -> TangentBoundaryData:
    """Tangent boundary data on a closed genus-k surface, k in {0, 1, 2}.

    * k=0: unit sphere, tangential-e3 field (height gradient), two +1 zeros
      at the poles.
    * k=1: flat torus, the unit azimuthal frame field: no zeros at all.
    * k=2: two upright wheel tori joined by a vertical neck tube; the
      tangential-e3 field has six zeros (two height extrema at +1, four hole
      saddles at -1) after the glued extrema are removed with the neck disks.

    Windings are computed by the loop oracle on the oriented surface, never
    assumed; the ledger must sum to 2(1-k).
    """
    if k == 0:
        u = np.linspace(0, 2 * np.pi, n_u, endpoint=False)
        v = np.linspace(0.08, np.pi - 0.08, n_v)   # exclude tiny polar caps
        U, V = np.meshgrid(u, v, indexing="ij")
        nrm = np.stack([np.sin(V) * np.cos(U), np.sin(V) * np.sin(U),
                        np.cos(V)], axis=-1).reshape(-1, 3)
        pos = nrm.copy()
        vals = _tangential_e3(nrm)

        def sph_pos(uu, vv):
            return np.stack([np.sin(vv) * np.cos(uu), np.sin(vv) * np.sin(uu),
                             np.cos(vv)], axis=-1)

        def sph_field(uu, vv):
            return _tangential_e3(sph_pos(uu, vv))

        vort = []
        for name, v0 in (("north", 0.0), ("south", np.pi)):
            # loop around the pole in (u,v): at a pole the chart collapses, so
            # index directly in the pole tangent plane instead
            th = 2 * np.pi * np.arange(720) / 720
            vv = np.full_like(th, 0.05 if name == "north" else np.pi - 0.05)
            g = sph_field(th, vv)
            n0 = np.array([0.0, 0.0, 1.0 if name == "north" else -1.0])
            t1 = np.array([1.0, 0.0, 0.0])
            t2 = np.cross(n0, t1)
            # the (th) loop runs counterclockwise seen from +e3; seen from the
            # south pole's outward normal (-e3) that is clockwise
            sgn = 1 if name == "north" else -1
            w = vortex_index(np.stack([g @ t1, g @ t2], axis=-1), chart_sign=sgn)
            center = np.array([0.0, 0.0, 1.0 if name == "north" else -1.0])
            vort.append(VortexRecord(center=center, chart="plus",
                                     chart_sign=sgn, winding=w))
        meta = {"surface": "unit sphere", "field": "tangential e3"}
        return TangentBoundaryData(genus=0, positions=pos, normals=nrm,
                                   values=vals, vortices=vort, meta=meta)

    if k == 1:
        R, r = 2.0, 0.6
        u = np.linspace(0, 2 * np.pi, n_u, endpoint=False)
        v = np.linspace(0, 2 * np.pi, n_v, endpoint=False)
        U, V = np.meshgrid(u, v, indexing="ij")
        pos = np.stack([(R + r * np.cos(V)) * np.cos(U),
                        (R + r * np.cos(V)) * np.sin(U),
                        r * np.sin(V)], axis=-1).reshape(-1, 3)
        nrm = np.stack([np.cos(V) * np.cos(U), np.cos(V) * np.sin(U),
                        np.sin(V)], axis=-1).reshape(-1, 3)
        vals = np.stack([-np.sin(U), np.cos(U), np.zeros_like(U)],
                        axis=-1).reshape(-1, 3)
        meta = {"surface": "flat torus", "field": "azimuthal frame"}
        return TangentBoundaryData(genus=1, positions=pos, normals=nrm,
                                   values=vals, vortices=[], meta=meta)

    if k == 2:
        zc = 1.8
        cut = 0.35   # parameter-space radius of the removed glue disks
        u = np.linspace(-np.pi, np.pi, n_u, endpoint=False)
        v = np.linspace(-np.pi, np.pi, n_v, endpoint=False)
        U, V = np.meshgrid(u, v, indexing="ij")

        parts_pos, parts_nrm = [], []
        vort = []
        # glue zeros: upper wheel outer-bottom (u=-pi/2, v=0), lower outer-top
        for zc_i, glue_u in ((zc, -np.pi / 2), (-zc, np.pi / 2)):
            pos, nrm = _wheel(U, V, zc_i)
            keep = np.hypot(np.arctan2(np.sin(U - glue_u), np.cos(U - glue_u)),
                            np.arctan2(np.sin(V), np.cos(V))) > cut
            parts_pos.append(pos[keep])
            parts_nrm.append(nrm[keep])

            def wpos(uu, vv, _z=zc_i):
                return _wheel(uu, vv, _z)[0]

            def wnrm(uu, vv, _z=zc_i):
                return _wheel(uu, vv, _z)[1]

            def wfield(uu, vv, _z=zc_i):
                return _tangential_e3(_wheel(uu, vv, _z)[1])

            for name, u0, v0, chart in ((" outer-top", np.pi / 2, 0.0, "plus"),
                                        (" inner-top", np.pi / 2, np.pi, "tilde"),
                                        (" inner-bottom", -np.pi / 2, np.pi, "tilde"),
                                        (" outer-bottom", -np.pi / 2, 0.0, "plus")):
                if abs(u0 - glue_u) < 1e-12 and v0 == 0.0:
                    continue   # removed with the glue disk
                w = _surface_winding(wpos, wnrm, wfield, u0, v0)
                c = _wheel(np.array(u0), np.array(v0), zc_i)[0]
                tag = ("upper" if zc_i > 0 else "lower") + name
                vort.append(VortexRecord(center=np.asarray(c),
                                         chart=f"{chart} ({tag})",
                                         chart_sign=-1, winding=w))

        # vertical neck tube between the facing rims
        z0 = -zc + _WHEEL_R + _WHEEL_r
        z1 = zc - _WHEEL_R - _WHEEL_r
        rn = 0.3
        tu = np.linspace(0, 2 * np.pi, n_u, endpoint=False)
        tz = np.linspace(z0, z1, max(8, n_v // 3))
        TU, TZ = np.meshgrid(tu, tz, indexing="ij")
        parts_pos.append(np.stack([rn * np.cos(TU), rn * np.sin(TU), TZ],
                                  axis=-1).reshape(-1, 3))
        parts_nrm.append(np.stack([np.cos(TU), np.sin(TU), np.zeros_like(TU)],
                                  axis=-1).reshape(-1, 3))

        pos = np.concatenate(parts_pos)
        nrm = np.concatenate(parts_nrm)
        vals = _tangential_e3(nrm)
        meta = {"surface": "two upright wheel tori + vertical neck tube",
                "field": "tangential e3",
                "glued": "facing height extrema removed (disk radius "
                         f"{cut} in parameter space)",
                "chart_orientation": "wheel (u,v) charts are orientation-"
                                     "reversing; windings corrected by the "
                                     "jacobian handedness sign"}
        return TangentBoundaryData(genus=2, positions=pos, normals=nrm,
                                   values=vals, vortices=vort, meta=meta)

    raise ValueError(f"genus must be 0, 1, or 2, got {k}")
