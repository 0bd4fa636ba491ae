"""Lattice domains for a cylinder cut by a graph surface, boxes, and surface frames.

The working domain is the open cylinder C(0,1) = {|(x1,x2)| < 1, |x3| < 1}
truncated below a graph x3 = phi(x1,x2).  Nodes live on a uniform lattice of
spacing h; the top node of each column is snapped onto the graph so surface
quadrature can use the exact area element sqrt(1+|grad phi|^2) h^2.  Finite
differences always use the uniform lattice spacing (the snap affects
coordinates, weights and trace evaluation, never stencils), which keeps every
discrete energy an exactly differentiable function of nodal values.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# node tags
TAG_INTERIOR = 0
TAG_GRAPH = 1   # snapped onto x3 = phi(x1,x2), free-tangential in minimization
TAG_WALL = 2    # lateral rim, bottom plane, and graph/wall corners (fixed trace)

_SAMPLE_N = 481  # dense grid used by the sampled Lipschitz oracle


@dataclass(frozen=True)
class GraphFn:
    """A graph function phi on the closed unit disk with phi(0)=0, grad phi(0)=0.

    Carries analytic value/gradient/hessian callables plus the two Lipschitz
    seminorms used by every bound in the verification suites:

    * ``lip``  = sup |grad phi| over the closed unit disk
    * ``lip2`` = sup over second-derivative entries (max-entry convention)
    """

    kind: str
    params: dict
    lip: float
    lip2: float
    value: Callable = field(repr=False)   # (P,),(P,) -> (P,)
    grad: Callable = field(repr=False)    # (P,),(P,) -> (P,2)
    hess: Callable = field(repr=False)    # (P,),(P,) -> (P,2,2)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "params": self.params}


def _disk_sample_points(n: int = _SAMPLE_N):
    ax = np.linspace(-1.0, 1.0, n)
    x, y = np.meshgrid(ax, ax, indexing="ij")
    m = x * x + y * y <= 1.0
    return x[m], y[m]


def _sampled_seminorms(grad, hess):
    x, y = _disk_sample_points()
    g = grad(x, y)
    lip = float(np.max(np.hypot(g[:, 0], g[:, 1])))
    hh = hess(x, y)
    lip2 = float(np.max(np.abs(hh)))
    return lip, lip2


def make_graph_fn(kind: str, **params) -> GraphFn:
    """Build a graph function: flat | paraboloid | sinusoid | tabulated.

    Parameters
    ----------
    kind : str
        ``flat``; ``paraboloid`` with ``a`` (phi = a (x1^2+x2^2)/2);
        ``sinusoid`` with ``a``, ``omega`` (phi = a sin(omega x1) sin(omega x2));
        ``tabulated`` with ``xs``, ``ys``, ``vals`` (bicubic interpolation).

    Raises
    ------
    ValueError
        If sup |grad phi| > 1 over the unit disk, or a tabulated graph
        violates phi(0)=0 / grad phi(0)=0.
    """
    if kind == "flat":
        z = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
        g = lambda x, y: np.zeros(np.shape(np.asarray(x, dtype=float)) + (2,))
        h = lambda x, y: np.zeros(np.shape(np.asarray(x, dtype=float)) + (2, 2))
        return GraphFn("flat", {}, 0.0, 0.0, z, g, h)

    if kind == "paraboloid":
        a = float(params["a"])
        z = lambda x, y: 0.5 * a * (np.asarray(x, float) ** 2 + np.asarray(y, float) ** 2)

        def g(x, y):
            x = np.asarray(x, float); y = np.asarray(y, float)
            return np.stack([a * x, a * y], axis=-1)

        def h(x, y):
            x = np.asarray(x, float)
            out = np.zeros(np.shape(x) + (2, 2))
            out[..., 0, 0] = a
            out[..., 1, 1] = a
            return out

        lip = abs(a)  # a|x| maximized at the disk rim
        lip2 = abs(a)
        fn = GraphFn("paraboloid", {"a": a}, lip, lip2, z, g, h)

    elif kind == "sinusoid":
        a = float(params["a"]); om = float(params["omega"])
        z = lambda x, y: a * np.sin(om * np.asarray(x, float)) * np.sin(om * np.asarray(y, float))

        def g(x, y):
            x = np.asarray(x, float); y = np.asarray(y, float)
            return np.stack([a * om * np.cos(om * x) * np.sin(om * y),
                             a * om * np.sin(om * x) * np.cos(om * y)], axis=-1)

        def h(x, y):
            x = np.asarray(x, float); y = np.asarray(y, float)
            out = np.empty(np.shape(x) + (2, 2))
            out[..., 0, 0] = -a * om * om * np.sin(om * x) * np.sin(om * y)
            out[..., 1, 1] = out[..., 0, 0]
            out[..., 0, 1] = a * om * om * np.cos(om * x) * np.cos(om * y)
            out[..., 1, 0] = out[..., 0, 1]
            return out

        lip, lip2 = _sampled_seminorms(g, h)
        fn = GraphFn("sinusoid", {"a": a, "omega": om}, lip, lip2, z, g, h)

    elif kind == "tabulated":
        from scipy.interpolate import RectBivariateSpline

        xs = np.asarray(params["xs"], float)
        ys = np.asarray(params["ys"], float)
        vals = np.asarray(params["vals"], float)
        sp = RectBivariateSpline(xs, ys, vals, kx=3, ky=3)

        z = lambda x, y: sp.ev(np.asarray(x, float), np.asarray(y, float))

        def g(x, y):
            x = np.asarray(x, float); y = np.asarray(y, float)
            return np.stack([sp.ev(x, y, dx=1), sp.ev(x, y, dy=1)], axis=-1)

        def h(x, y):
            x = np.asarray(x, float); y = np.asarray(y, float)
            out = np.empty(np.shape(x) + (2, 2))
            out[..., 0, 0] = sp.ev(x, y, dx=2)
            out[..., 1, 1] = sp.ev(x, y, dy=2)
            out[..., 0, 1] = sp.ev(x, y, dx=1, dy=1)
            out[..., 1, 0] = out[..., 0, 1]
            return out

        v0 = float(z(0.0, 0.0))
        g0 = np.abs(g(0.0, 0.0)).max()
        if abs(v0) > 1e-10 or g0 > 1e-8:
            raise ValueError(
                f"tabulated graph must satisfy phi(0)=0 and grad phi(0)=0 "
                f"(got phi(0)={v0:.3e}, |grad phi(0)|={g0:.3e})")
        lip, lip2 = _sampled_seminorms(g, h)
        fn = GraphFn("tabulated",
                     {"xs": xs.tolist(), "ys": ys.tolist(), "vals": vals.tolist()},
                     lip, lip2, z, g, h)
    else:
        raise ValueError(f"unknown graph kind {kind!r}")

    if fn.lip > 1.0 + 1e-12:
        raise ValueError(f"graph is too steep: sup |grad phi| = {fn.lip:.4f} > 1")
    return fn


# ---------------------------------------------------------------------------
# surface frames

@dataclass
class SurfaceFrame:
    """Outward normal, orthonormal tangents, and normal-derivative matrix.

    ``shape_op[p, a, b]`` holds d nu^b / d x^a at sample p; the third row is
    zero because nu depends on (x1,x2) only.  |entries| <= 3 lip2 always.
    """

    nu: np.ndarray      # (P,3)
    t1: np.ndarray      # (P,3)
    t2: np.ndarray      # (P,3)
    shape_op: np.ndarray  # (P,3,3)


def surface_frame(graph: GraphFn, pts: np.ndarray) -> SurfaceFrame:
    """Frames of the graph surface at planar points ``pts`` of shape (P,2)."""
    pts = np.atleast_2d(np.asarray(pts, float))
    x, y = pts[:, 0], pts[:, 1]
    gr = graph.grad(x, y)
    p, q = gr[..., 0], gr[..., 1]
    w = np.sqrt(1.0 + p * p + q * q)
    nu = np.stack([-p, -q, np.ones_like(p)], axis=-1) / w[:, None]
    t1 = np.stack([np.ones_like(p), np.zeros_like(p), p], axis=-1)
    t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
    t2 = np.cross(nu, t1)

    hh = graph.hess(x, y)
    S = np.zeros((len(p), 3, 3))
    for j in range(2):
        hj1 = hh[..., j, 0]
        hj2 = hh[..., j, 1]
        dot = hj1 * p + hj2 * q
        S[:, j, 0] = -hj1 / w + dot * p / w**3
        S[:, j, 1] = -hj2 / w + dot * q / w**3
        S[:, j, 2] = -dot / w**3
    return SurfaceFrame(nu=nu, t1=t1, t2=t2, shape_op=S)


# ---------------------------------------------------------------------------
# graph domain

@dataclass
class GraphDomain:
    graph: GraphFn
    h: float
    coords: np.ndarray          # (N,3), graph nodes snapped onto the surface
    lattice: np.ndarray         # (N,3) int lattice indices (i,j,k)
    tags: np.ndarray            # (N,) uint8
    node_id: np.ndarray         # dense (ni,nj,nk) int32 lookup, -1 = absent
    lattice_origin: tuple       # (i0,j0,k0) of node_id[0,0,0]
    cells: np.ndarray           # (M,8) node ids of full lattice cubes
    col_start: np.ndarray       # (C,) first node id of each column
    col_len: np.ndarray         # (C,) node count of each column
    col_top_id: np.ndarray      # dense (ni,nj) int32: column top node, -1 = no column
    graph_area_w: np.ndarray    # (Ng,) area weights for graph nodes
    graph_frame: SurfaceFrame   # frames at the graph nodes

    def __post_init__(self):
        self.graph_nodes = np.flatnonzero(self.tags == TAG_GRAPH)
        self.wall_nodes = np.flatnonzero(self.tags == TAG_WALL)
        self.interior_nodes = np.flatnonzero(self.tags == TAG_INTERIOR)
        self._neighbors = None

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    def neighbor_table(self) -> np.ndarray:
        """(N,6) ids of the -x,+x,-y,+y,-z,+z lattice neighbors (-1 absent)."""
        if self._neighbors is None:
            i0, j0, k0 = self.lattice_origin
            ni, nj, nk = self.node_id.shape
            out = np.full((self.n_nodes, 6), -1, dtype=np.int64)
            lat = self.lattice
            for c, (di, dj, dk) in enumerate([(-1, 0, 0), (1, 0, 0), (0, -1, 0),
                                              (0, 1, 0), (0, 0, -1), (0, 0, 1)]):
                ii = lat[:, 0] + di - i0
                jj = lat[:, 1] + dj - j0
                kk = lat[:, 2] + dk - k0
                ok = (ii >= 0) & (ii < ni) & (jj >= 0) & (jj < nj) & (kk >= 0) & (kk < nk)
                out[ok, c] = self.node_id[ii[ok], jj[ok], kk[ok]]
            self._neighbors = out
        return self._neighbors

    def descriptor(self) -> dict:
        return {"kind": "graph", "h": self.h, "graph": self.graph.descriptor()}

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.descriptor(), f, sort_keys=True, indent=2)
            f.write("\n")


def build_graph_domain(graph: GraphFn, h: float) -> GraphDomain:
    """Discretize the cylinder-under-graph region at lattice spacing h.

    Columns are classified once in plan view: a column strictly inside the
    unit disk whose four lateral neighbors are all inside is a bulk column
    (its snapped top is a graph node); a column touching the rim is a wall
    column top to bottom, which is the corner tie-break.  Requires 0 < h <=
    1/8 with 1/h an integer so that the bottom plane and rim land on the
    lattice.
    """
    if not (0.0 < h <= 0.125):
        raise ValueError(f"lattice spacing must satisfy 0 < h <= 1/8, got {h}")
    n = round(1.0 / h)
    if abs(n * h - 1.0) > 1e-12:
        raise ValueError(f"1/h must be an integer, got h={h}")

    side = 2 * n + 1
    idx = np.arange(-n, n + 1)
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    rr = np.hypot(ii * h, jj * h)
    in_disk = rr < 1.0

    inner_ok = np.zeros_like(in_disk)
    inner_ok[1:-1, 1:-1] = (in_disk[:-2, 1:-1] & in_disk[2:, 1:-1]
                            & in_disk[1:-1, :-2] & in_disk[1:-1, 2:])
    rim = in_disk & ~inner_ok

    ci, cj = ii[in_disk], jj[in_disk]
    x1 = ci * h
    x2 = cj * h
    phi = np.asarray(graph.value(x1, x2), float)
    k_top = np.rint(phi / h).astype(int)
    k_top = np.clip(k_top, -n, n)
    col_rim = rim[in_disk]

    col_len = k_top + n + 1
    col_start = np.concatenate([[0], np.cumsum(col_len)[:-1]])
    total = int(np.sum(col_len))

    lattice = np.empty((total, 3), dtype=np.int64)
    coords = np.empty((total, 3))
    tags = np.empty(total, dtype=np.uint8)

    # column-major fill: nodes of one column are contiguous, k ascending
    pos = np.arange(total)
    col_of = np.repeat(np.arange(len(ci)), col_len)
    k_in_col = pos - col_start[col_of]
    kk = k_in_col - n
    lattice[:, 0] = ci[col_of]
    lattice[:, 1] = cj[col_of]
    lattice[:, 2] = kk
    coords[:, 0] = lattice[:, 0] * h
    coords[:, 1] = lattice[:, 1] * h
    coords[:, 2] = kk * h

    is_top = kk == k_top[col_of]
    is_bottom = kk == -n
    tags[:] = TAG_INTERIOR
    tags[is_bottom] = TAG_WALL
    tags[col_rim[col_of]] = TAG_WALL
    graph_mask = is_top & ~col_rim[col_of] & ~is_bottom
    tags[graph_mask] = TAG_GRAPH
    # snap tops onto the surface (graph nodes and rim tops alike carry phi)
    coords[is_top, 2] = phi[col_of[is_top]]

    node_id = np.full((side, side, side), -1, dtype=np.int32)
    node_id[lattice[:, 0] + n, lattice[:, 1] + n, lattice[:, 2] + n] = \
        np.arange(total, dtype=np.int32)

    col_top_id = np.full((side, side), -1, dtype=np.int32)
    col_top_id[lattice[is_top, 0] + n, lattice[is_top, 1] + n] = \
        np.flatnonzero(is_top).astype(np.int32)

    occ = node_id >= 0
    cell_mask = (occ[:-1, :-1, :-1] & occ[1:, :-1, :-1] & occ[:-1, 1:, :-1]
                 & occ[1:, 1:, :-1] & occ[:-1, :-1, 1:] & occ[1:, :-1, 1:]
                 & occ[:-1, 1:, 1:] & occ[1:, 1:, 1:])
    ci0, cj0, ck0 = np.nonzero(cell_mask)
    cells = np.stack([
        node_id[ci0, cj0, ck0], node_id[ci0 + 1, cj0, ck0],
        node_id[ci0, cj0 + 1, ck0], node_id[ci0 + 1, cj0 + 1, ck0],
        node_id[ci0, cj0, ck0 + 1], node_id[ci0 + 1, cj0, ck0 + 1],
        node_id[ci0, cj0 + 1, ck0 + 1], node_id[ci0 + 1, cj0 + 1, ck0 + 1],
    ], axis=-1).astype(np.int64)

    dom = GraphDomain(graph=graph, h=h, coords=coords, lattice=lattice,
                      tags=tags, node_id=node_id, lattice_origin=(-n, -n, -n),
                      cells=cells, col_start=col_start, col_len=col_len,
                      col_top_id=col_top_id, graph_area_w=np.empty(0),
                      graph_frame=None)
    gp = coords[dom.graph_nodes][:, :2]
    frame = surface_frame(graph, gp)
    gg = graph.grad(gp[:, 0], gp[:, 1])
    area = np.sqrt(1.0 + np.sum(gg * gg, axis=-1)) * h * h
    dom.graph_area_w = area
    dom.graph_frame = frame
    return dom


def load_domain(descriptor) -> GraphDomain:
    """Rebuild a domain from a descriptor dict or a JSON file path."""
    if not isinstance(descriptor, dict):
        with open(descriptor) as f:
            descriptor = json.load(f)
    if descriptor["kind"] != "graph":
        raise ValueError(f"cannot load domain kind {descriptor['kind']!r}")
    gfd = descriptor["graph"]
    graph = make_graph_fn(gfd["kind"], **gfd["params"])
    return build_graph_domain(graph, descriptor["h"])


# ---------------------------------------------------------------------------
# box domain

@dataclass
class BoxDomain:
    """Uniform grid on (0,l)^2 x (-d,d); vertical spacing may differ."""

    l: float
    d: float
    hx: float
    hz: float
    nx: int   # cells per lateral axis
    nz: int   # cells along z

    @property
    def shape(self) -> tuple:
        return (self.nx + 1, self.nx + 1, self.nz + 1)

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) ** 2 * (self.nz + 1)

    @property
    def coords(self) -> np.ndarray:
        ax = self.hx * np.arange(self.nx + 1)
        az = -self.d + self.hz * np.arange(self.nz + 1)
        X, Y, Z = np.meshgrid(ax, ax, az, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)

    def z_axis(self) -> np.ndarray:
        return -self.d + self.hz * np.arange(self.nz + 1)

    def descriptor(self) -> dict:
        return {"kind": "box", "l": self.l, "d": self.d,
                "hx": self.hx, "hz": self.hz}


def build_box_domain(l: float, d: float, h: float, hz: Optional[float] = None) -> BoxDomain:
    """Box (0,l)^2 x (-d,d).  ``hz`` defaults to ``h``; spacings must divide."""
    if l <= 0 or d <= 0 or h <= 0:
        raise ValueError("box dimensions and spacing must be positive")
    hz = h if hz is None else hz
    nx = round(l / h)
    nz = round(2.0 * d / hz)
    if abs(nx * h - l) > 1e-9 * l or abs(nz * hz - 2 * d) > 1e-9 * d:
        raise ValueError(f"spacings must divide the box: l/h={l / h}, 2d/hz={2 * d / hz}")
    return BoxDomain(l=l, d=d, hx=h, hz=hz, nx=nx, nz=nz)


# ---------------------------------------------------------------------------
# cylinder clips

@dataclass(frozen=True)
class Cylinder:
    """Axis-aligned cylinder |(x1,x2)-(a1,a2)| < r, |x3 - a3| < r."""

    center: tuple
    r: float

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        a = np.asarray(self.center)
        lat = np.hypot(pts[:, 0] - a[0], pts[:, 1] - a[1]) < self.r
        return lat & (np.abs(pts[:, 2] - a[2]) < self.r)


def cylinder_clip(domain: GraphDomain, cyl: Cylinder) -> dict:
    """Node ids of the domain inside a cylinder, split by tag.

    Requires r >= 2h so the clip always holds a meaningful stencil.
    """
    if cyl.r < 2.0 * domain.h - 1e-12:
        raise ValueError(f"clip radius {cyl.r} < 2h = {2 * domain.h}")
    inside = cyl.contains(domain.coords)
    ids = np.flatnonzero(inside)
    t = domain.tags[ids]
    return {"nodes": ids,
            "interior": ids[t == TAG_INTERIOR],
            "graph": ids[t == TAG_GRAPH],
            "wall": ids[t == TAG_WALL]}


# ---------------------------------------------------------------------------
# VTK export (legacy ASCII)

def write_vtk_points(path, coords: np.ndarray, point_data: Optional[dict] = None,
                     title: str = "k13lab nodes") -> None:
    """Write a point cloud with optional per-point scalar/vector data."""
    coords = np.asarray(coords, float)
    npts = len(coords)
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(title + "\n")
        f.write("ASCII\nDATASET POLYDATA\n")
        f.write(f"POINTS {npts} double\n")
        np.savetxt(f, coords, fmt="%.17g")
        f.write(f"VERTICES {npts} {2 * npts}\n")
        np.savetxt(f, np.column_stack([np.ones(npts, int), np.arange(npts)]), fmt="%d")
        if point_data:
            f.write(f"POINT_DATA {npts}\n")
            for name, arr in point_data.items():
                arr = np.asarray(arr)
                if arr.ndim == 1:
                    f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    np.savetxt(f, arr, fmt="%.17g")
                else:
                    f.write(f"VECTORS {name} double\n")
                    np.savetxt(f, arr, fmt="%.17g")
