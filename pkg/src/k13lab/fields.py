"""Unit director fields on domain nodes, energy parameters, and field IO."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .geometry import BoxDomain, GraphDomain, write_vtk_points

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class EnergyParams:
    """Elastic constant K > 0 and the surface coupling K13 (any sign)."""

    K: float
    K13: float = 0.0

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError(f"K must be positive, got {self.K}")


@dataclass
class SphereField:
    """Unit 3-vectors attached to the nodes of a domain."""

    domain: Union[GraphDomain, BoxDomain]
    values: np.ndarray  # (N,3)

    def copy(self) -> "SphereField":
        return SphereField(self.domain, self.values.copy())

    def unit_violation(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.values, axis=1) - 1.0)))


def renormalize(values):
    """Project rows onto the unit sphere; a zero row is a hard error.

    Accepts a SphereField (returns a fresh SphereField) or an (N,3) array.
    """
    if isinstance(values, SphereField):
        return SphereField(values.domain, renormalize(values.values))
    norms = np.linalg.norm(values, axis=1)
    bad = np.flatnonzero(norms < 1e-300)
    if len(bad):
        raise ValueError(f"cannot renormalize zero vector at node {bad[0]}")
    return values / norms[:, None]


def make_field(domain, fn: Callable[[np.ndarray], np.ndarray]) -> SphereField:
    """Evaluate ``fn`` on node coordinates and renormalize.

    ``fn`` maps an (N,3) coordinate array to (N,3) directions; rows that come
    back as the zero vector raise with the offending node named.
    """
    vals = np.asarray(fn(domain.coords), float)
    if vals.shape != (domain.n_nodes, 3):
        raise ValueError(f"field function returned shape {vals.shape}, "
                         f"expected {(domain.n_nodes, 3)}")
    return SphereField(domain, renormalize(vals))


def boundary_mean(field: SphereField) -> np.ndarray:
    """Area-weighted mean of the field over the graph-surface nodes."""
    dom = field.domain
    if not isinstance(dom, GraphDomain):
        raise TypeError("boundary_mean needs a graph domain")
    w = dom.graph_area_w
    u = field.values[dom.graph_nodes]
    return np.sum(u * w[:, None], axis=0) / np.sum(w)


def tangency_violation(field: SphereField) -> tuple:
    """Max |u . nu| over graph nodes and the node id attaining it."""
    dom = field.domain
    if not isinstance(dom, GraphDomain):
        raise TypeError("tangency_violation needs a graph domain")
    if len(dom.graph_nodes) == 0:
        return 0.0, -1
    dots = np.abs(np.sum(field.values[dom.graph_nodes] * dom.graph_frame.nu, axis=1))
    k = int(np.argmax(dots))
    return float(dots[k]), int(dom.graph_nodes[k])


def project_tangent(field: SphereField) -> SphereField:
    """Remove the normal component at graph nodes, then renormalize there."""
    dom = field.domain
    out = field.values.copy()
    g = dom.graph_nodes
    nu = dom.graph_frame.nu
    u = out[g]
    u = u - nu * np.sum(u * nu, axis=1, keepdims=True)
    out[g] = renormalize(u)
    return SphereField(dom, out)


# ---------------------------------------------------------------------------
# IO

CSV_HEADER = ["node", "x", "y", "z", "u1", "u2", "u3"]


def field_to_csv(field: SphereField, path) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(CSV_HEADER)
        for i, (c, u) in enumerate(zip(field.domain.coords, field.values)):
            wr.writerow([i] + [repr(float(v)) for v in (*c, *u)])


def field_from_csv(domain, path) -> SphereField:
    """Load nodal values written by :func:`field_to_csv` (validated)."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    if rows.ndim == 1:
        rows = rows[None, :]
    if len(rows) != domain.n_nodes:
        raise ValueError(f"{path}: {len(rows)} rows for a domain with "
                         f"{domain.n_nodes} nodes")
    order = np.argsort(rows[:, 0].astype(int))
    rows = rows[order]
    if np.max(np.abs(rows[:, 1:4] - domain.coords)) > 1e-9:
        raise ValueError(f"{path}: node coordinates do not match the domain")
    return SphereField(domain, np.ascontiguousarray(rows[:, 4:7]))


def field_to_vtk(field: SphereField, path) -> None:
    write_vtk_points(path, field.domain.coords, {"director": field.values})
