"""Zonotopes and the set operations needed for reachset conformance checking.

A zonotope is the affine image of a unit hypercube: ``{c + G @ lam :
|lam|_inf <= 1}`` with center ``c`` and generator matrix ``G`` (one
generator per column).  Everything here is dense numpy; sets stay small
(output dimension times a few dozen generators).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .optim import LinearProgram, solve_lp

__all__ = [
    "Zonotope",
    "HalfspacePolytope",
    "DegenerateSetError",
    "minkowski_sum",
    "cartesian_product",
    "linear_map",
    "interval_norm",
    "to_halfspace",
    "contains",
    "containment_scaling",
]


class DegenerateSetError(ValueError):
    """Halfspace conversion was asked for a zonotope that is not full-dimensional."""


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-d array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


@dataclass(frozen=True)
class Zonotope:
    center: np.ndarray
    generators: np.ndarray

    def __post_init__(self):
        c = _as_vector(self.center, "center")
        G = np.asarray(self.generators, dtype=float)
        if G.size == 0:
            G = G.reshape(c.shape[0], -1)
        if G.ndim != 2 or G.shape[0] != c.shape[0]:
            raise ValueError(
                f"generators must have shape ({c.shape[0]}, eta), got {G.shape}"
            )
        if not np.all(np.isfinite(G)):
            raise ValueError("generators contain non-finite entries")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", G)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def order(self) -> int:
        """Number of generators."""
        return self.generators.shape[1]

    @classmethod
    def point(cls, center) -> "Zonotope":
        c = _as_vector(center, "center")
        return cls(c, np.zeros((c.shape[0], 0)))

    @classmethod
    def box(cls, center, radius) -> "Zonotope":
        """Axis-aligned box given per-coordinate half-widths."""
        c = _as_vector(center, "center")
        r = _as_vector(radius, "radius")
        if r.shape != c.shape:
            raise ValueError("radius shape does not match center")
        if np.any(r < 0):
            raise ValueError("radius must be nonnegative")
        return cls(c, np.diag(r))

    def __add__(self, other: "Zonotope") -> "Zonotope":
        return minkowski_sum(self, other)

    def radius(self) -> np.ndarray:
        """Half-widths of the tight axis-aligned interval hull."""
        return np.abs(self.generators).sum(axis=1)

    def support(self, direction) -> float:
        """Support function value max_{x in Z} <direction, x>."""
        d = _as_vector(direction, "direction")
        return float(d @ self.center + np.abs(d @ self.generators).sum())

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Uniform factor samples; covers the set but not uniformly in volume."""
        if size is None:
            lam = rng.uniform(-1.0, 1.0, self.order)
            return self.center + self.generators @ lam
        lam = rng.uniform(-1.0, 1.0, (size, self.order))
        return self.center + lam @ self.generators.T


@dataclass(frozen=True)
class HalfspacePolytope:
    """Intersection of halfspaces ``normals @ x <= offsets``."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        N = np.asarray(self.normals, dtype=float)
        d = np.asarray(self.offsets, dtype=float)
        if N.ndim != 2 or d.ndim != 1 or N.shape[0] != d.shape[0]:
            raise ValueError("normals (h, n) and offsets (h,) must align")
        object.__setattr__(self, "normals", N)
        object.__setattr__(self, "offsets", d)

    @property
    def n_facets(self) -> int:
        return self.normals.shape[0]

    def contains(self, point, tol: float = 0.0) -> bool:
        p = _as_vector(point, "point")
        return bool(np.all(self.normals @ p <= self.offsets + tol))


def minkowski_sum(a: Zonotope, b: Zonotope) -> Zonotope:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return Zonotope(a.center + b.center, np.hstack([a.generators, b.generators]))


def cartesian_product(a: Zonotope, b: Zonotope) -> Zonotope:
    c = np.concatenate([a.center, b.center])
    G = np.zeros((a.dim + b.dim, a.order + b.order))
    G[: a.dim, : a.order] = a.generators
    G[a.dim :, a.order :] = b.generators
    return Zonotope(c, G)


def linear_map(matrix, z: Zonotope) -> Zonotope:
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[1] != z.dim:
        raise ValueError(f"matrix shape {A.shape} does not map dimension {z.dim}")
    return Zonotope(A @ z.center, A @ z.generators)


def interval_norm(z: Zonotope) -> float:
    """Sum of interval-hull widths: ones @ |G| @ ones."""
    return float(np.abs(z.generators).sum())


def _cross_normal(columns: np.ndarray) -> np.ndarray:
    """Generalized cross product of n-1 vectors in R^n (cofactor expansion)."""
    n = columns.shape[0]
    v = np.empty(n)
    for i in range(n):
        minor = np.delete(columns, i, axis=0)
        v[i] = (-1.0) ** i * np.linalg.det(minor)
    return v


def to_halfspace(z: Zonotope, dedup_tol: float = 1e-10) -> HalfspacePolytope:
    """Exact halfspace representation of a full-dimensional zonotope.

    Facet normals are orthogonal to (n-1)-subsets of generators; both
    orientations are emitted, offsets are support values, and parallel
    normals are merged keeping the smallest offset.  Raises
    DegenerateSetError when the generators do not span R^n.
    """
    n, eta = z.dim, z.order
    if np.linalg.matrix_rank(z.generators) < n:
        raise DegenerateSetError(
            f"zonotope with {eta} generators does not span R^{n}"
        )
    G = z.generators
    if n == 1:
        V = np.array([[1.0], [-1.0]])
        return HalfspacePolytope(V, V @ z.center + np.abs(G).sum())
    if n == 2:
        return _to_halfspace_2d(z, dedup_tol)
    half = _facet_directions(G, dedup_tol)
    V = np.vstack([half, -half])
    delta = np.abs(V @ G).sum(axis=1)
    return HalfspacePolytope(V, V @ z.center + delta)


_NORMAL_CHUNK = 65536


def _facet_directions(G: np.ndarray, dedup_tol: float) -> np.ndarray:
    """One representative per facet direction, deduplicated in bulk.

    Candidate subsets are processed in bounded chunks so that the
    combinatorial blowup in high dimensions costs time, not memory.
    """
    n, eta = G.shape
    combos = itertools.combinations(range(eta), n - 1)
    found = []
    while True:
        block = list(itertools.islice(combos, _NORMAL_CHUNK))
        if not block:
            break
        idx = np.asarray(block, dtype=np.intp)
        S = np.moveaxis(G[:, idx], 1, 0)  # (m, n, n-1)
        V = np.empty((idx.shape[0], n))
        sign = 1.0
        for i in range(n):
            rows = np.concatenate([np.arange(i), np.arange(i + 1, n)])
            V[:, i] = sign * np.linalg.det(S[:, rows, :])
            sign = -sign
        norms = np.linalg.norm(V, axis=1)
        ok = norms > dedup_tol
        V = V[ok] / norms[ok, None]
        if V.size:
            lead = V[np.arange(V.shape[0]), np.abs(V).argmax(axis=1)]
            found.append(np.where(lead[:, None] < 0.0, -V, V))
    if not found:
        raise DegenerateSetError("no facet normals found")
    V = np.vstack(found)
    _, keep = np.unique(np.round(V / dedup_tol) * dedup_tol, axis=0, return_index=True)
    keep.sort()
    return V[keep]


def _to_halfspace_2d(z: Zonotope, dedup_tol: float) -> HalfspacePolytope:
    # planar case is the hot path; one perpendicular per generator,
    # duplicates removed in bulk rather than pairwise
    G = z.generators
    V = np.stack([-G[1], G[0]], axis=1)
    norms = np.linalg.norm(V, axis=1)
    V = V[norms > dedup_tol] / norms[norms > dedup_tol, None]
    V = np.vstack([V, -V])
    delta = np.abs(V @ G).sum(axis=1)
    offsets = V @ z.center + delta
    _, keep = np.unique(np.round(V / dedup_tol) * dedup_tol, axis=0, return_index=True)
    keep.sort()
    return HalfspacePolytope(V[keep], offsets[keep])


def containment_scaling(z: Zonotope, point) -> float:
    """Smallest t >= 0 with point in ``{c + G lam : |lam|_inf <= t}``.

    Returns inf when the point is outside the affine span of the
    generators.  Decided by a small LP, so degenerate (flat) zonotopes
    are handled exactly.
    """
    p = _as_vector(point, "point")
    if p.shape[0] != z.dim:
        raise ValueError("point dimension mismatch")
    r = p - z.center
    eta = z.order
    if eta == 0:
        return 0.0 if np.abs(r).max(initial=0.0) <= 1e-12 else np.inf
    # variables [lam (eta), t]; min t  s.t.  G lam = r,  -t <= lam_i <= t
    c = np.zeros(eta + 1)
    c[-1] = 1.0
    A_eq = np.hstack([z.generators, np.zeros((z.dim, 1))])
    ones = np.ones((eta, 1))
    A_ub = np.block([[np.eye(eta), -ones], [-np.eye(eta), -ones]])
    b_ub = np.zeros(2 * eta)
    bounds = [(None, None)] * eta + [(0.0, None)]
    lp = LinearProgram(c=c, a_ub=A_ub, b_ub=b_ub, a_eq=A_eq, b_eq=r, bounds=bounds)
    sol = solve_lp(lp)
    if sol.status == "infeasible":
        return np.inf
    if sol.status != "optimal":
        raise RuntimeError(f"containment LP ended with status {sol.status}")
    return float(sol.x[-1])


def contains(z: Zonotope, point, tol: float = 1e-9) -> bool:
    """Membership test: is there |lam|_inf <= 1 + tol with c + G lam = point."""
    return containment_scaling(z, point) <= 1.0 + tol
