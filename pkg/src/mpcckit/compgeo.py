"""Geometry of the complementarity set.

The planar complementarity set is ``C2 = {(a, b) : a >= 0, b >= 0, ab = 0}``;
stacked pair values live in its componentwise product C. For problems whose
pair maps select (signed, offset) coordinates of x, the slack-free feasible
set

    D = {x : G(x) >= 0, H(x) >= 0, G(x)' H(x) = 0}

decouples into independent planar pairs, so nearest-point projection onto D
is closed-form as well. This module provides those projections, the limiting
normal cone of C2 at a feasible pair, and the stationarity measure
dist(-grad, N_domain(point)) used to terminate the augmented-Lagrangian
subproblems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PairPartition",
    "project_pair",
    "project_onto_C",
    "project_onto_D",
    "normal_cone_distance_pair",
    "stationarity_distance",
]


@dataclass(frozen=True)
class PairPartition:
    """Coordinate-selection structure of the pair maps G and H.

    Pair i reads ``a_i = sign_g[i] * x[idx_g[i]] + off_g[i]`` and
    ``b_i = sign_h[i] * x[idx_h[i]] + off_h[i]``. All selected coordinate
    indices are pairwise distinct, so the pairs decouple under projection and
    normal-cone computations.
    """

    idx_g: np.ndarray
    idx_h: np.ndarray
    off_g: np.ndarray
    off_h: np.ndarray
    sign_g: np.ndarray
    sign_h: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "idx_g", np.asarray(self.idx_g, dtype=int))
        object.__setattr__(self, "idx_h", np.asarray(self.idx_h, dtype=int))
        for name in ("off_g", "off_h", "sign_g", "sign_h"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        used = np.concatenate([self.idx_g, self.idx_h])
        if used.size != np.unique(used).size:
            raise ValueError("pair coordinate indices must be pairwise distinct")
        if not np.all(np.abs(np.concatenate([self.sign_g, self.sign_h])) == 1.0):
            raise ValueError("pair signs must be +-1")

    @property
    def t(self) -> int:
        return int(self.idx_g.size)

    @classmethod
    def from_rows(cls, A_G, b_G, A_H, b_H) -> "PairPartition":
        """Extract the partition from signed unit constraint rows."""

        def split(A):
            A = np.asarray(A, dtype=float)
            idx = np.zeros(A.shape[0], dtype=int)
            sign = np.zeros(A.shape[0])
            for i, row in enumerate(A):
                nz = np.flatnonzero(row)
                if nz.size != 1 or abs(row[nz[0]]) != 1.0:
                    raise ValueError(
                        "coordinate-selection rows must be signed unit vectors"
                    )
                idx[i], sign[i] = nz[0], row[nz[0]]
            return idx, sign

        idx_g, sign_g = split(A_G)
        idx_h, sign_h = split(A_H)
        return cls(idx_g, idx_h, np.asarray(b_G, float), np.asarray(b_H, float),
                   sign_g, sign_h)

    def values(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pair values (a, b) = (G(x), H(x)) read off the coordinates."""
        x = np.asarray(x, dtype=float)
        a = self.sign_g * x[self.idx_g] + self.off_g
        b = self.sign_h * x[self.idx_h] + self.off_h
        return a, b


def project_pair(a: float, b: float) -> tuple[float, float]:
    """Nearest point of {(s, u) : s >= 0, u >= 0, su = 0}; ties go to (a, 0)."""
    d_first = min(a, 0.0) ** 2 + b * b
    d_second = a * a + min(b, 0.0) ** 2
    if d_first <= d_second:
        return (max(a, 0.0), 0.0)
    return (0.0, max(b, 0.0))


def project_onto_C(z_g, z_h) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise nearest point of the complementarity set."""
    a = np.asarray(z_g, dtype=float)
    b = np.asarray(z_h, dtype=float)
    d_first = np.minimum(a, 0.0) ** 2 + b * b
    d_second = a * a + np.minimum(b, 0.0) ** 2
    first = d_first <= d_second
    return (np.where(first, np.maximum(a, 0.0), 0.0),
            np.where(first, 0.0, np.maximum(b, 0.0)))


def project_onto_D(x, pairs: PairPartition) -> np.ndarray:
    """Nearest point of D for coordinate-selection pair maps.

    Coordinates outside the pairs are untouched; each selected coordinate is
    moved by the planar projection mapped through the (isometric) signed,
    offset coordinate change.
    """
    out = np.array(x, dtype=float)
    a, b = pairs.values(out)
    pa, pb = project_onto_C(a, b)
    out[pairs.idx_g] = pairs.sign_g * (pa - pairs.off_g)
    out[pairs.idx_h] = pairs.sign_h * (pb - pairs.off_h)
    return out


def _pair_cone_distances(a, b, p, q, tol):
    """Distances of (p_i, q_i) to the limiting normal cone of C2 at (a_i, b_i).

    Pair values within tol of a boundary pattern are snapped to it; pairs that
    remain infeasible after snapping are a hard error.
    """
    a = np.where(np.abs(a) <= tol, 0.0, np.asarray(a, dtype=float))
    b = np.where(np.abs(b) <= tol, 0.0, np.asarray(b, dtype=float))
    if np.any(a < 0.0) or np.any(b < 0.0) or np.any((a > 0.0) & (b > 0.0)):
        raise ValueError("pair values are not complementarity-feasible within tol")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    # branches of the cone at a biactive pair: R_- x R_-, {0} x R, R x {0}
    d_quad = np.hypot(np.maximum(p, 0.0), np.maximum(q, 0.0))
    d_p_axis = np.abs(p)
    d_q_axis = np.abs(q)
    d_biactive = np.minimum(d_quad, np.minimum(d_p_axis, d_q_axis))
    return np.where(a > 0.0, d_p_axis, np.where(b > 0.0, d_q_axis, d_biactive))


def normal_cone_distance_pair(a: float, b: float, p: float, q: float,
                              tol: float = 1e-6) -> float:
    """Distance of (p, q) to the limiting normal cone of C2 at (a, b)."""
    d = _pair_cone_distances(np.array([a]), np.array([b]),
                             np.array([p]), np.array([q]), tol)
    return float(d[0])


def _make_projector_onto_D(pairs: PairPartition):
    """Closure form of project_onto_D with the pair structure prebound.

    Identical arithmetic to the public function; exists because the
    augmented-Lagrangian subproblem calls the projection hundreds of
    thousands of times.
    """
    idx_g, idx_h = pairs.idx_g, pairs.idx_h
    sign_g, sign_h = pairs.sign_g, pairs.sign_h
    off_g, off_h = pairs.off_g, pairs.off_h

    def proj(x):
        out = np.array(x, dtype=float)
        a = sign_g * out[idx_g] + off_g
        b = sign_h * out[idx_h] + off_h
        d_first = np.minimum(a, 0.0) ** 2 + b * b
        d_second = a * a + np.minimum(b, 0.0) ** 2
        first = d_first <= d_second
        pa = np.where(first, np.maximum(a, 0.0), 0.0)
        pb = np.where(first, 0.0, np.maximum(b, 0.0))
        out[idx_g] = sign_g * (pa - off_g)
        out[idx_h] = sign_h * (pb - off_h)
        return out

    return proj


def _make_stationarity_D(pairs: PairPartition, n: int, tol: float = 1e-6):
    """Closure form of the D-domain stationarity measure (prebound indices)."""
    idx_g, idx_h = pairs.idx_g, pairs.idx_h
    sign_g, sign_h = pairs.sign_g, pairs.sign_h
    off_g, off_h = pairs.off_g, pairs.off_h
    free = np.ones(n, dtype=bool)
    free[idx_g] = False
    free[idx_h] = False
    idx_free = np.flatnonzero(free)

    def stat(point, grad):
        a = sign_g * point[idx_g] + off_g
        b = sign_h * point[idx_h] + off_h
        p = sign_g * -grad[idx_g]
        q = sign_h * -grad[idx_h]
        pair_d = _pair_cone_distances(a, b, p, q, tol)
        gf = grad[idx_free]
        return float(np.sqrt(np.sum(gf ** 2) + np.sum(pair_d ** 2)))

    return stat


def stationarity_distance(grad, point, pairs: PairPartition | None = None,
                          t: int = 0, tol: float = 1e-6) -> float:
    """Distance of -grad to the limiting normal cone of the domain at point.

    With ``pairs`` given, the domain is D (slack-free coordinate selection):
    pair components of -grad are tested against the planar cone in (a, b)
    coordinates and the remaining components against {0}. Otherwise the domain
    is R^(n) x C with the trailing 2t components forming the slack pairs
    (t = 0 reduces to the plain gradient norm).
    """
    grad = np.asarray(grad, dtype=float)
    point = np.asarray(point, dtype=float)
    minus = -grad
    if pairs is not None:
        a, b = pairs.values(point)
        p = pairs.sign_g * minus[pairs.idx_g]
        q = pairs.sign_h * minus[pairs.idx_h]
        pair_d = _pair_cone_distances(a, b, p, q, tol)
        free = np.ones(point.size, dtype=bool)
        free[pairs.idx_g] = False
        free[pairs.idx_h] = False
        return float(np.sqrt(np.sum(grad[free] ** 2) + np.sum(pair_d ** 2)))
    if t == 0:
        return float(np.linalg.norm(grad))
    n_free = point.size - 2 * t
    pair_d = _pair_cone_distances(point[n_free:n_free + t], point[n_free + t:],
                                  minus[n_free:n_free + t], minus[n_free + t:], tol)
    return float(np.sqrt(np.sum(grad[:n_free] ** 2) + np.sum(pair_d ** 2)))
