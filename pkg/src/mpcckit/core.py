"""Problem data, Lagrangian machinery, index sets, and stationarity tests.

A problem instance is the finite-dimensional complementarity-constrained
quadratic program

    min  1/2 x'Qx + q'x + c0
    s.t. g(x) = A_g x + b_g <= 0
         h(x) = A_h x + b_h  = 0
         G(x) = A_G x + b_G >= 0,  H(x) = A_H x + b_H >= 0,  G(x)'H(x) = 0.

Multipliers m = (lambda, eta, mu, nu) enter the Lagrangian

    L(x, m) = f(x) + lambda'g(x) + eta'h(x) + mu'G(x) + nu'H(x),

and a primal-dual pair is graded along the stationarity chain S => M => C => W
by sign conditions on (mu_i, nu_i) over the biactive pairs: every flavor
requires grad_x L = 0, lambda >= 0 supported on active g rows, mu_i = 0 where
G_i > 0 and nu_i = 0 where H_i > 0; C additionally requires mu_i nu_i >= 0 on
biactive pairs, M requires (mu_i < 0 and nu_i < 0) or mu_i nu_i = 0, and S
requires mu_i <= 0 and nu_i <= 0.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .compgeo import PairPartition

__all__ = [
    "QuadraticMpcc",
    "MultiplierSet",
    "IndexSets",
    "StationarityReport",
    "eval_lagrangian",
    "compute_index_sets",
    "classify_stationarity",
    "check_mpcc_licq",
    "check_mpcc_ssoc",
    "save_instance",
    "load_instance",
]


def _as_matrix(a, rows: int, cols: int, name: str) -> np.ndarray:
    a = np.zeros((rows, cols)) if a is None else np.asarray(a, dtype=float)
    if a.shape != (rows, cols):
        raise ValueError(f"{name} must have shape {(rows, cols)}, got {a.shape}")
    return a


def _as_vector(a, size: int, name: str) -> np.ndarray:
    a = np.zeros(size) if a is None else np.asarray(a, dtype=float)
    if a.shape != (size,):
        raise ValueError(f"{name} must have shape {(size,)}, got {a.shape}")
    return a


@dataclass(frozen=True)
class QuadraticMpcc:
    """Immutable data of one linear-quadratic MPCC instance."""

    n: int
    r: int
    s: int
    t: int
    Q: np.ndarray
    q: np.ndarray
    c0: float
    A_g: np.ndarray
    b_g: np.ndarray
    A_h: np.ndarray
    b_h: np.ndarray
    A_G: np.ndarray
    b_G: np.ndarray
    A_H: np.ndarray
    b_H: np.ndarray
    coordinate_selection: bool = False

    def __post_init__(self):
        n, r, s, t = self.n, self.r, self.s, self.t
        conv = {
            "Q": _as_matrix(self.Q, n, n, "Q"),
            "q": _as_vector(self.q, n, "q"),
            "A_g": _as_matrix(self.A_g, r, n, "A_g"),
            "b_g": _as_vector(self.b_g, r, "b_g"),
            "A_h": _as_matrix(self.A_h, s, n, "A_h"),
            "b_h": _as_vector(self.b_h, s, "b_h"),
            "A_G": _as_matrix(self.A_G, t, n, "A_G"),
            "b_G": _as_vector(self.b_G, t, "b_G"),
            "A_H": _as_matrix(self.A_H, t, n, "A_H"),
            "b_H": _as_vector(self.b_H, t, "b_H"),
        }
        sym_gap = np.linalg.norm(conv["Q"] - conv["Q"].T)
        if sym_gap > 1e-12 * np.linalg.norm(conv["Q"]):
            raise ValueError("Q must be symmetric")
        for name, arr in conv.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "c0", float(self.c0))
        if self.coordinate_selection and t > 0:
            # raises if rows are not signed units on pairwise-distinct coordinates
            PairPartition.from_rows(self.A_G, self.b_G, self.A_H, self.b_H)

    @classmethod
    def build(cls, Q=None, q=None, c0=0.0, A_g=None, b_g=None, A_h=None, b_h=None,
              A_G=None, b_G=None, A_H=None, b_H=None,
              coordinate_selection=False, n=None) -> "QuadraticMpcc":
        """Construct with dimensions inferred and absent blocks left empty."""
        if n is None:
            for cand in (q, Q):
                if cand is not None:
                    n = np.asarray(cand).shape[-1]
                    break
            else:
                raise ValueError("cannot infer n: provide Q, q, or n")
        r = 0 if A_g is None else np.asarray(A_g).shape[0]
        s = 0 if A_h is None else np.asarray(A_h).shape[0]
        t = 0 if A_G is None else np.asarray(A_G).shape[0]
        return cls(n=n, r=r, s=s, t=t, Q=Q, q=q, c0=c0,
                   A_g=A_g, b_g=b_g, A_h=A_h, b_h=b_h,
                   A_G=A_G, b_G=b_G, A_H=A_H, b_H=b_H,
                   coordinate_selection=coordinate_selection)

    # pointwise evaluations
    def f(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.Q @ x) + self.q @ x + self.c0)

    def grad_f(self, x) -> np.ndarray:
        return self.Q @ np.asarray(x, dtype=float) + self.q

    def f_grad(self, x):
        """(f(x), grad f(x)) sharing a single Q @ x product."""
        x = np.asarray(x, dtype=float)
        qx = self.Q @ x
        return float(0.5 * x @ qx + self.q @ x + self.c0), qx + self.q

    def g(self, x) -> np.ndarray:
        return self.A_g @ np.asarray(x, dtype=float) + self.b_g

    def h(self, x) -> np.ndarray:
        return self.A_h @ np.asarray(x, dtype=float) + self.b_h

    def G(self, x) -> np.ndarray:
        return self.A_G @ np.asarray(x, dtype=float) + self.b_G

    def H(self, x) -> np.ndarray:
        return self.A_H @ np.asarray(x, dtype=float) + self.b_H

    def pair_partition(self) -> PairPartition:
        """Pair structure for the slack-free geometry (coordinate selection only)."""
        if not self.coordinate_selection:
            raise ValueError("problem is not in coordinate-selection form")
        return PairPartition.from_rows(self.A_G, self.b_G, self.A_H, self.b_H)


@dataclass
class MultiplierSet:
    """Multipliers (lambda, eta, mu, nu) for the four constraint blocks."""

    lam: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)

    @classmethod
    def zeros(cls, problem: QuadraticMpcc) -> "MultiplierSet":
        return cls(np.zeros(problem.r), np.zeros(problem.s),
                   np.zeros(problem.t), np.zeros(problem.t))

    def copy(self) -> "MultiplierSet":
        return MultiplierSet(self.lam.copy(), self.eta.copy(),
                             self.mu.copy(), self.nu.copy())

    def concat(self) -> np.ndarray:
        return np.concatenate([self.lam, self.eta, self.mu, self.nu])


@dataclass(frozen=True)
class IndexSets:
    """Active-set partition at (x, m) and its multiplier refinements.

    i_g collects active inequality rows; i_plus0 / i_0plus / i_00 partition the
    feasible pairs by (G_i > 0, H_i = 0), (G_i = 0, H_i > 0), (G_i = H_i = 0).
    Refinements: i_g_plus are active rows with lambda_i > tol, i_00_pmR /
    i_00_Rpm the biactive pairs with mu_i != 0 / nu_i != 0, and i_00_00 the
    biactive pairs with both multipliers zero (all within tol).
    """

    i_g: np.ndarray
    i_plus0: np.ndarray
    i_0plus: np.ndarray
    i_00: np.ndarray
    i_g_plus: np.ndarray
    i_00_pmR: np.ndarray
    i_00_Rpm: np.ndarray
    i_00_00: np.ndarray
    tol: float


@dataclass(frozen=True)
class StationarityReport:
    is_feasible: bool
    is_W: bool
    is_C: bool
    is_M: bool
    is_S: bool
    worst_violation: dict = field(default_factory=dict)


def eval_lagrangian(problem: QuadraticMpcc, x, m: MultiplierSet):
    """Value, gradient, and (constant) Hessian of the MPCC Lagrangian."""
    x = np.asarray(x, dtype=float)
    value = (problem.f(x) + m.lam @ problem.g(x) + m.eta @ problem.h(x)
             + m.mu @ problem.G(x) + m.nu @ problem.H(x))
    grad = (problem.grad_f(x) + problem.A_g.T @ m.lam + problem.A_h.T @ m.eta
            + problem.A_G.T @ m.mu + problem.A_H.T @ m.nu)
    return float(value), grad, problem.Q


def compute_index_sets(problem: QuadraticMpcc, x, m: MultiplierSet,
                       tol: float = 1e-6) -> IndexSets:
    g = problem.g(x)
    G = problem.G(x)
    H = problem.H(x)
    i_g = np.flatnonzero(g >= -tol)
    g_zero = np.abs(G) <= tol
    h_zero = np.abs(H) <= tol
    i_plus0 = np.flatnonzero((G > tol) & h_zero)
    i_0plus = np.flatnonzero(g_zero & (H > tol))
    i_00 = np.flatnonzero(g_zero & h_zero)
    i_g_plus = i_g[m.lam[i_g] > tol] if i_g.size else i_g
    mu_nz = np.abs(m.mu[i_00]) > tol
    nu_nz = np.abs(m.nu[i_00]) > tol
    return IndexSets(i_g=i_g, i_plus0=i_plus0, i_0plus=i_0plus, i_00=i_00,
                     i_g_plus=i_g_plus,
                     i_00_pmR=i_00[mu_nz], i_00_Rpm=i_00[nu_nz],
                     i_00_00=i_00[~mu_nz & ~nu_nz], tol=tol)


def classify_stationarity(problem: QuadraticMpcc, x, m: MultiplierSet,
                          tol: float = 1e-6) -> StationarityReport:
    """Grade (x, m) along the chain S => M => C => W, enforced structurally."""
    x = np.asarray(x, dtype=float)
    g, h = problem.g(x), problem.h(x)
    G, H = problem.G(x), problem.H(x)
    sets = compute_index_sets(problem, x, m, tol)

    def vmax(*vals):
        parts = [np.max(v) if np.size(v) else 0.0 for v in vals]
        return float(max([0.0, *parts]))

    feas_viol = vmax(g, np.abs(h), -G, -H,
                     np.minimum(G, H) if problem.t else 0.0)
    is_feasible = feas_viol <= tol

    _, grad_l, _ = eval_lagrangian(problem, x, m)
    off_g = np.setdiff1d(np.arange(problem.r), sets.i_g)
    w_viol = vmax(np.abs(grad_l),
                  -m.lam[sets.i_g], np.abs(m.lam[off_g]),
                  np.abs(m.mu[sets.i_plus0]), np.abs(m.nu[sets.i_0plus]))
    is_w = w_viol <= tol

    mu00, nu00 = m.mu[sets.i_00], m.nu[sets.i_00]
    prod = mu00 * nu00
    c_viol = vmax(-prod)
    is_c = is_w and c_viol <= tol

    # M on biactive pairs: strictly negative branch, or vanishing product
    # (product test scaled so large opposite-sign multipliers cannot pass)
    strict = (mu00 < -tol) & (nu00 < -tol)
    prod_scale = np.maximum(1.0, np.maximum(np.abs(mu00), np.abs(nu00)))
    prod_ok = np.abs(prod) <= tol * prod_scale
    m_viol = vmax(np.where(strict | prod_ok, 0.0,
                           np.minimum(np.abs(prod) / prod_scale,
                                      np.maximum(np.maximum(mu00, nu00), 0.0))))
    is_m = is_c and bool(np.all(strict | prod_ok))

    s_viol = vmax(mu00, nu00)
    is_s = is_m and s_viol <= tol

    return StationarityReport(
        is_feasible=bool(is_feasible), is_W=bool(is_w), is_C=bool(is_c),
        is_M=bool(is_m), is_S=bool(is_s),
        worst_violation={"feasibility": feas_viol, "W": w_viol, "C": c_viol,
                         "M": m_viol, "S": s_viol})


def _licq_rows(problem: QuadraticMpcc, sets: IndexSets) -> np.ndarray:
    idx_G = np.union1d(sets.i_0plus, sets.i_00).astype(int)
    idx_H = np.union1d(sets.i_plus0, sets.i_00).astype(int)
    return np.vstack([problem.A_g[sets.i_g], problem.A_h,
                      problem.A_G[idx_G], problem.A_H[idx_H]])


def check_mpcc_licq(problem: QuadraticMpcc, x, sets: IndexSets) -> bool:
    """Linear independence of active g rows, all h rows, and the active pair rows."""
    rows = _licq_rows(problem, sets)
    if rows.shape[0] == 0:
        return True
    if rows.shape[0] > rows.shape[1]:
        return False
    sv = np.linalg.svd(rows, compute_uv=False)
    return bool(sv[-1] > 1e-10 * sv[0])


def check_mpcc_ssoc(problem: QuadraticMpcc, x, m: MultiplierSet,
                    sets: IndexSets):
    """Second-order sufficiency over the critical directions.

    Enumerates the 2^k branch subspaces induced by the biactive pairs with
    vanishing multipliers (the union whose branches fix G_i'd = 0 or
    H_i'd = 0) and requires the reduced Lagrangian Hessian to be positive
    definite on every branch nullspace. Returns True / False, or None when
    k > 20 and the check is skipped.
    """
    free = sets.i_00_00
    if free.size > 20:
        return None
    idx_G = np.union1d(sets.i_0plus, sets.i_00_pmR).astype(int)
    idx_H = np.union1d(sets.i_plus0, sets.i_00_Rpm).astype(int)
    base = np.vstack([problem.A_g[sets.i_g_plus], problem.A_h,
                      problem.A_G[idx_G], problem.A_H[idx_H]])
    hess = problem.Q  # affine constraints leave the Hessian equal to Q
    for choice in itertools.product((0, 1), repeat=free.size):
        extra = [problem.A_G[i:i + 1] if c == 0 else problem.A_H[i:i + 1]
                 for i, c in zip(free, choice)]
        rows = np.vstack([base, *extra]) if extra else base
        if rows.shape[0] == 0:
            basis = np.eye(problem.n)
        else:
            basis = null_space(rows)
        if basis.shape[1] == 0:
            continue
        reduced = basis.T @ hess @ basis
        if np.min(np.linalg.eigvalsh(reduced)) <= 1e-10:
            return False
    return True


# ---------------------------------------------------------------------------
# portable instance files: JSON with dense or coordinate-list matrix blocks

_FORMAT_NAME = "mpcc-instance"


def _encode_matrix(mat: np.ndarray):
    mat = np.asarray(mat, dtype=float)
    nnz = np.count_nonzero(mat)
    if mat.size > 64 and nnz < 0.25 * mat.size:
        ii, jj = np.nonzero(mat)
        return {"shape": list(mat.shape),
                "entries": [[int(i), int(j), float(mat[i, j])]
                            for i, j in zip(ii, jj)]}
    return [[float(v) for v in row] for row in mat]


def _decode_matrix(obj, rows: int, cols: int) -> np.ndarray:
    if isinstance(obj, dict):
        mat = np.zeros(tuple(obj["shape"]))
        for i, j, v in obj["entries"]:
            mat[int(i), int(j)] = float(v)
        return mat
    mat = np.asarray(obj, dtype=float)
    return mat.reshape(rows, cols)


def save_instance(problem: QuadraticMpcc, path) -> None:
    doc = {
        "format": _FORMAT_NAME,
        "version": 1,
        "n": problem.n, "r": problem.r, "s": problem.s, "t": problem.t,
        "coordinate_selection": problem.coordinate_selection,
        "objective": {"Q": _encode_matrix(problem.Q),
                      "q": [float(v) for v in problem.q],
                      "c0": problem.c0},
        "ineq": {"A": _encode_matrix(problem.A_g),
                 "b": [float(v) for v in problem.b_g]},
        "eq": {"A": _encode_matrix(problem.A_h),
               "b": [float(v) for v in problem.b_h]},
        "comp_G": {"A": _encode_matrix(problem.A_G),
                   "b": [float(v) for v in problem.b_G]},
        "comp_H": {"A": _encode_matrix(problem.A_H),
                   "b": [float(v) for v in problem.b_H]},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_instance(path) -> QuadraticMpcc:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != _FORMAT_NAME:
        raise ValueError(f"not an {_FORMAT_NAME} file: {path}")
    n, r, s, t = (int(doc[k]) for k in ("n", "r", "s", "t"))
    return QuadraticMpcc(
        n=n, r=r, s=s, t=t,
        Q=_decode_matrix(doc["objective"]["Q"], n, n),
        q=np.asarray(doc["objective"]["q"], dtype=float),
        c0=float(doc["objective"]["c0"]),
        A_g=_decode_matrix(doc["ineq"]["A"], r, n),
        b_g=np.asarray(doc["ineq"]["b"], dtype=float),
        A_h=_decode_matrix(doc["eq"]["A"], s, n),
        b_h=np.asarray(doc["eq"]["b"], dtype=float),
        A_G=_decode_matrix(doc["comp_G"]["A"], t, n),
        b_G=np.asarray(doc["comp_G"]["b"], dtype=float),
        A_H=_decode_matrix(doc["comp_H"]["A"], t, n),
        b_H=np.asarray(doc["comp_H"]["b"], dtype=float),
        coordinate_selection=bool(doc.get("coordinate_selection", False)))
