"""Globalized nonsmooth Newton method on the M-stationarity system.

The unknown is the full primal-dual point z = (x, lambda, eta, mu, nu). The
residual stacks

    F(z) = [ grad_x L(z);  min(-g_i(x), lambda_i);  h(x);  phi(pair_i) ]

where phi = (phi1, phi2) is a two-dimensional pairwise residual whose zero set
is exactly the pairwise M-stationarity set

    {(a,0,0,nu) : a >= 0} u {(0,b,mu,0) : b >= 0} u {(0,0,mu,nu) : mu,nu <= 0},

built from componentwise max/min compositions. On that set the selected
linearization is exact in a neighborhood (the Newton iteration terminates
finitely for piecewise linear residuals), but F is discontinuous elsewhere, so
globalization uses the continuously differentiable merit
Phi_FB = 1/2 |F_FB|^2 of a Fischer-Burmeister recast of the same system.
Steps: full Newton step if the linear system is well defined and the step
reduces Phi_FB by the factor q_nsn; otherwise the Newton direction is kept
when it passes an angle test against grad Phi_FB (damped Newton step) or
replaced by the steepest descent direction (gradient step), followed by an
Armijo backtracking line search.

Derivative selection rules (deterministic): min picks the smallest attaining
index, max the first attaining argument in written order, d|t| = sign(t) with
sign(0) := +1 inside F's derivative; inside grad Phi_FB the selections are
d|t| = 0 at t = 0 and the limit direction (-1, -1) for the Fischer-Burmeister
partials at the origin, which make the assembled gradient the exact C^1
gradient.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .alm import SolverTrace, TraceRow
from .core import MultiplierSet, QuadraticMpcc, eval_lagrangian

__all__ = [
    "FullPoint",
    "NewtonConfig",
    "NewtonResult",
    "ncp_min",
    "ncp_fb",
    "phi",
    "theta",
    "residual_F",
    "newton_derivative_DF",
    "merit_phi_fb",
    "solve_newton",
]


@dataclass
class FullPoint:
    """Full primal-dual point (x, lambda, eta, mu, nu)."""

    x: np.ndarray
    lam: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        for name in ("x", "lam", "eta", "mu", "nu"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))

    @classmethod
    def from_parts(cls, x, m: MultiplierSet) -> "FullPoint":
        return cls(x, m.lam, m.eta, m.mu, m.nu)

    @classmethod
    def zeros(cls, problem: QuadraticMpcc) -> "FullPoint":
        return cls.from_parts(np.zeros(problem.n), MultiplierSet.zeros(problem))

    @classmethod
    def from_vector(cls, problem: QuadraticMpcc, v) -> "FullPoint":
        x, lam, eta, mu, nu = _split(problem, np.asarray(v, dtype=float))
        return cls(x, lam, eta, mu, nu)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.lam, self.eta, self.mu, self.nu])

    def multipliers(self) -> MultiplierSet:
        return MultiplierSet(self.lam.copy(), self.eta.copy(),
                             self.mu.copy(), self.nu.copy())


@dataclass
class NewtonConfig:
    q_nsn: float = 0.999
    tau_nsn: float = 1e-11
    angle_rho: float = 1e-3
    armijo_sigma: float = 0.5
    armijo_beta: float = 0.5
    max_iters: int = 1000
    max_backtracks: int = 60
    pivot_tol: float = 1e-12
    merit_grad_tol: float = 1e-12


@dataclass
class NewtonResult:
    z: FullPoint
    status: str  # {"converged","max_iters","stationary_merit","line_search_failure"}
    iterations: int
    full_steps: int
    damped_steps: int
    gradient_steps: int
    final_residual: float
    final_merit: float
    trace: SolverTrace


def _split(problem: QuadraticMpcc, v: np.ndarray):
    n, r, s, t = problem.n, problem.r, problem.s, problem.t
    if v.size != n + r + s + 2 * t:
        raise ValueError(f"full point must have length {n + r + s + 2 * t}")
    return (v[:n], v[n:n + r], v[n + r:n + r + s],
            v[n + r + s:n + r + s + t], v[n + r + s + t:])


def _as_vec(problem: QuadraticMpcc, z) -> np.ndarray:
    if isinstance(z, FullPoint):
        return z.to_vector()
    return np.asarray(z, dtype=float)


def ncp_min(a, b):
    """Componentwise min complementarity function."""
    return np.minimum(a, b)


def ncp_fb(a, b):
    """Componentwise Fischer-Burmeister function sqrt(a^2+b^2) - a - b."""
    return np.sqrt(np.square(a) + np.square(b)) - a - b


def _sgn1(v: float) -> float:
    # derivative selection for |t|: sign with sign(0) := +1
    return 1.0 if v >= 0.0 else -1.0


def _pick_max(pairs):
    """(value, row) of the first argument attaining the maximum, written order."""
    top = max(v for v, _ in pairs)
    for v, row in pairs:
        if v == top:
            return v, row


def _pick_min(pairs):
    """(value, row) of the smallest attaining index of the minimum."""
    low = min(v for v, _ in pairs)
    for v, row in pairs:
        if v == low:
            return v, row


def phi(a: float, b: float, mu: float, nu: float):
    """Pairwise M-stationarity residual (phi1, phi2) and its 2x4 derivative."""
    psi1 = _pick_max([(-a, (-1.0, 0.0, 0.0, 0.0)),
                      (abs(b), (0.0, _sgn1(b), 0.0, 0.0)),
                      (abs(mu), (0.0, 0.0, _sgn1(mu), 0.0))])
    psi2 = _pick_max([(-b, (0.0, -1.0, 0.0, 0.0)),
                      (abs(a), (_sgn1(a), 0.0, 0.0, 0.0)),
                      (abs(nu), (0.0, 0.0, 0.0, _sgn1(nu)))])
    psi3 = _pick_max([(abs(a), (_sgn1(a), 0.0, 0.0, 0.0)),
                      (abs(b), (0.0, _sgn1(b), 0.0, 0.0)),
                      (mu, (0.0, 0.0, 1.0, 0.0)),
                      (nu, (0.0, 0.0, 0.0, 1.0))])
    phi1, row1 = _pick_min([psi1, psi2, psi3])
    axis = int(np.argmax(np.abs(row1)))
    if axis == 0:
        phi2, row2 = _pick_min([(abs(b), (0.0, _sgn1(b), 0.0, 0.0)),
                                (abs(nu), (0.0, 0.0, 0.0, _sgn1(nu)))])
    elif axis == 1:
        phi2, row2 = _pick_min([(abs(a), (_sgn1(a), 0.0, 0.0, 0.0)),
                                (abs(mu), (0.0, 0.0, _sgn1(mu), 0.0))])
    elif axis == 2:
        phi2, row2 = abs(b), (0.0, _sgn1(b), 0.0, 0.0)
    else:
        phi2, row2 = abs(a), (_sgn1(a), 0.0, 0.0, 0.0)
    return np.array([phi1, phi2]), np.array([row1, row2])


def theta(a: float, b: float, mu: float, nu: float) -> np.ndarray:
    """Four-dimensional Fischer-Burmeister recast of the pairwise system."""
    vals = _theta_vec(np.array([a]), np.array([b]),
                      np.array([mu]), np.array([nu]))
    return vals[0]


def _theta_vec(a, b, mu, nu) -> np.ndarray:
    t1 = np.abs(ncp_fb(a, b))
    t2 = ncp_fb(np.abs(a), np.abs(mu))
    t3 = ncp_fb(np.abs(b), np.abs(nu))
    t4 = np.where((mu <= 0.0) & (nu <= 0.0), 0.0, ncp_fb(np.abs(mu), np.abs(nu)))
    return np.stack([t1, t2, t3, t4], axis=1)


def _fb_partials(u, v):
    """Partials of ncp_fb, with the limit selection (-1, -1) at the origin."""
    rn = np.hypot(u, v)
    safe = np.where(rn > 0.0, rn, 1.0)
    du = np.where(rn > 0.0, u / safe - 1.0, -1.0)
    dv = np.where(rn > 0.0, v / safe - 1.0, -1.0)
    return du, dv


def _top_template(problem: QuadraticMpcc, total_rows: int) -> np.ndarray:
    """Constant rows shared by DF and the merit Jacobian."""
    n, r, s, t = problem.n, problem.r, problem.s, problem.t
    width = n + r + s + 2 * t
    out = np.zeros((total_rows, width))
    out[:n, :n] = problem.Q
    out[:n, n:n + r] = problem.A_g.T
    out[:n, n + r:n + r + s] = problem.A_h.T
    out[:n, n + r + s:n + r + s + t] = problem.A_G.T
    out[:n, n + r + s + t:] = problem.A_H.T
    out[n + r:n + r + s, :n] = problem.A_h
    return out


def _residual(problem: QuadraticMpcc, v: np.ndarray) -> np.ndarray:
    n, r, s, t = problem.n, problem.r, problem.s, problem.t
    x, lam, eta, mu, nu = _split(problem, v)
    _, grad_l, _ = eval_lagrangian(problem, x, MultiplierSet(lam, eta, mu, nu))
    out = np.empty(n + r + s + 2 * t)
    out[:n] = grad_l
    out[n:n + r] = ncp_min(-problem.g(x), lam)
    out[n + r:n + r + s] = problem.h(x)
    G, H = problem.G(x), problem.H(x)
    base = n + r + s
    for i in range(t):
        vals, _ = phi(G[i], H[i], mu[i], nu[i])
        out[base + 2 * i:base + 2 * i + 2] = vals
    return out


def _assemble_df(problem: QuadraticMpcc, v: np.ndarray,
                 template: np.ndarray) -> np.ndarray:
    n, r, s, t = problem.n, problem.r, problem.s, problem.t
    df = template.copy()
    x, lam, eta, mu, nu = _split(problem, v)
    g = problem.g(x)
    for i in range(r):
        # min(-g_i, lam_i): smallest attaining index wins ties
        if -g[i] <= lam[i]:
            df[n + i, :n] = -problem.A_g[i]
        else:
            df[n + i, n + i] = 1.0
    G, H = problem.G(x), problem.H(x)
    base = n + r + s
    for i in range(t):
        _, rows = phi(G[i], H[i], mu[i], nu[i])
        for k in range(2):
            rr = base + 2 * i + k
            df[rr, :n] = rows[k, 0] * problem.A_G[i] + rows[k, 1] * problem.A_H[i]
            df[rr, base + i] = rows[k, 2]
            df[rr, base + t + i] = rows[k, 3]
    return df


def _fb_residual(problem: QuadraticMpcc, v: np.ndarray) -> np.ndarray:
    n, r, s, t = problem.n, problem.r, problem.s, problem.t
    x, lam, eta, mu, nu = _split(problem, v)
    _, grad_l, _ = eval_lagrangian(problem, x, MultiplierSet(lam, eta, mu, nu))
    out = np.empty(n + r + s + 4 * t)
    out[:n] = grad_l
    out[n:n + r] = ncp_fb(-problem.g(x), lam)
    out[n + r:n + r + s] = problem.h(x)
    if t:
        out[n + r + s:] = _theta_vec(problem.G(x), problem.H(x), mu, nu).ravel()
    return out


def _fb_value(problem: QuadraticMpcc, v: np.ndarray) -> float:
    res = _fb_residual(problem, v)
    return float(0.5 * res @ res)


def _fb_jacobian(problem: QuadraticMpcc, v: np.ndarray,
                 template: np.ndarray) -> np.ndarray:
    n, r, s, t = problem.n, problem.r, problem.s, problem.t
    jac = template.copy()
    x, lam, eta, mu, nu = _split(problem, v)
    if r:
        du, dv = _fb_partials(-problem.g(x), lam)
        jac[n:n + r, :n] = -du[:, None] * problem.A_g
        jac[np.arange(n, n + r), np.arange(n, n + r)] = dv
    G, H = problem.G(x), problem.H(x)
    base = n + r + s
    mu_col = n + r + s
    nu_col = n + r + s + t
    for i in range(t):
        a, b, m_i, n_i = G[i], H[i], mu[i], nu[i]
        r0 = base + 4 * i
        p = float(ncp_fb(a, b))
        d1a, d1b = _fb_partials(a, b)
        sg = np.sign(p)  # |t| selection inside the merit: 0 at t = 0
        jac[r0, :n] = sg * (d1a * problem.A_G[i] + d1b * problem.A_H[i])
        d2u, d2v = _fb_partials(abs(a), abs(m_i))
        jac[r0 + 1, :n] = d2u * np.sign(a) * problem.A_G[i]
        jac[r0 + 1, mu_col + i] = d2v * np.sign(m_i)
        d3u, d3v = _fb_partials(abs(b), abs(n_i))
        jac[r0 + 2, :n] = d3u * np.sign(b) * problem.A_H[i]
        jac[r0 + 2, nu_col + i] = d3v * np.sign(n_i)
        if not (m_i <= 0.0 and n_i <= 0.0):
            d4u, d4v = _fb_partials(abs(m_i), abs(n_i))
            jac[r0 + 3, mu_col + i] = d4u * np.sign(m_i)
            jac[r0 + 3, nu_col + i] = d4v * np.sign(n_i)
    return jac


def _fb_template(problem: QuadraticMpcc) -> np.ndarray:
    n, r, s, t = problem.n, problem.r, problem.s, problem.t
    return _top_template(problem, n + r + s + 4 * t)


def residual_F(problem: QuadraticMpcc, z) -> np.ndarray:
    """Residual of the M-stationarity system at the full point z."""
    return _residual(problem, _as_vec(problem, z))


def newton_derivative_DF(problem: QuadraticMpcc, z) -> np.ndarray:
    """Selected Newton derivative of residual_F at z (square matrix)."""
    n, r, s, t = problem.n, problem.r, problem.s, problem.t
    template = _top_template(problem, n + r + s + 2 * t)
    return _assemble_df(problem, _as_vec(problem, z), template)


def merit_phi_fb(problem: QuadraticMpcc, z):
    """Value and exact gradient of the C^1 merit 1/2 |F_FB|^2."""
    v = _as_vec(problem, z)
    res = _fb_residual(problem, v)
    jac = _fb_jacobian(problem, v, _fb_template(problem))
    return float(0.5 * res @ res), jac.T @ res


def _solve_linear(df: np.ndarray, rhs: np.ndarray, pivot_tol: float):
    """LU with partial pivoting; the step is well defined iff every pivot
    exceeds pivot_tol times the largest row norm of DF."""
    row_scale = float(np.max(np.abs(df).sum(axis=1)))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lu, piv = scipy.linalg.lu_factor(df, check_finite=False)
    except Exception:
        return None
    pivots = np.abs(np.diag(lu))
    if not np.all(pivots > pivot_tol * row_scale):
        return None
    step = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    if not np.all(np.isfinite(step)):
        return None
    return step


def solve_newton(problem: QuadraticMpcc, config: NewtonConfig | None = None,
                 z0=None) -> NewtonResult:
    """Run the globalized iteration from z0 (defaults to the origin)."""
    cfg = config or NewtonConfig()
    n, r, s, t = problem.n, problem.r, problem.s, problem.t
    v = _as_vec(problem, z0) if z0 is not None else np.zeros(n + r + s + 2 * t)
    df_template = _top_template(problem, n + r + s + 2 * t)
    fb_template = _fb_template(problem)
    trace = SolverTrace()
    full = damped = grad_steps = 0
    it = 0
    status = None
    norm_f = float("inf")
    merit_val = float("inf")
    while True:
        f_res = _residual(problem, v)
        norm_f = float(np.linalg.norm(f_res))
        if norm_f <= cfg.tau_nsn:
            status = "converged"
            break
        if it >= cfg.max_iters:
            status = "max_iters"
            break
        tic = time.perf_counter()
        res_fb = _fb_residual(problem, v)
        merit_val = float(0.5 * res_fb @ res_fb)
        merit_grad = _fb_jacobian(problem, v, fb_template).T @ res_fb
        grad_norm = float(np.linalg.norm(merit_grad))
        if grad_norm <= cfg.merit_grad_tol:
            status = "stationary_merit"
            break

        df = _assemble_df(problem, v, df_template)
        direction = _solve_linear(df, -f_res, cfg.pivot_tol)
        step_type = None
        alpha = 1.0
        if direction is not None and \
                _fb_value(problem, v + direction) <= cfg.q_nsn * merit_val:
            v = v + direction
            step_type = "full_newton"
            full += 1
        else:
            if direction is None or float(merit_grad @ direction) > \
                    -cfg.angle_rho * float(np.linalg.norm(direction)) * grad_norm:
                direction = -merit_grad
                step_type = "gradient"
            else:
                step_type = "damped_newton"
            slope = float(merit_grad @ direction)
            alpha = 1.0
            backtracks = 0
            while _fb_value(problem, v + alpha * direction) > \
                    merit_val + cfg.armijo_sigma * alpha * slope:
                alpha *= cfg.armijo_beta
                backtracks += 1
                if backtracks > cfg.max_backtracks:
                    status = "line_search_failure"
                    break
            if status is not None:
                trace.append(TraceRow(k=it, objective=problem.f(v[:n]),
                                      residual=norm_f, merit=merit_val,
                                      step_type=step_type, alpha=alpha,
                                      wall_time=time.perf_counter() - tic))
                break
            v = v + alpha * direction
            if step_type == "gradient":
                grad_steps += 1
            else:
                damped += 1
        trace.append(TraceRow(k=it, objective=problem.f(v[:n]),
                              residual=norm_f, merit=merit_val,
                              step_type=step_type, alpha=alpha,
                              wall_time=time.perf_counter() - tic))
        it += 1

    return NewtonResult(
        z=FullPoint.from_vector(problem, v), status=status, iterations=it,
        full_steps=full, damped_steps=damped, gradient_steps=grad_steps,
        final_residual=norm_f,
        final_merit=merit_val if status != "converged" else _fb_value(problem, v),
        trace=trace)
