"""Nonmonotone spectral projected gradient method over a projectable set.

Solves min f(x) s.t. x in Omega, where Omega is available only through a
(possibly nonconvex) nearest-point projection. Trial points are generated on
the projection arc trial(step) = P(x - step * grad) — for nonconvex targets
such as the complementarity set the projection arc, unlike the segment
search, still yields descent directions, since grad'(trial - x) <=
-|trial - x|^2 / (2 step) for any nearest-point projection. Step sizes
alternate the two Barzilai-Borwein formulas, and acceptance is the
nonmonotone Armijo test against the largest of the last few objective
values.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

__all__ = ["PgradConfig", "PgradError", "solve_subproblem"]


class PgradError(RuntimeError):
    """Objective oracle produced a non-finite value or gradient."""


@dataclass
class PgradConfig:
    memory_length: int = 10
    step_bounds: tuple = (1e-10, 1e10)
    delta: float = 1e-4
    backtrack: float = 0.5
    max_iters: int = 50_000


def _check_finite(value, grad, point):
    if math.isfinite(value) and np.isfinite(grad).all():
        return
    bad = point[~np.isfinite(point)] if not np.all(np.isfinite(point)) else None
    raise PgradError(
        f"non-finite subproblem oracle output: value={value!r}, "
        f"|grad|_inf={np.max(np.abs(grad)) if np.size(grad) else 0.0!r}, "
        f"non-finite point entries={bad!r}")


def solve_subproblem(objective_oracle, projector, x0, eps,
                     cfg: PgradConfig | None = None, stationarity=None):
    """Run the method until the stationarity measure drops to eps.

    objective_oracle maps a point to (value, gradient); projector maps a point
    to a nearest feasible point; stationarity maps (point, gradient) to the
    termination measure, defaulting to |P(x - grad) - x|. Returns
    (point, achieved_stationarity, iterations); when the iteration budget runs
    out, the best (lowest-measure) accepted iterate is returned.
    """
    cfg = cfg or PgradConfig()
    lo, hi = cfg.step_bounds
    if stationarity is None:
        stationarity = lambda p, gr: float(np.linalg.norm(projector(p - gr) - p))

    x = projector(np.asarray(x0, dtype=float))
    val, grad = objective_oracle(x)
    _check_finite(val, grad, x)
    stat = stationarity(x, grad)
    best_x, best_stat = x, stat
    if stat <= eps:
        return x, stat, 0

    history = deque([val], maxlen=cfg.memory_length)
    grad_inf = np.max(np.abs(grad)) if grad.size else 0.0
    alpha = min(max(1.0 / max(grad_inf, 1e-16), lo), hi)
    grad_inf = None  # lazily refreshed; only the collapse guard needs it

    for it in range(1, cfg.max_iters + 1):
        ref = max(history)
        step = alpha
        while True:
            trial = projector(x - step * grad)
            d = trial - x
            t_val, t_grad = objective_oracle(trial)
            _check_finite(t_val, t_grad, trial)
            if t_val <= ref + cfg.delta * float(grad @ d):
                break
            step *= cfg.backtrack
            if step <= 1e-18:  # collapse needs step*max(|grad|_inf, 1) <= 1e-18
                if grad_inf is None:
                    grad_inf = np.max(np.abs(grad)) if grad.size else 0.0
                if step * max(grad_inf, 1.0) <= 1e-18:
                    break  # arc has collapsed onto x; accept and let stat decide

        s = trial - x
        y = t_grad - grad
        if it % 2 == 1:
            num, den = float(s @ s), float(s @ y)
        else:
            num, den = float(s @ y), float(y @ y)
        if den > 1e-16:  # otherwise keep the previous step size
            alpha = min(max(num / den, lo), hi)

        stalled = not s.any()
        x, val, grad = trial, t_val, t_grad
        grad_inf = None
        history.append(val)
        stat = stationarity(x, grad)
        if stat < best_stat:
            best_x, best_stat = x, stat
        if stat <= eps:
            return x, stat, it
        if stalled:
            return best_x, best_stat, it

    return best_x, best_stat, cfg.max_iters
