"""Discrete local solvers driven through MILP projections.

The projected gradient method iterates x+ in Proj(x - gamma * grad f(x)) with
backtracking on gamma until a sufficient-decrease test holds; it stops at a
critical point, i.e. a fixed point of the projected gradient map for some
positive step. The trust-region variant replaces the projection with a linear
model minimized inside a polyhedral-norm ball and backtracks on the radius.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .milp import MilpBackend, project, solve_tr_subproblem
from .model import FeasibleDomain, LinearRow, QuadraticObjective, eval_gradient, eval_objective

# slack for "this point attains the projection optimum" membership tests
CRITICALITY_TOL = 1e-9


@dataclass(frozen=True)
class PgmParams:
    alpha: float = 1e-3
    beta: float = 0.5
    gamma0: float = 1.0
    decrease_test: str = "eq6"  # eq5 | eq6 | either
    max_iters: int = 1000
    max_backtracks: int = 60

    def __post_init__(self):
        if not (0 < self.alpha < 1) or not (0 < self.beta < 1):
            raise ValueError("alpha and beta must lie in (0, 1)")
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if self.decrease_test not in ("eq5", "eq6", "either"):
            raise ValueError(f"unknown decrease test {self.decrease_test!r}")


@dataclass(frozen=True)
class LocalResult:
    x_final: np.ndarray
    f_final: float
    iters: int
    critical: bool
    eta: float
    tr_stationary: bool = False


def sufficient_decrease(
    f_j: float,
    f_j1: float,
    x_j: np.ndarray,
    x_j1: np.ndarray,
    grad_j: np.ndarray,
    gamma: float,
    params: PgmParams,
) -> bool:
    """Non-strict sufficient-decrease tests on a candidate step.

    quadratic form: f+ <= f - alpha * ||dx||^2 / (2 gamma)
    directional form: f+ <= f - alpha * <grad, x - x+>
    `either` accepts when one of the two holds.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    dx = np.asarray(x_j1, dtype=float) - np.asarray(x_j, dtype=float)
    ok5 = f_j1 <= f_j - params.alpha * float(dx @ dx) / (2.0 * gamma)
    ok6 = f_j1 <= f_j - params.alpha * float(np.asarray(grad_j) @ (-dx))
    if params.decrease_test == "eq5":
        return ok5
    if params.decrease_test == "eq6":
        return ok6
    return ok5 or ok6


def is_critical(
    obj: QuadraticObjective,
    dom: FeasibleDomain,
    cut_rows: Sequence[LinearRow],
    x: np.ndarray,
    eta: float,
    backend: MilpBackend,
    budget: float = float("inf"),
) -> bool:
    """Whether x attains the projection optimum of x - eta * grad f(x).

    Membership in the argmin set, checked by comparing objective values rather
    than point identity, so backend tie-breaking cannot flip the answer.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    x = np.asarray(x, dtype=float)
    z = x - eta * eval_gradient(obj, x)
    res = project(z, dom, cut_rows, budget, backend)
    if not res.ok:
        raise RuntimeError(f"projection failed during criticality check: {res.status}")
    own_score = float((1.0 - 2.0 * z) @ x)
    return own_score <= res.objective + CRITICALITY_TOL


def pgm_solve(
    obj: QuadraticObjective,
    dom: FeasibleDomain,
    cut_rows: Sequence[LinearRow],
    x0: np.ndarray,
    params: PgmParams,
    backend: MilpBackend,
    budget: float = float("inf"),
) -> LocalResult:
    """Projected gradient descent from a feasible x0; monotone, finite.

    The step size carries over between iterations and halves on failed
    decrease tests. Termination fires when the current point itself attains
    the projection optimum (criticality), or on iteration/backtrack/time caps,
    in which case the best iterate so far is returned with critical=False.
    """
    x = np.asarray(x0, dtype=float)
    fx = eval_objective(obj, x)
    gamma = params.gamma0
    deadline = time.perf_counter() + budget
    iters = 0
    while iters < params.max_iters:
        grad = eval_gradient(obj, x)
        accepted = False
        x_new = x
        f_new = fx
        for _ in range(params.max_backtracks + 1):
            remaining = deadline - time.perf_counter()
            z = x - gamma * grad
            res = project(z, dom, cut_rows, remaining, backend)
            if not res.ok:
                return LocalResult(x, fx, iters, critical=False, eta=gamma)
            own_score = float((1.0 - 2.0 * z) @ x)
            if own_score <= res.objective + CRITICALITY_TOL:
                return LocalResult(x, fx, iters, critical=True, eta=gamma)
            x_new = res.x
            f_new = eval_objective(obj, x_new)
            if sufficient_decrease(fx, f_new, x, x_new, grad, gamma, params):
                accepted = True
                break
            gamma *= params.beta
        if not accepted:
            return LocalResult(x, fx, iters, critical=False, eta=gamma)
        x, fx = x_new, f_new
        iters += 1
    return LocalResult(x, fx, iters, critical=False, eta=gamma)


def tr_solve(
    obj: QuadraticObjective,
    dom: FeasibleDomain,
    cut_rows: Sequence[LinearRow],
    x0: np.ndarray,
    norm_p,
    delta0: float,
    params: PgmParams,
    backend: MilpBackend,
    budget: float = float("inf"),
) -> LocalResult:
    """Trust-region descent on the linear model, radius halving on rejection.

    The radius stays constant after accepted steps. The loop stops when the
    subproblem cannot improve its own linear objective within the current
    radius; such a point is labeled TR-stationary (weaker than critical).
    """
    if delta0 <= 0:
        raise ValueError("delta0 must be positive")
    x = np.asarray(x0, dtype=float)
    fx = eval_objective(obj, x)
    delta = delta0
    deadline = time.perf_counter() + budget
    iters = 0
    while iters < params.max_iters:
        grad = eval_gradient(obj, x)
        base = float(grad @ x)
        accepted = False
        x_new = x
        f_new = fx
        for _ in range(params.max_backtracks + 1):
            remaining = deadline - time.perf_counter()
            res = solve_tr_subproblem(grad, x, delta, norm_p, dom, cut_rows, remaining, backend)
            if not res.ok:
                return LocalResult(x, fx, iters, critical=False, eta=delta)
            if res.objective >= base - CRITICALITY_TOL:
                return LocalResult(x, fx, iters, critical=False, eta=delta, tr_stationary=True)
            x_new = res.x
            f_new = eval_objective(obj, x_new)
            # unit scaling stands in for gamma in the quadratic decrease form
            if sufficient_decrease(fx, f_new, x, x_new, grad, 1.0, params):
                accepted = True
                break
            delta *= params.beta
        if not accepted:
            return LocalResult(x, fx, iters, critical=False, eta=delta)
        x, fx = x_new, f_new
        iters += 1
    return LocalResult(x, fx, iters, critical=False, eta=delta)
