"""Outer cutting-plane loop with optional gradient-based local steps.

Each iteration solves the MILP cutting-plane relaxation for a lower bound,
stops when the UB-LB gap closes, and otherwise generates the next cut anchor:
either the relaxation solution itself, or the output of a local solver run on
the feasible set tightened by offset cut rows. An extra cut at the relaxation
solution is added when the angle condition suggests the two points straddle
the optimum.

With all three feature flags off this reduces exactly to the classical
cutting-plane method.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .bench import RunTrace, TraceRecord
from .local import LocalResult, PgmParams, pgm_solve, tr_solve
from .milp import MilpBackend, StatusKind, check_nonempty, project, solve_cp_model
from .model import (
    CutOracle,
    FeasibleDomain,
    LinearRow,
    QuadraticObjective,
    add_cut,
    eval_gradient,
    eval_objective,
    is_feasible,
    make_cut,
    regularize,
)

# the five canonical configurations: (use_local_solver, use_offset, use_lb_cuts)
CONFIG_FLAGS = {
    "cpm": (False, False, False),
    "pgm": (True, False, False),
    "pgm-tau": (True, True, False),
    "pgm-lb": (True, False, True),
    "pgm-tau-lb": (True, True, True),
}

CONFIG_NAMES = tuple(CONFIG_FLAGS)


@dataclass(frozen=True)
class TrParams:
    norm_p: object = 1
    delta0: Optional[float] = None  # None -> 2 * m (whole-slice moves)


@dataclass(frozen=True)
class SolverConfig:
    use_local_solver: bool = False
    use_offset: bool = False
    use_lb_cuts: bool = False
    epsilon: float = 1e-9
    tau0: float = math.inf
    kappa_g: float = 0.1
    kappa_tau: float = 0.5
    time_limit: float = 100.0
    local_solver: str = "pgm"  # pgm | trust_region
    pgm_params: PgmParams = field(default_factory=PgmParams)
    tr_params: TrParams = field(default_factory=TrParams)
    max_outer_iters: int = 10_000

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not (0 < self.kappa_tau < 1):
            raise ValueError("kappa_tau must lie in (0, 1)")
        if not (0 < self.kappa_g <= 1):
            raise ValueError("kappa_g must lie in (0, 1]")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")
        if (self.use_offset or self.use_lb_cuts) and not self.use_local_solver:
            raise ValueError("offset and LB cuts require the local solver")
        if self.local_solver not in ("pgm", "trust_region"):
            raise ValueError(f"unknown local solver {self.local_solver!r}")

    @classmethod
    def from_name(cls, name: str, **overrides) -> "SolverConfig":
        try:
            local, offset, lb = CONFIG_FLAGS[name]
        except KeyError:
            raise ValueError(f"unknown configuration {name!r}; choose from {CONFIG_NAMES}")
        return cls(use_local_solver=local, use_offset=offset, use_lb_cuts=lb, **overrides)

    @property
    def name(self) -> str:
        flags = (self.use_local_solver, self.use_offset, self.use_lb_cuts)
        for name, known in CONFIG_FLAGS.items():
            if flags == known:
                return name
        return "custom"


class SolveStatus(Enum):
    EPS_OPTIMAL = "eps_optimal"
    TIME_LIMIT = "time_limit"
    ITER_LIMIT = "iter_limit"


# relative slack for the exact convexity test deciding whether to regularize
_PSD_TOL = 1e-12


def effective_objective(obj: QuadraticObjective, dom: FeasibleDomain) -> QuadraticObjective:
    """The objective the engine cuts on: unchanged when already convex,
    otherwise the exact diagonal regularization.

    An indefinite Q yields invalid tangent cuts, so it must be shifted; a PSD
    Q must not be (the Gershgorin bound would over-shift matrices that are PSD
    but not diagonally dominant, weakening every cut for no benefit).
    """
    scale = max(1.0, float(np.max(np.abs(obj.q), initial=0.0)))
    if float(np.linalg.eigvalsh(obj.q)[0]) >= -_PSD_TOL * scale:
        return obj
    return regularize(obj, dom)


@dataclass
class SolveState:
    k: int
    ub: float
    lb: float
    x_ub: np.ndarray
    tau: float
    increase_offset: bool
    oracle: CutOracle
    trace: RunTrace


@dataclass(frozen=True)
class LbCutEvent:
    k: int
    inner_product: float
    anchors_equal: bool
    predicate: bool
    already_present: bool
    added: bool


@dataclass(frozen=True)
class SolveOutcome:
    x_best: np.ndarray
    f_best: float
    status: SolveStatus
    gap: float
    trace: RunTrace
    oracle: CutOracle
    iterations: int
    runtime: float
    lb_cut_events: tuple = ()
    offset_backtracks: int = 0


def build_cut_constraints(oracle: CutOracle, ub: float, tau: float) -> list[LinearRow]:
    """Theta-free rows forcing every tangent plane at most ub - tau."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if not math.isfinite(ub):
        raise ValueError("ub must be finite")
    return [
        LinearRow(cut.grad, "<=", ub - tau - cut.value + float(cut.grad @ cut.anchor))
        for cut in oracle
    ]


def select_offset(
    state: SolveState,
    cfg: SolverConfig,
    dom: FeasibleDomain,
    backend: MilpBackend,
    budget: float = math.inf,
):
    """Backtracking search for an offset keeping the tightened set nonempty.

    Caps tau at kappa_g * gap, then halves until the feasibility check passes.
    Reaching the floor epsilon falls back to tau = 0, which is always nonempty
    because the incumbent satisfies every row there; this bounds the number of
    backtracks by ceil(log(tau_init/eps) / log(1/kappa_tau)) + 1.

    Returns (tau, rows, increase_offset, n_backtracks).
    """
    deadline = time.perf_counter() + budget
    tau = min(state.tau, cfg.kappa_g * (state.ub - state.lb))
    increase = state.increase_offset
    backtracks = 0
    while True:
        if tau < cfg.epsilon:
            tau = 0.0
            rows = build_cut_constraints(state.oracle, state.ub, tau)
            return tau, rows, increase, backtracks
        rows = build_cut_constraints(state.oracle, state.ub, tau)
        if check_nonempty(dom, rows, deadline - time.perf_counter(), backend):
            return tau, rows, increase, backtracks
        tau *= cfg.kappa_tau
        increase = False
        backtracks += 1


def lb_cut_condition(grad_next: np.ndarray, x_lb: np.ndarray, x_next: np.ndarray) -> bool:
    """Angle test for adding a second cut at the relaxation solution.

    True when <grad f(x_next), x_lb - x_next> <= 0 and the points differ
    (identical points would only duplicate the cut just added).
    """
    x_lb = np.asarray(x_lb, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    if np.array_equal(x_lb, x_next):
        return False
    return float(np.asarray(grad_next) @ (x_lb - x_next)) <= 0.0


def run(
    obj: QuadraticObjective,
    dom: FeasibleDomain,
    x0: np.ndarray,
    cfg: SolverConfig,
    backend: MilpBackend,
    instance_name: str = "",
    config_name: str = "",
) -> SolveOutcome:
    """Solve min 0.5 x'Qx over the binary domain to eps-optimality.

    Nonconvex objectives are regularized on entry (exact on the cardinality
    slice); all reported values are converted back to the original scale.
    """
    x0 = np.asarray(x0, dtype=float)
    if not is_feasible(dom, x0):
        raise ValueError("x0 is not feasible for the domain")
    work = effective_objective(obj, dom)
    shift = work.shift - obj.shift
    t_start = time.perf_counter()

    def elapsed() -> float:
        return time.perf_counter() - t_start

    def remaining() -> float:
        return cfg.time_limit - elapsed()

    oracle = CutOracle()
    add_cut(oracle, make_cut(work, x0))
    trace = RunTrace(
        records=[],
        config_name=config_name or cfg.name,
        instance_name=instance_name,
        f0=eval_objective(obj, x0),
    )
    state = SolveState(
        k=0,
        ub=eval_objective(work, x0),
        lb=-math.inf,
        x_ub=x0.copy(),
        tau=cfg.tau0,
        increase_offset=cfg.use_offset,
        oracle=oracle,
        trace=trace,
    )
    status = SolveStatus.ITER_LIMIT
    lb_cut_events: list[LbCutEvent] = []
    offset_backtracks = 0
    tau_used = 0.0
    prev_signature = None

    def record():
        trace.records.append(
            TraceRecord(
                k=state.k,
                t=elapsed(),
                ub=state.ub - shift,
                lb=(state.lb - shift) if math.isfinite(state.lb) else state.lb,
                n_cuts=len(oracle),
                tau=tau_used,
            )
        )

    for _ in range(cfg.max_outer_iters):
        if remaining() <= 0:
            status = SolveStatus.TIME_LIMIT
            break
        res = solve_cp_model(oracle, dom, remaining(), backend)
        if res.status.kind is StatusKind.TIME_LIMIT:
            if res.dual_bound is not None:
                state.lb = max(state.lb, res.dual_bound)
            status = SolveStatus.TIME_LIMIT
            break
        if res.status.kind is not StatusKind.OPTIMAL:
            raise RuntimeError(f"lower-bound solve failed: {res.status}")
        state.k += 1
        bound = res.dual_bound if res.dual_bound is not None else res.theta
        state.lb = max(state.lb, bound)
        x_lb = res.x
        if state.ub - state.lb <= cfg.epsilon:
            tau_used = 0.0
            record()
            status = SolveStatus.EPS_OPTIMAL
            break

        if cfg.use_local_solver:
            if cfg.use_offset:
                tau, rows, state.increase_offset, n_bt = select_offset(
                    state, cfg, dom, backend, remaining()
                )
                state.tau = tau
                offset_backtracks += n_bt
            else:
                rows = build_cut_constraints(oracle, state.ub, 0.0)
            tau_used = state.tau if cfg.use_offset else 0.0
            start = project(x_lb, dom, rows, remaining(), backend)
            if start.ok:
                x_next = _local_solve(work, dom, rows, start.x, cfg, backend, remaining()).x_final
            else:
                x_next = x_lb  # tightened set unavailable; fall back to the plain step
            # a local point whose cut already exists makes the iteration a
            # no-op; take the plain step instead so the relaxation tightens
            if x_next in oracle and x_lb not in oracle:
                x_next = x_lb
            if state.increase_offset:
                state.tau = state.tau / cfg.kappa_tau
        else:
            tau_used = 0.0
            x_next = x_lb

        f_next = eval_objective(work, x_next)
        if f_next <= state.ub:
            state.x_ub = x_next
            state.ub = f_next
        new_cut = add_cut(oracle, make_cut(work, x_next))
        added_lb_cut = False
        if cfg.use_lb_cuts:
            grad_next = eval_gradient(work, x_next)
            ip = float(grad_next @ (np.asarray(x_lb) - np.asarray(x_next)))
            anchors_equal = bool(np.array_equal(x_lb, x_next))
            predicate = lb_cut_condition(grad_next, x_lb, x_next)
            already_present = x_lb in oracle
            if predicate:
                added_lb_cut = add_cut(oracle, make_cut(work, x_lb))
            lb_cut_events.append(
                LbCutEvent(
                    k=state.k,
                    inner_product=ip,
                    anchors_equal=anchors_equal,
                    predicate=predicate,
                    already_present=already_present,
                    added=added_lb_cut,
                )
            )
        record()

        # a deterministic fixed point: no new cuts and no state movement means
        # every later iteration would repeat verbatim, so stop early
        signature = (len(oracle), state.ub, state.lb, state.tau, state.increase_offset)
        if not new_cut and not added_lb_cut and signature == prev_signature:
            status = SolveStatus.ITER_LIMIT
            break
        prev_signature = signature

    gap = state.ub - state.lb
    return SolveOutcome(
        x_best=state.x_ub,
        f_best=eval_objective(obj, state.x_ub),
        status=status,
        gap=gap,
        trace=trace,
        oracle=oracle,
        iterations=state.k,
        runtime=elapsed(),
        lb_cut_events=tuple(lb_cut_events),
        offset_backtracks=offset_backtracks,
    )


def _local_solve(
    work: QuadraticObjective,
    dom: FeasibleDomain,
    rows: list[LinearRow],
    x_start: np.ndarray,
    cfg: SolverConfig,
    backend: MilpBackend,
    budget: float,
) -> LocalResult:
    if cfg.local_solver == "trust_region":
        delta0 = cfg.tr_params.delta0 if cfg.tr_params.delta0 is not None else 2.0 * dom.m
        return tr_solve(
            work, dom, rows, x_start, cfg.tr_params.norm_p, delta0, cfg.pgm_params, backend, budget
        )
    return pgm_solve(work, dom, rows, x_start, cfg.pgm_params, backend, budget)
