"""MILP backend contract and the four subproblem builders.

Every subproblem the solver needs boils down to one of two primitives over the
binary domain: minimizing a linear objective, or minimizing the epigraph
variable theta of the cutting-plane model. Backends implement exactly those
two; the module-level functions pose the concrete models (lower bound,
projection, feasibility, trust-region step) so that engine code never touches
solver types.

Two backends ship: a brute-force enumerator (exact, n <= ~20, used as test
oracle and fallback) and an adapter to the HiGHS solver via scipy.optimize.milp.
"""

from __future__ import annotations

import abc
import itertools
import logging
import time
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .model import Cut, FeasibleDomain, LinearRow

log = logging.getLogger(__name__)

# refuse brute-force enumeration beyond this many points
_ENUM_CAP = 2_000_000


class StatusKind(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    TIME_LIMIT = "time_limit"
    ERROR = "error"


@dataclass(frozen=True)
class MilpStatus:
    kind: StatusKind
    message: str = ""


@dataclass(frozen=True)
class MilpResult:
    status: MilpStatus
    x: Optional[np.ndarray] = None
    theta: Optional[float] = None
    objective: Optional[float] = None
    solve_time: float = 0.0
    dual_bound: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.status.kind is StatusKind.OPTIMAL


def _timeout_result(message: str = "budget exhausted before solve") -> MilpResult:
    return MilpResult(status=MilpStatus(StatusKind.TIME_LIMIT, message))


class MilpBackend(abc.ABC):
    """One handle per engine run; a handle performs one solve at a time."""

    @abc.abstractmethod
    def solve_linear(
        self, cost: np.ndarray, dom: FeasibleDomain, rows: Sequence[LinearRow], budget: float
    ) -> MilpResult:
        """min <cost, x> over binary x in dom satisfying all rows."""

    @abc.abstractmethod
    def solve_cp(self, cuts: Sequence[Cut], dom: FeasibleDomain, budget: float) -> MilpResult:
        """min theta over x in dom, theta >= <grad, x> + intercept for each cut."""


class BruteForceBackend(MilpBackend):
    """Exhaustive enumeration of the cardinality slice; exact and deterministic.

    Feasible points are enumerated in lexicographic order of chosen index
    tuples, so ties always resolve to the first minimizer.
    """

    def __init__(self):
        self._combo_cache: dict[tuple[int, int], np.ndarray] = {}
        # per-domain running max of cut values over all points, extended
        # incrementally as the oracle grows (solve_cp is called with an
        # append-only cut list during an engine run)
        self._cp_cache: dict[tuple, tuple[list, np.ndarray]] = {}

    def _points(self, dom: FeasibleDomain) -> np.ndarray:
        key = (dom.n, dom.m)
        pts = self._combo_cache.get(key)
        if pts is None:
            from math import comb

            if comb(dom.n, dom.m) > _ENUM_CAP:
                raise ValueError(
                    f"C({dom.n},{dom.m}) exceeds the brute-force enumeration cap"
                )
            pts = np.zeros((comb(dom.n, dom.m), dom.n))
            for i, idx in enumerate(itertools.combinations(range(dom.n), dom.m)):
                pts[i, list(idx)] = 1.0
            pts.setflags(write=False)
            self._combo_cache[key] = pts
        if not dom.extra_rows:
            return pts
        mask = np.ones(len(pts), dtype=bool)
        for row in dom.extra_rows:
            mask &= _row_mask(pts, row)
        return pts[mask]

    def solve_linear(self, cost, dom, rows, budget):
        t0 = time.perf_counter()
        pts = self._points(dom)
        rows = list(rows)
        if rows:
            lhs = pts @ np.stack([row.coeffs for row in rows]).T
            mask = np.ones(len(pts), dtype=bool)
            for j, row in enumerate(rows):
                if row.sense == "<=":
                    mask &= lhs[:, j] <= row.rhs + 1e-9
                elif row.sense == ">=":
                    mask &= lhs[:, j] >= row.rhs - 1e-9
                else:
                    mask &= np.abs(lhs[:, j] - row.rhs) <= 1e-9
            pts = pts[mask]
        if len(pts) == 0:
            return MilpResult(
                status=MilpStatus(StatusKind.INFEASIBLE, "no feasible point"),
                solve_time=time.perf_counter() - t0,
            )
        scores = pts @ np.asarray(cost, dtype=float)
        i = int(np.argmin(scores))
        obj = float(scores[i])
        return MilpResult(
            status=MilpStatus(StatusKind.OPTIMAL),
            x=pts[i].copy(),
            objective=obj,
            dual_bound=obj,
            solve_time=time.perf_counter() - t0,
        )

    def solve_cp(self, cuts, dom, budget):
        t0 = time.perf_counter()
        cuts = list(cuts)
        if not cuts:
            raise ValueError("cutting-plane model requires a nonempty oracle")
        pts = self._points(dom)
        if len(pts) == 0:
            return MilpResult(
                status=MilpStatus(StatusKind.INFEASIBLE, "empty domain"),
                solve_time=time.perf_counter() - t0,
            )
        key = (id(dom), dom.n, dom.m)
        cached = self._cp_cache.get(key)
        start = 0
        theta = None
        if cached is not None:
            prev_cuts, prev_theta = cached
            if len(cuts) >= len(prev_cuts) and all(
                a is b for a, b in zip(prev_cuts, cuts)
            ) and len(prev_theta) == len(pts):
                theta = prev_theta.copy()
                start = len(prev_cuts)
        if theta is None:
            theta = np.full(len(pts), -np.inf)
        for cut in cuts[start:]:
            np.maximum(theta, pts @ cut.grad + cut.intercept, out=theta)
        self._cp_cache[key] = (cuts, theta)
        i = int(np.argmin(theta))
        obj = float(theta[i])
        return MilpResult(
            status=MilpStatus(StatusKind.OPTIMAL),
            x=pts[i].copy(),
            theta=obj,
            objective=obj,
            dual_bound=obj,
            solve_time=time.perf_counter() - t0,
        )


def _row_mask(pts: np.ndarray, row: LinearRow, tol: float = 1e-9) -> np.ndarray:
    lhs = pts @ row.coeffs
    if row.sense == "<=":
        return lhs <= row.rhs + tol
    if row.sense == ">=":
        return lhs >= row.rhs - tol
    return np.abs(lhs - row.rhs) <= tol


class HighsBackend(MilpBackend):
    """HiGHS via scipy.optimize.milp.

    With exact_gaps (the default) the MIP gap tolerances are pinned to zero so
    the reported dual bound is the exact model optimum whenever HiGHS claims
    optimality; this is what makes 1e-9 outer gaps closable. Passing
    exact_gaps=False keeps the solver's own gap defaults, which is much faster
    on large instances and still yields valid (if looser) dual bounds.
    Everything else stays at solver defaults.
    """

    def __init__(self, exact_gaps: bool = True):
        from scipy.optimize import milp  # defer so brute-force use never needs scipy

        self._milp = milp
        self.exact_gaps = exact_gaps

    def _run(self, c, constraints, integrality, bounds, budget, n) -> MilpResult:
        t0 = time.perf_counter()
        options = {"time_limit": float(budget)}
        if self.exact_gaps:
            options["mip_rel_gap"] = 0.0
            options["mip_abs_gap"] = 0.0
        with warnings.catch_warnings():
            # mip_abs_gap is forwarded to HiGHS verbatim; silence scipy's note
            warnings.filterwarnings("ignore", message="Unrecognized options detected")
            res = self._milp(
                c, constraints=constraints, integrality=integrality, bounds=bounds, options=options
            )
        elapsed = time.perf_counter() - t0
        if res.status == 0:
            kind = StatusKind.OPTIMAL
        elif res.status == 2:
            kind = StatusKind.INFEASIBLE
        elif res.status == 1:
            kind = StatusKind.TIME_LIMIT
        else:
            kind = StatusKind.ERROR
        x = theta = obj = None
        if res.x is not None:
            x = np.round(res.x[:n])
            np.clip(x, 0.0, 1.0, out=x)
            if len(res.x) > n:
                theta = float(res.x[n])
            obj = float(res.fun)
        dual = getattr(res, "mip_dual_bound", None)
        return MilpResult(
            status=MilpStatus(kind, str(res.message)),
            x=x,
            theta=theta,
            objective=obj,
            solve_time=elapsed,
            dual_bound=float(dual) if dual is not None else None,
        )

    @staticmethod
    def _stack_rows(dom: FeasibleDomain, rows: Sequence[LinearRow], n_cols: int):
        """Cardinality equality plus all rows as one (A, lb, ub) block."""
        all_rows = list(dom.extra_rows) + list(rows)
        a = np.zeros((1 + len(all_rows), n_cols))
        lo = np.empty(1 + len(all_rows))
        hi = np.empty(1 + len(all_rows))
        a[0, : dom.n] = 1.0
        lo[0] = hi[0] = dom.m
        for i, row in enumerate(all_rows, start=1):
            a[i, : dom.n] = row.coeffs
            if row.sense == "<=":
                lo[i], hi[i] = -np.inf, row.rhs
            elif row.sense == ">=":
                lo[i], hi[i] = row.rhs, np.inf
            else:
                lo[i] = hi[i] = row.rhs
        return a, lo, hi

    def solve_linear(self, cost, dom, rows, budget):
        from scipy.optimize import Bounds, LinearConstraint

        n = dom.n
        c = np.asarray(cost, dtype=float)
        a, lo, hi = self._stack_rows(dom, rows, n)
        bounds = Bounds(np.zeros(n), np.ones(n))
        return self._run(c, [LinearConstraint(a, lo, hi)], np.ones(n), bounds, budget, n)

    def solve_cp(self, cuts, dom, budget):
        from scipy.optimize import Bounds, LinearConstraint

        cuts = list(cuts)
        if not cuts:
            raise ValueError("cutting-plane model requires a nonempty oracle")
        n = dom.n
        c = np.zeros(n + 1)
        c[n] = 1.0
        a_dom, lo_dom, hi_dom = self._stack_rows(dom, [], n + 1)
        a_cut = np.zeros((len(cuts), n + 1))
        for i, cut in enumerate(cuts):
            a_cut[i, :n] = cut.grad
            a_cut[i, n] = -1.0
        a = np.vstack([a_dom, a_cut])
        lo = np.concatenate([lo_dom, np.full(len(cuts), -np.inf)])
        hi = np.concatenate([hi_dom, np.array([-c_.intercept for c_ in cuts])])
        bounds = Bounds(
            np.concatenate([np.zeros(n), [-np.inf]]),
            np.concatenate([np.ones(n), [np.inf]]),
        )
        integrality = np.concatenate([np.ones(n), [0.0]])
        return self._run(c, [LinearConstraint(a, lo, hi)], integrality, bounds, budget, n)


def solve_cp_model(oracle, dom: FeasibleDomain, budget: float, backend: MilpBackend) -> MilpResult:
    """Lower-bound problem: min theta subject to every cut in the oracle."""
    if len(oracle) == 0:
        raise ValueError("cutting-plane model requires a nonempty oracle")
    if budget <= 0:
        return _timeout_result()
    return backend.solve_cp(list(oracle), dom, budget)


def project(
    z: np.ndarray,
    dom: FeasibleDomain,
    cut_rows: Sequence[LinearRow],
    budget: float,
    backend: MilpBackend,
) -> MilpResult:
    """Euclidean projection of z onto dom intersected with the cut rows.

    For binary x, argmin ||x - z||^2 = argmin <1 - 2z, x>; the returned
    objective carries <1 - 2z, x> so callers can detect argmin ties.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (dom.n,):
        raise ValueError(f"point has shape {z.shape}, domain dimension is {dom.n}")
    if budget <= 0:
        return _timeout_result()
    return backend.solve_linear(1.0 - 2.0 * z, dom, cut_rows, budget)


def check_nonempty(
    dom: FeasibleDomain, cut_rows: Sequence[LinearRow], budget: float, backend: MilpBackend
) -> bool:
    """Feasibility of dom intersected with the cut rows, as a zero-objective solve.

    A time-limited check conservatively reports empty (the offset search treats
    that as "reduce the offset").
    """
    if budget <= 0:
        log.warning("feasibility check hit the time budget; treating set as empty")
        return False
    res = backend.solve_linear(np.zeros(dom.n), dom, cut_rows, budget)
    if res.status.kind is StatusKind.TIME_LIMIT:
        log.warning("feasibility check hit the time budget; treating set as empty")
        return False
    return res.status.kind is StatusKind.OPTIMAL


def solve_tr_subproblem(
    grad: np.ndarray,
    x_center: np.ndarray,
    radius: float,
    norm_p,
    dom: FeasibleDomain,
    cut_rows: Sequence[LinearRow],
    budget: float,
    backend: MilpBackend,
) -> MilpResult:
    """min <grad, x> over dom and cut rows within a polyhedral-norm ball.

    On binaries the l1 ball is the single row sum_i [c_i(1-x_i) + (1-c_i)x_i]
    <= radius; an l-inf ball with radius < 1 pins x to the center and with
    radius >= 1 is vacuous.
    """
    if radius <= 0:
        raise ValueError("trust-region radius must be positive")
    x_center = np.asarray(x_center, dtype=float)
    if budget <= 0:
        return _timeout_result()
    rows = list(cut_rows)
    if norm_p == 1:
        coeffs = 1.0 - 2.0 * x_center
        rows.append(LinearRow(coeffs, "<=", radius - float(np.sum(x_center))))
    elif norm_p in ("inf", np.inf):
        if radius < 1:
            for i in range(dom.n):
                e = np.zeros(dom.n)
                e[i] = 1.0
                rows.append(LinearRow(e, "==", float(x_center[i])))
    else:
        raise ValueError(f"unsupported trust-region norm {norm_p!r}")
    return backend.solve_linear(np.asarray(grad, dtype=float), dom, rows, budget)
