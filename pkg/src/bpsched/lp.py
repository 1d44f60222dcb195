"""Sparse LP container, two simplex back ends and warm-startable sessions.

Sign conventions (minimization throughout):

* ``duals[i]`` is the derivative of the optimal objective with respect to the
  right-hand side of row ``i``; ``<=`` rows have duals ``<= 0`` and ``>=`` rows
  duals ``>= 0`` at optimality.
* ``reduced_costs[j] = cost[j] - sum_i duals[i] * a_ij``.

Two engines are available. ``"highs"`` drives HiGHS through ``highspy`` and is
the default. ``"simplex"`` is a dense bounded revised simplex implemented here
(two phases, Dantzig pricing with a Bland fallback after ``2 * rows`` stalled
pivots, explicit inverse with eta updates and periodic refactorization).
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, TextIO

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, NumericalBreakdown

INF = math.inf

EPS_FEAS = 1e-7
EPS_NUM = 1e-6
EPS_DEG = 1e-9

LOWER, BASIC, UPPER, ZERO = 0, 1, 2, 3

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
ITERATION_LIMIT = "IterationLimit"

SENSES = ("<=", ">=", "=")


class LpProblem:
    """Minimization LP stored column-wise.

    Rows carry a sense, a right-hand side and a hashable tag; columns carry a
    cost, bounds, sparse entries and a tag. Tags must be unique when given.
    Entries of existing columns are immutable once synced to a session; costs,
    bounds and right-hand sides may change freely.
    """

    def __init__(self, name: str = ""):
        self.name = name
        self.offset = 0.0
        self.cost: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.col_rows: list[list[int]] = []
        self.col_vals: list[list[float]] = []
        self.col_tags: list[Hashable] = []
        self.sense: list[str] = []
        self.rhs: list[float] = []
        self.row_tags: list[Hashable] = []
        self._row_of: dict[Hashable, int] = {}
        self._col_of: dict[Hashable, int] = {}

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @property
    def n_cols(self) -> int:
        return len(self.cost)

    def add_row(self, sense: str, rhs: float, entries: Mapping[int, float] | None = None, tag: Hashable = None) -> int:
        if sense not in SENSES:
            raise ValueError(f"row sense must be one of {SENSES}")
        if not math.isfinite(rhs):
            raise ValueError("right-hand side must be finite")
        i = len(self.rhs)
        self.sense.append(sense)
        self.rhs.append(float(rhs))
        self.row_tags.append(tag)
        if tag is not None:
            if tag in self._row_of:
                raise ValueError(f"duplicate row tag {tag!r}")
            self._row_of[tag] = i
        for j, v in (entries or {}).items():
            if not 0 <= j < self.n_cols:
                raise IndexError(f"column {j} out of range")
            if v:
                self.col_rows[j].append(i)
                self.col_vals[j].append(float(v))
        return i

    def add_column(
        self,
        cost: float,
        lb: float = 0.0,
        ub: float = INF,
        entries: Mapping[int, float] | None = None,
        tag: Hashable = None,
    ) -> int:
        if lb > ub:
            raise ValueError(f"column bounds [{lb}, {ub}] inverted")
        j = len(self.cost)
        rows, vals = [], []
        for i, v in (entries or {}).items():
            if not 0 <= i < self.n_rows:
                raise IndexError(f"row {i} out of range")
            if v:
                rows.append(i)
                vals.append(float(v))
        self.cost.append(float(cost))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.col_rows.append(rows)
        self.col_vals.append(vals)
        self.col_tags.append(tag)
        if tag is not None:
            if tag in self._col_of:
                raise ValueError(f"duplicate column tag {tag!r}")
            self._col_of[tag] = j
        return j

    def row(self, tag: Hashable) -> int:
        return self._row_of[tag]

    def col(self, tag: Hashable) -> int:
        return self._col_of[tag]

    def has_row(self, tag: Hashable) -> bool:
        return tag in self._row_of

    def has_col(self, tag: Hashable) -> bool:
        return tag in self._col_of

    def column_entries(self, j: int) -> dict[int, float]:
        return dict(zip(self.col_rows[j], self.col_vals[j]))

    def matrix(self, cols: Iterable[int] | None = None) -> sp.csc_matrix:
        idx = range(self.n_cols) if cols is None else list(cols)
        indptr = [0]
        rows: list[int] = []
        vals: list[float] = []
        for j in idx:
            rows.extend(self.col_rows[j])
            vals.extend(self.col_vals[j])
            indptr.append(len(rows))
        return sp.csc_matrix(
            (np.asarray(vals, dtype=float), np.asarray(rows, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
            shape=(self.n_rows, len(indptr) - 1),
        )

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        rhs = np.asarray(self.rhs, dtype=float)
        sense = np.asarray(self.sense)
        lo = np.where(sense == "<=", -INF, rhs)
        hi = np.where(sense == ">=", INF, rhs)
        return lo, hi

    def validate(self) -> None:
        for j in range(self.n_cols):
            if self.lb[j] > self.ub[j]:
                raise ValueError(f"column {j}: bounds inverted")
            if any(not 0 <= i < self.n_rows for i in self.col_rows[j]):
                raise IndexError(f"column {j}: row index out of range")

    def copy(self) -> "LpProblem":
        q = LpProblem(self.name)
        q.offset = self.offset
        q.cost, q.lb, q.ub = list(self.cost), list(self.lb), list(self.ub)
        q.col_rows = [list(r) for r in self.col_rows]
        q.col_vals = [list(v) for v in self.col_vals]
        q.col_tags = list(self.col_tags)
        q.sense, q.rhs, q.row_tags = list(self.sense), list(self.rhs), list(self.row_tags)
        q._row_of, q._col_of = dict(self._row_of), dict(self._col_of)
        return q


def add_columns(p: LpProblem, columns: Iterable[tuple]) -> LpProblem:
    """Append ``(cost, lb, ub, entries[, tag])`` tuples; returns ``p``."""
    for c in columns:
        p.add_column(*c)
    return p


def add_rows(p: LpProblem, rows: Iterable[tuple]) -> LpProblem:
    """Append ``(sense, rhs, entries[, tag])`` tuples; returns ``p``."""
    for r in rows:
        p.add_row(*r)
    return p


def reduced_cost(p: LpProblem, cost: float, entries: Mapping[int, float], duals) -> float:
    """``cost - sum(duals[i] * a_i)`` for a (possibly not yet added) column."""
    duals = np.asarray(duals, dtype=float)
    if duals.shape != (p.n_rows,):
        raise DimensionMismatch(f"{duals.shape[0] if duals.ndim else 0} duals for {p.n_rows} rows")
    return float(cost) - sum(duals[i] * v for i, v in entries.items())


@dataclass
class Basis:
    col_status: np.ndarray
    row_status: np.ndarray


@dataclass
class LpSolution:
    status: str
    objective: float
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    row_activity: np.ndarray
    iterations: int = 0
    basis: Basis | None = None
    degenerate_count: int = 0
    n_basic: int = 0
    engine: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _degenerate_count(p: LpProblem, x, activity, basis: Basis, eps: float = EPS_DEG) -> int:
    lb = np.asarray(p.lb)
    ub = np.asarray(p.ub)
    rlo, rhi = p.row_bounds()
    bc = basis.col_status == BASIC
    br = basis.row_status == BASIC
    at_c = (np.abs(x - lb) <= eps) | (np.abs(ub - x) <= eps)
    at_r = (np.abs(activity - rlo) <= eps) | (np.abs(rhi - activity) <= eps)
    return int(np.count_nonzero(bc & at_c) + np.count_nonzero(br & at_r))


# ---------------------------------------------------------------- HiGHS back end


def _import_highs():
    import highspy

    return highspy


_HS_STATUS = None


def _highs_status_map(highspy):
    global _HS_STATUS
    if _HS_STATUS is None:
        ms = highspy.HighsModelStatus
        _HS_STATUS = {
            ms.kOptimal: OPTIMAL,
            ms.kInfeasible: INFEASIBLE,
            ms.kUnbounded: UNBOUNDED,
            ms.kUnboundedOrInfeasible: UNBOUNDED,
            ms.kIterationLimit: ITERATION_LIMIT,
            ms.kTimeLimit: ITERATION_LIMIT,
            ms.kModelEmpty: OPTIMAL,
        }
    return _HS_STATUS


def _inf(v: float, highspy) -> float:
    if v == INF:
        return highspy.kHighsInf
    if v == -INF:
        return -highspy.kHighsInf
    return v


class LpSession:
    """Keeps a solver instance in sync with a growing LpProblem.

    New rows and columns, cost, bound and right-hand-side changes are pushed
    incrementally before each solve, so the previous basis is reused.
    """

    def __init__(self, p: LpProblem, engine: str = "highs", options: Mapping[str, object] | None = None):
        if engine not in ("highs", "simplex"):
            raise ValueError(f"unknown LP engine {engine!r}")
        self.p = p
        self.engine = engine
        self.basis: Basis | None = None
        self.last: LpSolution | None = None
        self._h = None
        self._nc = 0
        self._nr = 0
        self._cost = np.zeros(0)
        self._lb = np.zeros(0)
        self._ub = np.zeros(0)
        self._rhs = np.zeros(0)
        self._sense: list[str] = []
        self._offset = 0.0
        self.options = dict(options or {})

    # -- HiGHS synchronisation
    def _sync(self):
        highspy = _import_highs()
        p = self.p
        if self._h is None:
            h = highspy.Highs()
            h.setOptionValue("output_flag", False)
            h.setOptionValue("presolve", "off")
            h.setOptionValue("solver", "simplex")
            for key, val in self.options.items():
                h.setOptionValue(key, val)
            self._h = h
        h = self._h
        hinf = highspy.kHighsInf
        nc, nr = p.n_cols, p.n_rows
        # changes on already-synced columns and rows
        if self._nc:
            cost = np.asarray(p.cost[: self._nc])
            diff = np.nonzero(cost != self._cost)[0]
            if diff.size:
                h.changeColsCost(diff.size, diff.astype(np.int32), cost[diff])
            lb = np.asarray(p.lb[: self._nc])
            ub = np.asarray(p.ub[: self._nc])
            diff = np.nonzero((lb != self._lb) | (ub != self._ub))[0]
            if diff.size:
                h.changeColsBounds(
                    diff.size,
                    diff.astype(np.int32),
                    np.clip(lb[diff], -hinf, hinf),
                    np.clip(ub[diff], -hinf, hinf),
                )
        if self._nr:
            rhs = np.asarray(p.rhs[: self._nr])
            diff = np.nonzero(rhs != self._rhs)[0]
            if diff.size or p.sense[: self._nr] != self._sense:
                lo, hi = p.row_bounds()
                idx = np.arange(self._nr) if p.sense[: self._nr] != self._sense else diff
                h.changeRowsBounds(
                    idx.size, idx.astype(np.int32), np.clip(lo[idx], -hinf, hinf), np.clip(hi[idx], -hinf, hinf)
                )
        if p.offset != self._offset:
            h.changeObjectiveOffset(p.offset)
        # new columns, with entries restricted to synced rows
        if nc > self._nc:
            starts, idx, vals = [], [], []
            for j in range(self._nc, nc):
                starts.append(len(idx))
                for i, v in zip(p.col_rows[j], p.col_vals[j]):
                    if i < self._nr:
                        idx.append(i)
                        vals.append(v)
            new = slice(self._nc, nc)
            h.addCols(
                nc - self._nc,
                np.asarray(p.cost[new], dtype=float),
                np.clip(np.asarray(p.lb[new], dtype=float), -hinf, hinf),
                np.clip(np.asarray(p.ub[new], dtype=float), -hinf, hinf),
                len(idx),
                np.asarray(starts, dtype=np.int32),
                np.asarray(idx, dtype=np.int32),
                np.asarray(vals, dtype=float),
            )
        if nr > self._nr:
            lo, hi = p.row_bounds()
            sub = p.matrix().tocsr()[self._nr : nr]
            h.addRows(
                nr - self._nr,
                np.clip(lo[self._nr :], -hinf, hinf),
                np.clip(hi[self._nr :], -hinf, hinf),
                sub.nnz,
                sub.indptr[:-1].astype(np.int32),
                sub.indices.astype(np.int32),
                sub.data.astype(float),
            )
        self._nc, self._nr = nc, nr
        self._cost = np.asarray(p.cost, dtype=float)
        self._lb = np.asarray(p.lb, dtype=float)
        self._ub = np.asarray(p.ub, dtype=float)
        self._rhs = np.asarray(p.rhs, dtype=float)
        self._sense = list(p.sense)
        self._offset = p.offset

    def set_basis(self, basis: Basis | None):
        self.basis = basis
        if self.engine == "highs" and basis is not None:
            self._sync()
            self._push_basis(basis)

    def _push_basis(self, basis: Basis):
        highspy = _import_highs()
        hb = highspy.HighsBasis()
        cs, rs = _extend_basis(basis, self.p)
        hb.col_status = [highspy.HighsBasisStatus(int(s)) for s in cs]
        hb.row_status = [highspy.HighsBasisStatus(int(s)) for s in rs]
        hb.valid = True
        self._h.setBasis(hb)

    def solve(self, iteration_limit: int | None = None) -> LpSolution:
        if self.engine == "simplex":
            sol = _simplex_solve(self.p, self.basis, iteration_limit)
        else:
            sol = self._solve_highs(iteration_limit)
        if sol.basis is not None:
            self.basis = sol.basis
        self.last = sol
        return sol

    def _solve_highs(self, iteration_limit):
        highspy = _import_highs()
        self._sync()
        h = self._h
        p = self.p
        if iteration_limit is not None:
            h.setOptionValue("simplex_iteration_limit", int(iteration_limit))
        n, m = p.n_cols, p.n_rows
        if n == 0:
            return _empty_solution(p)
        h.run()
        status = _highs_status_map(highspy).get(h.getModelStatus())
        if status is None:
            # retry from scratch once; HiGHS occasionally gives up on a warm basis
            h.clearSolver()
            h.run()
            status = _highs_status_map(highspy).get(h.getModelStatus())
            if status is None:
                raise NumericalBreakdown(f"HiGHS status {h.modelStatusToString(h.getModelStatus())}")
        sol = h.getSolution()
        info = h.getInfo()
        x = np.asarray(sol.col_value, dtype=float)
        if x.size != n:
            x = np.zeros(n)
        act = np.asarray(sol.row_value, dtype=float) if m else np.zeros(0)
        if act.size != m:
            act = np.zeros(m)
        duals = np.asarray(sol.row_dual, dtype=float) if m else np.zeros(0)
        if duals.size != m:
            duals = np.zeros(m)
        rc = np.asarray(sol.col_dual, dtype=float)
        if rc.size != n:
            rc = np.asarray(p.cost, dtype=float) - p.matrix().T @ duals
        hb = h.getBasis()
        basis = None
        degen = 0
        nb = 0
        if hb.valid:
            basis = Basis(
                np.asarray([int(s) for s in hb.col_status], dtype=np.int8),
                np.asarray([int(s) for s in hb.row_status], dtype=np.int8),
            )
            basis.col_status[basis.col_status == 4] = ZERO
            basis.row_status[basis.row_status == 4] = ZERO
            degen = _degenerate_count(p, x, act, basis)
            nb = int(np.count_nonzero(basis.col_status == BASIC) + np.count_nonzero(basis.row_status == BASIC))
        obj = float(np.dot(p.cost, x) + p.offset) if status == OPTIMAL else float(info.objective_function_value)
        return LpSolution(
            status, obj, x, duals, rc, act, int(info.simplex_iteration_count), basis, degen, nb, "highs"
        )


def _empty_solution(p: LpProblem) -> LpSolution:
    lo, hi = p.row_bounds()
    ok = bool(np.all((lo <= EPS_FEAS) & (hi >= -EPS_FEAS)))
    m = p.n_rows
    return LpSolution(
        OPTIMAL if ok else INFEASIBLE,
        p.offset,
        np.zeros(0),
        np.zeros(m),
        np.zeros(0),
        np.zeros(m),
        0,
        Basis(np.zeros(0, dtype=np.int8), np.ones(m, dtype=np.int8)),
    )


def _extend_basis(basis: Basis, p: LpProblem) -> tuple[np.ndarray, np.ndarray]:
    """Pad a basis to the current shape: new columns nonbasic at a bound, new rows basic."""
    cs = np.asarray(basis.col_status, dtype=np.int8)[: p.n_cols]
    rs = np.asarray(basis.row_status, dtype=np.int8)[: p.n_rows]
    extra_c = []
    for j in range(cs.size, p.n_cols):
        if math.isfinite(p.lb[j]):
            extra_c.append(LOWER)
        elif math.isfinite(p.ub[j]):
            extra_c.append(UPPER)
        else:
            extra_c.append(ZERO)
    cs = np.concatenate([cs, np.asarray(extra_c, dtype=np.int8)])
    rs = np.concatenate([rs, np.full(p.n_rows - rs.size, BASIC, dtype=np.int8)])
    return cs, rs


def solve_lp(
    p: LpProblem,
    warm_basis: Basis | None = None,
    engine: str = "highs",
    iteration_limit: int | None = None,
) -> LpSolution:
    """One-shot solve; ``warm_basis`` may come from an earlier, smaller version of ``p``."""
    p.validate()
    s = LpSession(p, engine)
    if warm_basis is not None:
        s.set_basis(warm_basis)
    return s.solve(iteration_limit)


# ---------------------------------------------------------------- revised simplex


_REFACTOR_EVERY = 64
_PIV_TOL = 1e-9
_DUAL_TOL = 1e-9


def _simplex_solve(p: LpProblem, warm: Basis | None, iteration_limit: int | None) -> LpSolution:
    n, m = p.n_cols, p.n_rows
    if n == 0:
        return _empty_solution(p)
    A = p.matrix()
    M = sp.hstack([A, -sp.identity(m, format="csc")], format="csc")
    rlo, rhi = p.row_bounds()
    lo = np.concatenate([np.asarray(p.lb, dtype=float), rlo])
    hi = np.concatenate([np.asarray(p.ub, dtype=float), rhi])
    c = np.concatenate([np.asarray(p.cost, dtype=float), np.zeros(m)])
    N = n + m
    limit = iteration_limit if iteration_limit is not None else 50 * (N + m) + 1000

    status = np.empty(N, dtype=np.int8)
    head = None
    if warm is not None:
        cs, rs = _extend_basis(warm, p)
        st = np.concatenate([cs, rs])
        if np.count_nonzero(st == BASIC) == m:
            status[:] = st
            head = np.nonzero(st == BASIC)[0]
    if head is None:
        status[:n] = LOWER
        status[n:] = BASIC
        head = np.arange(n, N)
    x = np.zeros(N)
    _place_nonbasic(status, x, lo, hi)

    def factor(h):
        Bd = M[:, h].toarray()
        try:
            inv = np.linalg.inv(Bd)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(inv)) or np.abs(inv).max(initial=0.0) > 1e12:
            return None
        return inv

    failures = 0
    Binv = factor(head) if m else np.zeros((0, 0))
    while Binv is None:
        failures += 1
        if failures >= 3:
            raise NumericalBreakdown("basis refactorization failed repeatedly")
        status[:n] = LOWER
        status[n:] = BASIC
        head = np.arange(n, N)
        _place_nonbasic(status, x, lo, hi)
        Binv = factor(head)

    it = 0
    since_factor = 0
    stalled = 0
    bland = False
    result = None
    while True:
        if since_factor >= _REFACTOR_EVERY:
            F = factor(head)
            if F is None:
                failures += 1
                if failures >= 3:
                    raise NumericalBreakdown("basis refactorization failed repeatedly")
            else:
                Binv = F
            since_factor = 0
        xm = x.copy()
        xm[head] = 0.0
        xB = -Binv @ (M @ xm)
        x[head] = xB
        lb_h, ub_h = lo[head], hi[head]
        below = xB < lb_h - EPS_FEAS
        above = xB > ub_h + EPS_FEAS
        phase1 = bool(below.any() or above.any())
        if phase1:
            cB = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            cN = np.zeros(N)
        else:
            cB = c[head]
            cN = c
        y = cB @ Binv
        d = cN - M.T @ y
        d[head] = 0.0
        can_up = ((status == LOWER) | (status == ZERO)) & (x < hi - EPS_FEAS)
        can_dn = ((status == UPPER) | (status == ZERO)) & (x > lo + EPS_FEAS)
        score = np.where(can_up & (d < -_DUAL_TOL), -d, 0.0) + np.where(can_dn & (d > _DUAL_TOL), d, 0.0)
        score[head] = 0.0
        cand = np.nonzero(score > 0)[0]
        if cand.size == 0:
            result = INFEASIBLE if phase1 else OPTIMAL
            break
        if it >= limit:
            result = ITERATION_LIMIT
            break
        j = int(cand[0]) if bland else int(cand[np.argmax(score[cand])])
        direction = 1.0 if d[j] < 0 else -1.0
        w = Binv @ M[:, j].toarray().ravel()
        g = -direction * w
        ratios = np.full(m, INF)
        dec = g < -_PIV_TOL
        inc = g > _PIV_TOL
        with np.errstate(divide="ignore", invalid="ignore"):
            # decreasing basics: blocked by ub when above it, else by lb when feasible
            r = np.where(above, (xB - ub_h) / -g, np.where(~below, (xB - lb_h) / -g, INF))
            ratios = np.where(dec, r, ratios)
            r = np.where(below, (lb_h - xB) / g, np.where(~above, (ub_h - xB) / g, INF))
            ratios = np.where(inc, r, ratios)
        ratios = np.where(np.isnan(ratios), INF, ratios)
        ratios = np.maximum(ratios, 0.0)
        flip = hi[j] - lo[j]
        theta = min(ratios.min() if m else INF, flip)
        if not math.isfinite(theta):
            if phase1:
                raise NumericalBreakdown("phase-1 ray without breakpoint")
            result = UNBOUNDED
            break
        it += 1
        if flip <= theta:
            x[j] = hi[j] if direction > 0 else lo[j]
            status[j] = UPPER if direction > 0 else LOWER
            x[head] = xB + g * flip
        else:
            ties = np.nonzero(ratios <= theta + 1e-12)[0]
            if bland:
                r_i = int(ties[np.argmin(head[ties])])
            else:
                r_i = int(ties[np.argmax(np.abs(g[ties]))])
            leaving = head[r_i]
            x[j] += direction * theta
            x[head] = xB + g * theta
            if g[r_i] < 0:
                hit_upper = bool(above[r_i])
            else:
                hit_upper = not bool(below[r_i])
            x[leaving] = hi[leaving] if hit_upper else lo[leaving]
            status[leaving] = UPPER if hit_upper else LOWER
            status[j] = BASIC
            head[r_i] = j
            piv = w[r_i]
            row = Binv[r_i] / piv
            Binv -= np.outer(w, row)
            Binv[r_i] = row
            since_factor += 1
        if theta <= 1e-12:
            stalled += 1
            if stalled > 2 * m:
                bland = True
        else:
            stalled = 0
            bland = False

    # final clean-up from a fresh factorization
    F = factor(head)
    if F is not None:
        Binv = F
        xm = x.copy()
        xm[head] = 0.0
        x[head] = -Binv @ (M @ xm)
    y = c[head] @ Binv if m else np.zeros(0)
    rc = np.asarray(p.cost, dtype=float) - A.T @ y
    xs = x[:n].copy()
    act = x[n:].copy()
    st_c = status[:n].copy()
    st_r = status[n:].copy()
    basis = Basis(st_c, st_r)
    obj = float(np.dot(p.cost, xs) + p.offset)
    degen = _degenerate_count(p, xs, act, basis)
    return LpSolution(result, obj, xs, y, rc, act, it, basis, degen, m, "simplex")


def _place_nonbasic(status, x, lo, hi):
    for j in np.nonzero(status != BASIC)[0]:
        s = status[j]
        if s == LOWER and math.isfinite(lo[j]):
            x[j] = lo[j]
        elif s == UPPER and math.isfinite(hi[j]):
            x[j] = hi[j]
        elif math.isfinite(lo[j]):
            status[j] = LOWER
            x[j] = lo[j]
        elif math.isfinite(hi[j]):
            status[j] = UPPER
            x[j] = hi[j]
        else:
            status[j] = ZERO
            x[j] = 0.0


# ---------------------------------------------------------------- export


def _fmt(v: float) -> str:
    return repr(float(v)) if v != int(v) else str(int(v))


def write_lp(p: LpProblem, out: TextIO | None = None) -> str:
    """Write ``p`` in CPLEX LP text layout. Columns are ``x<j>``, rows ``r<i>``."""
    buf = io.StringIO()

    def term(v, name, first):
        sign = "-" if v < 0 else ("" if first else "+")
        mag = abs(v)
        coef = "" if mag == 1 else _fmt(mag) + " "
        return f"{sign} {coef}{name}".strip() if first else f" {sign} {coef}{name}"

    buf.write(f"\\ {p.name}\nMinimize\n obj:")
    first = True
    for j, cj in enumerate(p.cost):
        if cj:
            buf.write((" " if first else "") + term(cj, f"x{j}", first))
            first = False
    if p.offset:
        buf.write(f" + {_fmt(p.offset)}" if not first else f" {_fmt(p.offset)}")
    buf.write("\nSubject To\n")
    A = p.matrix().tocsr()
    for i in range(p.n_rows):
        seg = slice(A.indptr[i], A.indptr[i + 1])
        parts = [term(v, f"x{j}", k == 0) for k, (j, v) in enumerate(zip(A.indices[seg], A.data[seg]))]
        lhs = "".join(parts) if parts else "0 x0"
        buf.write(f" r{i}: {lhs} {p.sense[i]} {_fmt(p.rhs[i])}\n")
    buf.write("Bounds\n")
    for j in range(p.n_cols):
        lo, hi = p.lb[j], p.ub[j]
        los = "-inf" if lo == -INF else _fmt(lo)
        his = "+inf" if hi == INF else _fmt(hi)
        buf.write(f" {los} <= x{j} <= {his}\n")
    buf.write("End\n")
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
