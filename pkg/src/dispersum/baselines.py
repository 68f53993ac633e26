"""Reference solvers: exhaustive enumeration and an F3-style MILP.

``brute_force`` is the ground-truth oracle for desk sizes: it walks all
C(n, p) selections with incremental objective updates and refuses anything
above 10^7 subsets.  ``build_f3`` produces the classical linearisation of
the quadratic selection objective --

    max sum_i w_i
    s.t. w_i <= x_i * R_i,          R_i = sum_{j>i} q_ij
         w_i <= sum_{j>i} q_ij x_j
         sum x = p,  x binary,  w >= 0

-- which a plain LP-relaxation branch and bound (``solve_milp``) then
solves.  Its bound is famously loose; that contrast with the tangent-cut
engine is the point of carrying it around.
"""

from __future__ import annotations

import dataclasses
import heapq
import math
import time
from typing import Callable, Optional

import numpy as np

from .model import BinarySolution, Instance, SolveReport, Status, objective
from .simplex import (
    AT_LOWER,
    AT_UPPER,
    BASIC,
    LpSolution,
    SimplexStatus,
    _State,
    _default_iter_cap,
    simplex_core,
    solve_lp,
)
from .engine import SolveParams
from .tolerances import FEAS_TOL, INT_TOL, gap_tolerance

SUBSET_GUARD = 10_000_000


def brute_force(inst: Instance) -> BinarySolution:
    """Exact optimum by enumeration; ties go to the lexicographically
    smallest index set.  Refuses instances with C(n, p) > 10^7."""
    n, p, q = inst.n, inst.p, inst.q
    if not 1 <= p <= n:
        raise ValueError(f"p={p} outside [1, {n}]")
    total = math.comb(n, p)
    if total > SUBSET_GUARD:
        raise ValueError(
            f"C({n}, {p}) = {total} subsets exceeds the enumeration guard {SUBSET_GUARD}"
        )
    if p == n:
        return BinarySolution.from_indices(inst, range(n))

    best_val = -np.inf
    best: Optional[list[int]] = None
    contrib = np.zeros(n)  # sum of q rows over the current prefix
    prefix: list[int] = []

    def rec(start: int, val: float) -> None:
        nonlocal best_val, best, contrib
        remaining = p - len(prefix)
        if remaining == 1:
            vals = val + contrib[start:]
            j = int(np.argmax(vals))  # first maximum = lex-smallest completion
            v = float(vals[j])
            if v > best_val:
                best_val = v
                best = prefix + [start + j]
            return
        for j in range(start, n - remaining + 1):
            prefix.append(j)
            val_j = val + contrib[j]
            contrib += q[j]
            rec(j + 1, val_j)
            contrib -= q[j]
            prefix.pop()

    rec(0, 0.0)
    assert best is not None
    return BinarySolution.from_indices(inst, best)


@dataclasses.dataclass(eq=False)
class MilpModel:
    """max c.x  s.t.  a_ub x <= b_ub, a_eq x = b_eq, lb <= x <= ub,
    x[integral] binary."""

    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integral: np.ndarray  # bool mask

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=np.float64)
        nx = self.c.shape[0]
        self.a_ub = np.asarray(self.a_ub, dtype=np.float64).reshape(-1, nx)
        self.b_ub = np.asarray(self.b_ub, dtype=np.float64)
        self.a_eq = np.asarray(self.a_eq, dtype=np.float64).reshape(-1, nx)
        self.b_eq = np.asarray(self.b_eq, dtype=np.float64)
        self.lb = np.asarray(self.lb, dtype=np.float64)
        self.ub = np.asarray(self.ub, dtype=np.float64)
        self.integral = np.asarray(self.integral, dtype=bool)
        if self.a_ub.shape[0] != self.b_ub.shape[0] or self.a_eq.shape[0] != self.b_eq.shape[0]:
            raise ValueError("row counts disagree with right-hand sides")
        for arr in (self.lb, self.ub, self.integral):
            if arr.shape != (nx,):
                raise ValueError("bound or integrality vector has the wrong length")


def build_f3(inst: Instance) -> MilpModel:
    """Linearise the dispersion objective with one w per leading index."""
    n, p, q = inst.n, inst.p, inst.q
    if n < 2:
        raise ValueError("the linearisation needs n >= 2")
    nw = n - 1
    nx = n + nw
    R = np.array([q[i, i + 1 :].sum() for i in range(nw)])

    c = np.zeros(nx)
    c[n:] = 1.0
    a_ub = np.zeros((2 * nw, nx))
    for i in range(nw):
        a_ub[2 * i, i] = -R[i]  # w_i - R_i x_i <= 0
        a_ub[2 * i, n + i] = 1.0
        a_ub[2 * i + 1, i + 1 : n] = -q[i, i + 1 :]  # w_i - sum_j q_ij x_j <= 0
        a_ub[2 * i + 1, n + i] = 1.0
    b_ub = np.zeros(2 * nw)
    a_eq = np.zeros((1, nx))
    a_eq[0, :n] = 1.0
    b_eq = np.array([float(p)])
    lb = np.zeros(nx)
    ub = np.concatenate([np.ones(n), np.maximum(R, 0.0)])
    integral = np.concatenate([np.ones(n, dtype=bool), np.zeros(nw, dtype=bool)])
    return MilpModel(c, a_ub, b_ub, a_eq, b_eq, lb, ub, integral)


def f3_warm_start(inst: Instance, sol: BinarySolution) -> np.ndarray:
    """Lift a selection into a feasible (x, w) point of the F3 model."""
    n = inst.n
    x = sol.x.astype(np.float64)
    w = np.empty(n - 1)
    for i in range(n - 1):
        w[i] = min(x[i] * inst.q[i, i + 1 :].sum(), float(inst.q[i, i + 1 :] @ x[i + 1 :]))
    return np.concatenate([x, np.maximum(w, 0.0)])


class _F3NodeSolver:
    """Phase-1-free node relaxation solver for the F3 row pattern.

    Every F3 node LP admits the same feasible crash basis: all row slacks
    plus one x column covering the cardinality row (that basis matrix is
    triangular up to a row permutation, so always invertible).  Starting
    phase 2 from it roughly halves the work of the generic two-phase
    entry, which matters because the loose relaxation makes the tree
    large.
    """

    def __init__(self, model: MilpModel) -> None:
        self.n = int(model.integral.sum())  # x variables; the rest are w
        self.p = float(model.b_eq[0])
        nx = model.c.shape[0]
        m = model.a_ub.shape[0] + 1
        self.m = m
        self.nx = nx
        N = nx + model.a_ub.shape[0]
        A = np.zeros((m, N))
        A[:-1, :nx] = model.a_ub
        A[:-1, nx:] = np.eye(m - 1)
        A[-1, :nx] = model.a_eq[0]
        self.A = A
        self.b = np.concatenate([model.b_ub, model.b_eq])
        self.c2 = np.zeros(N)
        self.c2[:nx] = model.c
        self.rc_tol = 1e-9 * max(1.0, float(np.abs(model.c).max(initial=0.0)))
        self.max_iter = _default_iter_cap(m, N)
        self.slack_lb = np.zeros(m - 1)
        self.slack_ub = np.full(m - 1, np.inf)

    def __call__(self, node_lb: np.ndarray, node_ub: np.ndarray) -> LpSolution:
        n, nx, m = self.n, self.nx, self.m
        lb = np.concatenate([node_lb, self.slack_lb])
        ub = np.concatenate([node_ub, self.slack_ub])

        # Feasible x for the cardinality row: raise free coordinates off
        # their lower bounds until the total reaches p.
        x = node_lb[:n].copy()
        remaining = self.p - float(x.sum())
        if remaining < -FEAS_TOL or float(node_ub[:n].sum()) < self.p - FEAS_TOL:
            return LpSolution(SimplexStatus.INFEASIBLE, None, float("nan"))
        vstat = np.full(nx + m - 1, AT_LOWER, dtype=np.int8)
        basic_x = -1
        for j in range(n):
            cap = node_ub[j] - node_lb[j]
            if cap <= 0.0:
                continue
            if remaining <= 0.0:
                break
            take = min(cap, remaining)
            x[j] += take
            remaining -= take
            if take < cap:
                basic_x = j  # strictly interior: natural basic candidate
            else:
                vstat[j] = AT_UPPER
        if remaining > FEAS_TOL:
            return LpSolution(SimplexStatus.INFEASIBLE, None, float("nan"))
        if basic_x < 0:
            basic_x = 0
            vstat[0] = BASIC
        else:
            vstat[basic_x] = BASIC

        # Start phase 2 at the greedy completion for this x: each w basic
        # on whichever of its two cap rows is tighter, at the min of the
        # caps; the loose row keeps its slack basic.  The basis matrix is
        # block-triangular up to a row permutation, hence invertible.
        nw = nx - n
        cap_r = -self.A[0 : 2 * nw : 2, :n] @ x  # R_i * x_i
        cap_q = -self.A[1 : 2 * nw : 2, :n] @ x  # sum_{j>i} q_ij x_j
        w = np.minimum(cap_r, cap_q)

        values = np.zeros(nx + m - 1)
        values[:n] = x
        values[n:nx] = w
        vstat[n:nx] = BASIC
        vstat[nx:] = AT_LOWER
        basis = np.empty(m, dtype=np.int64)
        tight_r = cap_r <= cap_q
        rows = np.arange(nw)
        w_rows = np.where(tight_r, 2 * rows, 2 * rows + 1)
        s_rows = np.where(tight_r, 2 * rows + 1, 2 * rows)
        basis[w_rows] = n + rows
        basis[s_rows] = nx + s_rows
        values[nx + s_rows] = np.abs(cap_r - cap_q)
        vstat[nx + s_rows] = BASIC
        basis[-1] = basic_x

        state = _State(A=self.A, b=self.b, lb=lb, ub=ub,
                       basis=basis, vstat=vstat, values=values)
        state.refactor()
        status = simplex_core(state, self.c2, rc_tol=self.rc_tol, max_iter=self.max_iter)
        if status is not SimplexStatus.OPTIMAL:  # pragma: no cover - w is bounded
            return LpSolution(status, None, float("inf"))
        xs = state.values[:nx].copy()
        np.clip(xs, node_lb, node_ub, out=xs)
        return LpSolution(SimplexStatus.OPTIMAL, xs, float(self.c2[:nx] @ xs))


@dataclasses.dataclass(eq=False)
class _MilpNode:
    lb: np.ndarray
    ub: np.ndarray
    bound: float
    depth: int


def solve_milp(
    model: MilpModel,
    params: Optional[SolveParams] = None,
    warm: Optional[np.ndarray] = None,
    node_solver: Optional[Callable[[np.ndarray, np.ndarray], LpSolution]] = None,
) -> SolveReport:
    """Best-first LP-relaxation branch and bound over the binary mask.

    No cut generation of any kind -- the relaxation is taken as built.
    ``warm`` may seed the incumbent with a feasible point; ``node_solver``
    may replace the generic LP entry with a shape-specialised one taking
    the node bounds.
    """
    params = params or SolveParams()
    t0 = time.monotonic()
    deadline = None if params.time_limit is None else t0 + params.time_limit

    best_x: Optional[np.ndarray] = None
    lb_val = -np.inf
    if warm is not None:
        warm = np.asarray(warm, dtype=np.float64)
        if _feasible(model, warm):
            lb_val = float(model.c @ warm)
            best_x = warm

    int_idx = np.flatnonzero(model.integral)
    nodes = 0
    lps = 0
    seq = 0
    heap: list = []
    heapq.heappush(heap, (-np.inf, 0, seq, _MilpNode(model.lb.copy(), model.ub.copy(), np.inf, 0)))
    status = Status.OPTIMAL
    ub_final = lb_val

    while heap:
        if deadline is not None and time.monotonic() >= deadline:
            status = Status.TIME_LIMIT
            ub_final = max(lb_val, -heap[0][0] if heap else lb_val)
            break
        _, _, _, node = heapq.heappop(heap)
        if node.bound <= lb_val + gap_tolerance(lb_val, params.gap_abs, params.gap_rel):
            continue
        nodes += 1
        if node_solver is not None:
            res = node_solver(node.lb, node.ub)
        else:
            res = solve_lp(
                model.c, model.a_ub, model.b_ub, model.a_eq, model.b_eq,
                node.lb, node.ub, maximize=True,
            )
        lps += 1
        if res.status is SimplexStatus.INFEASIBLE:
            continue
        if res.status is SimplexStatus.UNBOUNDED:
            raise ValueError("unbounded relaxation: the model is missing bounds")
        bound = res.objective
        if bound <= lb_val + gap_tolerance(lb_val, params.gap_abs, params.gap_rel):
            continue
        xi = res.x[int_idx]
        frac = np.flatnonzero(np.minimum(xi - model.lb[int_idx], model.ub[int_idx] - xi) > INT_TOL)
        if frac.size == 0:
            x_int = res.x.copy()
            x_int[int_idx] = np.rint(x_int[int_idx])
            val = float(model.c @ x_int)
            if val > lb_val:
                lb_val = val
                best_x = x_int
            continue
        j = int(int_idx[frac[np.argmin(np.abs(xi[frac] - 0.5))]])
        for fix_up in (False, True):
            child = _MilpNode(node.lb.copy(), node.ub.copy(), bound, node.depth + 1)
            if fix_up:
                child.lb[j] = np.ceil(res.x[j] - INT_TOL)
            else:
                child.ub[j] = np.floor(res.x[j] + INT_TOL)
            if child.lb[j] > child.ub[j]:
                continue
            heapq.heappush(heap, (-bound, -child.depth, seq + 1, child))
            seq += 1

    if status is Status.OPTIMAL:
        if best_x is None:
            status = Status.INFEASIBLE
            ub_final = -np.inf
        else:
            ub_final = lb_val

    incumbent = None
    if best_x is not None:
        bits = np.zeros(model.c.shape[0], dtype=np.uint8)
        bits[int_idx] = np.rint(best_x[int_idx]).astype(np.uint8)
        incumbent = BinarySolution(x=bits[int_idx], value=lb_val)

    return SolveReport(
        status=status,
        incumbent=incumbent,
        lower_bound=lb_val,
        upper_bound=ub_final,
        cuts_added=0,
        nodes_explored=nodes,
        lp_solves=lps,
        wall_time_ms=1000.0 * (time.monotonic() - t0),
        cut_log=[],
    )


def _feasible(model: MilpModel, x: np.ndarray) -> bool:
    if x.shape != model.c.shape:
        return False
    scale = 1.0 + float(np.abs(model.b_ub).max(initial=0.0)) + float(
        np.abs(model.b_eq).max(initial=0.0)
    )
    if (x < model.lb - FEAS_TOL * scale).any() or (x > model.ub + FEAS_TOL * scale).any():
        return False
    if model.a_ub.size and (model.a_ub @ x - model.b_ub).max(initial=-np.inf) > FEAS_TOL * scale:
        return False
    if model.a_eq.size and np.abs(model.a_eq @ x - model.b_eq).max(initial=0.0) > FEAS_TOL * scale:
        return False
    xi = x[model.integral]
    return bool(np.abs(xi - np.rint(xi)).max(initial=0.0) <= INT_TOL)


def solve_f3(inst: Instance, params: Optional[SolveParams] = None) -> SolveReport:
    """Convenience wrapper: build F3, seed it greedily, run the MILP search."""
    from .engine import initial_solution

    model = build_f3(inst)
    warm = f3_warm_start(inst, initial_solution(inst))
    return solve_milp(model, params, warm=warm, node_solver=_F3NodeSolver(model))
