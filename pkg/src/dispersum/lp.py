"""Master linear programs over the cut pool.

The node relaxation at a branch-and-bound node with variable bounds
l <= x <= u is

    max  theta
    s.t. theta <= g_k . x + c_k      (one row per cut)
         sum(x) = p
         l <= x <= u,

an upper bound on f over the node because every cut overestimates f.  The
solve never needs a phase 1: a feasible basis can be written down directly
(raise enough free coordinates to reach the cardinality, put theta on the
tightest cut row), and large pools are handled by row generation -- solve
with a working subset, pull in whatever the optimum violates, repeat.  The
returned point is verified against the *full* pool, so callers always see
an exact optimum of the complete relaxation.
"""

from __future__ import annotations

import collections
import dataclasses
import weakref
from typing import Optional, Sequence, Union

import numpy as np

from .cuts import Cut, CutPool
from .model import Status
from .simplex import (
    AT_LOWER,
    AT_UPPER,
    BASIC,
    FREE,
    SimplexError,
    SimplexStatus,
    _State,
    dual_simplex_core,
    simplex_core,
)
from .tolerances import FEAS_TOL, INT_TOL

# Pools at most this large are solved in one shot; larger ones go through
# the working-set loop.
_DIRECT_CAP = 192
_ADD_BATCH = 64


@dataclasses.dataclass
class NodeLP:
    """Variable bounds of one node plus the pool version it was solved with."""

    lower: np.ndarray
    upper: np.ndarray
    cut_pool_version: int = 0

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        if self.lower.shape != self.upper.shape:
            raise ValueError("bound vectors disagree in length")


def root_node(n: int) -> NodeLP:
    return NodeLP(lower=np.zeros(n), upper=np.ones(n))


@dataclasses.dataclass
class WarmBasis:
    """Optimal basis snapshot for restarts after bound or pool changes.

    Column ids follow the standard-form layout [x_0..x_{n-1}, theta,
    slack_0..], where slack k belongs to pool cut k, so the snapshot stays
    meaningful as the pool appends rows: new slacks simply join the basis.
    A restart from here is dual-feasible (bound changes and new rows never
    touch reduced-cost signs), so a few dual pivots repair it.  Treated as
    immutable by everything that holds one.
    """

    basis: np.ndarray  # (m_store + 1,) column ids
    vstat_head: np.ndarray  # (n + 1,) statuses of the x columns and theta
    vstat_slack: np.ndarray  # (m_store,) statuses of the slack columns


@dataclasses.dataclass
class LpResult:
    status: Status
    x: Optional[np.ndarray]
    theta: float
    fractional_indices: list[int]
    # Reduced costs of the x columns at the optimum (None when the node was
    # decided without a simplex run).  Supergradients of the node value as a
    # function of each fixed variable level, so callers may use them to fix
    # variables whose flip provably cannot beat an incumbent.
    reduced_costs: Optional[np.ndarray] = None
    # Optimal dual weights on the cut rows, stored sparse as (pool indices,
    # values).  They are nonnegative and sum to one, so they blend the cuts
    # into a single valid overestimator -- see blend_bound.
    cut_duals: Optional[tuple[np.ndarray, np.ndarray]] = None
    # Basis snapshot for warm-starting child or re-solve LPs (None when the
    # solve bypassed the simplex or ran through row generation).
    warm: Optional[WarmBasis] = None


def _pool_views(cuts: Union[CutPool, Sequence[Cut]]) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(cuts, CutPool):
        return cuts.matrix, cuts.offsets
    g = np.stack([c.gradient for c in cuts])
    c0 = np.array([c.offset for c in cuts])
    return g, c0


def solve_node_lp(
    cuts: Union[CutPool, Sequence[Cut]],
    node: NodeLP,
    p: int,
    warm: Optional[WarmBasis] = None,
) -> LpResult:
    """Exact optimum of the node relaxation over the full cut pool."""
    if len(cuts) == 0:
        raise ValueError("empty cut pool: theta is unbounded without at least one cut")
    g_all, c_all = _pool_views(cuts)
    m = g_all.shape[0]
    n = g_all.shape[1]
    lower, upper = node.lower, node.upper
    if lower.shape != (n,):
        raise ValueError(f"node bounds have length {lower.shape[0]}, cuts expect {n}")

    lo_sum = float(lower.sum())
    up_sum = float(upper.sum())
    if lo_sum > p + FEAS_TOL or up_sum < p - FEAS_TOL:
        return LpResult(Status.INFEASIBLE, None, float("-inf"), [])

    free = np.flatnonzero(upper > lower)
    if free.size == 0:
        # Fully fixed node: nothing to optimise, theta is the pool minimum.
        x = lower.copy()
        theta = float((g_all @ x + c_all).min())
        return LpResult(Status.OPTIMAL, x, theta, [])

    if m <= _DIRECT_CAP:
        pool = cuts if isinstance(cuts, CutPool) else None
        x, theta, dx, lam, out_basis = _solve_working(g_all, c_all, node, p, warm, pool)
        return _finish(x, theta, dx, lam, out_basis, None, lower, upper)

    # Row generation: recent cuts first (they hug the incumbent region).
    # Warm bases are not used here: their slack ids index the full pool,
    # not whichever working subset this loop settles on.
    work = list(range(max(0, m - 2 * _ADD_BATCH), m))
    in_work = np.zeros(m, dtype=bool)
    in_work[work] = True
    for _ in range(m + 1):
        x, theta, dx, lam, _ = _solve_working(g_all[work], c_all[work], node, p, None)
        viol = theta - (g_all @ x + c_all)
        viol[in_work] = -np.inf
        order = np.argsort(-viol, kind="stable")
        picked = [int(j) for j in order[:_ADD_BATCH] if viol[j] > 0.5 * FEAS_TOL]
        if not picked:
            # Inactive rows carry zero duals, so the working-set reduced
            # costs (and cut duals) are the full pool's.
            return _finish(x, theta, dx, lam, None, np.asarray(work), lower, upper)
        work.extend(picked)
        in_work[picked] = True
    raise RuntimeError("row generation failed to converge")  # pragma: no cover


def _finish(
    x: np.ndarray,
    theta: float,
    dx: np.ndarray,
    lam: np.ndarray,
    out_basis: Optional[WarmBasis],
    work: Optional[np.ndarray],
    lower,
    upper,
) -> LpResult:
    np.clip(x, lower, upper, out=x)
    frac = np.flatnonzero(np.minimum(x, 1.0 - x) > INT_TOL)
    support = np.flatnonzero(lam > 0.0)
    idx = support if work is None else work[support]
    duals = (idx.astype(np.int64), lam[support])
    return LpResult(Status.OPTIMAL, x, theta, [int(i) for i in frac], dx, duals, out_basis)


def combinatorial_bound(
    cuts: Union[CutPool, Sequence[Cut]], lower: np.ndarray, upper: np.ndarray, p: int
) -> float:
    """Cheap node bound: optimise each cut separately over the 0/1 bounds.

    Every feasible x of the node keeps theta under each cut's own best
    cardinality-p completion, so the minimum over cuts bounds the node LP
    from above without running it.  Only meaningful at binary bounds."""
    g_all, c_all = _pool_views(cuts)
    base = g_all @ lower + c_all
    budget = p - int(round(float(lower.sum())))
    free = np.flatnonzero(upper > lower)
    if budget < 0 or budget > free.size:
        return float("-inf")
    if budget == 0 or free.size == 0:
        return float(base.min())
    gf = g_all[:, free]
    if budget >= gf.shape[1]:
        gains = gf.sum(axis=1)
    else:
        gains = np.partition(gf, gf.shape[1] - budget, axis=1)[:, -budget:].sum(axis=1)
    return float((base + gains).min())


def blend_bound(
    cuts: Union[CutPool, Sequence[Cut]],
    duals: tuple[np.ndarray, np.ndarray],
    lower: np.ndarray,
    upper: np.ndarray,
    p: int,
) -> float:
    """Node bound from one convex blend of cuts, without a simplex run.

    Nonnegative weights summing to one combine the cuts into a single valid
    overestimator, whose best cardinality-p completion over the 0/1 bounds
    bounds the node LP from above.  Fed with a parent node's optimal duals
    it reproduces the parent LP value exactly, so on a child (one bound
    flipped) it is typically far tighter than the per-cut minimum.  Only
    meaningful at binary bounds."""
    idx, val = duals
    g_all, c_all = _pool_views(cuts)
    g = val @ g_all[idx]
    base = float(g @ lower) + float(val @ c_all[idx])
    budget = p - int(round(float(lower.sum())))
    free = np.flatnonzero(upper > lower)
    if budget < 0 or budget > free.size:
        return float("-inf")
    if budget == 0 or free.size == 0:
        return base
    gf = g[free]
    if budget >= gf.size:
        return base + float(gf.sum())
    return base + float(np.partition(gf, gf.size - budget)[-budget:].sum())


_MATRIX_CACHE: "weakref.WeakKeyDictionary[CutPool, tuple]" = weakref.WeakKeyDictionary()

# (constraint-matrix identity, basis bytes) -> (matrix ref, basis inverse).
# The matrix reference both validates the id against reuse after collection
# and keeps the entry's matrix alive so the id cannot be recycled.  Entries
# are written both when a basis is factorised and when a solve finishes (the
# final inverse is free to keep), because under best-bound exploration a
# node's children surface long after the parent solved.
_BINV_STORE: "collections.OrderedDict[tuple[int, bytes], tuple]" = collections.OrderedDict()
_BINV_STORE_CAP = 2048


def _standard_form(
    g: np.ndarray, c0: np.ndarray, p: int, pool: Optional[CutPool]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Constraint matrix, right-hand side and objective for one cut set.

    Columns: x_0..x_{n-1}, theta, s_0..s_{m-1}; rows: m cuts then the
    cardinality row.  The simplex cores never write to these, and the pool
    is append-only, so when solving over a whole pool the arrays are reused
    until the next cut lands (node bounds live in lb/ub, built per call)."""
    m, n = g.shape
    if pool is not None:
        hit = _MATRIX_CACHE.get(pool)
        if hit is not None and hit[0] == m and hit[1] == p:
            return hit[2], hit[3], hit[4]
    N = n + 1 + m
    A = np.zeros((m + 1, N))
    A[:m, :n] = -g
    A[:m, n] = 1.0
    np.fill_diagonal(A[:m, n + 1 :], 1.0)
    A[m, :n] = 1.0
    b = np.concatenate([c0, [float(p)]])
    cobj = np.zeros(N)
    cobj[n] = 1.0
    if pool is not None:
        _MATRIX_CACHE[pool] = (m, p, A, b, cobj)
    return A, b, cobj


def _solve_working(
    g: np.ndarray,
    c0: np.ndarray,
    node: NodeLP,
    p: int,
    warm: Optional[WarmBasis] = None,
    pool: Optional[CutPool] = None,
) -> tuple[np.ndarray, float, np.ndarray, np.ndarray, WarmBasis]:
    """Simplex solve over one working set of cuts.

    Starts from the supplied basis snapshot when one fits (bound changes and
    appended rows keep it dual-feasible, so a short dual-simplex repair plus
    one pricing pass finishes it); otherwise, or when the repair trips its
    iteration cap, falls back to a crafted feasible basis.  Returns the
    point, the objective, the x-column reduced costs, the cut-row duals and
    a snapshot of the optimal basis."""
    m, n = g.shape
    lower, upper = node.lower, node.upper

    N = n + 1 + m
    A, b, cobj = _standard_form(g, c0, p, pool)
    lb = np.concatenate([lower, [-np.inf], np.zeros(m)])
    ub = np.concatenate([upper, [np.inf], np.full(m, np.inf)])

    if (
        warm is not None
        and warm.vstat_head.shape[0] == n + 1
        and warm.vstat_slack.shape[0] <= m
    ):
        try:
            state = _restore_basis(A, b, lb, ub, warm, n, m)
            xb = state.values[state.basis]
            worst = float(
                np.maximum(state.lb[state.basis] - xb, xb - state.ub[state.basis]).max()
            )
            if worst > 1e-9:
                dstatus = dual_simplex_core(
                    state, cobj, rc_tol=1e-9, max_iter=40 + 4 * (m + 1)
                )
                if dstatus is not SimplexStatus.OPTIMAL:
                    # The relaxation is feasible whenever the cardinality row
                    # fits the bounds (checked by the caller), so a dual
                    # INFEASIBLE verdict here is numerical noise.
                    raise SimplexError("dual repair failed to finish")
            status = simplex_core(state, cobj, rc_tol=1e-9, max_iter=20000 + 50 * (m + N))
            if status is not SimplexStatus.OPTIMAL:
                raise SimplexError(f"warm-started node LP ended {status}")
            return _extract(state, A, cobj, n, m)
        except SimplexError:
            pass  # stale or degenerate snapshot: solve cold below

    # Feasible start: raise the first free coordinates up to cardinality p,
    # sit theta on the tightest cut, give every other cut its slack.
    xhat = lower.copy()
    free = np.flatnonzero(upper > lower)
    vstat = np.full(N, AT_LOWER, dtype=np.int8)
    remaining = float(p) - float(xhat.sum())
    x_b = -1
    for j in free:
        if remaining <= 1e-12:
            break
        cap = upper[j] - lower[j]
        if cap >= remaining - 1e-12:
            xhat[j] = lower[j] + remaining
            if abs(xhat[j] - upper[j]) <= 1e-12:
                xhat[j] = upper[j]
                vstat[j] = AT_UPPER
            else:
                x_b = int(j)  # strictly interior, must sit in the basis
            break
        xhat[j] = upper[j]
        vstat[j] = AT_UPPER
        remaining -= cap
    if x_b < 0:
        x_b = int(free[0])
    rhs = g @ xhat + c0
    k0 = int(np.argmin(rhs))
    theta0 = float(rhs[k0])
    slacks = rhs - theta0
    basis = np.array([n] + [n + 1 + k for k in range(m) if k != k0] + [x_b], dtype=np.int64)
    vstat[n] = BASIC
    vstat[n + 1 :] = BASIC
    vstat[n + 1 + k0] = AT_LOWER
    vstat[x_b] = BASIC

    values = np.concatenate([xhat, [theta0], slacks])
    values[n + 1 + k0] = 0.0

    state = _State(A=A, b=b, lb=lb, ub=ub, basis=basis, vstat=vstat, values=values)
    status = simplex_core(state, cobj, rc_tol=1e-9, max_iter=20000 + 50 * (m + N))
    if status is not SimplexStatus.OPTIMAL:  # pragma: no cover - theta is always capped
        raise RuntimeError(f"node LP ended {status}")
    return _extract(state, A, cobj, n, m)


def _restore_basis(
    A: np.ndarray,
    b: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    warm: WarmBasis,
    n: int,
    m: int,
) -> _State:
    """Rebuild simplex state from a snapshot against the current bounds.

    Slacks of rows appended since the snapshot enter the basis (their columns
    are unit vectors on fresh rows, so the basis matrix stays nonsingular and
    every nonbasic reduced cost keeps its old value).  Nonbasic variables sit
    on the *current* bounds; recomputing the basics then exposes whatever
    primal infeasibility the bound changes introduced.
    """
    m_store = warm.vstat_slack.shape[0]
    vstat = np.empty(n + 1 + m, dtype=np.int8)
    vstat[: n + 1] = warm.vstat_head
    vstat[n + 1 : n + 1 + m_store] = warm.vstat_slack
    vstat[n + 1 + m_store :] = BASIC
    basis = np.concatenate(
        [warm.basis, np.arange(n + 1 + m_store, n + 1 + m, dtype=np.int64)]
    )
    values = np.zeros(n + 1 + m)
    at_lo = vstat == AT_LOWER
    at_up = vstat == AT_UPPER
    values[at_lo] = lb[at_lo]
    values[at_up] = ub[at_up]
    state = _State(A=A, b=b, lb=lb, ub=ub, basis=basis, vstat=vstat, values=values)
    # Sibling and cousin nodes frequently restore the same basis against the
    # same constraint matrix, so the basis inverse is kept in a keyed store
    # (the cores mutate their working copy in place, hence the copies).
    key = (id(A), basis.tobytes())
    hit = _BINV_STORE.get(key)
    if hit is not None and hit[0] is A:
        _BINV_STORE.move_to_end(key)
        state.binv = hit[1].copy()
        state.recompute_basics()
    else:
        state.refactor()  # raises SimplexError if the stored basis went singular
        _store_binv(key, A, state.binv)
    return state


def _store_binv(key: tuple, A: np.ndarray, binv: np.ndarray) -> None:
    _BINV_STORE[key] = (A, binv.copy())
    _BINV_STORE.move_to_end(key)
    if len(_BINV_STORE) > _BINV_STORE_CAP:
        _BINV_STORE.popitem(last=False)


def _extract(
    state: _State, A: np.ndarray, cobj: np.ndarray, n: int, m: int
) -> tuple[np.ndarray, float, np.ndarray, np.ndarray, WarmBasis]:
    # The solve's final inverse is exactly what this node's children will
    # ask the store for, and it is free to keep now.
    _store_binv((id(A), state.basis.tobytes()), A, state.binv)
    y = state.binv.T @ cobj[state.basis]
    dx = cobj[:n] - y @ A[:, :n]
    # Cut-row duals: nonnegative, summing to one (theta's column forces it).
    lam = np.maximum(y[:m], 0.0)
    snap = WarmBasis(
        basis=state.basis.copy(),
        vstat_head=state.vstat[: n + 1].copy(),
        vstat_slack=state.vstat[n + 1 :].copy(),
    )
    return state.values[:n].copy(), float(state.values[n]), dx, lam, snap


def lp_reference_check(
    cuts: Union[CutPool, Sequence[Cut]],
    node: NodeLP,
    p: int,
    result: LpResult,
    *,
    tol: float = 1e-6,
) -> bool:
    """Feasibility audit plus, on small systems, an independent re-solve.

    The result's point must satisfy the cardinality row, the bounds and every
    cut.  For systems with at most 12 variables and 12 cuts the objective is
    also matched against an unrelated dense LP code (scipy's HiGHS interface)
    so the simplex above never certifies itself.
    """
    if result.status is not Status.OPTIMAL:
        return True
    g, c0 = _pool_views(cuts)
    x, theta = result.x, result.theta
    if abs(float(x.sum()) - p) > FEAS_TOL:
        return False
    if (x < node.lower - FEAS_TOL).any() or (x > node.upper + FEAS_TOL).any():
        return False
    if (theta - (g @ x + c0)).max() > FEAS_TOL:
        return False

    n = x.shape[0]
    if n <= 12 and g.shape[0] <= 12:
        from scipy.optimize import linprog

        cobj = np.zeros(n + 1)
        cobj[n] = -1.0  # linprog minimises
        a_ub = np.concatenate([-g, np.ones((g.shape[0], 1))], axis=1)
        a_eq = np.concatenate([np.ones((1, n)), np.zeros((1, 1))], axis=1)
        bounds = [(node.lower[i], node.upper[i]) for i in range(n)] + [(None, None)]
        ref = linprog(
            cobj,
            A_ub=a_ub,
            b_ub=c0,
            A_eq=a_eq,
            b_eq=[float(p)],
            bounds=bounds,
            method="highs",
        )
        if not ref.success:
            return False
        if abs(-ref.fun - theta) > tol * (1.0 + abs(theta)):
            return False
    return True
