"""Branch-and-cut engines around the tangent-plane cuts.

Two exact modes share the machinery:

* single tree -- one best-first branch-and-bound run in which every node
  relaxation is solved over the *current* pool.  Integral LP optima whose
  theta improves on the incumbent become candidates: evaluate f, update the
  incumbent, append the tangent cut and re-solve the same node (never
  branch on an integral point).  Fractional optima branch on the most
  fractional coordinate.

* multi tree -- the textbook cutting-plane loop.  Each outer iteration
  freezes the pool and searches a fresh tree for *any* integral point with
  theta above the incumbent; the first one found becomes the next cut.
  No improving point anywhere means the incumbent is optimal.

Both modes start from the same greedy selection, prune with a shared gap
tolerance that dominates the LP feasibility tolerance, and log every
candidate event so the convergence diagnostics can be audited after the
fact.  A candidate whose gradient vanishes proves itself optimal (the cut
it would add caps theta at its own value), so the solve stops on the spot.
"""

from __future__ import annotations

import collections
import dataclasses
import heapq
import itertools
import math
import time
from typing import Callable, NamedTuple, Optional

import numpy as np

from .cuts import CutPool, gradient, make_cut, strengthen_cut
from .geometry import curvature_margin
from .lp import (
    NodeLP,
    LpResult,
    WarmBasis,
    blend_bound,
    combinatorial_bound,
    root_node,
    solve_node_lp,
)
from .model import BinarySolution, CutLogEntry, Instance, SolveReport, Status, objective
from .tolerances import GAP_ABS, GAP_REL, ZERO_GRAD_REL, gap_tolerance


class EngineFault(RuntimeError):
    """An internal invariant broke (e.g. a candidate source was revisited)."""


class Progress(NamedTuple):
    time_s: float
    lb: float
    ub: float
    nodes: int
    cuts: int


@dataclasses.dataclass
class SolveParams:
    time_limit: Optional[float] = None  # seconds of wall time
    gap_abs: float = GAP_ABS
    gap_rel: float = GAP_REL
    node_rule: str = "best-bound"
    branch_rule: str = "most-fractional"
    progress: Optional[Callable[[Progress], None]] = None
    progress_every: int = 256

    def __post_init__(self) -> None:
        if self.node_rule != "best-bound":
            raise ValueError(f"unsupported node rule {self.node_rule!r}")
        if self.branch_rule != "most-fractional":
            raise ValueError(f"unsupported branch rule {self.branch_rule!r}")


_SWAP_IMPROVE_CAP = 10_000


def swap_improve(inst: Instance, start: BinarySolution) -> BinarySolution:
    """Steepest-ascent 1-swap hill climb from a feasible selection.

    Exchanging selected i for unselected j changes the objective by
    (Qx)_j - (Qx)_i - q_ij, so a whole pass is one outer-product scan; the
    climb applies the best positive swap until none remains.  Ties go to the
    lowest flat index, keeping the result deterministic.
    """
    q = inst.q
    sel = np.flatnonzero(start.x == 1)
    out = np.flatnonzero(start.x == 0)
    if sel.size == 0 or out.size == 0:
        return start
    qx = q @ start.x.astype(np.float64)
    for _ in range(_SWAP_IMPROVE_CAP):
        delta = qx[None, out] - qx[sel, None] - q[np.ix_(sel, out)]
        k = int(np.argmax(delta))
        ii, jj = divmod(k, out.size)
        if delta[ii, jj] <= 1e-9:
            break
        i, j = int(sel[ii]), int(out[jj])
        qx += q[:, j] - q[:, i]
        sel[ii], out[jj] = j, i
    return BinarySolution.from_indices(inst, sel.tolist())


def initial_solution(inst: Instance) -> BinarySolution:
    """Greedy starter: farthest pair, then repeatedly the point with the
    largest total distance to the current selection, finished with a 1-swap
    hill climb.  p = 1 picks index 0."""
    n, p, q = inst.n, inst.p, inst.q
    if not 1 <= p <= n:
        raise ValueError(f"p={p} outside [1, {n}]")
    if p == 1:
        return BinarySolution.from_indices(inst, [0])
    flat = int(np.argmax(q))  # ties: lowest (i, j) in row-major order
    i, j = divmod(flat, n)
    if i == j:  # zero matrix: argmax lands on the diagonal
        i, j = 0, 1
    chosen = [min(i, j), max(i, j)]
    mask = np.zeros(n, dtype=bool)
    mask[chosen] = True
    gain = q[chosen[0]] + q[chosen[1]]
    while len(chosen) < p:
        cand = np.where(mask, -np.inf, gain)
        nxt = int(np.argmax(cand))
        chosen.append(nxt)
        mask[nxt] = True
        gain = gain + q[nxt]
    return swap_improve(inst, BinarySolution.from_indices(inst, chosen))


@dataclasses.dataclass(eq=False)
class _Node:
    lower: np.ndarray
    upper: np.ndarray
    bound: float
    depth: int
    pool_version: int = 0  # pool size when the bound was last tightened
    warm: Optional[WarmBasis] = None  # parent's optimal basis, shared read-only


@dataclasses.dataclass(eq=False)
class EngineState:
    """Shared bookkeeping for one solve."""

    inst: Instance
    params: SolveParams
    pool: CutPool
    incumbent: BinarySolution
    lb: float
    cut_log: list[CutLogEntry]
    t0: float
    deadline: Optional[float]
    k: int = 0
    nodes: int = 0
    lp_solves: int = 0
    seq: int = 0
    heap: list = dataclasses.field(default_factory=list)
    zero_gradient: bool = False
    kappa: float = 0.0  # curvature margin folded into pool cuts

    def gap_tol(self) -> float:
        return gap_tolerance(self.lb, self.params.gap_abs, self.params.gap_rel)

    def out_of_time(self) -> bool:
        return self.deadline is not None and time.monotonic() >= self.deadline

    def elapsed_ms(self) -> float:
        return 1000.0 * (time.monotonic() - self.t0)

    def push(self, node: _Node) -> None:
        if float(node.lower.sum()) > self.inst.p or float(node.upper.sum()) < self.inst.p:
            return  # no feasible cardinality below this node
        node.pool_version = len(self.pool)
        heapq.heappush(self.heap, (-node.bound, -node.depth, self.seq, node))
        self.seq += 1

    def queue_bound(self) -> float:
        return -self.heap[0][0] if self.heap else float("-inf")

    def emit_progress(self, ub: float) -> None:
        if self.params.progress is not None:
            self.params.progress(
                Progress(
                    time_s=(time.monotonic() - self.t0),
                    lb=self.lb,
                    ub=ub,
                    nodes=self.nodes,
                    cuts=len(self.pool),
                )
            )


# Above this size the one-off eigendecomposition behind the curvature
# margin stops paying for itself up front; the engine then runs on the
# plain tangent cuts.
_KAPPA_N_CAP = 1500


def _start(inst: Instance, params: Optional[SolveParams]) -> EngineState:
    params = params or SolveParams()
    t0 = time.monotonic()
    x0 = initial_solution(inst)
    kappa = curvature_margin(inst.q) if inst.n <= _KAPPA_N_CAP else 0.0
    pool = CutPool(inst.n)
    pool.add(strengthen_cut(make_cut(inst, x0, 0), kappa, inst.p))
    log = [CutLogEntry(k=0, x=x0.x, fx=x0.value, theta=None, lb=x0.value)]
    return EngineState(
        inst=inst,
        params=params,
        pool=pool,
        incumbent=x0,
        lb=x0.value,
        cut_log=log,
        t0=t0,
        deadline=None if params.time_limit is None else t0 + params.time_limit,
        kappa=kappa,
    )


def _grad_is_zero(state: EngineState, g: np.ndarray) -> bool:
    scale = float(np.abs(state.inst.q).max(initial=0.0))
    return float(np.abs(g).max(initial=0.0)) <= ZERO_GRAD_REL * scale


def _accept_candidate(state: EngineState, x_bits: np.ndarray, theta: float) -> bool:
    """Record a candidate, add its cut; True when the zero-gradient rule fires."""
    if state.pool.has_source(x_bits):
        raise EngineFault(
            f"candidate source revisited with theta={theta!r}: "
            f"selection {tuple(np.flatnonzero(x_bits))}"
        )
    fx = objective(state.inst, x_bits.astype(np.float64))
    state.k += 1
    if fx > state.lb:
        state.lb = fx
        state.incumbent = BinarySolution(x=x_bits, value=fx)
    tangent = make_cut(state.inst, BinarySolution(x=x_bits, value=fx), state.k)
    state.pool.add(strengthen_cut(tangent, state.kappa, state.inst.p))
    state.cut_log.append(
        CutLogEntry(k=state.k, x=x_bits, fx=fx, theta=theta, lb=state.lb)
    )
    state.emit_progress(ub=theta)
    return _grad_is_zero(state, tangent.gradient)


def _round_candidate(state: EngineState, res: LpResult) -> np.ndarray:
    x_bits = np.rint(res.x).astype(np.uint8)
    if int(x_bits.sum()) != state.inst.p:  # pragma: no cover - integrality guard
        raise EngineFault("integral LP point violates the cardinality row")
    return x_bits


_ROUNDING_SWAPS = 4
_ROUNDING_STALL_WINDOW = 8
_ROUNDING_MAX_DEPTH = 0


def _unseen_rounding(state: EngineState, res: LpResult) -> Optional[np.ndarray]:
    """Nearest selection to the LP point whose tangent cut is not pooled yet.

    Plain rounding takes the top-p coordinates of the LP optimum; when that
    selection already sourced a cut, nearby selections are probed by swapping
    a weakest-in coordinate for a strongest-out one.
    """
    p = state.inst.p
    order = np.argsort(-res.x, kind="stable")
    base, rest = order[:p], order[p:]
    x_bits = np.zeros(state.inst.n, dtype=np.uint8)
    x_bits[base] = 1
    if not state.pool.has_source(x_bits):
        return x_bits
    for i in base[::-1][:_ROUNDING_SWAPS]:
        for j in rest[:_ROUNDING_SWAPS]:
            swapped = x_bits.copy()
            swapped[i] = 0
            swapped[j] = 1
            if not state.pool.has_source(swapped):
                return swapped
    return None


def _add_rounding_cut(state: EngineState, res: LpResult, recent: list[float]) -> bool:
    """Cut at a rounding of a fractional LP optimum instead of branching yet.

    The rounding (top-p coordinates, swap-perturbed when stale) is a feasible
    selection; its tangent cut is valid everywhere, exact there, and clips
    the LP right where it currently peaks.  Alternating these with candidate
    cuts at the shallowest nodes closes most of the gap before the tree
    widens -- the same job a MIP solver's internal tightening does around a
    lazy-constraint callback.  These rows are LP furniture, not candidate
    events: they stay out of the candidate log (their theta has no
    "improving" meaning), though any better selection they stumble on does
    update the incumbent.

    Returns True when a cut was added (caller should re-solve the node).
    """
    recent.append(res.theta)
    if (
        len(recent) > _ROUNDING_STALL_WINDOW
        and recent[-_ROUNDING_STALL_WINDOW - 1] - res.theta <= state.gap_tol()
    ):
        return False  # tailing off: branching will do the rest
    x_bits = _unseen_rounding(state, res)
    if x_bits is None:
        return False  # neighbourhood exhausted
    inst = state.inst
    y = BinarySolution(x=x_bits, value=objective(inst, x_bits.astype(np.float64)))
    polished = swap_improve(inst, y)
    if polished.value > state.lb:
        state.lb = polished.value
        state.incumbent = polished
        state.emit_progress(ub=res.theta)
    # the cut binds at the rounding itself: that is where the LP peaks
    state.pool.add(strengthen_cut(make_cut(inst, y, -1), state.kappa, inst.p))
    return True


# Exact disposal of near-leaf nodes: when the remaining choice is a small
# combination (either few slots left to fill or few to drop), evaluating
# every completion beats growing the subtree by orders of magnitude.  The
# caps mark where that trade inverts, measured on the benchmark family:
# larger tables keep closing nodes, but each call then costs more than the
# few LP nodes it replaces (pruning keeps those subtrees shallow, so the
# benefit of one closure is bounded).  The shallow-node gates in
# _enumerate_node keep the device away from cut generation on small
# instances.
_ENUM_MAX_PICKS = 8
_ENUM_TENSOR_CAP = 400_000


def _enum_cap(k: int) -> int:
    return _ENUM_TENSOR_CAP


_ENUM_TABLES: "collections.OrderedDict[tuple[int, int], tuple]" = collections.OrderedDict()
_ENUM_TABLES_BYTES = [0]
_ENUM_TABLES_BUDGET = 96 * 1024 * 1024


def _enum_tables(nf: int, k: int) -> tuple:
    """Lexicographic (k-1)-subset index table and validity mask, memoized.

    Thousands of nodes share a handful of (free count, picks) shapes, and
    building the combinatorial structure costs more than the per-node
    arithmetic, so it is built once per shape and evicted oldest-first
    under a byte budget.
    """
    key = (nf, k)
    hit = _ENUM_TABLES.get(key)
    if hit is None:
        kb = k - 1
        combos = np.fromiter(
            itertools.chain.from_iterable(itertools.combinations(range(nf), kb)),
            dtype=np.int64,
            count=math.comb(nf, kb) * kb,
        ).reshape(-1, kb)
        # A k-set splits uniquely as (its k-1 smallest, its largest), so a
        # table cell (block row, extra column) is valid iff the column
        # exceeds the block's last element.
        invalid = combos[:, -1][:, None] >= np.arange(nf)[None, :]
        member = np.zeros((combos.shape[0], nf), dtype=np.float32)
        np.put_along_axis(member, combos, np.float32(1.0), axis=1)
        hit = (combos, invalid, member)
        _ENUM_TABLES[key] = hit
        _ENUM_TABLES_BYTES[0] += combos.nbytes + invalid.nbytes + member.nbytes
        while _ENUM_TABLES_BYTES[0] > _ENUM_TABLES_BUDGET and len(_ENUM_TABLES) > 1:
            _, old = _ENUM_TABLES.popitem(last=False)
            _ENUM_TABLES_BYTES[0] -= sum(a.nbytes for a in old)
    else:
        _ENUM_TABLES.move_to_end(key)
    return hit


def _enum_tensor_max(
    w: np.ndarray, qff: np.ndarray, k: int, cut: float = -np.inf
) -> tuple[float, Optional[np.ndarray]]:
    """Max of sum_i w_i + sum_{i<j} qff_ij over k-subsets, against a cut.

    The search runs over a (k-1 smallest elements, largest element) score
    table: block values plus block-to-column couplings, with cells whose
    column does not exceed the block masked off.  Diagonal of qff is
    assumed zero.

    The table is first built in single precision.  When its maximum plus a
    worst-case rounding bound stays at or below `cut`, that certifies no
    k-subset beats the cut and the result is (that bound, None).  Otherwise
    the table is rebuilt in double precision and the return is the exact
    maximum and its argmax indices — so any value the caller acts on is
    exact, and single precision only ever fast-paths the certified-below
    case.
    """
    nf = w.size
    if k == 1:
        j = int(np.argmax(w))
        return float(w[j]), np.array([j])
    combos, invalid, member = _enum_tables(nf, k)
    # member is the 0/1 block-incidence matrix, so the whole block-to-column
    # coupling table is one matmul, and the within-block pair sum falls out
    # of the same product: summing row r of t over the block's own columns
    # counts each pair twice (zero diagonal).  Spreading w over the matmul
    # operand (every block has k-1 members) folds the column term into the
    # same product: row sums over the block then pick up 2*pairs + w-sum,
    # so the block value is half of (that + the block w-sum).
    w32 = w.astype(np.float32)
    qf2 = qff.astype(np.float32)
    qf2 += w32[None, :] / np.float32(k - 1)
    t32 = member @ qf2
    val32 = member @ w32
    if k > 2:
        val32 += np.einsum("ij,ij->i", t32, member)
        val32 *= np.float32(0.5)
    t32 += val32[:, None]
    t32[invalid] = -np.inf
    # Worst-case |float32 - float64| per cell: a few accumulation stages of
    # at most k terms whose partial sums stay under k * (k * max|q|) plus
    # the w magnitudes; 4x covers the stage count with room to spare.
    mq = float(np.abs(qff).max()) if nf else 0.0
    mw = float(np.abs(w).max()) if nf else 0.0
    delta = 4.0 * k * k * 1.2e-7 * (k * mq + mw)
    flat32 = int(np.argmax(t32))
    top32 = float(t32.flat[flat32]) + delta
    if top32 <= cut:
        return top32, None
    memb = member.astype(np.float64)
    t = memb @ qff
    val_b = memb @ w
    if k > 2:
        val_b += 0.5 * np.einsum("ij,ij->i", t, memb)
    t += val_b[:, None]
    t += w[None, :]
    t[invalid] = -np.inf
    flat = int(np.argmax(t))
    r, c = divmod(flat, nf)
    pick = np.empty(k, dtype=np.int64)
    pick[: k - 1] = combos[r]
    pick[k - 1] = c
    return float(t[r, c]), pick


def _enum_size(nf: int, k: int) -> int:
    """Cell count of the score table enumerating k picks out of nf."""
    return math.comb(nf, k - 1) * nf


def _enumerate_node(state: EngineState, node: _Node) -> bool:
    """Close a node by exact enumeration of its completions, if small enough.

    The node's feasible set is "lower plus `budget` of the free coordinates".
    Whichever of the pick set and the drop set is smaller is enumerated
    (choosing b of nf is choosing nf-b complements), scored from a single
    matvec against the base selection:  f(base +/- e_S) = f(base)
    +/- sum_i (Q base)_i + 1/2 sum_{i != j in S} q_ij.

    The score tables are only materialized as a last resort.  First every
    element gets a cap on the value of the best completion containing it
    (its toggle gain plus half its top k-1 couplings, plus the best k-1
    partners by the same measure); if even the largest cap cannot beat the
    incumbent the node is discarded like any bound-pruned node, and
    otherwise the caps filter the element list down before the exact argmax
    runs.  Dropping an element is safe exactly because its cap says no
    completion through it can beat the floor, and the floor (the better of
    the incumbent cutoff and one exactly-evaluated greedy completion) is
    attained by a known selection whenever the filtered table comes up
    short.  The subtree's true maximum therefore either improves the
    incumbent or is certified unable to, and the node closes exactly either
    way.  Returns True when the node was disposed of.
    """
    inst = state.inst
    p = inst.p
    lower, upper = node.lower, node.upper
    budget = p - int(round(float(lower.sum())))
    if node.depth < 2 or 2 * budget > p:
        return False
    free = np.flatnonzero(upper > lower)
    nf = free.size
    k = min(budget, nf - budget)
    if k > _ENUM_MAX_PICKS:
        return False
    if k >= 2 and _enum_size(nf, k) > 2 * _enum_cap(k):
        return False  # the cap filter rarely halves the table; skip the setup

    if budget <= nf - budget:
        base, sign = lower, 1.0
    else:
        base, sign = upper, -1.0  # free coords sit at 1; enumerate the drops
    nz = np.flatnonzero(base > 0.5)
    # Only the base self-interaction and the base-to-free couplings are
    # needed, and the base support is a few dozen picks, so two small
    # gathers beat a full matvec against q.
    f0 = 0.5 * float(inst.q[nz[:, None], nz].sum())
    w = sign * inst.q[free[:, None], nz].sum(axis=1)
    floor = state.lb + state.gap_tol()

    if k == 0:
        best = f0
        pick = np.empty(0, dtype=np.int64)
    elif k == 1:
        j = int(np.argmax(w))
        best = f0 + float(w[j])
        pick = free[[j]]
    else:
        qff = inst.q[np.ix_(free, free)]
        # Per-element cap: own gain + half its best k-1 couplings.  The
        # diagonal zeros can only loosen it.
        rowtop = np.partition(qff, nf - (k - 1), axis=1)[:, nf - (k - 1) :]
        scores = w + 0.5 * rowtop.sum(axis=1)
        order = np.argsort(-scores, kind="stable")
        s = scores[order]
        pref = np.concatenate([[0.0], np.cumsum(s)])
        if f0 + pref[k] <= floor:
            return True  # no completion here can beat the incumbent
        # One exact completion (top-k by cap) anchors the filter floor.
        sg = order[:k]
        val_g = f0 + float(w[sg].sum()) + 0.5 * float(qff[np.ix_(sg, sg)].sum())
        cut = max(val_g, floor)
        rank = np.empty(nf, dtype=np.int64)
        rank[order] = np.arange(nf)
        excl = np.where(rank <= k - 2, pref[k] - scores, pref[k - 1])
        idx2 = np.flatnonzero(f0 + scores + excl > cut)
        best, pick = val_g, free[sg]
        if idx2.size >= k:
            if _enum_size(idx2.size, k) > _enum_cap(k):
                return False  # filtering left too much; let the LP have it
            sub, loc = _enum_tensor_max(w[idx2], qff[np.ix_(idx2, idx2)], k, cut - f0)
            if loc is not None and f0 + sub > best:
                best, pick = f0 + sub, free[idx2[loc]]

    if best > state.lb:
        x_bits = (base > 0.5).astype(np.uint8)
        x_bits[pick] = 1 if sign > 0 else 0
        val = objective(inst, x_bits.astype(np.float64))
        if val > state.lb:
            state.lb = val
            state.incumbent = BinarySolution(x=x_bits, value=val)
            state.emit_progress(ub=max(state.lb, state.queue_bound(), best))
    return True


def _branch(state: EngineState, node: _Node, res: LpResult) -> None:
    frac = res.fractional_indices
    sub = np.asarray(frac)
    j = int(sub[np.argmin(np.abs(res.x[sub] - 0.5))])  # ties: lowest index
    down = _Node(node.lower.copy(), node.upper.copy(), res.theta, node.depth + 1, warm=res.warm)
    down.upper[j] = 0.0
    up = _Node(node.lower.copy(), node.upper.copy(), res.theta, node.depth + 1, warm=res.warm)
    up.lower[j] = 1.0
    cutoff = state.lb + state.gap_tol()
    for child in (down, up):
        bound = child.bound
        if res.cut_duals is not None:
            # parent duals blended: near-LP strength for one completion scan
            bound = min(
                bound,
                blend_bound(
                    state.pool, res.cut_duals, child.lower, child.upper, state.inst.p
                ),
            )
        if bound > cutoff:
            bound = min(
                bound,
                combinatorial_bound(state.pool, child.lower, child.upper, state.inst.p),
            )
        if bound > cutoff:
            child.bound = bound
            state.push(child)


def _fix_by_reduced_costs(state: EngineState, node: _Node, res: LpResult) -> bool:
    """Pin variables whose flip provably cannot beat the incumbent.

    The node value as a function of one variable's fixed level is concave,
    and the reduced cost is a supergradient, so theta + d_j * (flip - x_j)
    bounds the flipped subtree from above.  Once that bound drops to the
    pruning cutoff the variable may sit at its current bound for the whole
    subtree.  Later cuts only lower subtree bounds and the incumbent only
    rises, so the fixing stays valid.  Returns True when anything was pinned.
    """
    d = res.reduced_costs
    if d is None:
        return False
    cutoff = state.lb + state.gap_tol() - res.theta  # <= 0 when work remains
    x, lo, up = res.x, node.lower, node.upper
    fixed = False
    at_lo = (x <= lo + 1e-9) & (up > lo) & (d <= cutoff)
    if at_lo.any():
        up[at_lo] = lo[at_lo]
        fixed = True
    at_up = (x >= up - 1e-9) & (up > lo) & (-d <= cutoff)
    if at_up.any():
        lo[at_up] = up[at_up]
        fixed = True
    return fixed


def _report(state: EngineState, status: Status, ub: float) -> SolveReport:
    if status is Status.OPTIMAL:
        ub = state.lb
    return SolveReport(
        status=status,
        incumbent=state.incumbent,
        lower_bound=state.lb,
        upper_bound=ub,
        cuts_added=len(state.pool),
        nodes_explored=state.nodes,
        lp_solves=state.lp_solves,
        wall_time_ms=state.elapsed_ms(),
        cut_log=state.cut_log,
        stopped_by_zero_gradient=state.zero_gradient,
    )


def solve_single_tree(inst: Instance, params: Optional[SolveParams] = None) -> SolveReport:
    """Lazy-cut branch and cut: one tree, cuts appended as candidates appear."""
    state = _start(inst, params)
    if _grad_is_zero(state, gradient(inst, state.incumbent.x.astype(np.float64))):
        state.zero_gradient = True
        return _report(state, Status.OPTIMAL, state.lb)

    state.push(_Node(np.zeros(inst.n), np.ones(inst.n), float("inf"), 0))
    while state.heap:
        if state.out_of_time():
            return _report(state, Status.TIME_LIMIT, max(state.lb, state.queue_bound()))
        _, _, _, node = heapq.heappop(state.heap)
        if node.bound <= state.lb + state.gap_tol():
            continue
        if node.pool_version < len(state.pool):
            # cuts appeared since the push: retighten the cheap bound first
            node.bound = min(
                node.bound,
                combinatorial_bound(state.pool, node.lower, node.upper, inst.p),
            )
            node.pool_version = len(state.pool)
            if node.bound <= state.lb + state.gap_tol():
                continue
        state.nodes += 1
        if state.params.progress is not None and state.nodes % state.params.progress_every == 0:
            state.emit_progress(max(state.lb, state.queue_bound(), node.bound))
        if _enumerate_node(state, node):
            continue
        node_lp = NodeLP(node.lower, node.upper, cut_pool_version=len(state.pool))
        rounding_thetas: list[float] = []
        warm = node.warm
        while True:
            if state.out_of_time():
                return _report(
                    state,
                    Status.TIME_LIMIT,
                    max(state.lb, state.queue_bound(), node.bound),
                )
            res = solve_node_lp(state.pool, node_lp, inst.p, warm=warm)
            state.lp_solves += 1
            if res.warm is not None:
                warm = res.warm
            if res.status is Status.INFEASIBLE:
                break
            node.bound = res.theta
            if res.theta <= state.lb + state.gap_tol():
                break
            fixed = _fix_by_reduced_costs(state, node, res)
            if res.fractional_indices:
                if node.depth <= _ROUNDING_MAX_DEPTH and _add_rounding_cut(
                    state, res, rounding_thetas
                ):
                    node_lp.cut_pool_version = len(state.pool)
                    continue  # re-solve against the fresh cut
                if fixed and _enumerate_node(state, node):
                    break  # reduced-cost fixing just shrank it within reach
                _branch(state, node, res)
                break
            x_bits = _round_candidate(state, res)
            if _accept_candidate(state, x_bits, res.theta):
                state.zero_gradient = True
                return _report(state, Status.OPTIMAL, state.lb)
            node_lp.cut_pool_version = len(state.pool)
            # re-solve this node: its LP must now route around the new cut
    return _report(state, Status.OPTIMAL, state.lb)


def solve_multi_tree(inst: Instance, params: Optional[SolveParams] = None) -> SolveReport:
    """Iterative cutting plane: fresh search tree per cut, frozen pool inside."""
    state = _start(inst, params)
    if _grad_is_zero(state, gradient(inst, state.incumbent.x.astype(np.float64))):
        state.zero_gradient = True
        return _report(state, Status.OPTIMAL, state.lb)

    while True:
        found, ub_rem, timed_out = _search_improving(state)
        if timed_out:
            return _report(state, Status.TIME_LIMIT, max(state.lb, ub_rem))
        if found is None:
            return _report(state, Status.OPTIMAL, state.lb)
        x_bits, theta = found
        if _accept_candidate(state, x_bits, theta):
            state.zero_gradient = True
            return _report(state, Status.OPTIMAL, state.lb)


def _search_improving(state: EngineState):
    """Best-first search for any integral (x, theta) with theta > LB + tol
    over the frozen pool.  Returns (found, remaining_ub, timed_out)."""
    inst = state.inst
    state.heap = []
    state.seq = 0
    state.push(_Node(np.zeros(inst.n), np.ones(inst.n), float("inf"), 0))
    while state.heap:
        if state.out_of_time():
            return None, state.queue_bound(), True
        _, _, _, node = heapq.heappop(state.heap)
        if node.bound <= state.lb + state.gap_tol():
            continue
        state.nodes += 1
        if state.params.progress is not None and state.nodes % state.params.progress_every == 0:
            state.emit_progress(max(state.lb, state.queue_bound(), node.bound))
        node_lp = NodeLP(node.lower, node.upper, cut_pool_version=len(state.pool))
        res = solve_node_lp(state.pool, node_lp, inst.p, warm=node.warm)
        state.lp_solves += 1
        if res.status is Status.INFEASIBLE:
            continue
        node.bound = res.theta
        if res.theta <= state.lb + state.gap_tol():
            continue
        _fix_by_reduced_costs(state, node, res)
        if res.fractional_indices:
            _branch(state, node, res)
            continue
        x_bits = _round_candidate(state, res)
        return (x_bits, res.theta), float("-inf"), False
    return None, float("-inf"), False
