"""Dense bounded-variable revised primal simplex.

This is the single LP workhorse behind the node relaxations and the MILP
baseline.  Design points:

* maximisation over  A z = b  (inequalities get slack columns),
  l <= z <= u  with infinite bounds allowed;
* explicit basis inverse, eta updates, periodic refactorisation -- the
  bases here are small (rows = cuts + 1, or the F3 row count) while the
  column count can be large, so pricing is the vectorised part;
* Dantzig pricing with lowest-index tie-breaks, falling back to Bland's
  rule after a stretch of degenerate pivots, which keeps every solve
  deterministic and terminating;
* the ratio test breaks ties by lowest variable index, so degenerate
  bases resolve the same way on every run.

Callers either go through :func:`solve_lp` (general two-phase entry) or
construct a feasible basis themselves and run :func:`simplex_core`.
"""

from __future__ import annotations

import dataclasses
import enum

import numpy as np

from .tolerances import FEAS_TOL

# Variable status codes (kept as plain ints: they live in hot numpy masks).
BASIC = 0
AT_LOWER = 1
AT_UPPER = 2
FREE = 3  # nonbasic free variable, pinned at its current value

PIVOT_TOL = 1e-10
STALL_LIMIT = 64
REFACTOR_EVERY = 128


class SimplexStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class SimplexError(RuntimeError):
    """Numerical failure (singular basis, iteration runaway)."""


@dataclasses.dataclass
class LpSolution:
    status: SimplexStatus
    x: np.ndarray | None  # structural variables only
    objective: float


@dataclasses.dataclass
class _State:
    """Mutable simplex state over the standard-form system."""

    A: np.ndarray  # (m, N) dense
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    basis: np.ndarray  # (m,) column indices
    vstat: np.ndarray  # (N,) status codes
    values: np.ndarray  # (N,) current point, A @ values == b
    binv: np.ndarray | None = None

    def refactor(self) -> None:
        B = self.A[:, self.basis]
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded upstream
            raise SimplexError("singular basis during refactorisation") from exc
        self.recompute_basics()

    def recompute_basics(self) -> None:
        v = self.values.copy()
        v[self.basis] = 0.0
        rhs = self.b - self.A @ v
        self.values[self.basis] = self.binv @ rhs


def simplex_core(state: _State, c: np.ndarray, *, rc_tol: float, max_iter: int) -> SimplexStatus:
    """Run primal simplex (maximisation) from the feasible basis in ``state``.

    Mutates ``state`` in place; returns OPTIMAL or UNBOUNDED.

    The loop keeps incremental caches -- per-direction eligibility gates and
    basis-indexed costs/bounds/values -- and reuses scratch buffers, because
    a pivot at these sizes is allocation-bound rather than flop-bound.
    Selection semantics are unchanged: Dantzig (largest |reduced cost| among
    the eligible, ties to the lowest index) with Bland's rule after a
    degenerate stretch.
    """
    A, b = state.A, state.b
    lb, ub = state.lb, state.ub
    basis, vstat, values = state.basis, state.vstat, state.values
    m, ncols = A.shape
    if state.binv is None:
        state.refactor()
    binv = state.binv

    movable = lb < ub
    # Direction gates as floats: gain = max(d * upf, -d * dnf) equals |d| on
    # eligible columns and <= 0 elsewhere, so one argmax prices the step.
    upf = (((vstat == AT_LOWER) | (vstat == FREE)) & movable).astype(np.float64)
    dnf = (((vstat == AT_UPPER) | (vstat == FREE)) & movable).astype(np.float64)
    cb = c[basis]
    lb_b = lb[basis]
    ub_b = ub[basis]
    xb = values[basis].copy()
    bland = False
    stall = 0
    pivots = 0
    obj = float(c @ values)

    d = np.empty(ncols)
    gain_up = np.empty(ncols)
    gain_dn = np.empty(ncols)
    tlim = np.empty(m)
    gap = np.empty(m)
    eta = np.empty((m, m))

    def _gate(col: int) -> None:
        s = vstat[col]
        mv = movable[col]
        upf[col] = 1.0 if mv and (s == AT_LOWER or s == FREE) else 0.0
        dnf[col] = 1.0 if mv and (s == AT_UPPER or s == FREE) else 0.0

    for _ in range(max_iter):
        # --- pricing -------------------------------------------------------
        np.matmul(binv.T @ cb, A, out=d)
        np.subtract(c, d, out=d)
        np.multiply(d, upf, out=gain_up)
        np.multiply(d, dnf, out=gain_dn)
        np.negative(gain_dn, out=gain_dn)
        np.maximum(gain_up, gain_dn, out=gain_up)
        if bland:
            j = int(np.argmax(gain_up > rc_tol))  # first eligible index
        else:
            j = int(np.argmax(gain_up))
        if gain_up[j] <= rc_tol:
            values[basis] = xb
            state.binv = binv
            return SimplexStatus.OPTIMAL
        sigma = 1.0 if d[j] > 0 else -1.0

        # --- ratio test ----------------------------------------------------
        w = binv @ A[:, j]
        delta = -sigma * w  # basic movement per unit step of the entering var
        tlim.fill(np.inf)
        np.subtract(ub_b, xb, out=gap)
        np.divide(gap, delta, out=tlim, where=delta > PIVOT_TOL)
        np.subtract(lb_b, xb, out=gap)
        np.divide(gap, delta, out=tlim, where=delta < -PIVOT_TOL)
        np.maximum(tlim, 0.0, out=tlim)  # drift guard: never step backwards

        t_row = float(tlim.min()) if m else np.inf
        own = ub[j] - lb[j] if vstat[j] != FREE else np.inf
        if not np.isfinite(t_row) and not np.isfinite(own):
            values[basis] = xb
            state.binv = binv
            return SimplexStatus.UNBOUNDED

        if t_row <= own:
            # pivot; among blocking rows pick the lowest variable index
            cand = np.flatnonzero(tlim <= t_row)
            pos_out = int(cand[np.argmin(basis[cand])])
            t = t_row
            xb += t * delta
            enter_val = float(values[j]) + sigma * t
            leave = int(basis[pos_out])
            if delta[pos_out] > 0:
                values[leave] = ub[leave]
                vstat[leave] = AT_UPPER
            else:
                values[leave] = lb[leave]
                vstat[leave] = AT_LOWER
            _gate(leave)
            vstat[j] = BASIC
            upf[j] = 0.0
            dnf[j] = 0.0
            basis[pos_out] = j
            cb[pos_out] = c[j]
            lb_b[pos_out] = lb[j]
            ub_b[pos_out] = ub[j]
            xb[pos_out] = enter_val
            # eta update of the inverse
            piv = w[pos_out]
            row = binv[pos_out] / piv
            np.multiply.outer(w, row, out=eta)
            binv -= eta
            binv[pos_out] = row
            pivots += 1
            if pivots % REFACTOR_EVERY == 0:
                values[basis] = xb
                state.binv = binv
                state.refactor()
                binv = state.binv
                cb = c[basis]
                lb_b = lb[basis]
                ub_b = ub[basis]
                xb = values[basis].copy()
        else:
            # bound flip: the entering variable crosses to its other bound
            t = own
            xb += t * delta
            if sigma > 0:
                values[j] = ub[j]
                vstat[j] = AT_UPPER
            else:
                values[j] = lb[j]
                vstat[j] = AT_LOWER
            _gate(j)

        gain = t * abs(d[j])
        if gain > 1e-12 * (1.0 + abs(obj)):
            obj += gain
            stall = 0
            bland = False
        else:
            stall += 1
            if stall >= STALL_LIMIT:
                bland = True

    values[basis] = xb
    state.binv = binv
    raise SimplexError(f"simplex exceeded {max_iter} iterations")


def dual_simplex_core(
    state: _State, c: np.ndarray, *, rc_tol: float, max_iter: int
) -> SimplexStatus:
    """Drive a dual-feasible basis to primal feasibility (maximisation).

    The workhorse behind warm starts: a basis that was optimal before a
    bound tightened or a row was appended keeps correctly-signed reduced
    costs, so repairing the handful of out-of-bound basics is a few dual
    pivots instead of a cold solve.  Returns OPTIMAL once every basic sits
    within its bounds (the caller should confirm with the primal core,
    which then terminates in one pricing pass), INFEASIBLE when a violated
    basic admits no entering column (primal empty).  Raises SimplexError
    when the iteration cap trips, so callers can fall back to a cold start.

    Selection: most-violated basic leaves (ties to the lowest variable
    index); the entering column minimises |d_j / alpha_j| among those
    keeping dual feasibility (ties to the lowest index).
    """
    A = state.A
    lb, ub = state.lb, state.ub
    basis, vstat, values = state.basis, state.vstat, state.values
    m, ncols = A.shape
    if state.binv is None:
        state.refactor()
    binv = state.binv

    movable = lb < ub
    # Bound-status masks and reduced costs are maintained across pivots:
    # each dual step touches two columns, so rebuilding them from scratch
    # every iteration would dominate the short repair sequences this core
    # is used for.  The primal core re-prices from scratch afterwards, so
    # accumulated drift in d cannot leak into the certified result.
    at_lo = ((vstat == AT_LOWER) | (vstat == FREE)) & movable
    at_up = ((vstat == AT_UPPER) | (vstat == FREE)) & movable
    d = c - (binv.T @ c[basis]) @ A
    ratio = np.empty(ncols)
    absd = np.empty(ncols)
    eta = np.empty_like(binv)

    for _ in range(max_iter):
        xb = values[basis]
        below = lb[basis] - xb
        above = xb - ub[basis]
        viol = np.maximum(below, above)
        worst = float(viol.max()) if m else 0.0
        if worst <= 1e-9:
            state.binv = binv
            return SimplexStatus.OPTIMAL
        # most violated row, exact ties by lowest leaving-variable index
        cand = np.flatnonzero(viol >= worst)
        r = int(cand[np.argmin(basis[cand])])
        leave = int(basis[r])
        want_up = below[r] > above[r]  # true: push x_leave up to its lower bound

        alpha = binv[r] @ A

        # entering columns that keep dual feasibility after the sign flip
        if want_up:
            elig = ((alpha < -PIVOT_TOL) & at_lo) | ((alpha > PIVOT_TOL) & at_up)
        else:
            elig = ((alpha > PIVOT_TOL) & at_lo) | ((alpha < -PIVOT_TOL) & at_up)
        if not elig.any():
            return SimplexStatus.INFEASIBLE
        np.abs(d, out=absd)
        ratio.fill(np.inf)
        np.divide(absd, np.abs(alpha), out=ratio, where=elig)
        j = int(np.argmin(ratio))  # first minimum: lowest-index tie-break

        target = lb[leave] if want_up else ub[leave]
        step = (target - float(values[leave])) / (-alpha[j])  # change in x_j
        w = binv @ A[:, j]
        values[basis] = xb - step * w
        values[j] = float(values[j]) + step
        values[leave] = target
        vstat[leave] = AT_LOWER if want_up else AT_UPPER
        vstat[j] = BASIC
        basis[r] = j
        at_lo[j] = False
        at_up[j] = False
        at_lo[leave] = want_up and bool(movable[leave])
        at_up[leave] = (not want_up) and bool(movable[leave])
        # pivot-row update of the reduced costs; alpha[leave] is 1, so the
        # leaving column picks up its correctly-signed cost automatically
        d -= (d[j] / alpha[j]) * alpha
        d[j] = 0.0
        piv = w[r]
        if abs(piv) <= PIVOT_TOL:  # pragma: no cover - alpha[j] filtered above
            raise SimplexError("vanishing pivot in dual step")
        row = binv[r] / piv
        np.multiply(w.reshape(-1, 1), row, out=eta)
        binv -= eta
        binv[r] = row

    raise SimplexError(f"dual simplex exceeded {max_iter} iterations")


def _default_iter_cap(m: int, ncols: int) -> int:
    return 20000 + 50 * (m + ncols)


def solve_lp(
    c: np.ndarray,
    a_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    a_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    lb: np.ndarray | None = None,
    ub: np.ndarray | None = None,
    *,
    maximize: bool = True,
    max_iter: int | None = None,
) -> LpSolution:
    """Two-phase dense LP solve:  opt c.x  s.t.  a_ub x <= b_ub, a_eq x = b_eq.

    Bounds default to [0, inf).  Phase 1 only introduces artificial columns
    for rows the slack cannot absorb, then pins them at zero for phase 2.
    """
    c = np.asarray(c, dtype=np.float64)
    nx = c.shape[0]
    a_ub = np.zeros((0, nx)) if a_ub is None else np.asarray(a_ub, dtype=np.float64)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64)
    a_eq = np.zeros((0, nx)) if a_eq is None else np.asarray(a_eq, dtype=np.float64)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64)
    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    m = m_ub + m_eq
    lb = np.zeros(nx) if lb is None else np.asarray(lb, dtype=np.float64).copy()
    ub = np.full(nx, np.inf) if ub is None else np.asarray(ub, dtype=np.float64).copy()
    if np.any(lb > ub):
        return LpSolution(SimplexStatus.INFEASIBLE, None, float("nan"))

    cmax = float(np.abs(c).max(initial=0.0))
    rc_tol = 1e-9 * max(1.0, cmax)
    obj_sign = 1.0 if maximize else -1.0

    # Standard form: structural columns, then one slack per <= row.
    N = nx + m_ub
    A = np.zeros((m, N))
    if m_ub:
        A[:m_ub, :nx] = a_ub
        A[:m_ub, nx:] = np.eye(m_ub)
    if m_eq:
        A[m_ub:, :nx] = a_eq
    bvec = np.concatenate([b_ub, b_eq])
    lb_f = np.concatenate([lb, np.zeros(m_ub)])
    ub_f = np.concatenate([ub, np.full(m_ub, np.inf)])

    # Initial nonbasic point: the finite bound nearest zero, else 0 (free).
    values = np.zeros(N)
    vstat = np.full(N, FREE, dtype=np.int8)
    fin_lb = np.isfinite(lb_f)
    fin_ub = np.isfinite(ub_f)
    values[fin_lb] = lb_f[fin_lb]
    vstat[fin_lb] = AT_LOWER
    only_ub = ~fin_lb & fin_ub
    values[only_ub] = ub_f[only_ub]
    vstat[only_ub] = AT_UPPER

    resid = bvec - A @ values

    # Crash basis: slacks absorb nonnegative residuals on their own rows;
    # everything else gets an artificial column.
    basis = np.full(m, -1, dtype=np.int64)
    art_rows = []
    for i in range(m):
        if i < m_ub and resid[i] >= 0.0:
            basis[i] = nx + i
            values[nx + i] = resid[i]
            vstat[nx + i] = BASIC
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    if n_art:
        art_cols = np.zeros((m, n_art))
        for k, i in enumerate(art_rows):
            art_cols[i, k] = 1.0 if resid[i] >= 0 else -1.0
        A = np.concatenate([A, art_cols], axis=1)
        lb_f = np.concatenate([lb_f, np.zeros(n_art)])
        ub_f = np.concatenate([ub_f, np.full(n_art, np.inf)])
        vals_art = np.abs(resid[art_rows])
        values = np.concatenate([values, vals_art])
        vstat = np.concatenate([vstat, np.full(n_art, BASIC, dtype=np.int8)])
        for k, i in enumerate(art_rows):
            basis[i] = N + k

    state = _State(A=A, b=bvec, lb=lb_f, ub=ub_f, basis=basis, vstat=vstat, values=values)
    state.refactor()
    cap = max_iter if max_iter is not None else _default_iter_cap(m, A.shape[1])

    if n_art:
        c1 = np.zeros(A.shape[1])
        c1[N:] = -1.0
        status = simplex_core(state, c1, rc_tol=1e-9, max_iter=cap)
        if status is not SimplexStatus.OPTIMAL:  # pragma: no cover
            raise SimplexError("phase 1 cannot be unbounded")
        art_sum = float(state.values[N:].sum())
        if art_sum > FEAS_TOL * (1.0 + float(np.abs(bvec).max(initial=0.0))):
            return LpSolution(SimplexStatus.INFEASIBLE, None, float("nan"))
        # Pin artificials at zero for phase 2; basic ones stay, harmlessly degenerate.
        state.lb[N:] = 0.0
        state.ub[N:] = 0.0
        state.values[N:] = np.where(state.vstat[N:] == BASIC, state.values[N:], 0.0)

    c2 = np.zeros(A.shape[1])
    c2[:nx] = obj_sign * c
    status = simplex_core(state, c2, rc_tol=rc_tol, max_iter=cap)
    if status is SimplexStatus.UNBOUNDED:
        return LpSolution(SimplexStatus.UNBOUNDED, None, float("inf") * obj_sign)
    x = state.values[:nx].copy()
    np.clip(x, lb, ub, out=x)
    return LpSolution(SimplexStatus.OPTIMAL, x, float(c @ x))
