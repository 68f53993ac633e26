"""Problem and solution types for the p-dispersion-sum solver.

An instance asks for p of n points maximising

    f(x) = (1/2) <Q x, x>,        x binary, sum(x) = p,

where q_ij is the pairwise dissimilarity (a Euclidean distance raised to a
power r in (0, 2] when the instance comes from coordinates).  The matrix is
kept dense: the target sizes (n <= 4096) make O(n^2) storage cheap and every
hot path (gradients, cut evaluation) is a dense matvec anyway.
"""

from __future__ import annotations

import dataclasses
import enum
from typing import Optional

import numpy as np

from .tolerances import OBJ_REL_TOL, SYMMETRY_TOL

MAX_N = 4096


class Status(enum.Enum):
    """Terminal state of a solve."""

    OPTIMAL = "optimal"
    TIME_LIMIT = "time_limit"
    INFEASIBLE = "infeasible"


@dataclasses.dataclass(frozen=True, eq=False)
class Instance:
    """One p-dispersion-sum problem.

    ``q`` is the symmetric nonnegative dissimilarity matrix with zero
    diagonal; ``points`` (optional) are the coordinates it was derived from.
    Construction normalises dtypes and freezes the arrays; it does not check
    the mathematical invariants -- run :func:`validate` for that, so that
    deliberately broken instances can still be inspected.
    """

    q: np.ndarray
    p: int
    r: float = 1.0
    points: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self) -> None:
        q = np.ascontiguousarray(np.asarray(self.q, dtype=np.float64))
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"q must be square, got shape {q.shape}")
        if q.shape[0] > MAX_N:
            raise ValueError(f"n={q.shape[0]} exceeds the supported maximum {MAX_N}")
        if q.shape[0] == 0:
            raise ValueError("empty instance")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        if self.points is not None:
            pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
            if pts.ndim != 2 or pts.shape[0] != q.shape[0]:
                raise ValueError(
                    f"points shape {pts.shape} inconsistent with n={q.shape[0]}"
                )
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "r", float(self.r))

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def s(self) -> Optional[int]:
        return None if self.points is None else self.points.shape[1]

    @classmethod
    def from_matrix(
        cls,
        q: np.ndarray,
        p: int,
        r: float = 1.0,
        name: str = "",
        points: Optional[np.ndarray] = None,
    ) -> "Instance":
        """Build an instance from a raw matrix, repairing tiny asymmetry.

        Asymmetry up to ``SYMMETRY_TOL`` (relative to the entry scale) is
        averaged away; anything larger is rejected rather than silently
        symmetrised.
        """
        q = np.asarray(q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"q must be square, got shape {q.shape}")
        scale = 1.0 + float(np.abs(q).max(initial=0.0))
        asym = float(np.abs(q - q.T).max(initial=0.0))
        if asym > SYMMETRY_TOL * scale:
            raise ValueError(
                f"matrix asymmetry {asym:.3e} exceeds tolerance {SYMMETRY_TOL * scale:.3e}"
            )
        q = 0.5 * (q + q.T)
        return cls(q=q, p=p, r=r, points=points, name=name)


@dataclasses.dataclass(frozen=True)
class Violation:
    """One invariant breach found by :func:`validate`."""

    kind: str  # symmetry | diagonal | negative | points_mismatch | cardinality
    where: tuple
    detail: str


def validate(inst: Instance) -> list[Violation]:
    """Check every instance invariant; return all breaches (empty = clean)."""
    out: list[Violation] = []
    q = inst.q
    n = inst.n
    scale = 1.0 + float(np.abs(q).max(initial=0.0))

    asym = np.abs(q - q.T)
    if asym.max(initial=0.0) > SYMMETRY_TOL * scale:
        i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
        out.append(
            Violation("symmetry", (int(i), int(j)), f"q[{i}][{j}] != q[{j}][{i}]")
        )

    diag = np.abs(np.diag(q))
    if diag.max(initial=0.0) > SYMMETRY_TOL * scale:
        i = int(np.argmax(diag))
        out.append(Violation("diagonal", (i,), f"q[{i}][{i}] = {q[i, i]!r} nonzero"))

    neg = q < -SYMMETRY_TOL * scale
    if neg.any():
        i, j = np.unravel_index(int(np.argmax(neg)), neg.shape)
        out.append(Violation("negative", (int(i), int(j)), f"q[{i}][{j}] = {q[i, j]!r} < 0"))

    if not (1 <= inst.p <= n):
        out.append(Violation("cardinality", (inst.p,), f"p={inst.p} outside [1, {n}]"))

    if inst.points is not None:
        pts = inst.points
        for i in range(n):
            d = np.linalg.norm(pts - pts[i], axis=1) ** inst.r
            err = np.abs(q[i] - d)
            band = 1e-9 * (1.0 + np.abs(q[i]))
            bad = np.flatnonzero(err > band)
            bad = bad[bad != i]
            if bad.size:
                j = int(bad[0])
                out.append(
                    Violation(
                        "points_mismatch",
                        (i, j),
                        f"q[{i}][{j}]={q[i, j]!r} but |v_i - v_j|^r={d[j]!r}",
                    )
                )
                break  # one witness is enough; per-pair spam helps nobody
    return out


def objective(inst: Instance, x: np.ndarray) -> float:
    """f(x) = (1/2) <Qx, x> for a 0/1 (or relaxed) vector ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({inst.n},)")
    return float(0.5 * x @ (inst.q @ x))


@dataclasses.dataclass(frozen=True, eq=False)
class BinarySolution:
    """A feasible selection: bit vector, cached index set, objective value."""

    x: np.ndarray
    value: float
    selected: tuple[int, ...] = dataclasses.field(init=False)

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.uint8))
        if x.ndim != 1 or not np.isin(x, (0, 1)).all():
            raise ValueError("solution vector must be one-dimensional 0/1")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "selected", tuple(int(i) for i in np.flatnonzero(x)))

    @classmethod
    def from_vector(cls, inst: Instance, x: np.ndarray) -> "BinarySolution":
        x = np.asarray(x)
        sol = cls(x=x.astype(np.uint8), value=objective(inst, x.astype(np.float64)))
        if len(sol.selected) != inst.p:
            raise ValueError(
                f"selection has {len(sol.selected)} points, instance wants p={inst.p}"
            )
        return sol

    @classmethod
    def from_indices(cls, inst: Instance, indices) -> "BinarySolution":
        idx = sorted(int(i) for i in indices)
        if len(set(idx)) != len(idx):
            raise ValueError("duplicate indices in selection")
        if idx and (idx[0] < 0 or idx[-1] >= inst.n):
            raise ValueError("selection index out of range")
        x = np.zeros(inst.n, dtype=np.uint8)
        x[idx] = 1
        return cls.from_vector(inst, x)

    def check_value(self, inst: Instance) -> bool:
        """Recompute the objective and compare within 1e-9 relative."""
        f = objective(inst, self.x.astype(np.float64))
        return abs(f - self.value) <= OBJ_REL_TOL * (1.0 + abs(f))


@dataclasses.dataclass(frozen=True, eq=False)
class CutLogEntry:
    """One candidate event: iteration, candidate vector, f, theta, LB after.

    ``theta`` is None for the initial solution (k = 0), which enters the cut
    pool without having been an LP optimum.
    """

    k: int
    x: np.ndarray
    fx: float
    theta: Optional[float]
    lb: float

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.uint8))
        x.setflags(write=False)
        object.__setattr__(self, "x", x)


@dataclasses.dataclass(eq=False)
class SolveReport:
    """Outcome of one solve, shared by every solver in the package."""

    status: Status
    incumbent: Optional[BinarySolution]
    lower_bound: float
    upper_bound: float
    cuts_added: int
    nodes_explored: int
    lp_solves: int
    wall_time_ms: float
    cut_log: list[CutLogEntry] = dataclasses.field(default_factory=list)
    stopped_by_zero_gradient: bool = False

    def gap(self) -> float:
        return self.upper_bound - self.lower_bound

    def to_json_dict(self) -> dict:
        """Shape used by the CLI's --json report."""
        return {
            "status": self.status.value,
            "value": None if self.incumbent is None else self.incumbent.value,
            "selected": [] if self.incumbent is None else list(self.incumbent.selected),
            "bounds": {
                "lb": _json_float(self.lower_bound),
                "ub": _json_float(self.upper_bound),
            },
            "counters": {
                "cuts": self.cuts_added,
                "nodes": self.nodes_explored,
                "lp_solves": self.lp_solves,
            },
            "timing_ms": self.wall_time_ms,
            "cut_log": [
                [e.k, e.fx, None if e.theta is None else e.theta, e.lb]
                for e in self.cut_log
            ],
        }


def _json_float(v: float):
    if v == float("inf"):
        return "inf"
    if v == float("-inf"):
        return "-inf"
    return v
