"""Tangent-plane cuts for the quadratic dispersion objective.

For a feasible selection y, the first-order model of f at y is

    h(x, y) = <grad f(y), x - y> + f(y) = <Qy, x> - f(y),

so the cut in normal form reads  theta <= g.x + c  with g = Qy, c = -f(y).
On a CND matrix h(x, y) >= f(x) for every pair of feasible selections
(the difference is -(1/2) <Q(x-y), x-y>), which is what makes the cuts
globally valid.  The pool never prunes: each candidate cuts off a region
that never has to be revisited, so dropping rows would only reopen it.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .model import BinarySolution, Instance


class DuplicateCutError(RuntimeError):
    """Raised when a cut source repeats -- a broken-engine symptom.

    A correctly working engine can never propose the same candidate twice
    (its own cut bounds theta <= f at that point, below any later LB), so a
    duplicate source always means a bug upstream and is never swallowed.
    """


def gradient(inst: Instance, x: np.ndarray) -> np.ndarray:
    """grad f(x) = Qx."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({inst.n},)")
    return inst.q @ x


@dataclasses.dataclass(frozen=True, eq=False)
class Cut:
    """theta <= gradient . x + offset, tangent to f at ``source``."""

    gradient: np.ndarray
    offset: float
    source: np.ndarray
    iteration: int

    def __post_init__(self) -> None:
        g = np.ascontiguousarray(np.asarray(self.gradient, dtype=np.float64))
        g.setflags(write=False)
        object.__setattr__(self, "gradient", g)
        src = np.ascontiguousarray(np.asarray(self.source, dtype=np.uint8))
        src.setflags(write=False)
        object.__setattr__(self, "source", src)

    def value_at(self, x: np.ndarray) -> float:
        """Right-hand side g.x + c at ``x`` (equals h(x, source))."""
        return float(self.gradient @ np.asarray(x, dtype=np.float64) + self.offset)


def make_cut(inst: Instance, y: BinarySolution, iteration: int) -> Cut:
    """Tangent cut at the feasible selection ``y``.

    The offset is derived from the gradient itself (c = -(1/2) g.y), which
    makes the tangency h(y, y) = f(y) exact in floating point.
    """
    if len(y.selected) != inst.p:
        raise ValueError(
            f"cut source selects {len(y.selected)} points, instance wants p={inst.p}"
        )
    g = gradient(inst, y.x)
    fy = 0.5 * float(g @ y.x.astype(np.float64))
    return Cut(gradient=g, offset=-fy, source=y.x, iteration=iteration)


def cut_violation(cut: Cut, x: np.ndarray, theta: float) -> float:
    """theta - (g.x + c); positive means (x, theta) violates the cut."""
    return float(theta) - cut.value_at(x)


def strengthen_cut(cut: Cut, kappa: float, p: int) -> Cut:
    """Fold a curvature margin into a tangent cut.

    On selections (binary, exactly p ones) the squared distance to the
    source is linear, ||x - y||^2 = 2(p - y.x), and the tangent
    overestimates f by at least (kappa/2)||x - y||^2 when every nontrivial
    eigenvalue of the centred matrix is <= -kappa.  Subtracting that term
    keeps the cut valid on the feasible set, keeps it exactly tangent at
    its source, and tightens it everywhere else.  kappa = 0 returns the
    cut unchanged.
    """
    if kappa <= 0.0:
        return cut
    g = cut.gradient + kappa * cut.source.astype(np.float64)
    return Cut(
        gradient=g,
        offset=cut.offset - kappa * float(p),
        source=cut.source,
        iteration=cut.iteration,
    )


class CutPool:
    """Append-only cut collection with a dense coefficient view.

    Keeps the gradients stacked in one (m, n) array so the LP core and the
    violation checks can evaluate the whole pool with a single matvec.
    Rejects repeated sources (see :class:`DuplicateCutError`).
    """

    def __init__(self, n: int):
        self.n = n
        self._cuts: list[Cut] = []
        self._g = np.empty((16, n), dtype=np.float64)
        self._c = np.empty(16, dtype=np.float64)
        self._sources: set[bytes] = set()

    def __len__(self) -> int:
        return len(self._cuts)

    def __getitem__(self, i: int) -> Cut:
        return self._cuts[i]

    def __iter__(self):
        return iter(self._cuts)

    @property
    def matrix(self) -> np.ndarray:
        """(m, n) view of the stacked cut gradients."""
        return self._g[: len(self._cuts)]

    @property
    def offsets(self) -> np.ndarray:
        return self._c[: len(self._cuts)]

    def has_source(self, x: np.ndarray) -> bool:
        return np.asarray(x, dtype=np.uint8).tobytes() in self._sources

    def add(self, cut: Cut) -> None:
        key = cut.source.tobytes()
        if key in self._sources:
            raise DuplicateCutError(
                f"cut source revisited at iteration {cut.iteration}: "
                f"selection {tuple(np.flatnonzero(cut.source))}"
            )
        m = len(self._cuts)
        if m == self._g.shape[0]:
            self._g = np.concatenate([self._g, np.empty_like(self._g)])
            self._c = np.concatenate([self._c, np.empty_like(self._c)])
        self._g[m] = cut.gradient
        self._c[m] = cut.offset
        self._cuts.append(cut)
        self._sources.add(key)
