"""Post-hoc convergence diagnostics for a finished solve.

The geometry behind all three tools: for selections x, y of size p, the
squared Euclidean distance between their indicator vectors counts swapped
indices,

    ||x - y||^2 = 2 |I(y) \\ I(x)|,

so Hamming balls around a candidate are Euclidean balls.  Once a cut at x^k
exists, every later candidate x^l must satisfy the growth conditions

    GC1:  0 < theta^l - f(x^k) <= <grad f(x^k), x^l - x^k>
    GC2:  ||x^l - x^k|| >= (LB - f(x^k)) / ||grad f(x^k)||   (LB before l)

and whenever the GC2 radius exceeds sqrt(2 N), the cut has permanently
removed every selection within swap distance N of x^k -- a count with an
exact closed form  sum_{q<=N} C(p, q) * C(n-p, q).
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from typing import Sequence

import numpy as np

from .model import CutLogEntry, Instance

ENUM_GUARD = 10_000_000


def eliminated_count(n: int, p: int, radius: int) -> int:
    """Exact number of selections within swap distance ``radius`` of one
    selection: sum_{q=0}^{radius} C(p, q) C(n-p, q).  Arbitrary precision."""
    if not 0 <= p <= n:
        raise ValueError(f"p={p} outside [0, {n}]")
    radius = min(radius, p, n - p)
    return sum(math.comb(p, q) * math.comb(n - p, q) for q in range(max(radius, 0) + 1))


def radius_from_ratio(ratio: float, p: int, n: int) -> int:
    """Largest N with ratio > sqrt(2N), clamped to [0, min(p, n-p)]."""
    if ratio < 0:
        return 0
    half = 0.5 * ratio * ratio
    N = int(math.floor(half))
    if N == half:  # the inequality is strict; exact boundary does not count
        N -= 1
    return max(0, min(N, p, n - p))


@dataclasses.dataclass(frozen=True)
class CutStrength:
    k: int
    l: int
    ratio: float
    radius: int
    eliminated: int  # exact count, arbitrary precision


def cut_strength(inst: Instance, entry_k: CutLogEntry, entry_l: CutLogEntry) -> CutStrength:
    """Certified elimination count of the cut at x^k, judged at iteration l."""
    if entry_l.k <= entry_k.k:
        raise ValueError(f"need l > k, got k={entry_k.k}, l={entry_l.k}")
    grad = inst.q @ entry_k.x.astype(np.float64)
    gnorm = float(np.linalg.norm(grad))
    if gnorm == 0.0:
        raise ValueError(
            "zero gradient at x^k: the candidate is already optimal, "
            "strength ratios are undefined"
        )
    ratio = (entry_l.lb - entry_k.fx) / gnorm
    radius = radius_from_ratio(ratio, inst.p, inst.n)
    return CutStrength(
        k=entry_k.k,
        l=entry_l.k,
        ratio=float(ratio),
        radius=radius,
        eliminated=eliminated_count(inst.n, inst.p, radius),
    )


def count_within_ball(n: int, p: int, center: np.ndarray, radius: int) -> int:
    """Enumerate all C(n, p) selections and count those with
    ||x - center||^2 <= 2 * radius.  Deliberately formula-free so it can
    referee :func:`eliminated_count`."""
    center = np.asarray(center, dtype=np.uint8)
    if center.shape != (n,):
        raise ValueError(f"center has shape {center.shape}, expected ({n},)")
    csel = frozenset(int(i) for i in np.flatnonzero(center))
    if len(csel) != p:
        raise ValueError(f"center selects {len(csel)} indices, expected p={p}")
    if math.comb(n, p) > ENUM_GUARD:
        raise ValueError(f"C({n}, {p}) exceeds the enumeration guard {ENUM_GUARD}")
    count = 0
    for sel in itertools.combinations(range(n), p):
        swaps = p - len(csel.intersection(sel))
        if 2 * swaps <= 2 * radius:
            count += 1
    return count


@dataclasses.dataclass(frozen=True)
class LemmaViolation:
    kind: str  # gc1-positivity | gc1-gradient | gc2-distance
    k: int
    l: int
    lhs: float
    rhs: float


def lemma1_audit(
    inst: Instance,
    log: Sequence[CutLogEntry],
    *,
    rtol: float = 1e-9,
    atol: float = 1e-9,
) -> list[LemmaViolation]:
    """Check GC1/GC2 for every candidate pair k < l; empty list = clean.

    Entries without a theta (the initial solution) participate only on the
    k side.  GC2 is skipped for zero-gradient sources elsewhere flagged by
    the stationarity rule.
    """
    entries = list(log)
    grads = [inst.q @ e.x.astype(np.float64) for e in entries]
    gnorms = [float(np.linalg.norm(g)) for g in grads]
    out: list[LemmaViolation] = []
    for li in range(len(entries)):
        el = entries[li]
        if el.theta is None:
            continue
        lb_before = entries[li - 1].lb if li > 0 else -np.inf
        xl = el.x.astype(np.float64)
        for ki in range(li):
            ek = entries[ki]
            xk = ek.x.astype(np.float64)
            slack = atol + rtol * (1.0 + abs(el.theta) + abs(ek.fx))
            gain = el.theta - ek.fx
            if gain <= 0.0:
                out.append(LemmaViolation("gc1-positivity", ek.k, el.k, gain, 0.0))
                continue
            lin = float(grads[ki] @ (xl - xk))
            if gain > lin + slack:
                out.append(LemmaViolation("gc1-gradient", ek.k, el.k, gain, lin))
            if gnorms[ki] > 0.0:
                dist = float(np.linalg.norm(xl - xk))
                need = (lb_before - ek.fx) / gnorms[ki]
                if dist < need - slack / max(gnorms[ki], 1.0):
                    out.append(LemmaViolation("gc2-distance", ek.k, el.k, dist, need))
    return out
