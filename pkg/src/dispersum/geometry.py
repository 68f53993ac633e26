"""Distance matrices and conditional negative definiteness.

The cutting-plane machinery is exact precisely when the dissimilarity matrix
Q is conditionally negative definite (CND): <Qz, z> <= 0 for every z with
sum(z) = 0.  Matrices of Euclidean distances raised to a power r in (0, 2]
have this property, which is why the generator and the certifier live next
to each other: one produces matrices that must pass, the other is the
referee.

The certificate diagonalises P Q P with P = I - (1/n) 11^T.  P projects onto
the sum-zero subspace, so Q is CND exactly when the largest eigenvalue of
P Q P is nonpositive (up to a scaled tolerance).
"""

from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np

from .model import Instance
from .tolerances import CND_TOL_FACTOR


def build_distance_matrix(points: np.ndarray, r: float = 1.0) -> np.ndarray:
    """Pairwise ||v_i - v_j||^r for points given as an (n, s) array.

    r must lie in (0, 2].  The result is exactly symmetric with a zero
    diagonal; squared distances come from the Gram expansion
    |a|^2 + |b|^2 - 2 a.b, clipped at zero before the root.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"points must be (n, s), got shape {pts.shape}")
    if pts.shape[1] < 1:
        raise ValueError("points need at least one coordinate")
    if not (0.0 < r <= 2.0):
        raise ValueError(f"r={r} outside the supported range (0, 2]")
    sq_norms = np.einsum("ij,ij->i", pts, pts)
    sq = sq_norms[:, None] + sq_norms[None, :] - 2.0 * (pts @ pts.T)
    np.maximum(sq, 0.0, out=sq)
    if r == 2.0:
        d = sq
    elif r == 1.0:
        d = np.sqrt(sq)
    else:
        d = sq ** (r / 2.0)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def instance_from_points(
    points: np.ndarray, p: int, r: float = 1.0, name: str = ""
) -> Instance:
    pts = np.asarray(points, dtype=np.float64)
    q = build_distance_matrix(pts, r)
    return Instance(q=q, p=p, r=r, points=pts, name=name)


@dataclasses.dataclass(frozen=True)
class CndCertificate:
    """Verdict of the CND check.

    ``witness`` is populated only on failure: a unit-norm sum-zero vector z
    with <Qz, z> = max_projected_eigenvalue > tolerance.
    """

    is_cnd: bool
    max_projected_eigenvalue: float
    tolerance: float
    witness: Optional[np.ndarray]


def cnd_tolerance(q: np.ndarray) -> float:
    """Default scaled tolerance: CND_TOL_FACTOR * n * max|q_ij|."""
    q = np.asarray(q, dtype=np.float64)
    return CND_TOL_FACTOR * q.shape[0] * float(np.abs(q).max(initial=0.0))


def curvature_margin(q: np.ndarray) -> float:
    """Largest kappa >= 0 with <Qz, z> <= -kappa ||z||^2 on sum-zero z.

    This is minus the second-largest eigenvalue of the projected matrix
    (the top one is the trivial zero of the 1-direction), shaved by a
    small spectral slack so roundoff can never overstate the curvature.
    Zero whenever the matrix is not strictly CND off the trivial mode.
    """
    q = np.asarray(q, dtype=np.float64)
    n = q.shape[0]
    if n < 2:
        return 0.0
    proj = q - q.mean(axis=0, keepdims=True)
    proj -= proj.mean(axis=1, keepdims=True)
    proj = 0.5 * (proj + proj.T)
    evals = np.linalg.eigvalsh(proj)
    slack = 1e-8 * float(np.abs(evals).max(initial=0.0))
    return max(0.0, -float(evals[-2]) - slack)


def certify_cnd(q: np.ndarray, tolerance: Optional[float] = None) -> CndCertificate:
    """Decide whether ``q`` is conditionally negative definite.

    Uses a dense symmetric eigendecomposition of the projected matrix; any
    exact symmetric method would do and LAPACK's is the obvious one.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"q must be square, got shape {q.shape}")
    n = q.shape[0]
    if tolerance is None:
        tolerance = cnd_tolerance(q)

    if n == 1:
        return CndCertificate(True, 0.0, tolerance, None)

    proj = q - q.mean(axis=0, keepdims=True)
    proj -= proj.mean(axis=1, keepdims=True)
    proj = 0.5 * (proj + proj.T)
    evals, evecs = np.linalg.eigh(proj)
    lam = float(evals[-1])
    if lam <= tolerance:
        return CndCertificate(True, lam, tolerance, None)

    z = evecs[:, -1].copy()
    z -= z.mean()  # re-project: guards against roundoff leaking into the 1-direction
    nrm = np.linalg.norm(z)
    if nrm > 0:
        z /= nrm
    z -= z.mean()
    z.setflags(write=False)
    return CndCertificate(False, lam, tolerance, z)
