"""Numeric tolerances shared across the solver.

Every comparison threshold used by the LP core, the branch-and-cut engine
and the diagnostics lives here so that the tolerance story stays coherent:
the pruning tolerance must dominate the LP feasibility tolerance, otherwise
roundoff on a cut row could resurrect an already-cut-off integer point and
trip the no-revisit guard.
"""

# Row feasibility for LP solutions: a cut or cardinality row may be violated
# by at most this much in absolute terms.
FEAS_TOL = 1e-7

# A variable value within this distance of 0 or 1 counts as integral.
INT_TOL = 1e-6

# Objective-value comparisons (candidate acceptance, report checks).
OBJ_ABS_TOL = 1e-7
OBJ_REL_TOL = 1e-9

# Branch-and-bound pruning gap: a node with bound <= LB + gap is discarded.
GAP_ABS = 1e-6
GAP_REL = 1e-9

# Gradient considered exactly zero (stationary incumbent) relative to the
# largest matrix entry.
ZERO_GRAD_REL = 1e-12

# Default scale factor for the conditional-negative-definiteness check:
# tolerance = CND_TOL_FACTOR * n * max|q_ij|.
CND_TOL_FACTOR = 1e-7

# Round-trip accuracy promised by the instance writers.
IO_ROUNDTRIP_TOL = 1e-9

# Asymmetry in an input matrix up to this bound is averaged away; anything
# larger is rejected as data corruption.
SYMMETRY_TOL = 1e-9


def gap_tolerance(lb: float, gap_abs: float = GAP_ABS, gap_rel: float = GAP_REL) -> float:
    """Pruning slack above the incumbent value ``lb``."""
    return gap_abs + gap_rel * abs(lb)
