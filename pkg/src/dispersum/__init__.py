"""dispersum: exact solver for the p-dispersion-sum problem.

Selects p of n points maximizing the summed pairwise dissimilarity
``0.5 * x' Q x`` over binary x with a cardinality constraint, using a
tangent-plane cutting scheme inside branch-and-bound.  Ships brute-force
and MILP-linearization baselines, conditional-negative-definiteness
certification, cut-strength diagnostics, instance generation/IO, and a
benchmark harness.
"""

from .baselines import brute_force, build_f3, solve_f3, solve_milp
from .cuts import Cut, CutPool, DuplicateCutError, gradient, make_cut
from .diagnostics import (
    CutStrength,
    LemmaViolation,
    cut_strength,
    eliminated_count,
    lemma1_audit,
    radius_from_ratio,
)
from .engine import (
    EngineFault,
    Progress,
    SolveParams,
    initial_solution,
    solve_multi_tree,
    solve_single_tree,
)
from .geometry import (
    CndCertificate,
    build_distance_matrix,
    certify_cnd,
    instance_from_points,
)
from .instances import (
    GenSpec,
    ParseError,
    SuiteEntry,
    generate,
    read_instance,
    read_manifest,
    resolve_p,
    write_instance,
    write_manifest,
)
from .model import (
    BinarySolution,
    CutLogEntry,
    Instance,
    SolveReport,
    Status,
    Violation,
    objective,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "BinarySolution",
    "CndCertificate",
    "Cut",
    "CutLogEntry",
    "CutPool",
    "CutStrength",
    "DuplicateCutError",
    "EngineFault",
    "GenSpec",
    "Instance",
    "LemmaViolation",
    "ParseError",
    "Progress",
    "SolveParams",
    "SolveReport",
    "Status",
    "SuiteEntry",
    "Violation",
    "brute_force",
    "build_f3",
    "build_distance_matrix",
    "certify_cnd",
    "cut_strength",
    "eliminated_count",
    "generate",
    "gradient",
    "initial_solution",
    "instance_from_points",
    "lemma1_audit",
    "make_cut",
    "objective",
    "radius_from_ratio",
    "read_instance",
    "read_manifest",
    "resolve_p",
    "solve_f3",
    "solve_milp",
    "solve_multi_tree",
    "solve_single_tree",
    "validate",
    "write_instance",
    "write_manifest",
    "__version__",
]
