"""Distributionally robust risk functionals on finite probability spaces.

Static, conditional, and composite/nested worst-case expectation functionals
over four ambiguity-set families, order-1 optimal-transport bounds, and a
dynamic-programming solver for multistage problems with rectangular
(stagewise) ambiguity. A verification battery exercises every inequality and
equivalence the library claims; run it with ``drokit verify --builtin``.
"""

from .ambiguity import (
    AmbiguitySet,
    AVaRSet,
    FiniteFamily,
    MomentSet,
    WassersteinBall,
    contains,
    default_reference,
    dominates_all,
    is_strictly_monotone,
    reference_measure,
    robust_expectation,
)
from .avar import AvarSpec, avar_dual, avar_primal, check_axioms
from .composite import (
    HistoryDependentSpec,
    RectangularSpec,
    composite_dominates_static,
    composite_functional,
    induced_set,
    nested_tree_value,
    permutation_invariance_check,
    rectangular_equivalence_check,
    rectangular_nested,
    static_rectangular,
)
from .conditional import (
    ConditionalValue,
    conditional_avar_nested,
    conditional_robust,
    conditional_strict_monotonicity_check,
    has_property_p,
    tower_upper_bound_check,
)
from .dp import (
    MultistageProblem,
    Policy,
    compare_min_static_vs_min_nested,
    nested_policy_value,
    solve_dp,
    static_policy_value,
    verify_optimality_necessity,
)
from .lp import LinearProgram, LpSolution, linear_fractional_max, solve
from .rng import Rng
from .spaces import (
    ATOL,
    DiscreteMeasure,
    Filtration,
    FiniteSpace,
    Partition,
    RandomVariable,
    ScenarioTree,
    TreeNode,
    ValidationError,
    conditional_expectation,
    expectation,
    refines,
    tree_filtration,
)
from .transport import (
    MultistageBoundSpec,
    TreeProcess,
    ball_robust_gap_check,
    kr_bound_check,
    multistage_bound,
    multistage_bound_empirical_check,
    wasserstein_1,
)

__all__ = [
    "ATOL",
    "AVaRSet",
    "AmbiguitySet",
    "AvarSpec",
    "ConditionalValue",
    "DiscreteMeasure",
    "Filtration",
    "FiniteFamily",
    "FiniteSpace",
    "HistoryDependentSpec",
    "LinearProgram",
    "LpSolution",
    "MomentSet",
    "MultistageBoundSpec",
    "MultistageProblem",
    "Partition",
    "Policy",
    "RandomVariable",
    "RectangularSpec",
    "Rng",
    "ScenarioTree",
    "TreeNode",
    "TreeProcess",
    "ValidationError",
    "WassersteinBall",
    "avar_dual",
    "avar_primal",
    "ball_robust_gap_check",
    "check_axioms",
    "compare_min_static_vs_min_nested",
    "composite_dominates_static",
    "composite_functional",
    "conditional_avar_nested",
    "conditional_expectation",
    "conditional_robust",
    "conditional_strict_monotonicity_check",
    "contains",
    "default_reference",
    "dominates_all",
    "expectation",
    "has_property_p",
    "induced_set",
    "is_strictly_monotone",
    "kr_bound_check",
    "linear_fractional_max",
    "multistage_bound",
    "multistage_bound_empirical_check",
    "nested_policy_value",
    "nested_tree_value",
    "permutation_invariance_check",
    "rectangular_equivalence_check",
    "rectangular_nested",
    "reference_measure",
    "refines",
    "robust_expectation",
    "solve",
    "solve_dp",
    "static_policy_value",
    "static_rectangular",
    "tower_upper_bound_check",
    "tree_filtration",
    "verify_optimality_necessity",
    "wasserstein_1",
]
