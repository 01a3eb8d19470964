"""Conditional worst-case functionals on finite partitions.

Per atom, the conditional functional is the supremum of the conditional
expectation over set members that charge the atom; atoms no member charges
get ``-inf``, a deterministic stand-in for the "arbitrary off the reachable
part" freedom of the underlying definition, and poison translation
equivariance. The supremum is a linear-fractional program over the measure
polytope, solved through the Charnes-Cooper reduction; for finite families it
is a vertex scan (the two routes cross-check each other in the tests).

The nested conditional AVaR -- the law-invariant alternative -- is also
provided and deliberately *not* reconciled with the worst-case conditional:
which of the two is the right conditional counterpart is left open, and the
suite keeps a stored witness showing they differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ambiguity import (
    AmbiguitySet,
    FiniteFamily,
    is_strictly_monotone,
    membership_system,
    robust_expectation,
)
from .avar import AvarSpec, avar_primal
from .lp import linear_fractional_max
from .rng import Rng
from .spaces import (
    NEG_INF,
    DiscreteMeasure,
    Partition,
    RandomVariable,
    ValidationError,
)

#: Mass below this counts as "does not charge the atom".
ZERO_MASS_TOL = 1e-9


@dataclass(frozen=True)
class ConditionalValue:
    """Per-atom extended-real values of a conditional functional.

    ``te_holds`` records whether conditional translation equivariance holds,
    i.e. whether every atom is charged by some member; it is false exactly
    when some atom carries ``-inf``.
    """

    partition: Partition
    atom_values: tuple[float, ...]
    te_holds: bool

    def __post_init__(self):
        if len(self.atom_values) != self.partition.n_atoms:
            raise ValidationError("one value per atom required")

    @property
    def finite(self) -> bool:
        return all(np.isfinite(v) for v in self.atom_values)

    def per_outcome(self) -> np.ndarray:
        return self.partition.expand(self.atom_values)

    def as_random_variable(self) -> RandomVariable:
        if not self.finite:
            raise ValidationError("conditional value carries -inf atoms")
        return RandomVariable(self.per_outcome())


def _fractional_atom_value(M: AmbiguitySet, Z: RandomVariable, atom) -> float:
    """sup of the conditional mean on one atom via Charnes-Cooper."""
    sys = membership_system(M)
    sel = np.zeros(M.n)
    sel[list(atom)] = 1.0
    num = (Z.values * sel) @ sys.q_map
    den = sel @ sys.q_map
    res = linear_fractional_max(
        num, 0.0, den, 0.0, sys.A, sys.senses, sys.b
    )
    return NEG_INF if res is None else res.value


def _family_atom_value(M: FiniteFamily, Z: RandomVariable, atom) -> float:
    """Vertex scan: mixing members can only form mediants of their ratios,
    so the atom supremum is attained at a member charging the atom.

    Member weights are exact user data (construction clips solver dust), so
    charging is tested exactly rather than with a tolerance.
    """
    idx = list(atom)
    best = NEG_INF
    for q in M.measures:
        mass = float(q.weights[idx].sum())
        if mass > 0.0:
            best = max(best, float(q.weights[idx] @ Z.values[idx]) / mass)
    return best


def conditional_robust(
    M: AmbiguitySet,
    Z: RandomVariable,
    G: Partition,
    P: DiscreteMeasure,
    force_fractional: bool = False,
) -> ConditionalValue:
    """Per-atom worst-case conditional expectation.

    ``P`` is the reference probability fixing the off-support convention;
    the finite values themselves depend only on the ambiguity set.
    ``force_fractional`` routes finite families through the Charnes-Cooper
    path as well, which the tests use as a cross-check oracle.
    """
    P.require_probability("P")
    if Z.n != M.n or G.n != M.n or P.n != M.n:
        raise ValidationError("Z, G, P, and the ambiguity set must share a space")
    values = []
    for atom in G.atoms:
        if isinstance(M, FiniteFamily) and not force_fractional:
            values.append(_family_atom_value(M, Z, atom))
        else:
            values.append(_fractional_atom_value(M, Z, atom))
    te = all(np.isfinite(v) for v in values)
    return ConditionalValue(G, tuple(values), te)


def has_property_p(M: AmbiguitySet, G: Partition, tol: float = ZERO_MASS_TOL) -> bool:
    """Can the set concentrate conditional mass on any single outcome?

    True iff for every atom and every outcome in it, some member charges that
    outcome while vanishing on the rest of the atom. Decided per pair by a
    mass-maximizing LP with the co-atom pinned to zero (a member scan for
    finite families).
    """
    from .ambiguity import _membership_lp  # local: shares the LP plumbing

    if G.n != M.n:
        raise ValidationError("partition and ambiguity set sizes differ")
    for atom in G.atoms:
        for w in atom:
            others = tuple(i for i in atom if i != w)
            if isinstance(M, FiniteFamily):
                ok = any(
                    q.weights[w] > tol and q.weights[list(others)].sum() <= tol
                    for q in M.measures
                )
            else:
                obj = np.zeros(M.n)
                obj[w] = 1.0
                res = _membership_lp(
                    M, obj, maximize=True, zero_outcomes=others, allow_infeasible=True
                )
                ok = res is not None and res[0] > tol
            if not ok:
                return False
    return True


def conditional_avar_nested(
    spec: AvarSpec, Z: RandomVariable, G: Partition
) -> ConditionalValue:
    """Nested conditional AVaR: per atom, AVaR of ``Z`` under the conditional
    law of the reference. Null atoms get ``-inf``."""
    p = spec.reference.weights
    if Z.n != p.size or G.n != p.size:
        raise ValidationError("Z, G, and the reference must share a space")
    values = []
    for atom in G.atoms:
        idx = list(atom)
        mass = float(p[idx].sum())
        if mass <= 0.0:
            values.append(NEG_INF)
            continue
        local = AvarSpec(spec.alpha, DiscreteMeasure(p[idx] / mass))
        values.append(avar_primal(local, RandomVariable(Z.values[idx])).value)
    te = all(np.isfinite(v) for v in values)
    return ConditionalValue(G, tuple(values), te)


@dataclass(frozen=True)
class TowerCheck:
    lhs: float  # R(Z)
    rhs: float  # R(R_{|G}(Z))
    holds: bool


def tower_upper_bound_check(
    M: AmbiguitySet, Z: RandomVariable, G: Partition, P: DiscreteMeasure
) -> TowerCheck:
    """Check ``R(Z) <= R(R_{|G}(Z))``. Requires every atom reachable."""
    cond = conditional_robust(M, Z, G, P)
    if not cond.finite:
        raise ValidationError("conditional value must be finite everywhere")
    lhs, _ = robust_expectation(M, Z)
    rhs, _ = robust_expectation(M, cond.as_random_variable())
    return TowerCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + 1e-9)


@dataclass(frozen=True)
class StrictMonotonicityReport:
    """Outcome of the conditional strict-monotonicity battery.

    ``checked`` is false when the underlying functional is not strictly
    monotone (the propagation statement has nothing to say then).
    """

    checked: bool
    trials: int
    violations: int
    epsilon: float
    note: str = ""


def conditional_strict_monotonicity_check(
    M: AmbiguitySet,
    G: Partition,
    P: DiscreteMeasure,
    trials: int,
    rng: Rng | None = None,
) -> StrictMonotonicityReport:
    """Sample ``Z' = Z + gamma * 1_A`` with ``P(A) > 0`` and assert the
    conditional values increase, strictly on every atom meeting ``A`` in a
    ``P``-positive set (the increase is at least ``gamma * epsilon`` there).
    """
    rng = rng or Rng()
    base = is_strictly_monotone(M, P)
    if not base.strict:
        return StrictMonotonicityReport(
            checked=False,
            trials=0,
            violations=0,
            epsilon=base.epsilon,
            note="underlying functional is not strictly monotone; check skipped",
        )
    n = M.n
    positive = [i for i in range(n) if P.weights[i] > 0.0]
    violations = 0
    for _ in range(trials):
        z = RandomVariable(rng.uniforms(n, -2.0, 2.0))
        bump_set = [positive[i] for i in rng.subset(len(positive))]
        gamma = rng.uniform(0.1, 1.0)
        z2 = z.values.copy()
        z2[bump_set] += gamma
        before = conditional_robust(M, z, G, P)
        after = conditional_robust(M, RandomVariable(z2), G, P)
        for a, atom in enumerate(G.atoms):
            delta = after.atom_values[a] - before.atom_values[a]
            if delta < -1e-9:
                violations += 1
                continue
            meets = P.weights[[i for i in atom if i in bump_set]].sum() if bump_set else 0.0
            if meets > 0.0 and delta < gamma * base.epsilon - 1e-7:
                violations += 1
    return StrictMonotonicityReport(
        checked=True, trials=trials, violations=violations, epsilon=base.epsilon
    )
