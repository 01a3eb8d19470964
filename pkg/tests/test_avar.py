"""AVaR primal/dual agreement and axiom batteries."""

import numpy as np
import pytest

from drokit.ambiguity import AVaRSet, FiniteFamily, WassersteinBall
from drokit.avar import AvarSpec, avar_dual, avar_primal, check_axioms
from drokit.rng import Rng
from drokit.spaces import DiscreteMeasure, FiniteSpace, RandomVariable


def tau_grid_oracle(spec: AvarSpec, Z: RandomVariable, points: int = 20001):
    """Dense threshold grid scan, independent of the breakpoint argument.

    Returns the grid minimum (an upper bound on the true infimum) together
    with a bound on how far above the infimum it can sit: half the grid
    spacing times the largest objective slope.
    """
    z = Z.values
    p = spec.reference.weights
    scale = 1.0 / (1.0 - spec.alpha)
    lo, hi = z.min() - 1.0, z.max() + 1.0
    taus = np.linspace(lo, hi, points)
    vals = taus + scale * (np.maximum(z[None, :] - taus[:, None], 0.0) @ p)
    spacing = (hi - lo) / (points - 1)
    slope = max(1.0, scale)
    return float(vals.min()), slope * spacing


Z1234 = RandomVariable([1.0, 2.0, 3.0, 4.0])
U4 = DiscreteMeasure.uniform(4)


def test_avar_half_level():
    got = avar_primal(AvarSpec(0.5, U4), Z1234)
    assert got.value == pytest.approx(3.5, abs=1e-12)
    oracle, gap = tau_grid_oracle(AvarSpec(0.5, U4), Z1234)
    assert got.value <= oracle + 1e-9
    assert oracle <= got.value + gap


def test_avar_zero_is_mean():
    assert avar_primal(AvarSpec(0.0, U4), Z1234).value == pytest.approx(2.5, abs=1e-12)


def test_avar_point_eight():
    got = avar_primal(AvarSpec(0.8, U4), Z1234)
    assert got.value == pytest.approx(4.0, abs=1e-12)
    assert got.tau == pytest.approx(4.0)


def test_avar_one_is_positive_support_max():
    spec = AvarSpec(1.0, DiscreteMeasure([0.5, 0.5, 0.0]))
    got = avar_primal(spec, RandomVariable([1.0, 2.0, 9.0]))
    assert got.value == pytest.approx(2.0)


def test_dual_matches_primal_on_stated_examples():
    for alpha in (0.5, 0.0, 0.8):
        spec = AvarSpec(alpha, U4)
        assert avar_dual(spec, Z1234) == pytest.approx(
            avar_primal(spec, Z1234).value, abs=1e-7
        )


def test_dual_matches_primal_randomized():
    rng = Rng(3)
    for _ in range(100):
        n = 2 + rng.randint(19)
        p = DiscreteMeasure(rng.simplex(n))
        z = RandomVariable(rng.uniforms(n, -5.0, 5.0))
        spec = AvarSpec(rng.uniform(0.0, 0.95), p)
        primal = avar_primal(spec, z).value
        assert avar_dual(spec, z) == pytest.approx(primal, abs=1e-7)
        oracle, gap = tau_grid_oracle(spec, z)
        assert primal <= oracle + 1e-9
        assert oracle <= primal + gap


def test_avar_monotone_in_alpha():
    rng = Rng(5)
    for _ in range(50):
        n = 3 + rng.randint(6)
        p = DiscreteMeasure(rng.simplex(n))
        z = RandomVariable(rng.uniforms(n, -3.0, 3.0))
        a1 = rng.uniform(0.0, 0.9)
        a2 = rng.uniform(a1, 0.999)
        assert (
            avar_primal(AvarSpec(a1, p), z).value
            <= avar_primal(AvarSpec(a2, p), z).value + 1e-9
        )


def test_avar_extremes():
    rng = Rng(8)
    p = DiscreteMeasure(rng.simplex(5))
    z = RandomVariable(rng.uniforms(5, -2.0, 2.0))
    assert avar_primal(AvarSpec(0.0, p), z).value == pytest.approx(
        float(p.weights @ z.values), abs=1e-12
    )
    assert avar_primal(AvarSpec(1.0, p), z).value == pytest.approx(float(z.values.max()))


def test_axiom_battery_avar_set():
    report = check_axioms(AVaRSet(0.5, U4), trials=200, rng=Rng(1))
    assert report.max_violation <= 1e-7


def test_axiom_battery_singleton_family_is_linear():
    M = FiniteFamily((DiscreteMeasure([0.3, 0.7]),))
    report = check_axioms(M, trials=100, rng=Rng(2))
    assert report.max_violation <= 1e-9


def test_axiom_battery_zero_radius_ball():
    space = FiniteSpace(3, metric=[[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    M = WassersteinBall(DiscreteMeasure([0.2, 0.3, 0.5]), 0.0, space)
    report = check_axioms(M, trials=60, rng=Rng(4))
    assert report.max_violation <= 1e-7
