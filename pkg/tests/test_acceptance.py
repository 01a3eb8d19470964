"""Acceptance battery: every criterion at its stated trial count and
tolerance, one pass/fail line each (run with ``pytest -s`` to see them live).

The same checks back ``drokit verify --builtin``; the final test runs that
whole battery end-to-end and enforces the time budget.
"""

import time

import pytest

from drokit.rng import Rng
from drokit.verify import (
    check_avar_duality,
    check_axiom_battery,
    check_composite_dominance,
    check_dp,
    check_induced_set,
    check_permutation_invariance,
    check_property_p_atom_max,
    check_rectangular_equivalence,
    check_reference_measure,
    check_strict_monotonicity,
    check_tower_inequality,
    check_transport,
    run_builtin,
)

CRITERIA = [
    (1, check_avar_duality, 500),
    (2, check_axiom_battery, 500),
    (3, check_property_p_atom_max, 40),
    (4, check_tower_inequality, 500),
    (5, check_composite_dominance, 500),
    (6, check_rectangular_equivalence, 100),
    (7, check_induced_set, 50),
    (8, check_permutation_invariance, 100),
    (9, check_reference_measure, 1000),
    (10, check_strict_monotonicity, 200),
    (11, check_transport, 200),
    (12, check_dp, 50),
]


@pytest.mark.parametrize("number,criterion,trials", CRITERIA,
                         ids=[f"criterion_{n:02d}_{fn.__name__}" for n, fn, _ in CRITERIA])
def test_acceptance_criterion(number, criterion, trials):
    result = criterion(trials, Rng(42))
    line = (
        f"[{'PASS' if result.passed else 'FAIL'}] criterion {number} "
        f"{result.name}: residual={result.residual:.3g} ({result.detail})"
    )
    print(line)
    assert result.passed, line


def test_full_battery_under_time_budget():
    start = time.perf_counter()
    results = run_builtin(seed=42)
    elapsed = time.perf_counter() - start
    print(f"verify --builtin completed in {elapsed:.1f}s")
    assert all(r.passed for r in results)
    assert elapsed < 60.0
