"""Dynamic-programming solver tests with an exhaustive-enumeration oracle."""

import itertools

import numpy as np
import pytest

from drokit.ambiguity import FiniteFamily
from drokit.dp import (
    MultistageProblem,
    Policy,
    compare_min_static_vs_min_nested,
    count_policies,
    enumerate_policies,
    nested_policy_value,
    policy_cost_array,
    solve_dp,
    static_policy_value,
    verify_optimality_necessity,
)
from drokit.rng import Rng
from drokit.spaces import DiscreteMeasure, ValidationError


def full_simplex(n):
    return FiniteFamily(tuple(DiscreteMeasure.point_mass(n, i) for i in range(n)))


def all_actions(n_prev, n_out, n_act):
    return tuple(
        tuple(tuple(range(n_act)) for _ in range(n_out)) for _ in range(n_prev)
    )


def carried_action(n_prev, n_out):
    """Stage forced to repeat the previous action."""
    return tuple(tuple((xp,) for _ in range(n_out)) for xp in range(n_prev))


def witness_problem():
    """min_static < min_nested with differing argmin policies."""
    simplex2 = full_simplex(2)
    unif2 = FiniteFamily((DiscreteMeasure([0.5, 0.5]),))
    return MultistageProblem(
        n_actions=(1, 2, 2),
        stage_sizes=(1, 2, 2),
        stage_sets=(None, unif2, simplex2),
        costs=(
            np.zeros((1, 1)),
            np.zeros((2, 2)),
            np.array([[1.0, 0.0], [0.0, 1.0]]),
        ),
        feasible=((0,), all_actions(1, 2, 2), carried_action(2, 2)),
    )


def random_problem(rng, strictly_monotone=False):
    T = 2 + rng.randint(2)
    n_actions = tuple(1 + rng.randint(2) for _ in range(T))
    stage_sizes = (1,) + tuple(2 + rng.randint(1) for _ in range(T - 1))
    stage_sets = [None]
    for t in range(1, T):
        members = []
        for _ in range(1 + rng.randint(2)):
            w = rng.simplex(stage_sizes[t])
            if strictly_monotone:
                w = 0.7 * w + 0.3 / stage_sizes[t]  # bounded away from zero
            members.append(DiscreteMeasure(w))
        stage_sets.append(FiniteFamily(tuple(members)))
    costs = tuple(
        np.array(
            [
                [rng.uniform(-1.0, 1.0) for _ in range(stage_sizes[t])]
                for _ in range(n_actions[t])
            ]
        )
        for t in range(T)
    )
    feasible = [tuple(range(n_actions[0]))]
    for t in range(1, T):
        per_prev = []
        for _ in range(n_actions[t - 1]):
            per_out = []
            for _ in range(stage_sizes[t]):
                k = 1 + rng.randint(n_actions[t])
                per_out.append(tuple(sorted(rng.shuffled(list(range(n_actions[t])))[:k])))
            per_prev.append(tuple(per_out))
        feasible.append(tuple(per_prev))
    return MultistageProblem(
        n_actions=n_actions,
        stage_sizes=stage_sizes,
        stage_sets=tuple(stage_sets),
        costs=costs,
        feasible=tuple(feasible),
    )


def test_one_stage_deterministic():
    prob = MultistageProblem(
        n_actions=(3,),
        stage_sizes=(1,),
        stage_sets=(None,),
        costs=(np.array([[2.0], [0.5], [1.0]]),),
        feasible=((0, 1, 2),),
    )
    sol = solve_dp(prob)
    assert sol.value == pytest.approx(0.5)
    assert sol.policy.action(()) == 1


def test_two_stage_full_simplex_worst_child():
    prob = MultistageProblem(
        n_actions=(2, 2),
        stage_sizes=(1, 2),
        stage_sets=(None, full_simplex(2)),
        costs=(np.array([[0.0], [0.1]]), np.array([[1.0, 3.0], [2.0, 2.1]])),
        feasible=((0, 1), all_actions(2, 2, 2)),
    )
    sol = solve_dp(prob)
    # worst-case child of each stage-1 action: min over a of max over xi
    best = min(
        c0 + max(min(prob.costs[1][a, xi] for a in range(2)) for xi in range(2))
        for c0 in (0.0, 0.1)
    )
    assert sol.value == pytest.approx(best)
    # oracle: exhaustive policies
    oracle = min(nested_policy_value(prob, pi) for pi in enumerate_policies(prob))
    assert sol.value == pytest.approx(oracle, abs=1e-9)


def test_relatively_complete_recourse_validated():
    with pytest.raises(ValidationError):
        MultistageProblem(
            n_actions=(1, 1),
            stage_sizes=(1, 2),
            stage_sets=(None, full_simplex(2)),
            costs=(np.zeros((1, 1)), np.zeros((1, 2))),
            feasible=((0,), (((0,), ()),)),  # empty action list at one node
        )


def test_dp_matches_enumeration_randomized():
    rng = Rng(211)
    for _ in range(15):
        prob = random_problem(rng)
        sol = solve_dp(prob)
        oracle = min(nested_policy_value(prob, pi) for pi in enumerate_policies(prob))
        assert sol.value == pytest.approx(oracle, abs=1e-9)
        assert nested_policy_value(prob, sol.policy) == pytest.approx(sol.value, abs=1e-9)
        assert sol.value_functions.bellman_residual(prob) <= 1e-9


def test_singleton_marginals_reduce_to_risk_neutral():
    rng = Rng(223)
    for _ in range(5):
        T = 2 + rng.randint(2)
        sizes = (1,) + tuple(2 for _ in range(T - 1))
        ps = [DiscreteMeasure(rng.simplex(2)) for _ in range(T - 1)]
        prob = MultistageProblem(
            n_actions=tuple(2 for _ in range(T)),
            stage_sizes=sizes,
            stage_sets=(None,) + tuple(FiniteFamily((p,)) for p in ps),
            costs=tuple(
                np.array([[rng.uniform(-1, 1) for _ in range(sizes[t])] for _ in range(2)])
                for t in range(T)
            ),
            feasible=(tuple(range(2)),)
            + tuple(all_actions(2, sizes[t], 2) for t in range(1, T)),
        )
        sol = solve_dp(prob)
        # classical expected-cost enumeration
        best = np.inf
        for pi in enumerate_policies(prob):
            cost = policy_cost_array(prob, pi)
            e = cost
            for p in reversed(ps):
                e = e @ p.weights
            best = min(best, float(e))
        assert sol.value == pytest.approx(best, abs=1e-9)
        for pi in enumerate_policies(prob):
            assert static_policy_value(prob, pi) == pytest.approx(
                nested_policy_value(prob, pi), abs=1e-9
            )


def test_static_never_exceeds_nested():
    rng = Rng(227)
    for _ in range(10):
        prob = random_problem(rng)
        for pi in enumerate_policies(prob):
            assert static_policy_value(prob, pi) <= nested_policy_value(prob, pi) + 1e-9


def test_witness_gap_and_argmins():
    prob = witness_problem()
    cmp = compare_min_static_vs_min_nested(prob)
    assert cmp.holds
    assert cmp.min_nested - cmp.min_static >= 1e-3
    assert cmp.argmins_differ
    assert cmp.min_static == pytest.approx(0.5)
    assert cmp.min_nested == pytest.approx(1.0)


def test_min_comparison_randomized():
    rng = Rng(229)
    for _ in range(8):
        prob = random_problem(rng)
        cmp = compare_min_static_vs_min_nested(prob)
        assert cmp.holds


def test_policy_count_cap():
    prob = witness_problem()
    assert count_policies(prob) == 4
    with pytest.raises(ValidationError):
        list(enumerate_policies(prob, cap=3))


def test_necessity_on_strictly_monotone_instances():
    rng = Rng(233)
    for _ in range(6):
        prob = random_problem(rng, strictly_monotone=True)
        rep = verify_optimality_necessity(prob)
        assert rep.checked
        assert rep.sufficiency_ok
        assert rep.optimal_policies >= 1
        assert rep.violations == ()


def test_necessity_gate_on_full_simplex():
    prob = witness_problem()  # full-simplex stage kills strict monotonicity
    rep = verify_optimality_necessity(prob)
    assert not rep.checked
    assert rep.sufficiency_ok


def test_weak_duality_exchange():
    """max over product vertices of min-over-policies <= min over policies of
    the static worst case."""
    rng = Rng(239)
    for _ in range(6):
        prob = random_problem(rng)
        policies = list(enumerate_policies(prob))
        spec = prob.random_spec()
        vertex_tuples = list(itertools.product(*[f.measures for f in spec.stage_sets]))
        outer = -np.inf
        for combo in vertex_tuples:
            inner = np.inf
            for pi in policies:
                cost = policy_cost_array(prob, pi)
                e = cost
                for q in reversed(combo):
                    e = e @ q.weights
                inner = min(inner, float(e))
            outer = max(outer, inner)
        min_static = min(static_policy_value(prob, pi) for pi in policies)
        assert outer <= min_static + 1e-9


def test_policy_validation():
    prob = witness_problem()
    with pytest.raises(ValidationError):
        Policy({(): 0, (0,): 0, (1,): 0, (0, 0): 1, (0, 1): 0, (1, 0): 0, (1, 1): 0}).validate(prob)
