from __future__ import annotations

import json
import time
from fractions import Fraction

import pytest
from conftest import make_instance
from oracles import enumerate_optimum

from bpsched.errors import ShapeMismatch
from bpsched.generate import toy_instance
from bpsched.lp import EPS_NUM
from bpsched.mip import brute_force_schedule
from bpsched.oracle import (
    GAP_EXAMPLE_DURATIONS,
    MODE_GAP_WITNESS_SEED,
    USAGE_BRANCH_WITNESS_SEED,
    build_gap_example,
    build_mckp_reduction,
    check_mckp_identity,
    evaluate_listed_solution,
    mckp_fixture,
    pricing_model,
    search_fractional_witness,
    solve_mckp,
    verify_integrality_gap,
)
from bpsched.pricing import RESOURCE_CONSTRAINED, DualPrices, solve_pricing

# pinned after the first oracle runs
GAP_EXAMPLE_Z = {True: (1.0, 1.0), False: (0.0, 0.0)}  # horizon completion -> (z_lp, z_ip)
MODE_GAP_WITNESS = (-11.5, -11.0)


def test_gap_example_transcription():
    inst = build_gap_example()
    assert inst.mode((1, 2), 2).duration == 5
    assert [inst.mode((1, j), 1).duration for j in range(1, 6)] == [1] * 5
    assert inst.cost((1, 4), 2, 3) == 1 and inst.cost((1, 4), 2, 4) == 1
    assert inst.cost((1, 3), 2, 1) == 0
    assert all(inst.cost((1, j), 1, t) == 1 for j in range(1, 6) for t in range(1, 9))
    assert inst.horizon == 8 and len(inst.edges) == 5


@pytest.mark.parametrize("hc", [True, False])
def test_gap_example_values(hc):
    rep = verify_integrality_gap(build_gap_example(), horizon_completion=hc)
    assert (rep.z_lp, rep.z_ip) == pytest.approx(GAP_EXAMPLE_Z[hc])
    assert rep.chain_ok() and not rep.fractional
    assert json.loads(rep.to_json())["z_ip"] == GAP_EXAMPLE_Z[hc][1]


def test_gap_example_brute_force_is_fast():
    t0 = time.monotonic()
    res = brute_force_schedule(build_gap_example())
    assert time.monotonic() - t0 < 1.0
    assert float(res.objective) == GAP_EXAMPLE_Z[True][1]


def test_listed_half_point_is_infeasible():
    rep = evaluate_listed_solution()
    assert rep["objective"] == 2.5
    rows = [v["row"] for v in rep["violated_rows"]]
    assert rows == ["('assign', (1, 3))"]


def test_mutated_gap_example_still_reports():
    durations = dict(GAP_EXAMPLE_DURATIONS)
    durations[2] = (1, 9)
    rep = verify_integrality_gap(build_gap_example(durations))
    assert rep.chain_ok()
    assert rep.z_ip == pytest.approx(float(enumerate_optimum(build_gap_example(durations))))


@pytest.mark.parametrize("seed", range(3))
def test_single_mode_pricing_flag_false(seed):
    rep = verify_integrality_gap(toy_instance(seed, 4, 1, 8, 1, cost="random"))
    assert not rep.fractional and rep.z_lp == pytest.approx(rep.z_ip)


def test_resource_constrained_pricing_chain():
    inst = make_instance(
        [(2,), (2,), (1,)], edges=[(1, 3)], horizon=4, demands=[[(2,)], [(2,)], [(1,)]], capacities=[3], costs={}
    )
    rep = verify_integrality_gap(
        inst, lambda i: pricing_model(i, kind=RESOURCE_CONSTRAINED, duals=DualPrices({1: 0.0}, peak={0: -1.0}))
    )
    assert rep.z_ip is not None and rep.z_lp <= rep.z_ip + EPS_NUM


def test_mode_gap_witness_pinned():
    w = search_fractional_witness("mode-gap", range(650, 700))
    assert w is not None and w.seed == MODE_GAP_WITNESS_SEED
    assert (w.z_lp, w.z_ip) == pytest.approx(MODE_GAP_WITNESS)
    assert enumerate_optimum(w.instance) == Fraction(-11)


def test_usage_branch_witness_pinned():
    w = search_fractional_witness("usage-branch", range(USAGE_BRANCH_WITNESS_SEED + 1))
    assert w is not None and w.seed == USAGE_BRANCH_WITNESS_SEED
    assert w.z_ip > w.z_lp + 1e-6 and w.decision is not None


def test_single_activity_has_no_witness():
    assert search_fractional_witness("mode-gap", range(20), max_acts=1) is None


@pytest.mark.parametrize("seed", range(3))
def test_mckp_identity(seed):
    d = check_mckp_identity(*mckp_fixture(seed))
    assert d["identity_gap"] <= 1e-6
    assert d["pricing"] == pytest.approx(-d["mckp"], abs=1e-6)


def test_mckp_zero_duals_and_slack_capacity():
    inst, _, t_prime, _ = mckp_fixture(4)
    zero = DualPrices({1: 0.0}, {}, {(0, t): 0.0 for t in range(1, inst.horizon + 1)}, {})
    mk = build_mckp_reduction(inst, 0, t_prime, 2, zero)
    for a, items in zip(mk.activities, mk.classes):
        assert [p for _, p, _ in items] == [-float(inst.cost(a, 1, t)) for t in range(1, inst.horizon + 1)]
    big = sum(inst.activities[a].modes[0].demands[0] for a in inst.activities)
    d = check_mckp_identity(inst, zero, t_prime, big)
    free = pricing_model(inst, duals=zero)
    assert d["pricing"] == pytest.approx(solve_pricing(free, "lp").best_value)
    assert -solve_mckp(build_mckp_reduction(inst, 0, t_prime, big, zero))[0] == pytest.approx(d["pricing"])


def test_mckp_shape_guard():
    inst = make_instance([(1,), (1,)], edges=[(1, 2)], demands=[[(1,)], [(1,)]], capacities=[2])
    with pytest.raises(ShapeMismatch):
        build_mckp_reduction(inst, 0, 1, 1, DualPrices({1: 0.0}))
