"""Second-stage solver: spec examples, oracle equivalence, feasibility,
subgradients, and scalar/vectorised agreement."""

import math

import numpy as np
import pytest

from stem.model import TOL, FirstStageDecision, MarketConfig, ProducerType, stage2_objective
from stem.sampling import sample_scenarios
from stem.stage2 import MaskEvaluator, solve_second_stage

from oracles import oracle_second_stage_value, random_stage2_instance


def cfg_v(**overrides):
    base = dict(
        n=1, demand=100.0, alpha1=10.0, alpha2=6.0, alpha3=8.0, alpha4=200.0,
        reserve_cap_max=100.0, scenario_count=1, seed=0,
    )
    base.update(overrides)
    return MarketConfig(**base)


class TestSpecExamples:
    def test_activation_beats_up_regulation(self):
        sol = solve_second_stage(
            FirstStageDecision((True,), 20.0, 0.0), [ProducerType(2, 90, 10)], cfg_v()
        )
        assert sol.decision.volumes == (90.0,)
        assert sol.decision.activation == pytest.approx(10.0)
        assert sol.decision.shedding == 0.0
        assert sol.value == pytest.approx(80.0)

    def test_up_regulation_beyond_reserve(self):
        sol = solve_second_stage(
            FirstStageDecision((True,), 5.0, 0.0), [ProducerType(2, 90, 10)], cfg_v()
        )
        assert sol.decision.volumes == (95.0,)
        assert sol.decision.activation == pytest.approx(5.0)
        assert sol.value == pytest.approx(90.0)

    def test_shedding_when_no_up_regulation(self):
        sol = solve_second_stage(
            FirstStageDecision((True,), 5.0, 0.0),
            [ProducerType(2, 90, math.inf)],
            cfg_v(),
        )
        assert sol.decision.volumes == (90.0,)
        assert sol.decision.activation == pytest.approx(5.0)
        assert sol.decision.shedding == pytest.approx(5.0)
        assert sol.value == pytest.approx(1040.0)

    def test_baseline_exactly_meets_demand(self):
        sol = solve_second_stage(
            FirstStageDecision((True,), 0.0, 0.0), [ProducerType(2, 100, 10)], cfg_v()
        )
        assert sol.decision.volumes == (100.0,)
        assert sol.decision.activation == 0.0
        assert sol.value == 0.0

    def test_surplus_absorbed_by_cheapest_down_regulation(self):
        sol = solve_second_stage(
            FirstStageDecision((True, True), 10.0, 0.0),
            [ProducerType(5, 80, 20), ProducerType(2, 40, 20)],
            cfg_v(n=2),
        )
        # 20 MWh surplus, producer 1 is cheaper down.
        assert sol.decision.volumes == (80.0, 20.0)
        assert sol.decision.activation == 0.0
        assert sol.value == pytest.approx(40.0)

    def test_undispatched_producer_fixed_at_baseline(self):
        sol = solve_second_stage(
            FirstStageDecision((True, False), 0.0, 0.0),
            [ProducerType(2, 90, 10), ProducerType(1, 500, 1)],
            cfg_v(n=2),
        )
        assert sol.decision.volumes[1] == 500.0
        assert sol.value == pytest.approx(10 * 10.0)  # 10 MWh up-regulation

    def test_tie_activation_before_producer(self):
        cfg = cfg_v(alpha3=10.0, alpha4=200.0)
        sol = solve_second_stage(
            FirstStageDecision((True,), 20.0, 0.0), [ProducerType(2, 90, 10)], cfg
        )
        assert sol.decision.activation == pytest.approx(10.0)
        assert sol.decision.volumes == (90.0,)

    def test_tie_lowest_producer_index_first(self):
        sol = solve_second_stage(
            FirstStageDecision((True, True), 0.0, 0.0),
            [ProducerType(2, 40, 12), ProducerType(2, 40, 12)],
            cfg_v(n=2),
        )
        assert sol.decision.volumes == (60.0, 40.0)


class TestOracleEquivalence:
    def test_random_instances_match_enumeration(self):
        rng = np.random.default_rng(2024)
        for _ in range(300):
            x, thetas, cfg = random_stage2_instance(rng)
            sol = solve_second_stage(x, thetas, cfg)
            want = oracle_second_stage_value(x, thetas, cfg)
            assert sol.value == pytest.approx(want, rel=1e-6, abs=1e-6)

    def test_value_matches_objective_of_decision(self):
        rng = np.random.default_rng(55)
        for _ in range(200):
            x, thetas, cfg = random_stage2_instance(rng)
            sol = solve_second_stage(x, thetas, cfg)
            recomputed = stage2_objective(x, sol.decision, thetas, cfg)
            assert sol.value == pytest.approx(recomputed, abs=1e-9)


class TestFeasibility:
    def test_constraints_hold_on_random_instances(self):
        rng = np.random.default_rng(99)
        for _ in range(300):
            x, thetas, cfg = random_stage2_instance(rng)
            sol = solve_second_stage(x, thetas, cfg)
            y = sol.decision
            assert y.shedding >= -TOL
            assert y.activation <= x.reserve_capacity + TOL
            assert y.activation >= -TOL
            supplied = sum(
                v for v, b in zip(y.volumes, x.dispatch) if b
            )
            balance = cfg.demand - supplied - x.dispatchable - y.shedding
            assert balance == pytest.approx(y.activation, abs=1e-9)
            assert all(v >= -TOL for v in y.volumes)


class TestSubgradients:
    def test_reserve_subgradient_supports_value(self):
        rng = np.random.default_rng(7)
        for _ in range(150):
            x, thetas, cfg = random_stage2_instance(rng)
            sol = solve_second_stage(x, thetas, cfg)
            assert sol.d_reserve <= 0.0
            for h in (-1.0, -0.1, 0.1, 1.0):
                r = x.reserve_capacity + h
                if r < 0:
                    continue
                shifted = FirstStageDecision(x.dispatch, r, x.dispatchable)
                val = solve_second_stage(shifted, thetas, cfg).value
                assert val >= sol.value + sol.d_reserve * h - 1e-9 * (1 + abs(val))

    def test_dispatchable_subgradient_supports_value(self):
        rng = np.random.default_rng(8)
        for _ in range(150):
            x, thetas, cfg = random_stage2_instance(rng)
            sol = solve_second_stage(x, thetas, cfg)
            for h in (-1.0, -0.1, 0.1, 1.0):
                d = x.dispatchable + h
                if d < 0 or d > cfg.demand:
                    continue
                shifted = FirstStageDecision(x.dispatch, x.reserve_capacity, d)
                val = solve_second_stage(shifted, thetas, cfg).value
                assert val >= sol.value + sol.d_dispatchable * h - 1e-9 * (1 + abs(val))

    def test_value_non_increasing_in_reserve(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            x, thetas, cfg = random_stage2_instance(rng)
            vals = [
                solve_second_stage(
                    FirstStageDecision(x.dispatch, r, x.dispatchable), thetas, cfg
                ).value
                for r in (0.0, 5.0, 20.0, 50.0)
            ]
            assert all(a >= b - 1e-9 for a, b in zip(vals, vals[1:]))

    def test_value_convex_in_dispatchable(self):
        # Not monotone in dispatchable (surplus is paid down-regulation), but
        # convex: midpoint value below the chord.
        rng = np.random.default_rng(10)
        for _ in range(100):
            x, thetas, cfg = random_stage2_instance(rng)
            d0, d1 = sorted(rng.uniform(0, cfg.demand, size=2)) if cfg.demand > 0 else (0.0, 0.0)
            mid = 0.5 * (d0 + d1)
            v = lambda d: solve_second_stage(
                FirstStageDecision(x.dispatch, x.reserve_capacity, d), thetas, cfg
            ).value
            assert v(mid) <= 0.5 * (v(d0) + v(d1)) + 1e-9 * (1 + abs(v(mid)))


class TestMaskEvaluator:
    def _arrays(self, rng, n, S):
        down = rng.uniform(0, 30, size=(S, n))
        base = rng.uniform(0, 50, size=(S, n))
        up = rng.uniform(8, 30, size=(S, n))
        up[rng.random(size=(S, n)) < 0.2] = np.inf
        return down, base, up

    def test_values_match_scalar_solver(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            n = int(rng.integers(1, 5))
            S = int(rng.integers(1, 12))
            down, base, up = self._arrays(rng, n, S)
            mask = tuple(bool(b) for b in rng.integers(0, 2, size=n))
            cfg = cfg_v(n=n, demand=float(rng.uniform(0, 150)))
            r = float(rng.uniform(0, 40))
            d = float(rng.uniform(0, cfg.demand))
            ev = MaskEvaluator.build(down, base, up, mask, cfg)
            got = ev.values(r, d)
            for s in range(S):
                thetas = [
                    ProducerType(down[s, i], base[s, i], up[s, i]) for i in range(n)
                ]
                want = solve_second_stage(
                    FirstStageDecision(mask, r, d), thetas, cfg
                ).value
                assert got[s] == pytest.approx(want, rel=1e-9, abs=1e-9)

    def test_mean_subgradient_matches_scalar_means(self):
        rng = np.random.default_rng(32)
        for _ in range(20):
            n = int(rng.integers(1, 5))
            S = int(rng.integers(1, 10))
            down, base, up = self._arrays(rng, n, S)
            mask = tuple(bool(b) for b in rng.integers(0, 2, size=n))
            cfg = cfg_v(n=n, demand=float(rng.uniform(0, 150)))
            r = float(rng.uniform(0, 40))
            d = float(rng.uniform(0, cfg.demand))
            ev = MaskEvaluator.build(down, base, up, mask, cfg)
            val, g_r, g_d = ev.value_and_subgradient(r, d)
            scalars = [
                solve_second_stage(
                    FirstStageDecision(mask, r, d),
                    [ProducerType(down[s, i], base[s, i], up[s, i]) for i in range(n)],
                    cfg,
                )
                for s in range(S)
            ]
            assert val == pytest.approx(np.mean([s.value for s in scalars]), abs=1e-9)
            assert g_r == pytest.approx(np.mean([s.d_reserve for s in scalars]), abs=1e-9)
            assert g_d == pytest.approx(np.mean([s.d_dispatchable for s in scalars]), abs=1e-9)

    def test_settlement_components_sum_to_value(self):
        rng = np.random.default_rng(33)
        for _ in range(15):
            n = int(rng.integers(1, 5))
            S = int(rng.integers(1, 10))
            down, base, up = self._arrays(rng, n, S)
            mask = tuple(bool(b) for b in rng.integers(0, 2, size=n))
            cfg = cfg_v(n=n, demand=float(rng.uniform(0, 150)))
            r = float(rng.uniform(0, 40))
            d = float(rng.uniform(0, cfg.demand))
            ev = MaskEvaluator.build(down, base, up, mask, cfg)
            values, costs = ev.settlement_components(r, d)
            np.testing.assert_allclose(values, ev.values(r, d), atol=1e-9)
            for s in range(S):
                thetas = [
                    ProducerType(down[s, i], base[s, i], up[s, i]) for i in range(n)
                ]
                sol = solve_second_stage(FirstStageDecision(mask, r, d), thetas, cfg)
                from stem.model import producer_cost

                for i in range(n):
                    want = producer_cost(thetas[i], sol.decision.volumes[i])
                    assert costs[s, i] == pytest.approx(want, abs=1e-9)


class TestDeterminism:
    def test_repeat_solves_bit_identical(self):
        rng = np.random.default_rng(77)
        x, thetas, cfg = random_stage2_instance(rng)
        a = solve_second_stage(x, thetas, cfg)
        b = solve_second_stage(x, thetas, cfg)
        assert a == b
