"""Two-stage VCG settlement.

The first-stage payment is the drop in first-stage procurement cost a
participant causes; the second-stage payment is its own cost plus its marginal
contribution to second-stage system cost, with the counterfactual second stage
evaluated at the counterfactual first-stage decision. All n counterfactual
first-stage solves reuse the full run's scenario draws with the removed
producer's column dropped — common random numbers, so the VCG differences are
not drowned in sampling noise — and are cached for every later settlement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    FirstStageDecision,
    MarketConfig,
    ProducerType,
    SettlementRecord,
    first_stage_cost,
    producer_cost,
    TypeDistribution,
)
from .sampling import ScenarioSet
from .stage1 import Stage1Solution, solve_first_stage
from .stage2 import MaskEvaluator, solve_second_stage


@dataclass(frozen=True)
class CounterfactualCache:
    """Full-market first-stage solution plus one solution per removed
    producer, all sharing the full run's scenario draws."""

    full: Stage1Solution
    without: tuple[Stage1Solution, ...]

    @property
    def n(self) -> int:
        return len(self.without)


def build_counterfactuals(
    distributions: list[TypeDistribution],
    cfg: MarketConfig,
    threads: int = 1,
) -> CounterfactualCache:
    """Solve the market once with all producers and once per removal."""
    full = solve_first_stage(distributions, cfg, threads=threads)
    without = []
    for i in range(len(distributions)):
        sub_dists = distributions[:i] + distributions[i + 1 :]
        without.append(
            solve_first_stage(
                sub_dists,
                cfg.without_producer(i),
                scenario_set=full.scenarios.without_producer(i),
                threads=threads,
            )
        )
    return CounterfactualCache(full=full, without=tuple(without))


def first_stage_payment(i: int, cache: CounterfactualCache, cfg: MarketConfig) -> float:
    """Decrease in first-stage procurement cost due to participant ``i``."""
    return -first_stage_cost(cache.full.decision, cfg) + first_stage_cost(
        cache.without[i].decision, cfg
    )


def second_stage_payment(
    i: int,
    cache: CounterfactualCache,
    x: FirstStageDecision,
    realized: list[ProducerType],
    cfg: MarketConfig,
) -> float:
    """Own cost minus realized second-stage system cost plus the
    counterfactual second-stage system cost without ``i``."""
    sol = solve_second_stage(x, realized, cfg)
    own = producer_cost(realized[i], sol.decision.volumes[i])
    minus = realized[:i] + realized[i + 1 :]
    sub = solve_second_stage(cache.without[i].decision, minus, cfg.without_producer(i))
    return own - sol.value + sub.value


def utility(
    i: int,
    t1: float,
    t2: float,
    x: FirstStageDecision,
    y,
    theta_i: ProducerType,
) -> float:
    """Received payments minus the cost incurred at the dispatched volume."""
    return t1 + t2 - producer_cost(theta_i, y.volumes[i])


def settle(
    cache: CounterfactualCache, realized: list[ProducerType], cfg: MarketConfig
) -> list[SettlementRecord]:
    """Full settlement of one realization: per-producer (t1, t2, cost, utility)."""
    x = cache.full.decision
    sol = solve_second_stage(x, realized, cfg)
    records = []
    for i in range(len(realized)):
        t1 = first_stage_payment(i, cache, cfg)
        own = producer_cost(realized[i], sol.decision.volumes[i])
        minus = realized[:i] + realized[i + 1 :]
        sub = solve_second_stage(
            cache.without[i].decision, minus, cfg.without_producer(i)
        )
        t2 = own - sol.value + sub.value
        records.append(SettlementRecord.build(i, t1, t2, own))
    return records


@dataclass(frozen=True)
class BatchSettlement:
    """Vectorised settlement of M realizations: arrays indexed [m, i]."""

    t1: np.ndarray          # (n,)
    t2: np.ndarray          # (M, n)
    cost: np.ndarray        # (M, n)
    utility: np.ndarray     # (M, n)
    stage2_value: np.ndarray  # (M,) realized second-stage system cost

    @property
    def total_payment(self) -> np.ndarray:
        return self.t1[None, :] + self.t2


def settle_batch(
    cache: CounterfactualCache, realizations: ScenarioSet, cfg: MarketConfig
) -> BatchSettlement:
    """Settle every realization in one vectorised pass; row m equals
    ``settle(cache, realizations.scenarios[m], cfg)``."""
    down, base, up = realizations.column_arrays()
    x = cache.full.decision
    ev = MaskEvaluator.build(down, base, up, x.dispatch, cfg)
    values, costs = ev.settlement_components(x.reserve_capacity, x.dispatchable)
    n = len(x.dispatch)
    t1 = np.array([first_stage_payment(i, cache, cfg) for i in range(n)])
    t2 = np.empty((realizations.count, n))
    for i in range(n):
        xm = cache.without[i].decision
        evm = MaskEvaluator.build(
            np.delete(down, i, axis=1),
            np.delete(base, i, axis=1),
            np.delete(up, i, axis=1),
            xm.dispatch,
            cfg.without_producer(i),
        )
        sub_values = evm.values(xm.reserve_capacity, xm.dispatchable)
        t2[:, i] = costs[:, i] - values + sub_values
    util = t1[None, :] + t2 - costs
    return BatchSettlement(t1=t1, t2=t2, cost=costs, utility=util, stage2_value=values)


def single_stage_vcg(thetas: list[ProducerType], cfg: MarketConfig) -> list[float]:
    """Reference payments for the one-shot market (no first stage): everyone
    participates, no reserve, no dispatchable. The two-stage payments collapse
    to these when forecasts are point masses and first-stage costs are zero.
    """
    n = len(thetas)
    x0 = FirstStageDecision(dispatch=(True,) * n, reserve_capacity=0.0, dispatchable=0.0)
    cfg0 = MarketConfig(
        n=n,
        demand=cfg.demand,
        alpha1=cfg.alpha1,
        alpha2=cfg.alpha2,
        alpha3=cfg.alpha3,
        alpha4=cfg.alpha4,
        reserve_cap_max=0.0,
        scenario_count=cfg.scenario_count,
        seed=cfg.seed,
    )
    sol = solve_second_stage(x0, thetas, cfg0)
    payments = []
    for i in range(n):
        minus = thetas[:i] + thetas[i + 1 :]
        x0m = FirstStageDecision(
            dispatch=(True,) * (n - 1), reserve_capacity=0.0, dispatchable=0.0
        )
        sub = solve_second_stage(x0m, minus, cfg0.without_producer(i))
        own = producer_cost(thetas[i], sol.decision.volumes[i])
        payments.append(own - sol.value + sub.value)
    return payments
