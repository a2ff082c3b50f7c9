"""Exact second-stage clearing: redispatch, reserve activation and shedding.

The problem has a single coupling constraint (the power balance), so the
optimum is a merit-order greedy. Positive residual demand is covered by
reserve activation (price alpha3, capacity = procured reserve), up-regulation
of dispatched producers (their up-cost, uncapacitated) and load shedding
(alpha4); negative residual is absorbed by down-regulating dispatched
producers in ascending down-cost order, each capped by its own baseline.
Undispatched producers stay at baseline, the unique zero-cost point.

Ties are broken deterministically: activation before producer actions,
producers by ascending index, shedding last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    TOL,
    FirstStageDecision,
    MarketConfig,
    ProducerType,
    SecondStageDecision,
)


class UnboundedSecondStageError(RuntimeError):
    """Second-stage problem unbounded below.

    Cannot occur for configurations that pass the boundedness guard (finite
    up-costs >= alpha3 and alpha4 >= alpha3) together with the non-negative
    volume/activation feasible set; kept as the contracted error type.
    """


@dataclass(frozen=True)
class Stage2Solution:
    """Optimal decision, its objective value, and subgradients of the value
    with respect to reserve capacity and dispatchable power."""

    decision: SecondStageDecision
    value: float
    d_reserve: float
    d_dispatchable: float


def solve_second_stage(
    x: FirstStageDecision, thetas: list[ProducerType], cfg: MarketConfig
) -> Stage2Solution:
    """Globally optimal second-stage decision for realized types ``thetas``.

    Always feasible: shedding covers any shortfall and dispatched baselines
    can always absorb the whole surplus (the surplus never exceeds their sum).
    """
    n = len(thetas)
    if n != x.n:
        raise ValueError(f"expected {x.n} types, got {n}")
    dispatched = [i for i, bit in enumerate(x.dispatch) if bit]
    volumes = [t.baseline for t in thetas]
    r_cap = x.reserve_capacity
    residual = cfg.demand - x.dispatchable - sum(thetas[i].baseline for i in dispatched)

    activation = 0.0
    shedding = 0.0
    producer_cost_total = 0.0
    marginal_cost = 0.0

    if residual > 0.0:
        # Sources sorted by (cost, class, index); class 0 activation,
        # 1 producer up-regulation, 2 shedding.
        sources: list[tuple[float, int, int, float]] = [(cfg.alpha3, 0, -1, r_cap)]
        for i in dispatched:
            if not thetas[i].infinite_up_cost:
                sources.append((thetas[i].up_cost, 1, i, math.inf))
        sources.append((cfg.alpha4, 2, -1, math.inf))
        sources.sort(key=lambda s: (s[0], s[1], s[2]))
        remaining = residual
        for cost, kind, idx, cap in sources:
            if remaining <= 0.0:
                break
            amount = min(remaining, cap)
            if amount <= 0.0:
                continue
            remaining -= amount
            marginal_cost = cost
            if kind == 0:
                activation = amount
            elif kind == 1:
                volumes[idx] += amount
                producer_cost_total += cost * amount
            else:
                shedding = amount
    elif residual < 0.0:
        # Absorbers sorted by (cost, index); each producer can be turned down
        # to zero output at most.
        absorbers = sorted(
            ((thetas[i].down_cost, i, thetas[i].baseline) for i in dispatched),
            key=lambda s: (s[0], s[1]),
        )
        remaining = -residual
        for cost, idx, cap in absorbers:
            if remaining <= 0.0:
                break
            amount = min(remaining, cap)
            if amount <= 0.0:
                continue
            remaining -= amount
            marginal_cost = cost
            volumes[idx] -= amount
            producer_cost_total += cost * amount
        if remaining > TOL:
            raise UnboundedSecondStageError(
                f"surplus {remaining} left unabsorbed; inconsistent instance"
            )

    value = cfg.alpha3 * activation + cfg.alpha4 * shedding + producer_cost_total

    # Subgradients of the optimal value. The marginal source (last one the
    # greedy touched) prices the final unit of residual either way; an extra
    # unit of reserve displaces the cheapest uncapacitated source, but only
    # when activation is saturated and actually competitive.
    finite_ups = [thetas[i].up_cost for i in dispatched if not thetas[i].infinite_up_cost]
    cstar = min(min(finite_ups, default=math.inf), cfg.alpha4)
    if residual > 0.0:
        d_disp = -marginal_cost
        d_reserve = min(0.0, cfg.alpha3 - cstar) if residual > r_cap else 0.0
    elif residual < 0.0:
        d_disp = marginal_cost
        d_reserve = 0.0
    else:
        d_disp = 0.0
        d_reserve = 0.0

    return Stage2Solution(
        decision=SecondStageDecision(
            volumes=tuple(volumes), activation=activation, shedding=shedding
        ),
        value=value,
        d_reserve=d_reserve,
        d_dispatchable=d_disp,
    )


@dataclass
class MaskEvaluator:
    """Vectorised second-stage values over a fixed scenario array for one
    dispatch bitmask; used by the first-stage cutting planes and the Monte
    Carlo settlement loops.

    Precomputes, per scenario: the dispatched baseline sum, the cheapest
    covering source beyond reserve (min finite up-cost vs alpha4), and the
    down-regulation ladder (costs sorted ascending with cumulative baselines
    as capacities).
    """

    cfg: MarketConfig
    mask: tuple[bool, ...]
    base_total: np.ndarray          # (S,)
    cstar: np.ndarray               # (S,) cheapest cover beyond reserve
    dn_costs: np.ndarray            # (S, k) ascending down-costs of dispatched
    dn_cumcap: np.ndarray           # (S, k) cumulative baseline capacities
    dn_index: np.ndarray            # (S, k) original producer index per step
    up_index: np.ndarray            # (S,) producer serving up-regulation, -1 = shed
    up_cost_used: np.ndarray        # (S,) its up-cost (alpha4 when shedding)

    @staticmethod
    def build(
        down: np.ndarray,
        base: np.ndarray,
        up: np.ndarray,
        mask: tuple[bool, ...],
        cfg: MarketConfig,
    ) -> "MaskEvaluator":
        S = down.shape[0]
        idx = np.flatnonzero(np.asarray(mask, dtype=bool))
        k = idx.size
        if k == 0:
            empty = np.zeros((S, 0))
            return MaskEvaluator(
                cfg=cfg,
                mask=tuple(mask),
                base_total=np.zeros(S),
                cstar=np.full(S, cfg.alpha4),
                dn_costs=empty,
                dn_cumcap=empty,
                dn_index=np.zeros((S, 0), dtype=int),
                up_index=np.full(S, -1, dtype=int),
                up_cost_used=np.full(S, cfg.alpha4),
            )
        dcost = down[:, idx]
        dbase = base[:, idx]
        dup = up[:, idx]
        order = np.argsort(dcost, axis=1, kind="stable")
        dn_costs = np.take_along_axis(dcost, order, axis=1)
        dn_caps = np.take_along_axis(dbase, order, axis=1)
        dn_index = idx[order]
        # Up-regulation is uncapacitated, so the cheapest finite up-cost takes
        # the whole beyond-reserve shortfall; producers beat shedding on ties,
        # equal-cost producers resolve to the lowest index (argmin is stable).
        up_min_pos = np.argmin(dup, axis=1)
        up_min = dup[np.arange(S), up_min_pos]
        serve_up = up_min <= cfg.alpha4
        up_index = np.where(serve_up, idx[up_min_pos], -1)
        up_cost_used = np.where(serve_up, up_min, cfg.alpha4)
        return MaskEvaluator(
            cfg=cfg,
            mask=tuple(mask),
            base_total=dbase.sum(axis=1),
            cstar=np.minimum(up_min, cfg.alpha4),
            dn_costs=dn_costs,
            dn_cumcap=np.cumsum(dn_caps, axis=1),
            dn_index=dn_index,
            up_index=up_index,
            up_cost_used=up_cost_used,
        )

    def _parts(self, reserve: float, dispatchable: float):
        cfg = self.cfg
        residual = cfg.demand - dispatchable - self.base_total
        activation = np.clip(residual, 0.0, reserve)
        beyond = np.maximum(residual - reserve, 0.0)
        surplus = np.maximum(-residual, 0.0)
        return residual, activation, beyond, surplus

    def _surplus_cost(self, surplus: np.ndarray) -> np.ndarray:
        if self.dn_costs.shape[1] == 0:
            return np.zeros_like(surplus)
        prev = np.concatenate(
            [np.zeros((self.dn_cumcap.shape[0], 1)), self.dn_cumcap[:, :-1]], axis=1
        )
        taken = np.clip(surplus[:, None] - prev, 0.0, self.dn_cumcap - prev)
        return (self.dn_costs * taken).sum(axis=1)

    def values(self, reserve: float, dispatchable: float) -> np.ndarray:
        """Per-scenario optimal second-stage values at (reserve, dispatchable)."""
        cfg = self.cfg
        _, activation, beyond, surplus = self._parts(reserve, dispatchable)
        return cfg.alpha3 * activation + self.cstar * beyond + self._surplus_cost(surplus)

    def value_and_subgradient(
        self, reserve: float, dispatchable: float
    ) -> tuple[float, float, float]:
        """Mean value over scenarios and mean subgradients w.r.t. (reserve,
        dispatchable); exact for this piecewise-linear convex structure."""
        cfg = self.cfg
        residual, activation, beyond, surplus = self._parts(reserve, dispatchable)
        values = cfg.alpha3 * activation + self.cstar * beyond + self._surplus_cost(surplus)
        over = residual > reserve
        g_r = np.where(over, cfg.alpha3 - self.cstar, 0.0)
        g_d = np.where(
            over,
            -self.cstar,
            np.where(residual > 0.0, -cfg.alpha3, 0.0),
        )
        if self.dn_costs.shape[1] > 0:
            pos = surplus > 0.0
            if np.any(pos):
                step = np.sum(surplus[:, None] > self.dn_cumcap, axis=1)
                step = np.minimum(step, self.dn_costs.shape[1] - 1)
                marginal = self.dn_costs[np.arange(surplus.size), step]
                g_d = np.where(pos, marginal, g_d)
        return float(values.mean()), float(g_r.mean()), float(g_d.mean())

    def settlement_components(
        self, reserve: float, dispatchable: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """(values, producer_costs) with producer_costs an (S, n) array of the
        per-producer incurred costs at the optimal decision."""
        cfg = self.cfg
        S = self.base_total.shape[0]
        n = len(self.mask)
        _, activation, beyond, surplus = self._parts(reserve, dispatchable)
        costs = np.zeros((S, n))
        served = beyond > 0.0
        if np.any(served):
            rows = np.flatnonzero(served & (self.up_index >= 0))
            costs[rows, self.up_index[rows]] = (
                self.up_cost_used[rows] * beyond[rows]
            )
        if self.dn_costs.shape[1] > 0:
            prev = np.concatenate(
                [np.zeros((S, 1)), self.dn_cumcap[:, :-1]], axis=1
            )
            taken = np.clip(surplus[:, None] - prev, 0.0, self.dn_cumcap - prev)
            np.put_along_axis(
                costs,
                self.dn_index,
                np.take_along_axis(costs, self.dn_index, axis=1) + self.dn_costs * taken,
                axis=1,
            )
        shed = np.where(self.up_index >= 0, 0.0, beyond)
        values = (
            cfg.alpha3 * activation
            + cfg.alpha4 * shed
            + np.where(self.up_index >= 0, self.up_cost_used * beyond, 0.0)
            + self._surplus_cost(surplus)
        )
        return values, costs
