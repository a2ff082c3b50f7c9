"""First-stage clearing by sample average approximation.

For each dispatch bitmask the continuous inner problem over (reserve,
dispatchable) is convex piecewise-linear — the pointwise mean of the convex
per-scenario recourse values plus linear procurement costs — and is solved by
cutting planes built from the recourse subgradients (an L-shaped scheme with a
three-variable LP master). The bitmask itself is enumerated exhaustively; at
market scale (n = 5, 32 subproblems) this is faster than cut management on the
integer part.
"""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .model import FirstStageDecision, MarketConfig, TypeDistribution
from .sampling import ScenarioSet, sample_scenarios
from .stage2 import MaskEvaluator, solve_second_stage

MAX_PRODUCERS = 20
MAX_CUTS = 200
GAP_RTOL = 1e-6


class TooManyProducersError(ValueError):
    """Dispatch enumeration is capped at MAX_PRODUCERS producers."""


class NoConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ContinuousSolution:
    """Incumbent of the continuous subproblem for one bitmask: procurement
    decision, full objective value, and the cutting-plane gap achieved."""

    reserve: float
    dispatchable: float
    value: float
    gap: float
    cuts: int
    converged: bool


@dataclass(frozen=True)
class Stage1Solution:
    decision: FirstStageDecision
    expected_cost: float
    per_bitmask_values: dict[tuple[bool, ...], tuple[float, float, float]]
    scenarios: ScenarioSet


def optimize_continuous(
    bitmask: tuple[bool, ...],
    scenarios: ScenarioSet,
    cfg: MarketConfig,
    evaluator: MaskEvaluator | None = None,
) -> ContinuousSolution:
    """Minimize alpha1*r + alpha2*d + mean recourse value over the box
    [0, reserve_cap_max] x [0, demand].

    Cuts start at the four box corners; iteration stops when the
    lower-bound/incumbent gap drops below GAP_RTOL*(1+|incumbent|) or after
    MAX_CUTS cuts (then the incumbent is returned and a NoConvergenceWarning
    reports the achieved gap).
    """
    if evaluator is None:
        down, base, up = scenarios.column_arrays()
        evaluator = MaskEvaluator.build(down, base, up, bitmask, cfg)
    r_max = cfg.reserve_cap_max
    d_max = cfg.demand

    best_val = np.inf
    best_rd = (0.0, 0.0)
    cut_rows: list[list[float]] = []  # p*r + q*d - t <= -a
    cut_rhs: list[float] = []

    def evaluate_and_cut(r: float, d: float) -> None:
        nonlocal best_val, best_rd
        mean_q, g_r, g_d = evaluator.value_and_subgradient(r, d)
        total = cfg.alpha1 * r + cfg.alpha2 * d + mean_q
        if total < best_val or (total == best_val and (r, d) < best_rd):
            best_val = total
            best_rd = (r, d)
        cut_rows.append([g_r, g_d, -1.0])
        cut_rhs.append(-(mean_q - g_r * r - g_d * d))

    for r, d in ((0.0, 0.0), (r_max, 0.0), (0.0, d_max), (r_max, d_max)):
        evaluate_and_cut(r, d)

    gap = np.inf
    converged = False
    while len(cut_rows) < MAX_CUTS:
        res = linprog(
            c=[cfg.alpha1, cfg.alpha2, 1.0],
            A_ub=cut_rows,
            b_ub=cut_rhs,
            bounds=[(0.0, r_max), (0.0, d_max), (None, None)],
            method="highs",
        )
        if res.status != 0:
            raise RuntimeError(f"cutting-plane master LP failed: {res.message}")
        lower_bound = float(res.fun)
        gap = max(0.0, best_val - lower_bound)
        if gap <= GAP_RTOL * (1.0 + abs(best_val)):
            converged = True
            break
        evaluate_and_cut(float(res.x[0]), float(res.x[1]))
    if not converged:
        warnings.warn(
            f"cutting planes hit the {MAX_CUTS}-cut limit with gap {gap:.3e}",
            NoConvergenceWarning,
        )
    return ContinuousSolution(
        reserve=best_rd[0],
        dispatchable=best_rd[1],
        value=best_val,
        gap=gap,
        cuts=len(cut_rows),
        converged=converged,
    )


def solve_first_stage(
    distributions: list[TypeDistribution],
    cfg: MarketConfig,
    scenario_set: ScenarioSet | None = None,
    threads: int = 1,
) -> Stage1Solution:
    """Enumerate all dispatch bitmasks over one shared scenario set and return
    the global minimizer.

    Ties go to the lexicographically smallest bitmask, then the smaller
    (reserve, dispatchable) pair. Passing ``scenario_set`` lets counterfactual
    solves reuse the full run's draws (common random numbers); by default the
    set is sampled from (cfg.seed, cfg.scenario_count).
    """
    n = len(distributions)
    if n != cfg.n:
        raise ValueError(f"config expects {cfg.n} producers, got {n}")
    if n > MAX_PRODUCERS:
        raise TooManyProducersError(f"n={n} exceeds enumeration bound {MAX_PRODUCERS}")
    if scenario_set is None:
        scenario_set = sample_scenarios(distributions, cfg.scenario_count, cfg.seed)
    down, base, up = scenario_set.column_arrays()

    masks = list(itertools.product((False, True), repeat=n))

    def solve_mask(mask: tuple[bool, ...]) -> ContinuousSolution:
        evaluator = MaskEvaluator.build(down, base, up, mask, cfg)
        return optimize_continuous(mask, scenario_set, cfg, evaluator=evaluator)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solutions = list(pool.map(solve_mask, masks))
    else:
        solutions = [solve_mask(m) for m in masks]

    per_bitmask: dict[tuple[bool, ...], tuple[float, float, float]] = {}
    best_mask = masks[0]
    best = solutions[0]
    for mask, sol in zip(masks, solutions):
        per_bitmask[mask] = (sol.reserve, sol.dispatchable, sol.value)
        if sol.value < best.value:
            best_mask, best = mask, sol
    return Stage1Solution(
        decision=FirstStageDecision(
            dispatch=best_mask,
            reserve_capacity=best.reserve,
            dispatchable=best.dispatchable,
        ),
        expected_cost=best.value,
        per_bitmask_values=per_bitmask,
        scenarios=scenario_set,
    )


def recompute_expected_cost(
    decision: FirstStageDecision, scenario_set: ScenarioSet, cfg: MarketConfig
) -> float:
    """Independent recomputation of a decision's SAA objective through the
    scalar second-stage solver (used by tests and diagnostics)."""
    total = cfg.alpha1 * decision.reserve_capacity + cfg.alpha2 * decision.dispatchable
    acc = 0.0
    for row in scenario_set.scenarios:
        acc += solve_second_stage(decision, list(row), cfg).value
    return total + acc / scenario_set.count
