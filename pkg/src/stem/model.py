"""Domain types and cost functions for the two-stage stochastic electricity market.

Money is EUR, energy is MWh, both as 64-bit floats. All comparisons use an
absolute tolerance of ``TOL`` (1e-9); CSV output rounds to 6 decimals. Every
type here is an immutable value object and every operation is a pure function,
so everything is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TOL = 1e-9
SYMMETRY_TOL = 1e-12
PSD_JITTER = 1e-12


class InfeasibleVolumeError(ValueError):
    """A producer without up-regulation was assigned a volume above baseline."""


@dataclass(frozen=True)
class ProducerType:
    """Realized producer characteristics.

    down_cost: marginal cost of down-regulation (EUR/MWh).
    baseline:  production delivered at zero adjustment cost (MWh).
    up_cost:   marginal cost of up-regulation (EUR/MWh); ``math.inf`` for a
               producer that cannot up-regulate at all.
    """

    down_cost: float
    baseline: float
    up_cost: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "down_cost", float(self.down_cost))
        object.__setattr__(self, "baseline", float(self.baseline))
        object.__setattr__(self, "up_cost", float(self.up_cost))
        if not (self.down_cost >= 0 and self.baseline >= 0):
            raise ValueError(
                f"down_cost and baseline must be >= 0, got {self.down_cost}, {self.baseline}"
            )
        if not (self.up_cost >= 0):
            raise ValueError(f"up_cost must be >= 0 or inf, got {self.up_cost}")

    @property
    def infinite_up_cost(self) -> bool:
        return math.isinf(self.up_cost)


@dataclass(frozen=True)
class TypeDistribution:
    """Gaussian forecast of a producer type: mean 3-vector and 3x3 covariance.

    Component order is (down_cost, baseline, up_cost). When
    ``infinite_up_cost`` is set the third component is ignored (the covariance
    row/column must be zero) and every sampled type has ``up_cost = inf``.
    """

    mean: tuple[float, float, float]
    cov: tuple[tuple[float, float, float], ...]
    infinite_up_cost: bool = False

    @staticmethod
    def make(
        mean, cov=None, variance: float | None = None, infinite_up_cost: bool = False
    ) -> "TypeDistribution":
        """Build a distribution from a mean vector and either a full 3x3
        covariance or a scalar baseline variance (expands to a matrix with only
        the baseline entry set)."""
        m = tuple(float(v) for v in mean)
        if len(m) != 3:
            raise ValueError("mean must have 3 components")
        if cov is None:
            v = float(variance) if variance is not None else 0.0
            c = ((0.0, 0.0, 0.0), (0.0, v, 0.0), (0.0, 0.0, 0.0))
        else:
            arr = np.asarray(cov, dtype=float)
            if arr.shape != (3, 3):
                raise ValueError("cov must be 3x3")
            c = tuple(tuple(float(x) for x in row) for row in arr)
        return TypeDistribution(mean=m, cov=c, infinite_up_cost=infinite_up_cost)

    def cov_array(self) -> np.ndarray:
        return np.array(self.cov, dtype=float)

    def mean_array(self) -> np.ndarray:
        return np.array(self.mean, dtype=float)

    def with_baseline_variance(self, variance: float) -> "TypeDistribution":
        """Copy of this distribution with the baseline variance replaced."""
        c = [list(row) for row in self.cov]
        c[1][1] = float(variance)
        return TypeDistribution(
            mean=self.mean,
            cov=tuple(tuple(row) for row in c),
            infinite_up_cost=self.infinite_up_cost,
        )


@dataclass(frozen=True)
class FirstStageDecision:
    """Dispatch bits, procured reserve capacity (MWh) and dispatchable power (MWh)."""

    dispatch: tuple[bool, ...]
    reserve_capacity: float
    dispatchable: float

    @property
    def n(self) -> int:
        return len(self.dispatch)

    def bitmask_str(self) -> str:
        return "".join("1" if b else "0" for b in self.dispatch)


@dataclass(frozen=True)
class SecondStageDecision:
    """Delivered volumes (MWh), reserve activation (MWh, sign-free as data)
    and load shedding (MWh, >= 0)."""

    volumes: tuple[float, ...]
    activation: float
    shedding: float


@dataclass(frozen=True)
class MarketConfig:
    """Market-wide parameters.

    alpha1..alpha4 are the prices of reserve capacity, dispatchable power,
    reserve activation and load shedding (EUR/MWh).
    """

    n: int
    demand: float
    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float
    reserve_cap_max: float
    scenario_count: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("demand", "alpha1", "alpha2", "alpha3", "alpha4", "reserve_cap_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "scenario_count", int(self.scenario_count))
        object.__setattr__(self, "seed", int(self.seed))

    def without_producer(self, i: int) -> "MarketConfig":
        """Config for the counterfactual market with producer ``i`` removed."""
        if not 0 <= i < self.n:
            raise IndexError(f"producer index {i} out of range for n={self.n}")
        return MarketConfig(
            n=self.n - 1,
            demand=self.demand,
            alpha1=self.alpha1,
            alpha2=self.alpha2,
            alpha3=self.alpha3,
            alpha4=self.alpha4,
            reserve_cap_max=self.reserve_cap_max,
            scenario_count=self.scenario_count,
            seed=self.seed,
        )


@dataclass(frozen=True)
class SettlementRecord:
    """Per-producer outcome of one market run: stage payments, incurred cost
    and utility (= t1 + t2 - cost, exactly as stored)."""

    producer_id: int
    t1: float
    t2: float
    cost: float
    utility: float = field(default=math.nan)

    @staticmethod
    def build(producer_id: int, t1: float, t2: float, cost: float) -> "SettlementRecord":
        return SettlementRecord(producer_id, t1, t2, cost, utility=t1 + t2 - cost)


def producer_cost(theta: ProducerType, volume: float) -> float:
    """Cost a producer incurs for delivering ``volume``: down-regulation below
    baseline is paid at ``down_cost``, up-regulation above baseline at
    ``up_cost``. Zero exactly at baseline.

    Raises InfeasibleVolumeError when the producer cannot up-regulate and the
    volume exceeds its baseline.
    """
    if not math.isfinite(volume):
        raise ValueError(f"volume must be finite, got {volume}")
    if volume <= theta.baseline:
        return theta.down_cost * (theta.baseline - volume)
    if theta.infinite_up_cost:
        if volume > theta.baseline + TOL:
            raise InfeasibleVolumeError(
                f"volume {volume} exceeds baseline {theta.baseline} and "
                "up-regulation is not feasible"
            )
        return 0.0
    return theta.up_cost * (volume - theta.baseline)


def first_stage_cost(x: FirstStageDecision, cfg: MarketConfig) -> float:
    """Operator cost of the first-stage decision; dispatch bits are free."""
    return cfg.alpha1 * x.reserve_capacity + cfg.alpha2 * x.dispatchable


def second_stage_cost(y: SecondStageDecision, cfg: MarketConfig) -> float:
    """Operator cost of the second-stage decision. May be negative when the
    stored activation is negative (the solver itself never emits one)."""
    return cfg.alpha3 * y.activation + cfg.alpha4 * y.shedding


def stage2_objective(
    x: FirstStageDecision,
    y: SecondStageDecision,
    thetas: list[ProducerType],
    cfg: MarketConfig,
) -> float:
    """Second-stage system cost: operator cost plus all producer costs.

    Undispatched producers contribute their cost at the stored volume too; the
    solver fixes them at baseline where that cost is zero.
    """
    total = second_stage_cost(y, cfg)
    for theta, vol in zip(thetas, y.volumes):
        total += producer_cost(theta, vol)
    return total


def system_cost(
    x: FirstStageDecision,
    y: SecondStageDecision,
    thetas: list[ProducerType],
    cfg: MarketConfig,
) -> float:
    """Total system cost: first-stage cost plus the second-stage objective."""
    if len(thetas) != x.n:
        raise ValueError(f"expected {x.n} producer types, got {len(thetas)}")
    return first_stage_cost(x, cfg) + stage2_objective(x, y, thetas, cfg)


def _check_psd(cov: np.ndarray) -> bool:
    """PSD check used by the validator: Cholesky with a small diagonal jitter."""
    try:
        np.linalg.cholesky(cov + PSD_JITTER * np.eye(3))
        return True
    except np.linalg.LinAlgError:
        return False


def validate_config(cfg: MarketConfig, distributions: list[TypeDistribution]) -> list[str]:
    """Check all config and distribution invariants; returns every violation
    found (empty list means the configuration is valid)."""
    violations: list[str] = []
    if cfg.n != len(distributions):
        violations.append(
            f"producer count mismatch: n={cfg.n} but {len(distributions)} distributions"
        )
    if not (cfg.demand >= 0 and math.isfinite(cfg.demand)):
        violations.append(f"demand must be finite and >= 0, got {cfg.demand}")
    for name in ("alpha1", "alpha2", "alpha3", "alpha4"):
        val = getattr(cfg, name)
        if not (val >= 0 and math.isfinite(val)):
            violations.append(f"{name} must be finite and >= 0, got {val}")
    if cfg.alpha4 < cfg.alpha3:
        violations.append(
            "shedding cheaper than activation: unbounded second stage "
            f"(alpha4={cfg.alpha4} < alpha3={cfg.alpha3})"
        )
    if not (cfg.reserve_cap_max >= 0 and math.isfinite(cfg.reserve_cap_max)):
        violations.append(f"reserve_cap_max must be finite and >= 0, got {cfg.reserve_cap_max}")
    if cfg.scenario_count < 1:
        violations.append(f"scenario_count must be >= 1, got {cfg.scenario_count}")
    if not 0 <= cfg.seed < 2**64:
        violations.append(f"seed must fit in an unsigned 64-bit integer, got {cfg.seed}")

    for i, dist in enumerate(distributions):
        cov = dist.cov_array()
        if not np.all(np.abs(cov - cov.T) <= SYMMETRY_TOL):
            violations.append(f"producer {i}: covariance not symmetric")
        elif not _check_psd(cov):
            violations.append(f"producer {i}: covariance not PSD")
        if dist.infinite_up_cost:
            if np.any(cov[2, :] != 0.0) or np.any(cov[:, 2] != 0.0):
                violations.append(
                    f"producer {i}: infinite up-cost requires a zero covariance "
                    "row/column for the up-cost component"
                )
        else:
            # Boundedness guard: a finite up-cost below the activation price
            # would let the optimizer up-regulate into negative activation.
            if dist.mean[2] < cfg.alpha3:
                violations.append(
                    f"producer {i}: finite up_cost {dist.mean[2]} below activation "
                    f"price alpha3={cfg.alpha3} (unbounded second stage)"
                )
    return violations
