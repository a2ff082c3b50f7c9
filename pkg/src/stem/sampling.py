"""Reproducible sampling of realized producer types from reported forecasts.

Each (scenario, producer) pair gets its own counter-based substream keyed by
(seed, scenario index, producer index), so the sampled values do not depend on
the order in which scenarios are materialized or on the degree of parallelism.
Negative draws are clamped at zero component-wise to keep ProducerType
invariants.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .model import PSD_JITTER, ProducerType, TypeDistribution

# Tags for deriving independent sampling purposes from one run seed.
STREAM_SCENARIOS = 0
STREAM_REALIZATIONS = 1


class NotPSDError(ValueError):
    """Covariance matrix is not positive semidefinite."""


def cholesky(sigma: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T == sigma (within 1e-10 elementwise).

    Accepts semidefinite inputs by retrying with a tiny diagonal jitter;
    raises NotPSDError when even the jittered factorization fails.
    """
    sigma = np.asarray(sigma, dtype=float)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    try:
        jittered = np.linalg.cholesky(sigma + PSD_JITTER * np.eye(sigma.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NotPSDError(f"matrix is not PSD: {sigma!r}") from exc
    # Zero variance rows factor to zero rows, not jitter-sized noise.
    scale = np.sqrt(np.maximum(np.diag(sigma), 0.0))
    mask = np.outer(scale > 0, scale > 0)
    return np.where(mask, jittered, 0.0)


@dataclass(frozen=True)
class ScenarioSet:
    """S x n matrix of sampled ProducerTypes plus the seed that generated it."""

    scenarios: tuple[tuple[ProducerType, ...], ...]
    seed: int
    substream_ids: tuple[tuple[int, int], ...]

    @property
    def count(self) -> int:
        return len(self.scenarios)

    @property
    def n(self) -> int:
        return len(self.scenarios[0]) if self.scenarios else 0

    def without_producer(self, i: int) -> "ScenarioSet":
        """View with producer ``i``'s column dropped; all other draws are
        unchanged (common random numbers for counterfactual solves)."""
        return ScenarioSet(
            scenarios=tuple(row[:i] + row[i + 1 :] for row in self.scenarios),
            seed=self.seed,
            substream_ids=self.substream_ids,
        )

    def column_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(down_costs, baselines, up_costs) as S x n float arrays; infinite
        up-costs appear as np.inf."""
        S, n = self.count, self.n
        down = np.empty((S, n))
        base = np.empty((S, n))
        up = np.empty((S, n))
        for s, row in enumerate(self.scenarios):
            for i, t in enumerate(row):
                down[s, i] = t.down_cost
                base[s, i] = t.baseline
                up[s, i] = t.up_cost
        return down, base, up


def _substream_normals(seed: int, scenario: int, producer: int, purpose: int) -> np.ndarray:
    """3 standard normals from the substream keyed by (seed, purpose, s, i)."""
    ss = np.random.SeedSequence(entropy=(seed, purpose, scenario, producer))
    gen = np.random.Generator(np.random.Philox(ss))
    return gen.standard_normal(3)


def sample_type(dist: TypeDistribution, z: np.ndarray) -> ProducerType:
    """Map a standard-normal 3-vector through mu + L z, clamp at zero."""
    L = cholesky(dist.cov_array())
    draw = dist.mean_array() + L @ z
    down = max(0.0, float(draw[0]))
    base = max(0.0, float(draw[1]))
    up = math.inf if dist.infinite_up_cost else max(0.0, float(draw[2]))
    return ProducerType(down_cost=down, baseline=base, up_cost=up)


def sample_scenarios(
    distributions: list[TypeDistribution],
    count: int,
    seed: int,
    purpose: int = STREAM_SCENARIOS,
) -> ScenarioSet:
    """Draw ``count`` scenarios of realized types, one ProducerType per
    (scenario, producer), deterministically in (seed, count).

    ``purpose`` separates independent uses of the same run seed (SAA scenarios
    vs Monte Carlo realizations).
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    factors = [cholesky(d.cov_array()) for d in distributions]
    means = [d.mean_array() for d in distributions]
    rows = []
    for s in range(count):
        row = []
        for i, dist in enumerate(distributions):
            z = _substream_normals(seed, s, i, purpose)
            draw = means[i] + factors[i] @ z
            down = max(0.0, float(draw[0]))
            base = max(0.0, float(draw[1]))
            up = math.inf if dist.infinite_up_cost else max(0.0, float(draw[2]))
            row.append(ProducerType(down_cost=down, baseline=base, up_cost=up))
        rows.append(tuple(row))
    return ScenarioSet(
        scenarios=tuple(rows),
        seed=seed,
        substream_ids=tuple((purpose, s) for s in range(count)),
    )


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6f}"


def dump_scenarios_csv(scenarios: ScenarioSet, path) -> None:
    """Write the set as CSV: scenario,producer,down_cost,baseline,up_cost."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "producer", "down_cost", "baseline", "up_cost"])
        for s, row in enumerate(scenarios.scenarios):
            for i, t in enumerate(row):
                writer.writerow([s, i, _fmt(t.down_cost), _fmt(t.baseline), _fmt(t.up_cost)])


def load_scenarios_csv(path) -> list[list[ProducerType]]:
    """Read a scenario dump back as a list of scenarios (lists of types)."""
    rows: dict[int, dict[int, ProducerType]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"scenario", "producer", "down_cost", "baseline", "up_cost"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(required)}")
        for rec in reader:
            s = int(rec["scenario"])
            i = int(rec["producer"])
            rows.setdefault(s, {})[i] = ProducerType(
                down_cost=float(rec["down_cost"]),
                baseline=float(rec["baseline"]),
                up_cost=float(rec["up_cost"]),
            )
    out = []
    for s in sorted(rows):
        cols = rows[s]
        out.append([cols[i] for i in sorted(cols)])
    return out
