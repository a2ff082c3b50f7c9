"""Market configuration files.

JSON with top-level keys ``demand``, ``alpha`` (4-array: reserve capacity,
dispatchable power, reserve activation, load shedding prices),
``reserve_cap_max`` (optional, defaults to demand), ``scenario_count``
(optional, default 1000), ``seed`` (optional, default 0) and ``producers`` —
an array of ``{mean: [down, base, up], cov: 3x3 | variance: scalar,
infinite_up_cost: bool}``. A scalar ``variance`` expands to a covariance with
only the baseline entry set.
"""

from __future__ import annotations

import json
from pathlib import Path

from .model import MarketConfig, TypeDistribution


class ConfigError(ValueError):
    pass


def parse_config(data: dict) -> tuple[MarketConfig, list[TypeDistribution]]:
    try:
        demand = float(data["demand"])
        alpha = [float(a) for a in data["alpha"]]
        producers = data["producers"]
    except KeyError as exc:
        raise ConfigError(f"missing required config key: {exc}") from exc
    if len(alpha) != 4:
        raise ConfigError(f"alpha must have 4 entries, got {len(alpha)}")
    if not isinstance(producers, list) or not producers:
        raise ConfigError("producers must be a non-empty array")

    distributions = []
    for k, p in enumerate(producers):
        try:
            mean = p["mean"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"producer {k}: missing mean") from exc
        if "cov" in p and "variance" in p:
            raise ConfigError(f"producer {k}: give either cov or variance, not both")
        try:
            distributions.append(
                TypeDistribution.make(
                    mean,
                    cov=p.get("cov"),
                    variance=p.get("variance"),
                    infinite_up_cost=bool(p.get("infinite_up_cost", False)),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"producer {k}: {exc}") from exc

    cfg = MarketConfig(
        n=len(producers),
        demand=demand,
        alpha1=alpha[0],
        alpha2=alpha[1],
        alpha3=alpha[2],
        alpha4=alpha[3],
        reserve_cap_max=float(data.get("reserve_cap_max", demand)),
        scenario_count=int(data.get("scenario_count", 1000)),
        seed=int(data.get("seed", 0)),
    )
    return cfg, distributions


def load_config(path) -> tuple[MarketConfig, list[TypeDistribution]]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(data)


def config_to_dict(cfg: MarketConfig, distributions: list[TypeDistribution]) -> dict:
    producers = []
    for d in distributions:
        cov = d.cov_array()
        entry: dict = {"mean": list(d.mean)}
        off_diag = cov.copy()
        off_diag[1, 1] = 0.0
        if not off_diag.any():
            entry["variance"] = cov[1, 1]
        else:
            entry["cov"] = [list(row) for row in d.cov]
        if d.infinite_up_cost:
            entry["infinite_up_cost"] = True
        producers.append(entry)
    return {
        "demand": cfg.demand,
        "alpha": [cfg.alpha1, cfg.alpha2, cfg.alpha3, cfg.alpha4],
        "reserve_cap_max": cfg.reserve_cap_max,
        "scenario_count": cfg.scenario_count,
        "seed": cfg.seed,
        "producers": producers,
    }


def save_config(path, cfg: MarketConfig, distributions: list[TypeDistribution]) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(cfg, distributions), indent=2) + "\n", encoding="utf-8"
    )
