"""CSV and run-manifest output.

Every CSV is UTF-8, comma-separated, one header row, floats in 6-decimal
fixed-point. Every run directory gets a manifest.json sufficient to reproduce
the run exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

from . import __version__


def fmt(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.6f}"
    return str(value)


def write_csv(path, header: list[str], rows: list[tuple]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def calibration_hash(payload) -> str:
    """Stable hash of the market parameters that define a run."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def write_manifest(
    out_dir,
    command: str,
    config_path,
    seed: int,
    scenario_count: int,
    sample_count: int | None,
    calibration: str,
    duration_s: float,
) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": str(config_path) if config_path is not None else None,
        "seed": seed,
        "scenario_count": scenario_count,
        "sample_count": sample_count,
        "calibration_hash": calibration,
        "engine_version": __version__,
        "duration_s": round(duration_s, 3),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
