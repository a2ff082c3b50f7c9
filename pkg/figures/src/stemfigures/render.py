"""Render the case-study artifacts from the engine's CSV outputs.

Inputs are the documented CSV schemas only — no in-process coupling to the
clearing engine:

  fig2.csv          producer,reported_variance,avg_utility,std_err
  fig3_variance.csv axis_value,first_payment,second_payment_mean,second_payment_std
  fig3_downcost.csv (same schema)
  table1.csv        column,dispatchable,reserve_capacity,avg_system_cost

Rendering is deterministic: fixed style, fixed dpi, no timestamps embedded.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

REQUIRED = ("fig2.csv", "fig3_variance.csv", "fig3_downcost.csv", "table1.csv")

_MARKERS = ("o", "s", "D", "^", "v", "P", "X", "*")


@dataclass(frozen=True)
class FigureSpec:
    """One rendering job: input CSVs, output path, and the figure kind."""

    inputs: tuple[Path, ...]
    output: Path
    kind: str  # line-with-markers | stacked-bars-with-errorbars | table


class RenderError(RuntimeError):
    """Missing or garbled input CSV; the message names the file."""


def _read_csv(path: Path, columns: tuple[str, ...]) -> list[dict]:
    if not path.exists():
        raise RenderError(f"{path.name}: missing input file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(columns).issubset(reader.fieldnames):
            raise RenderError(
                f"{path.name}: expected columns {list(columns)}, got {reader.fieldnames}"
            )
        rows = []
        for record in reader:
            try:
                rows.append({c: float(record[c]) for c in columns})
            except (TypeError, ValueError) as exc:
                raise RenderError(f"{path.name}: non-numeric row {record}") from exc
    if not rows:
        raise RenderError(f"{path.name}: no data rows")
    return rows


def render_utility_lines(
    csv_path: Path, out_path: Path, true_variances: dict[int, float] | None = None
) -> None:
    """Utility vs reported variance, one line per producer on a categorical
    variance axis; each producer's true variance is highlighted in red. When
    no truth mapping is given the highlighted point is the producer's grid
    argmax (they coincide under truthful-optimal reporting)."""
    rows = _read_csv(csv_path, ("producer", "reported_variance", "avg_utility", "std_err"))
    producers: dict[int, list[tuple[float, float]]] = {}
    for row in rows:
        producers.setdefault(int(row["producer"]), []).append(
            (row["reported_variance"], row["avg_utility"])
        )
    grid = sorted({row["reported_variance"] for row in rows})
    positions = {v: k for k, v in enumerate(grid)}

    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    for idx, (producer, points) in enumerate(sorted(producers.items())):
        points = sorted(points)
        xs = [positions[v] for v, _ in points]
        ys = [u for _, u in points]
        ax.plot(
            xs, ys,
            marker=_MARKERS[idx % len(_MARKERS)],
            color="black",
            markerfacecolor="none" if idx % 2 else "black",
            linewidth=1.0,
            markersize=5,
            label=f"Producer {producer}",
        )
        if true_variances and producer in true_variances:
            truth = true_variances[producer]
        else:
            truth = max(points, key=lambda t: t[1])[0]
        if truth in positions:
            truth_u = dict(points)[truth]
            ax.plot(
                [positions[truth]], [truth_u],
                marker=_MARKERS[idx % len(_MARKERS)],
                color="red",
                markersize=7,
                linestyle="none",
                zorder=5,
            )
    ax.set_xticks(range(len(grid)))
    ax.set_xticklabels([f"{v:g}" for v in grid])
    ax.set_xlabel("Reported production variance (MWh$^2$)")
    ax.set_ylabel("Average utility (EUR)")
    ax.grid(True, linewidth=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150, metadata={"Software": "stem-figures"})
    plt.close(fig)


def render_payment_bars(
    variance_csv: Path, downcost_csv: Path, out_path: Path
) -> None:
    """Two stacked panels: payments to the varied producer along the variance
    axis (top) and the down-cost axis (bottom). Second-stage payments stack
    first, first-stage payments on top, a dot marks the total with the
    second-stage standard deviation as error bars."""
    panels = [
        (
            _read_csv(
                variance_csv,
                ("axis_value", "first_payment", "second_payment_mean", "second_payment_std"),
            ),
            "Production variance (MWh$^2$)",
        ),
        (
            _read_csv(
                downcost_csv,
                ("axis_value", "first_payment", "second_payment_mean", "second_payment_std"),
            ),
            "Down-regulation cost (EUR/MWh)",
        ),
    ]
    fig, axes = plt.subplots(2, 1, figsize=(7.0, 6.4))
    for ax, (rows, xlabel) in zip(axes, panels):
        rows = sorted(rows, key=lambda r: r["axis_value"])
        xs = range(len(rows))
        second = [r["second_payment_mean"] for r in rows]
        first = [r["first_payment"] for r in rows]
        std = [r["second_payment_std"] for r in rows]
        ax.bar(xs, second, width=0.55, color="#f5b8bd", edgecolor="#ee6677",
               label="Second-stage payments")
        ax.bar(xs, first, width=0.55, bottom=second, color="#bdeccc",
               edgecolor="#66cc8a", label="First-stage payments")
        totals = [a + b for a, b in zip(second, first)]
        ax.errorbar(
            xs, totals, yerr=std, fmt="o", color="black", capsize=3,
            markersize=5, label="Total payments",
        )
        ax.axhline(0.0, color="black", linewidth=0.6, linestyle="dotted")
        ax.set_xticks(list(xs))
        ax.set_xticklabels([f"{r['axis_value']:g}" for r in rows])
        ax.set_xlabel(xlabel)
        ax.set_ylabel("Payment (EUR)")
    axes[0].legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150, metadata={"Software": "stem-figures"})
    plt.close(fig)


def render_comparison_table(csv_path: Path, out_path: Path) -> None:
    """Markdown table of the stochastic-vs-deterministic market comparison."""
    rows = _read_csv(
        csv_path, ("dispatchable", "reserve_capacity", "avg_system_cost")
    )
    with open(csv_path, newline="", encoding="utf-8") as fh:
        names = [record["column"] for record in csv.DictReader(fh)]
    lines = [
        "| | " + " | ".join(names) + " |",
        "|---" * (len(names) + 1) + "|",
        "| Dispatchable (MWh) | "
        + " | ".join(f"{r['dispatchable']:.1f}" for r in rows) + " |",
        "| Reserve capacity (MWh) | "
        + " | ".join(f"{r['reserve_capacity']:.1f}" for r in rows) + " |",
        "| Average system cost (EUR) | "
        + " | ".join(f"{r['avg_system_cost']:.0f}" for r in rows) + " |",
    ]
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def render_all(csv_dir, out_dir, true_variances: dict[int, float] | None = None) -> list[Path]:
    """Render every artifact from a complete CSV set; returns written paths.

    Raises RenderError naming the first missing or malformed file.
    """
    csv_dir = Path(csv_dir)
    out_dir = Path(out_dir)
    for name in REQUIRED:
        if not (csv_dir / name).exists():
            raise RenderError(f"{name}: missing input file")
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [
        FigureSpec(
            inputs=(csv_dir / "fig2.csv",),
            output=out_dir / "fig2.png",
            kind="line-with-markers",
        ),
        FigureSpec(
            inputs=(csv_dir / "fig3_variance.csv", csv_dir / "fig3_downcost.csv"),
            output=out_dir / "fig3.png",
            kind="stacked-bars-with-errorbars",
        ),
        FigureSpec(
            inputs=(csv_dir / "table1.csv",),
            output=out_dir / "table1.md",
            kind="table",
        ),
    ]
    written = []
    for job in jobs:
        if job.kind == "line-with-markers":
            render_utility_lines(job.inputs[0], job.output, true_variances)
        elif job.kind == "stacked-bars-with-errorbars":
            render_payment_bars(job.inputs[0], job.inputs[1], job.output)
        else:
            render_comparison_table(job.inputs[0], job.output)
        written.append(job.output)
    return written
