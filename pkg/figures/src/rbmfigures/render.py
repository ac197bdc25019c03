"""Render variance-ratio figures from a report CSV.

The input is the profiling report with columns

    dataset,init_seed,epoch,strategy,k,mean_variance,baseline_mean_variance,ratio

and one row per (dataset, init seed, epoch, strategy, k).  A figure shows
one panel per dataset; within a panel, one error-bar line per epoch with
x = k, y = mean ratio across init seeds, error bars = standard deviation
across init seeds, plus a horizontal reference line at ratio 1.
"""

import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "rbmfigures"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

EXPECTED_COLUMNS = ["dataset", "init_seed", "epoch", "strategy", "k",
                    "mean_variance", "baseline_mean_variance", "ratio"]


class SchemaError(Exception):
    """Report CSV does not match the expected column contract."""


class MissingSeriesError(Exception):
    """Requested strategy or epochs are absent from the CSV."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    strategy: str
    out_path: str
    epochs: tuple = ()  # empty: every epoch present in the CSV
    image_format: str = "png"
    log_y: bool = False

    def __post_init__(self):
        if self.image_format not in ("png", "svg"):
            raise ValueError(f"image format must be png or svg, "
                             f"got {self.image_format!r}")


def read_report(csv_path) -> list:
    """Parse the report CSV into row dicts, or raise SchemaError with a
    column diff."""
    with open(csv_path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != EXPECTED_COLUMNS:
            missing = [c for c in EXPECTED_COLUMNS if c not in (header or [])]
            extra = [c for c in (header or []) if c not in EXPECTED_COLUMNS]
            raise SchemaError(
                f"{csv_path}: bad report schema\n"
                f"  expected columns: {','.join(EXPECTED_COLUMNS)}\n"
                f"  found columns:    {','.join(header) if header else '(none)'}\n"
                f"  missing: {missing or '-'}  unexpected: {extra or '-'}"
            )
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(EXPECTED_COLUMNS):
                raise SchemaError(
                    f"{csv_path}:{lineno}: expected {len(EXPECTED_COLUMNS)} "
                    f"fields, got {len(rec)}"
                )
            try:
                rows.append({
                    "dataset": rec[0],
                    "init_seed": int(rec[1]),
                    "epoch": int(rec[2]),
                    "strategy": rec[3],
                    "k": int(rec[4]),
                    "ratio": float(rec[7]),
                })
            except ValueError as exc:
                raise SchemaError(f"{csv_path}:{lineno}: {exc}") from None
    return rows


def collect_series(rows, strategy: str, epochs=()):
    """Per (dataset, epoch): sorted k values with mean and std of the ratio
    across init seeds."""
    strategies = {r["strategy"] for r in rows}
    if strategy not in strategies:
        raise MissingSeriesError(
            f"strategy {strategy!r} not in CSV (has {sorted(strategies)})"
        )
    picked = [r for r in rows if r["strategy"] == strategy]
    present_epochs = sorted({r["epoch"] for r in picked})
    wanted = sorted(epochs) if epochs else present_epochs
    absent = [e for e in wanted if e not in present_epochs]
    if absent:
        raise MissingSeriesError(
            f"epochs {absent} not in CSV (has {present_epochs})"
        )

    series = {}
    n_seeds = len({r["init_seed"] for r in picked})
    for dataset in sorted({r["dataset"] for r in picked}):
        for epoch in wanted:
            cell = [r for r in picked
                    if r["dataset"] == dataset and r["epoch"] == epoch]
            ks = sorted({r["k"] for r in cell})
            mean = np.array([np.mean([r["ratio"] for r in cell if r["k"] == k])
                             for k in ks])
            std = np.array([np.std([r["ratio"] for r in cell if r["k"] == k])
                            for k in ks])
            series.setdefault(dataset, {})[epoch] = (np.array(ks), mean, std)
    return series, n_seeds


def build_figure(spec: FigureSpec):
    """Assemble the matplotlib figure for a spec (no file output)."""
    rows = read_report(spec.csv_path)
    series, n_seeds = collect_series(rows, spec.strategy, spec.epochs)
    if n_seeds < 2:
        print("warning: single init seed, error bars have zero length",
              file=sys.stderr)

    datasets = sorted(series)
    fig, axes = plt.subplots(1, len(datasets),
                             figsize=(4.2 * len(datasets), 3.4),
                             squeeze=False, sharey=True)
    for ax, dataset in zip(axes[0], datasets):
        for epoch, (ks, mean, std) in sorted(series[dataset].items()):
            ax.errorbar(ks, mean, yerr=std, marker="o", capsize=3,
                        label=f"epoch {epoch}")
        ax.axhline(1.0, color="grey", linestyle="--", linewidth=1)
        ax.set_title(f"{dataset}: {spec.strategy} vs baseline")
        ax.set_xlabel("k")
        if spec.log_y:
            ax.set_yscale("log")
        ax.legend()
    axes[0, 0].set_ylabel("variance ratio vs baseline")
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> Path:
    """Render the spec to its output file and return the path."""
    fig = build_figure(spec)
    out = Path(spec.out_path)
    metadata = {"Date": None} if spec.image_format == "svg" else {}
    fig.savefig(out, format=spec.image_format, dpi=120, metadata=metadata)
    plt.close(fig)
    return out
