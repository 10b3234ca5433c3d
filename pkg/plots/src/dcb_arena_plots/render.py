"""Line charts of normalized cumulative gain from summary CSV files.

A strictly read-only consumer of the harness output contract
(``iteration,mean_gain,worst_gain``): points are plotted exactly as stored,
no smoothing or recomputation. One panel per requested metric, a dashed
optimal line at 1.0, one legend entry per series.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SUMMARY_HEADER = "iteration,mean_gain,worst_gain"
PANELS = ("mean", "worst", "both")
_PANEL_TITLES = {"mean": "network mean", "worst": "worst-performing BSS"}


@dataclass(frozen=True)
class SeriesSpec:
    """One curve: an algorithm label and the summary file backing it."""

    label: str
    path: str
    color: Optional[str] = None
    style: str = "-"


def load_summary(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse a summary CSV into (iterations, mean_gain, worst_gain)."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ValueError(f"cannot read summary file {path}: {exc}") from exc
    if not lines or lines[0] != SUMMARY_HEADER:
        raise ValueError(f"{path}: expected header '{SUMMARY_HEADER}'")
    iterations, means, worsts = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 columns")
        try:
            iterations.append(int(parts[0]))
            means.append(float(parts[1]))
            worsts.append(float(parts[2]))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    if not iterations:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(iterations), np.asarray(means), np.asarray(worsts)


def build_figure(series: Sequence[SeriesSpec], panel: str = "both"):
    """Assemble the figure; separated from render() so tests can inspect
    the plotted data without touching the filesystem."""
    if panel not in PANELS:
        raise ValueError(f"panel must be one of {PANELS}, got {panel!r}")
    if not series:
        raise ValueError("at least one series is required")

    loaded = [(spec, load_summary(spec.path)) for spec in series]
    reference = loaded[0][1][0]
    for spec, (iterations, _, _) in loaded[1:]:
        if len(iterations) != len(reference) or (iterations != reference).any():
            raise ValueError(
                f"{spec.path}: iteration range differs from {loaded[0][0].path}"
            )

    panels = ["mean", "worst"] if panel == "both" else [panel]
    fig, axes = plt.subplots(
        1, len(panels), figsize=(6.0 * len(panels), 4.0), squeeze=False, sharey=True
    )
    for ax, which in zip(axes[0], panels):
        for spec, (iterations, means, worsts) in loaded:
            values = means if which == "mean" else worsts
            ax.plot(
                iterations, values, spec.style, color=spec.color, label=spec.label
            )
        ax.axhline(1.0, linestyle="--", color="black", linewidth=1.0, label="optimal")
        ax.set_xlabel("iteration")
        ax.set_ylabel("normalized cumulative gain")
        ax.set_ylim(0.0, 1.05)
        ax.set_title(_PANEL_TITLES[which])
        ax.legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    return fig


def render(series: Sequence[SeriesSpec], out_path, panel: str = "both") -> None:
    """Write the chart; the format (png/svg/...) follows the file suffix."""
    fig = build_figure(series, panel)
    try:
        fig.savefig(out_path)
    finally:
        plt.close(fig)
