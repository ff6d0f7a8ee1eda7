"""Figure rendering: heatmaps with truth crosses, study curves, sweep panels."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import MissingInputError
from .inputs import RunInputs, load_run, load_sweep

DPI = 120


class FigureKind(enum.Enum):
    HEATMAP = "HEATMAP"
    GAMMA_STUDY = "GAMMA_STUDY"
    AL_SWEEP = "AL_SWEEP"


@dataclass(frozen=True)
class FigureSpec:
    manifest: Path
    kind: FigureKind
    out: Path


def _draw_heatmap(ax, run: RunInputs, title: str | None = None) -> None:
    img = run.pseudospectrum
    lo_x, hi_x, lo_z, hi_z = run.window_extent()
    ax.imshow(img, origin="lower", extent=(lo_x, hi_x, lo_z, hi_z),
              aspect="auto", cmap="viridis")
    truth = run.scene_positions()
    ax.plot(truth[:, 0], truth[:, 1], "+", color="white",
            markersize=10, markeredgewidth=1.6)
    ax.set_xlabel("cross-range (lambda0)")
    ax.set_ylabel("range (lambda0)")
    if title:
        ax.set_title(title)


def _render_heatmap(spec: FigureSpec) -> None:
    run = load_run(spec.manifest)
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    _draw_heatmap(ax, run)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=DPI)
    plt.close(fig)


def _render_gamma_study(spec: FigureSpec) -> None:
    """Recovery rate against illumination quality, one point per sweep job."""
    sweep = load_sweep(spec.manifest)
    rows = sweep.merged_metrics()
    by_job: dict[str, list[dict]] = {}
    for row in rows:
        by_job.setdefault(row["job"], []).append(row)
    gammas, rates = [], []
    for job_rows in by_job.values():
        vals = [float(r["gamma"]) for r in job_rows if r.get("gamma")]
        if not vals:
            raise MissingInputError("metrics carry no gamma column values")
        gammas.append(float(np.mean(vals)))
        rates.append(float(np.mean([float(r["exact_match"])
                                    for r in job_rows])))
    order = np.argsort(gammas)
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.plot(np.asarray(gammas)[order], np.asarray(rates)[order], "o-")
    ax.set_xlabel("illumination quality gamma")
    ax.set_ylabel("exact-recovery rate")
    ax.set_ylim(-0.05, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=DPI)
    plt.close(fig)


def _render_al_sweep(spec: FigureSpec) -> None:
    """Panel of pseudospectrum heatmaps, one per sweep job, labeled by a/L."""
    sweep = load_sweep(spec.manifest)
    n = len(sweep.jobs)
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    fig, axes = plt.subplots(rows, cols,
                             figsize=(4.6 * cols, 4.2 * rows), squeeze=False)
    for i, run in enumerate(sweep.jobs):
        ax = axes[i // cols][i % cols]
        _draw_heatmap(ax, run, title=f"a/L = {run.aspect_ratio():g}")
    for j in range(n, rows * cols):
        axes[j // cols][j % cols].set_axis_off()
    fig.tight_layout()
    fig.savefig(spec.out, dpi=DPI)
    plt.close(fig)


_RENDERERS = {
    FigureKind.HEATMAP: _render_heatmap,
    FigureKind.GAMMA_STUDY: _render_gamma_study,
    FigureKind.AL_SWEEP: _render_al_sweep,
}


def render(spec: FigureSpec) -> Path:
    """Write the requested figure; inputs are opened read-only."""
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _RENDERERS[spec.kind](spec)
    return out
