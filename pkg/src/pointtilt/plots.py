"""Figure rendering for CLI reports.

Each helper writes one PNG next to the delimited output it illustrates.
Rendering is optional (--no-plots) and never affects the data files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .model import EventSequence, WeightRecord  # noqa: E402

_DPI = 130


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def weight_histogram(records: Sequence[WeightRecord], path: Path) -> Path:
    logs = np.array([r.log_weight for r in records])
    finite = logs[np.isfinite(logs)]
    zero_frac = float(np.mean(~np.isfinite(logs))) if logs.size else 0.0
    fig, ax = plt.subplots(figsize=(6, 4))
    if finite.size:
        ax.hist(finite, bins=60, color="steelblue", alpha=0.85)
    ax.set_xlabel("log weight")
    ax.set_ylabel("paths")
    ax.set_title(f"log-weight distribution (zero-weight fraction {zero_frac:.3g})")
    return _save(fig, path)


def running_mean(weights: np.ndarray, path: Path) -> Path:
    weights = np.asarray(weights, dtype=float)
    cum = np.cumsum(weights) / np.arange(1, weights.size + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, weights.size + 1), cum, lw=1.0, color="darkslategray")
    ax.axhline(1.0, color="firebrick", ls="--", lw=1.0, label="unit mean")
    ax.set_xscale("log")
    ax.set_xlabel("paths")
    ax.set_ylabel("running mean weight")
    ax.legend()
    ax.set_title("weight mean convergence")
    return _save(fig, path)


def count_comparison(support: np.ndarray, pmf_a: np.ndarray, pmf_b: np.ndarray,
                     label_a: str, label_b: str, path: Path) -> Path:
    x = np.asarray(support, dtype=float)
    width = 0.4
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.bar(x - width / 2, pmf_a, width=width, label=label_a, color="steelblue")
    ax.bar(x + width / 2, pmf_b, width=width, label=label_b, color="darkorange")
    labels = [str(int(v)) for v in x[:-1]] + [f">{int(x[-2]) if x.size > 1 else 0}"]
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_xlabel("terminal count")
    ax.set_ylabel("probability")
    ax.legend()
    ax.set_title("count marginal: reweighted vs direct")
    return _save(fig, path)


def window_criteria(windows, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    mids = [(w.u + w.t) / 2 for w in windows]
    for idx in range(len(windows[0].reports)):
        vals = [w.reports[idx].value for w in windows]
        ax.plot(mids, vals, marker="o", ms=4,
                label=windows[0].reports[idx].criterion_id)
    flagged = [m for m, w in zip(mids, windows) if not w.passed]
    if flagged:
        ax.scatter(flagged, [1.0] * len(flagged), marker="x", color="firebrick",
                   label="window not passed", zorder=5)
    ax.set_yscale("log")
    ax.set_xlabel("window midpoint")
    ax.set_ylabel("criterion estimate")
    ax.legend()
    ax.set_title("localized moment-condition estimates")
    return _save(fig, path)


def event_raster(sequences: Sequence[EventSequence], path: Path, max_paths: int = 60) -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    shown = sequences[:max_paths]
    for pid, seq in enumerate(shown):
        for coord, times in enumerate(seq.jumps):
            if times.size:
                ax.scatter(times, np.full(times.size, pid), s=6,
                           color=f"C{coord % 10}", marker="|")
    ax.set_xlabel("time")
    ax.set_ylabel("path")
    ax.set_title(f"event raster (first {len(shown)} paths)")
    return _save(fig, path)


def count_histogram(counts: np.ndarray, path: Path) -> Path:
    counts = np.asarray(counts, dtype=int)
    fig, ax = plt.subplots(figsize=(6, 4))
    hi = int(counts.max()) if counts.size else 0
    ax.hist(counts, bins=np.arange(-0.5, hi + 1.5, 1.0), color="steelblue", alpha=0.85)
    ax.set_xlabel("terminal count")
    ax.set_ylabel("paths")
    ax.set_title("terminal count distribution")
    return _save(fig, path)


def explosion_hist(partial_sums: np.ndarray, t: float, mass: float, path: Path) -> Path:
    sums = np.asarray(partial_sums, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    if sums.size:
        finite = sums[np.isfinite(sums)]
        hi = min(float(np.quantile(finite, 0.995)), 50 * t) if finite.size else t
        ax.hist(np.clip(finite, 0, hi), bins=60, color="steelblue", alpha=0.85)
    ax.axvline(t, color="firebrick", ls="--", label=f"t = {t:g}")
    ax.set_xlabel("total inter-arrival sum")
    ax.set_ylabel("paths")
    ax.legend()
    ax.set_title(f"explosion-time mass below t: {mass:.4f}")
    return _save(fig, path)


def oracle_bars(items: Iterable[tuple[str, float, float]], path: Path) -> Path:
    items = list(items)
    labels = [it[0] for it in items]
    lhs = [it[1] for it in items]
    rhs = [it[2] for it in items]
    x = np.arange(len(items), dtype=float)
    fig, ax = plt.subplots(figsize=(max(6.5, 1.1 * len(items)), 4))
    ax.bar(x - 0.2, lhs, width=0.4, label="estimate", color="steelblue")
    ax.bar(x + 0.2, rhs, width=0.4, label="reference", color="darkorange")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    if all(v > 0 for v in lhs + rhs) and max(rhs) / max(min(lhs), 1e-12) > 50:
        ax.set_yscale("log")
    ax.legend()
    ax.set_title("oracle estimates vs references")
    return _save(fig, path)
