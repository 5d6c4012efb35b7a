"""Cross-run comparison: smoothed curves and final-window statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .runlog import RunLog


@dataclass(frozen=True)
class MethodSummary:
    label: str
    seeds: int
    steps: np.ndarray
    curves: np.ndarray  # (seeds, len(steps)), smoothed
    final_mean: float
    final_se: float
    diff_vs_reference: float
    diff_curve: np.ndarray  # mean curve minus the reference group's mean curve


def smooth(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average that skips NaN; window 1 passes values through."""
    if window < 1:
        raise ValueError("window must be positive")
    values = np.asarray(values, dtype=np.float64)
    if window == 1:
        return values.copy()
    out = np.full_like(values, np.nan)
    for i in range(len(values)):
        seg = values[max(0, i - window + 1):i + 1]
        seg = seg[~np.isnan(seg)]
        if len(seg):
            out[i] = seg.mean()
    return out


def _on_grid(log: RunLog, metric: str, grid: np.ndarray) -> np.ndarray:
    steps, vals = log.column("step"), log.column(metric)
    if len(steps) == len(grid) and np.array_equal(steps, grid):
        return vals
    ok = ~np.isnan(vals)
    if not ok.any():
        return np.full(len(grid), np.nan)
    return np.interp(grid, steps[ok], vals[ok])


def compare_runs(logs: list[RunLog], metric: str, window: int = 1,
                 labels: list[str] | None = None) -> list[MethodSummary]:
    """Group logs by label and summarize ``metric`` per group.

    Logs are put on the first log's step grid (linear interpolation when they
    differ). The final-window mean is taken over the last ``window`` grid points
    of each seed's smoothed curve, and the standard error is across seeds,
    std(ddof=1) / sqrt(n), or 0 for a single seed. ``diff_vs_reference`` is the
    final mean minus that of the first group.
    """
    if not logs:
        raise ValueError("compare_runs needs at least one log")
    labels = labels or [lg.label for lg in logs]
    if len(labels) != len(logs):
        raise ValueError("one label per log")
    grid = logs[0].column("step")
    if len(grid) == 0:
        raise ValueError("reference log has no rows")
    groups: dict[str, list[np.ndarray]] = {}
    for lab, lg in zip(labels, logs):
        groups.setdefault(lab, []).append(smooth(_on_grid(lg, metric, grid), window))
    out = []
    ref = ref_curve = None
    for lab, curves in groups.items():
        curves = np.stack(curves)
        finals = np.array([np.nanmean(c[-window:]) if np.any(~np.isnan(c[-window:])) else np.nan
                           for c in curves])
        mean = float(np.mean(finals))
        se = float(np.std(finals, ddof=1) / np.sqrt(len(finals))) if len(finals) > 1 else 0.0
        mean_curve = np.nanmean(curves, axis=0) if np.any(~np.isnan(curves)) else curves[0]
        if ref is None:
            ref, ref_curve = mean, mean_curve
        out.append(MethodSummary(lab, len(finals), grid, curves, mean, se, mean - ref, mean_curve - ref_curve))
    return out


def format_table(rows: list[MethodSummary], metric: str) -> str:
    lines = [f"{'method':<24} {'seeds':>5} {'final ' + metric:>22} {'se':>10} {'diff':>10}"]
    for r in rows:
        lines.append(f"{r.label:<24} {r.seeds:>5} {r.final_mean:>22.6g} {r.final_se:>10.4g} "
                     f"{r.diff_vs_reference:>10.4g}")
    return "\n".join(lines)
