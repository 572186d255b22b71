"""Matplotlib rendering for evaluation reports and training loss curves."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def save_metrics_figure(report, path) -> None:
    """Bar chart of per-level mean PSNR and SSIM for each row group."""
    aggs = [a for a in report.aggregates() if a["level"] is not None]
    kinds = sorted({a["kind"] for a in aggs})
    levels = sorted({a["level"] for a in aggs})
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    width = 0.8 / max(len(kinds), 1)
    for metric, ax in zip(("mean_psnr", "mean_ssim"), axes):
        for i, kind in enumerate(kinds):
            by_level = {a["level"]: a[metric] for a in aggs if a["kind"] == kind}
            xs = [lv + (i - (len(kinds) - 1) / 2) * width for lv in levels]
            ax.bar(xs, [by_level.get(lv, 0.0) for lv in levels], width=width, label=kind)
        ax.set_xlabel("haze level")
        ax.set_ylabel("PSNR (dB)" if metric == "mean_psnr" else "SSIM")
        ax.set_xticks(levels)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def save_loss_curves(log_path, out_path) -> None:
    """Per-stage loss curves from a line-delimited JSON training log."""
    stages: dict[str, dict[str, list]] = {}
    with open(log_path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            series = stages.setdefault(row["stage"], {})
            for key, value in row.items():
                if key in ("stage", "step"):
                    continue
                series.setdefault(key, ([], []))
                series[key][0].append(row["step"])
                series[key][1].append(value)
    if not stages:
        return
    fig, axes = plt.subplots(1, len(stages), figsize=(4.5 * len(stages), 3.5), squeeze=False)
    for ax, (stage, series) in zip(axes[0], sorted(stages.items())):
        for key, (xs, ys) in sorted(series.items()):
            ax.plot(xs, ys, label=key, linewidth=1)
        ax.set_title(stage)
        ax.set_xlabel("step")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(Path(out_path), dpi=120)
    plt.close(fig)


def write_report_files(report, out_prefix) -> list[Path]:
    """Serialize a report as JSON, aligned text, CSV, and a metrics figure."""
    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = []
    for suffix, text in ((".json", report.to_json()), (".txt", report.to_text()),
                         (".csv", report.to_csv())):
        p = out_prefix.with_suffix(suffix)
        p.write_text(text)
        paths.append(p)
    fig_path = out_prefix.with_suffix(".png")
    if any(r["level"] is not None for r in report.rows):
        save_metrics_figure(report, fig_path)
        paths.append(fig_path)
    return paths
