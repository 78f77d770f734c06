"""Figure rendering for the batch commands. Headless only; always PNG."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .estimator import LOW_CONFIDENCE, HrTrace
from .spgq import CONDITION_ORDER, AnalysisReport
from .trace import Trace
from .validate import ValidationReport

_DPI = 110


def _finish(fig, path):
    fig.savefig(path, format="png", dpi=_DPI)
    plt.close(fig)


def save_hr_figure(path, hr: HrTrace, title: str = "estimated heart rate"):
    fig, ax = plt.subplots(figsize=(9, 3.2), constrained_layout=True)
    ax.plot(hr.t, hr.bpm, color="#c0392b", lw=1.5, label="estimate")
    low = hr.confidence < LOW_CONFIDENCE
    if low.any():
        ax.plot(hr.t[low], hr.bpm[low], "o", ms=4, mfc="none",
                color="#7f8c8d", label="low confidence")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("BPM")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.25)
    _finish(fig, path)


def save_synth_figure(path, trace: Trace, truth: HrTrace):
    fig, (top, bot) = plt.subplots(
        2, 1, figsize=(9, 4.6), sharex=True, constrained_layout=True
    )
    top.plot(trace.t, trace.v, color="#2c3e50", lw=0.6)
    top.set_ylabel("signal")
    top.set_title("synthetic pulse trace")
    bot.plot(truth.t, truth.bpm, color="#c0392b", lw=1.5)
    bot.set_ylabel("BPM")
    bot.set_xlabel("time (s)")
    bot.set_title("ground-truth rate")
    for ax in (top, bot):
        ax.grid(alpha=0.25)
    _finish(fig, path)


def save_validation_figure(path, est: HrTrace, ref: HrTrace,
                           report: ValidationReport):
    """Estimate over reference, the usual overlay for eyeballing agreement."""
    fig, ax = plt.subplots(figsize=(9, 3.6), constrained_layout=True)
    ax.plot(ref.t, ref.bpm, color="black", lw=1.5, label="reference")
    shift = report.lag_s
    ax.plot(est.t + shift, est.bpm, color="#c0392b", lw=1.5,
            label="estimate" + (f" (lag {shift:+.1f}s)" if shift else ""))
    r = "undefined" if report.pearson_r is None else f"{report.pearson_r:.3f}"
    ax.text(
        0.02, 0.04,
        f"r = {r}   rmse = {report.rmse_bpm:.2f} BPM   "
        f"mae = {report.mean_abs_err_bpm:.2f} BPM   n = {report.n_samples}",
        transform=ax.transAxes, fontsize=8,
        bbox=dict(boxstyle="round", fc="white", ec="#aaaaaa", alpha=0.8),
    )
    ax.set_xlabel("time (s)")
    ax.set_ylabel("BPM")
    ax.set_title("rate validation")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(alpha=0.25)
    _finish(fig, path)


def save_analysis_figure(path, report: AnalysisReport):
    """Mean +- SD per condition, one panel per subscale, tendencies bracketed."""
    conds = [c.value for c in CONDITION_ORDER]
    fig, axes = plt.subplots(
        1, len(report.subscales), figsize=(3.2 * len(report.subscales), 3.6),
        sharey=True, constrained_layout=True,
    )
    axes = np.atleast_1d(axes)
    x = np.arange(len(conds))
    for ax, comp in zip(axes, report.subscales):
        means = [comp.means[c] for c in conds]
        sds = [comp.sds[c] for c in conds]
        ax.bar(x, means, yerr=sds, capsize=4, width=0.62,
               color=["#2980b9", "#27ae60", "#7f8c8d"], alpha=0.85)
        top = max(m + s for m, s in zip(means, sds))
        for i, label in enumerate(comp.tendencies):
            a, b = label.split(" vs ")
            xa, xb = conds.index(a), conds.index(b)
            y = min(top + 0.25 + 0.3 * i, 4.35)
            ax.plot([xa, xb], [y, y], color="#333333", lw=1)
            ax.text((xa + xb) / 2, y + 0.04, "+", ha="center", fontsize=9)
        ax.set_xticks(x)
        ax.set_xticklabels(conds, rotation=20, fontsize=8)
        ax.set_title(comp.subscale.replace("_", " "), fontsize=10)
        ax.grid(axis="y", alpha=0.25)
    axes[0].set_ylabel("subscale score")
    axes[0].set_ylim(0, 4.6)
    fig.suptitle(f"condition comparison (n={report.n_participants})", fontsize=11)
    _finish(fig, path)
