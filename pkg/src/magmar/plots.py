"""Figure rendering for the report paths; every report command writes a
PNG next to its delimited output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_activity_figure(series, path):
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(series.years, series.a, color="steelblue", label="activity A_t")
    ax.set_xlabel("year")
    ax.set_ylabel("rating actions")
    if np.any(~np.isnan(series.c)):
        ax2 = ax.twinx()
        ax2.plot(series.years, series.c, color="darkred", lw=1.5,
                 label="climate proxy C_t")
        ax2.set_ylabel("climate proxy (z)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_path_figure(path_obj, out_path):
    fig, axes = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    t = np.arange(len(path_obj.u))
    axes[0].plot(t, path_obj.u, lw=0.8, color="steelblue")
    axes[0].set_ylabel("u")
    axes[1].plot(t, path_obj.w, lw=0.8, color="gray")
    axes[1].set_ylabel("w")
    axes[1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def save_transform_figure(uniform_series, out_path):
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    t = np.arange(len(uniform_series.u))
    axes[0].plot(t, uniform_series.u, lw=0.8, color="steelblue")
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("u")
    axes[1].hist(uniform_series.u, bins=20, range=(0, 1), color="steelblue",
                 edgecolor="white")
    axes[1].set_xlabel("u")
    axes[1].set_ylabel("count")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def save_comparison_figure(rows, out_path):
    fig, axes = plt.subplots(1, 2, figsize=(10, 0.6 + 0.5 * max(len(rows), 2)))
    names = [r.model for r in rows]
    y = np.arange(len(rows))
    axes[0].barh(y, [r.aic for r in rows], color="steelblue")
    axes[0].set_yticks(y, names)
    axes[0].invert_yaxis()
    axes[0].set_xlabel("AIC (lower is better)")
    oos = [r.avg_oos if r.avg_oos is not None else np.nan for r in rows]
    axes[1].barh(y, oos, color="darkseagreen")
    axes[1].set_yticks(y, ["" for _ in names])
    axes[1].invert_yaxis()
    axes[1].set_xlabel("avg out-of-sample log-score")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def save_rolling_figure(rolling, out_path):
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(rolling.origins, rolling.scores, marker="o", ms=3, lw=0.8,
            color="steelblue", label="log-score")
    if rolling.unbounded_origins:
        for t in rolling.unbounded_origins:
            ax.axvline(t, color="darkred", lw=0.6, alpha=0.5)
        ax.plot([], [], color="darkred", lw=0.6, label="unbounded (excluded)")
    if np.isfinite(rolling.average):
        ax.axhline(rolling.average, color="black", ls="--", lw=1,
                   label=f"average {rolling.average:.3f}")
    ax.set_xlabel("forecast origin t")
    ax.set_ylabel("one-step log-score")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def save_risk_figure(samples, report, out_path):
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.hist(samples, bins=60, color="steelblue", edgecolor="none", alpha=0.8)
    ax.axvline(report.var, color="darkred", lw=1.5,
               label=f"VaR({report.alpha}) = {report.var:.4f}")
    ax.axvline(report.es, color="darkorange", lw=1.5, ls="--",
               label=f"ES = {report.es:.4f}")
    ax.set_xlabel(f"X at horizon {report.horizon}")
    ax.set_ylabel("count")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
