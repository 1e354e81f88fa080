"""Figure rendering for detection reports.

Every renderer reads the report document only (no recomputation) and
writes one PNG next to the exported CSVs. The Agg backend keeps this
headless-safe.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIG_DPI = 150

MARKET_COLORS = {
    "NASDAQ": "#1f77b4",
    "NYSE": "#2ca02c",
    "NYSEARCA": "#9467bd",
    "NYSEMKT": "#8c564b",
    "OTCMKTS": "#d62728",
    "OTHERS": "#7f7f7f",
}


def _save(fig, path: str) -> str:
    fig.savefig(path, dpi=FIG_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def render_volume_profile(report: dict, path: str) -> str:
    profile = report["baselines"]["volume_by_hour_of_day"]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(range(24), profile, color="#1f77b4")
    ax.set_xlabel("hour of day (UTC)")
    ax.set_ylabel("mean tweets per hour")
    ax.set_title("Tweet volume by hour of day")
    ax.set_xticks(range(0, 24, 2))
    return _save(fig, path)


def render_peak_count_curve(report: dict, path: str) -> str:
    curve = report["peak_count_curve"]
    ks = [row["k"] for row in curve]
    counts = [row["peaks"] for row in curve]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, counts, marker="o", color="#d62728")
    ax.set_xlabel("K")
    ax.set_ylabel("peaks detected")
    ax.set_title("Peak count vs sensitivity K")
    ax.set_yscale("symlog")
    return _save(fig, path)


def render_entropy_by_level(report: dict, path: str) -> str:
    hists = report["baselines"]["entropy_histograms"]
    levels = sorted(hists, key=int)
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.35
    xs = np.arange(len(levels))
    means_all = [hists[lv]["mean_all"] for lv in levels]
    means_peaks = [
        hists[lv]["mean_peaks"] if hists[lv]["mean_peaks"] is not None else 0.0
        for lv in levels
    ]
    ax.bar(xs - width / 2, means_all, width, label="all tweets", color="#1f77b4")
    ax.bar(xs + width / 2, means_peaks, width, label="peak tweets", color="#d62728")
    ax.set_xticks(xs, [f"level {lv}" for lv in levels])
    ax.set_ylabel("mean normalized entropy")
    ax.set_ylim(0, 1)
    ax.set_title("Class entropy by TRBC level")
    ax.legend()
    return _save(fig, path)


def render_cap_spread(report: dict, path: str) -> str:
    bootstrap = report["baselines"]["bootstrap"]
    observed = report["baselines"]["observed_spread_by_x"]
    xs = sorted(int(x) for x in bootstrap)
    boot = [bootstrap[str(x)]["mean_std"] for x in xs]
    obs_x = [x for x in xs if observed.get(str(x), {}).get("mean_std") is not None]
    obs = [observed[str(x)]["mean_std"] for x in obs_x]
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(xs, boot, marker="s", label="random groups (bootstrap)", color="#7f7f7f")
    if obs_x:
        ax.plot(obs_x, obs, marker="o", label="observed tweets", color="#d62728")
    ax.set_xlabel("companies mentioned together (x)")
    ax.set_ylabel("mean capitalization std (USD)")
    ax.set_yscale("log")
    ax.set_title("Capitalization spread vs group size")
    ax.legend()
    return _save(fig, path)


def render_assortativity(report: dict, path: str) -> str:
    assortativity = report.get("assortativity", {})
    markets = [m for m, cell in assortativity.items() if "slope" in cell]
    if not markets:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.text(0.5, 0.5, "no assortativity fits", ha="center", va="center")
        ax.set_axis_off()
        return _save(fig, path)
    fig, axes = plt.subplots(
        1, len(markets), figsize=(4 * len(markets), 3.8), squeeze=False
    )
    for ax, market in zip(axes[0], sorted(markets)):
        cell = assortativity[market]
        xs = np.array([p["log10_cap"] for p in cell["points"]])
        ys = np.array([p["log10_neighbor_cap"] for p in cell["points"]])
        color = MARKET_COLORS.get(market, "#333333")
        ax.scatter(xs, ys, s=12, alpha=0.6, color=color)
        grid = np.linspace(xs.min(), xs.max(), 50)
        ax.plot(
            grid,
            cell["slope"] * grid + cell["intercept"],
            color="black",
            label=f"slope {cell['slope']:.2f}",
        )
        ax.set_title(market)
        ax.set_xlabel("log10 own cap")
        ax.set_ylabel("log10 neighbor mean cap")
        ax.legend(loc="best", fontsize=8)
    fig.suptitle("Capitalization assortativity (peak co-occurrence graph)")
    fig.tight_layout()
    return _save(fig, path)


def render_social_financial(report: dict, path: str) -> str:
    social = report["social_financial"]
    rows = [r for r in social["table"] if r["capitalization"] > 0]
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    if not rows or social["splits"] is None:
        ax.text(0.5, 0.5, "no peak stocks to plot", ha="center", va="center")
        ax.set_axis_off()
        return _save(fig, path)
    for market in sorted({r["market"] for r in rows}):
        pts = [r for r in rows if r["market"] == market]
        ax.scatter(
            [np.log10(r["capitalization"]) for r in pts],
            [np.log10(r["social_importance"]) for r in pts],
            s=14,
            alpha=0.7,
            label=market,
            color=MARKET_COLORS.get(market, "#333333"),
        )
    x_split = np.log10(social["splits"]["financial"])
    y_split = np.log10(social["splits"]["social"])
    ax.axvline(x_split, color="black", lw=1, ls="--")
    ax.axhline(y_split, color="black", lw=1, ls="--")
    lo_x, hi_x = ax.get_xlim()
    lo_y, hi_y = ax.get_ylim()
    for label, x, y in (
        ("A", hi_x, hi_y),
        ("B", hi_x, lo_y),
        ("C", lo_x, lo_y),
        ("D", lo_x, hi_y),
    ):
        ax.annotate(
            label,
            xy=(x, y),
            xytext=(-14 if x == hi_x else 6, -14 if y == hi_y else 6),
            textcoords="offset points",
            fontsize=13,
            fontweight="bold",
        )
    ax.set_xlabel("log10 capitalization (financial importance)")
    ax.set_ylabel("log10 median peak mentions (social importance)")
    ax.set_title("Social vs financial importance")
    ax.legend(fontsize=8)
    return _save(fig, path)


RENDERERS = {
    "volume_profile.png": render_volume_profile,
    "peak_count_vs_k.png": render_peak_count_curve,
    "entropy_by_level.png": render_entropy_by_level,
    "cap_spread_vs_x.png": render_cap_spread,
    "assortativity.png": render_assortativity,
    "social_financial_map.png": render_social_financial,
}


def render_all(report: dict, out_dir: str) -> list[str]:
    """Render every figure for a report into ``out_dir``."""
    paths = []
    for name, renderer in RENDERERS.items():
        paths.append(renderer(report, os.path.join(out_dir, name)))
    return paths
