"""Figures for sweep results, written straight to image files."""

from __future__ import annotations

import math
from collections import defaultdict


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    # no timestamps in the file so reruns are byte-stable
    fig.savefig(path, dpi=120, metadata={"Software": None} if str(path).endswith(".png") else None)


def _finite(xs, ys):
    pts = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
    return [p[0] for p in pts], [p[1] for p in pts]


def plot_budget_sweep(records, path, title=""):
    plt = _pyplot()
    series = defaultdict(list)
    for r in records:
        series[r["method"]].append((r["budget"], r["objective"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for method, pts in series.items():
        pts.sort()
        xs, ys = _finite([p[0] for p in pts], [p[1] for p in pts])
        ax.plot(xs, ys, marker="o", label=method)
    ax.set_yscale("log")
    ax.set_xlabel("budget")
    ax.set_ylabel("tr P")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_noise_sweep(records, path, title=""):
    plt = _pyplot()
    series = defaultdict(list)
    for r in records:
        series[(r["budget"], r["method"])].append((r["scale"], r["objective"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for (budget, method), pts in sorted(series.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        pts.sort()
        xs, ys = _finite([p[0] for p in pts], [p[1] for p in pts])
        ax.plot(xs, ys, marker=".", label=f"{method}, b={budget}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("noise scale")
    ax.set_ylabel("tr P")
    ax.set_title(title)
    ax.legend(fontsize="small")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_condition_compare(records, path, title=""):
    plt = _pyplot()
    series = defaultdict(list)
    for r in records:
        series[r["coords"]].append((r["count"], r["mean_condition"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for coords in sorted(series):
        pts = sorted(series[coords])
        xs, ys = _finite([p[0] for p in pts], [p[1] for p in pts])
        ax.plot(xs, ys, marker="o", label=coords)
    ax.set_yscale("log")
    ax.set_xlabel("number of PMUs")
    ax.set_ylabel("mean condition number of P")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
