"""Figure rendering for run reports.

All entry points take a finished report and an output directory and write PNG
files next to the delimited output.  Nothing here feeds back into estimation;
the simulation layer stays plotting-free.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .distributions import validate_model
from .limits import population_limit_pdf

_ERRBAR = dict(fmt="o", capsize=3, markersize=4)


def _save(fig, out_dir: str, name: str) -> str:
    path = os.path.join(out_dir, name)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def _params_from_config(config: dict):
    return validate_model(config["offspring"], config["immigration"])


def render_finite_report(report, out_dir: str) -> list:
    """Windowed pair-coalescence, oldest-founder tail, final-population law."""
    written = []
    rows = report.tables.get("by_u", [])
    if rows and "ratio_estimate" in rows[0]:
        u = np.array([r["u"] for r in rows])
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.errorbar(
            u, [r["ratio_estimate"] for r in rows],
            yerr=[3 * r["ratio_stderr"] for r in rows],
            label="pair fraction", **_ERRBAR,
        )
        ax.errorbar(
            u + 0.008, [r["direct_estimate"] for r in rows],
            yerr=[3 * r["direct_stderr"] for r in rows],
            label="sampled pair", **_ERRBAR,
        )
        if rows[0].get("limit_value") is not None:
            ax.plot(u, [r["limit_value"] for r in rows], "k--", label="limit")
        ax.set_xlabel("window start u (as a fraction of n)")
        ax.set_ylabel("P(coalescence in [un, n))")
        ax.set_title(f"pairwise coalescence window, n={report.config['n']}")
        ax.legend()
        written.append(_save(fig, out_dir, "pairwise_window.png"))

    if rows:
        u = np.array([r["u"] for r in rows])
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.errorbar(
            u, [r["tau_estimate"] for r in rows],
            yerr=[3 * r["tau_stderr"] for r in rows],
            label="simulated", **_ERRBAR,
        )
        ax.plot(u, [r["tau_limit"] for r in rows], "k--", label="(1-u)^gamma")
        ax.set_xlabel("u")
        ax.set_ylabel("P(oldest surviving founder arrived after un)")
        ax.set_title(f"oldest-clan tail, n={report.config['n']}")
        ax.legend()
        written.append(_save(fig, out_dir, "oldest_clan.png"))

    z = np.asarray(report.tables.get("z_samples", []), dtype=float)
    if z.size:
        params = _params_from_config(report.config)
        n = report.config["n"]
        fig, ax = plt.subplots(figsize=(6, 4))
        scaled = z / n
        hi = float(np.quantile(scaled, 0.999)) or 1.0
        ax.hist(scaled, bins=60, range=(0.0, hi), density=True, alpha=0.6,
                label="simulated Z_n / n")
        grid = np.linspace(1e-9, hi, 400)
        ax.plot(grid, population_limit_pdf(grid, params), "k-", label="gamma limit")
        ax.set_xlabel("Z_n / n")
        ax.set_ylabel("density")
        ax.set_title(f"final population law, n={n}")
        ax.legend()
        written.append(_save(fig, out_dir, "population_law.png"))
    return written


def render_population_report(report, out_dir: str) -> list:
    return render_finite_report(report, out_dir)


def render_sweep_report(report, out_dir: str) -> list:
    rows = report.tables.get("by_n", [])
    if not rows:
        return []
    n = [r["n"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(
        n, [r["total_estimate"] for r in rows],
        yerr=[3 * r["total_stderr"] for r in rows],
        label="P(single surviving clan)", **_ERRBAR,
    )
    ax.plot(n, [r["total_bound"] for r in rows], "k--", label="exact value")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel("probability")
    ax.set_title("all-particle coalescence becomes impossible as n grows")
    ax.legend()
    return [_save(fig, out_dir, "total_coalescence.png")]


def render_plain_report(report, out_dir: str) -> list:
    rows = report.tables.get("by_u", [])
    if not rows:
        return []
    u = np.array([r["u"] for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(
        u, [r["tail_estimate"] for r in rows],
        yerr=[3 * r["tail_stderr"] for r in rows],
        label="all-particle time > un", **_ERRBAR,
    )
    ax.plot(u, 1.0 - u, "k--", label="1 - u")
    ax.errorbar(
        u + 0.008, [r["window_estimate"] for r in rows],
        yerr=[3 * r["window_stderr"] for r in rows],
        label="pair time in [un, n)", **_ERRBAR,
    )
    if rows[0].get("window_limit") is not None:
        ax.plot(u, [r["window_limit"] for r in rows], "k:", label="pair limit")
    ax.set_xlabel("u")
    ax.set_ylabel("probability")
    ax.set_title(f"single-ancestor baseline, n={report.config['n']}")
    ax.legend()
    return [_save(fig, out_dir, "plain_gw.png")]


def render_limit_table(rows, out_dir: str) -> list:
    """Curve of the limiting windowed pair-coalescence values over u."""
    if not rows:
        return []
    u = [r["u"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(
        u, [r["value"] for r in rows],
        yerr=[3 * r["stderr"] for r in rows], **_ERRBAR,
    )
    ax.set_xlabel("u")
    ax.set_ylabel("limiting P(coalescence in [un, n))")
    ax.set_title("pairwise window limit")
    return [_save(fig, out_dir, "limit_window.png")]


def render_exact_report(rows, out_dir: str) -> list:
    """Survival and sole-surviving-clan curves over the horizon."""
    if not rows:
        return []
    m = [r["m"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(m, [r["survival"] for r in rows], label="P(single line alive)")
    ax.plot(m, [r["single_clan"] for r in rows], label="P(exactly one clan alive)")
    ax.set_xlabel("horizon")
    ax.set_ylabel("probability")
    ax.set_title("exact curves")
    ax.legend()
    return [_save(fig, out_dir, "exact_curves.png")]


def render_compare_report(rows, out_dir: str) -> list:
    """Side-by-side of finite-n estimates and independently computed limits."""
    if not rows:
        return []
    u = np.array([r["u"] for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(
        u, [r["estimate"] for r in rows],
        yerr=[3 * r["estimate_stderr"] for r in rows],
        label="finite-n estimate", **_ERRBAR,
    )
    ax.errorbar(
        u + 0.008, [r["limit_value"] for r in rows],
        yerr=[3 * r["limit_stderr"] for r in rows],
        label="limit", **_ERRBAR,
    )
    for shift, r in zip(u, rows):
        if r["verdict"] == "FAIL":
            ax.annotate("FAIL", (shift, r["estimate"]), color="red",
                        textcoords="offset points", xytext=(0, 8))
    ax.set_xlabel("u")
    ax.set_ylabel("P(coalescence in [un, n))")
    ax.set_title("finite-n against the limit")
    ax.legend()
    return [_save(fig, out_dir, "compare.png")]
