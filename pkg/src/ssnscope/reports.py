"""Figure rendering for the scenario runners.

Figures are a convenience layer over the CSV outputs (which remain the data
contract): each runner drops a PNG next to its tables so a run can be eyeballed
without a plotting pipeline.  Rendering is headless (Agg) and metadata-free so
repeated runs produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .presets import gamma_reference  # noqa: E402

def _save(fig, path, manifest=None) -> Path:
    # the manifest line rides in the PNG Software field: provenance without
    # any timestamp, so repeated runs stay byte-identical
    fig.savefig(path, dpi=150, metadata={"Software": manifest or ""})
    plt.close(fig)
    return Path(path)


def render_figure1(path, eta_grid, curves, manifest=None) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    colors = plt.cm.viridis(np.linspace(0.05, 0.85, len(curves)))
    for color, (klyshko, (direct, feedfwd)) in zip(colors, sorted(curves.items())):
        ax.plot(eta_grid, direct, ":", color=color)
        ax.plot(eta_grid, feedfwd, "-", color=color,
                label=f"source Klyshko {klyshko:.2f}")
    ax.axhline(1.0, color="tab:blue", lw=1.2)
    ax.set_xlabel("sample transmittance")
    ax.set_ylabel("precision ratio")
    ax.set_title("gated (solid) vs direct (dotted) twin-beam probing")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path, manifest)


def render_calibration(path, records, chain, manifest=None) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    if records:
        eta = [r["eta"] for r in records]
        ax.errorbar(eta, [r["gamma"] for r in records],
                    yerr=[r["gamma_stderr"] for r in records],
                    fmt="o", color="tab:red", ms=4, capsize=3,
                    label="simulated sweep")
        grid = np.linspace(max(0.02, min(eta)), max(eta), 200)
        ax.plot(grid, [gamma_reference(chain, e) for e in grid],
                color="tab:gray", lw=1.0, label="model relation")
    ax.axhline(1.0, color="tab:blue", lw=1.2, label="shot-noise limit")
    ax.set_xlabel("sample transmittance")
    ax.set_ylabel("precision ratio")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path, manifest)


def render_scan(path, panels, step_um, manifest=None) -> Path:
    fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.4))
    for ax, (name, image) in zip(np.atleast_1d(axes), panels.items()):
        extent = (0, image.shape[1] * step_um, image.shape[0] * step_um, 0)
        lo, hi = np.percentile(image, [1, 99])
        shown = ax.imshow(image, cmap="gray", vmin=lo, vmax=max(hi, lo + 1e-6),
                          extent=extent)
        ax.set_title(name, fontsize=10)
        ax.set_xlabel("x (um)")
        ax.set_ylabel("y (um)")
        fig.colorbar(shown, ax=ax, fraction=0.046)
    fig.tight_layout()
    return _save(fig, path, manifest)


def render_variance(path, analysis, manifest=None) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 3.8))
    shown = ax1.imshow(analysis.gamma_map, cmap="magma")
    ax1.set_title("per-pixel precision ratio")
    fig.colorbar(shown, ax=ax1, fraction=0.046)
    hist = analysis.histogram
    ax2.bar(hist.bin_centers, hist.counts,
            width=np.diff(hist.bin_edges), color="tab:gray",
            edgecolor="white")
    ax2.axvline(analysis.mean_transmittance, color="tab:red", ls="--",
                label=f"mean = {analysis.mean_transmittance:.3f}")
    ax2.set_xlabel("pixel mean transmittance")
    ax2.set_ylabel("pixels")
    ax2.legend(fontsize=8)
    if hist.expected_gamma is not None:
        top = ax2.twiny()
        top.set_xlim(ax2.get_xlim())
        ticks = ax2.get_xticks()
        inside = (ticks >= hist.bin_edges[0]) & (ticks <= hist.bin_edges[-1])
        top.set_xticks(ticks[inside])
        top.set_xticklabels([
            f"{np.interp(t, hist.bin_centers, hist.expected_gamma):.2f}"
            for t in ticks[inside]], fontsize=8)
        top.set_xlabel("expected precision ratio")
    fig.tight_layout()
    return _save(fig, path, manifest)


def render_target(path, xs, profile, truth_profile, groups, manifest=None) -> Path:
    fig, ax = plt.subplots(figsize=(7.5, 3.6))
    truth_x = np.linspace(xs[0], xs[-1], truth_profile.size)
    ax.plot(truth_x, truth_profile, color="tab:gray", lw=1.0,
            label="spot-blurred truth")
    ax.plot(xs, profile, "o-", ms=2.5, lw=0.8, color="tab:red",
            label="estimated profile")
    for group in groups:
        ax.axvspan(*group.line1_range, color="k", alpha=0.08)
        ax.axvspan(*group.line2_range, color="k", alpha=0.08)
    ax.set_xlabel("x (um)")
    ax.set_ylabel("transmittance")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path, manifest)
