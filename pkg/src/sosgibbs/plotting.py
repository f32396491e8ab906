"""Figures for the experiment harness.

Every figure is regenerated from the same rows that go into the CSVs, so
the plots never disagree with the shipped data.  matplotlib only; the Agg
backend keeps this usable in headless runs.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, outdir: str, name: str) -> str:
    path = os.path.join(outdir, name)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def _plot_gap_ratio(result, outdir: str) -> list[str]:
    _, rows = result["tables"]["gapratio"]
    betas = [r["beta"] for r in rows]
    ratio = [r["ratio"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogx(betas, ratio, "o-", ms=3)
    ax.axhline(0.93, color="gray", lw=0.7, ls="--")
    ax.axhline(0.99, color="gray", lw=0.7, ls=":")
    ax.set_xlabel(r"$\beta$")
    ax.set_ylabel("gap ratio  delta-kernel / parent")
    return [_save(fig, outdir, "gapratio.png")]


def _plot_overlap(result, outdir: str) -> list[str]:
    _, rows = result["tables"]["overlap"]
    betas = sorted({r["beta"] for r in rows})
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for beta in betas:
        ts = [r["t"] for r in rows if r["beta"] == beta]
        ov = [r["overlap"] for r in rows if r["beta"] == beta]
        ax.plot(ts, ov, label=rf"$\beta={beta:g}$")
    ax.axhline(0.2, color="gray", lw=0.7, ls="--")
    ax.set_xlabel("t")
    ax.set_ylabel("overlap with purified Gibbs state")
    ax.legend(fontsize=8)
    return [_save(fig, outdir, "overlap.png")]


def _plot_aux_gaps(result, outdir: str) -> list[str]:
    _, rows = result["tables"]["auxgaps"]
    betas = [r["beta"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for key, style in (("gap_dll", "o-"), ("gap_undressed", "s--"),
                       ("gap_dressed", "^:")):
        ax.loglog(betas, [r[key] for r in rows], style, ms=3, label=key)
    ax.set_xlabel(r"$\beta$")
    ax.set_ylabel("spectral gap")
    ax.legend(fontsize=8)
    return [_save(fig, outdir, "auxgaps.png")]


def _plot_quadrature(result, outdir: str) -> list[str]:
    _, rows = result["tables"]["errors"]
    eps = [r["eps_requested"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(eps, [r["error_measured"] for r in rows], "o-", label="measured")
    ax.loglog(eps, eps, ls="--", color="gray", label="requested")
    ax.set_xlabel("requested error")
    ax.set_ylabel("operator-norm error")
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    return [_save(fig, outdir, "quadrature.png")]


def _plot_spectra(result, outdir: str) -> list[str]:
    _, rows = result["tables"]["spectra"]
    sectors = sorted({(r["sector"], r["dressed"]) for r in rows})
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i, (sector, dressed) in enumerate(sectors):
        vals = [r["eigenvalue"] for r in rows
                if r["sector"] == sector and r["dressed"] == dressed]
        ax.plot([i] * len(vals), vals, "_", ms=12)
    ax.set_xticks(range(len(sectors)))
    ax.set_xticklabels([f"{s}{'*' if d else ''}" for s, d in sectors],
                       fontsize=7)
    ax.set_ylabel("eigenvalue (real part)")
    return [_save(fig, outdir, "spectra.png")]


def _plot_residuals(result, outdir: str) -> list[str]:
    _, rows = result["tables"]["residuals"]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy([r["residual"] for r in rows], ".")
    ax.axhline(1e-6, color="gray", lw=0.7, ls="--")
    ax.set_xlabel("sample")
    ax.set_ylabel("identity residual")
    return [_save(fig, outdir, "residuals.png")]


_RENDERERS = {
    "gap-ratio": _plot_gap_ratio,
    "aux-evolve": _plot_overlap,
    "aux-gaps": _plot_aux_gaps,
    "quadrature-scan": _plot_quadrature,
    "bell-spectra": _plot_spectra,
    "verify-sos": _plot_residuals,
}


def render(name: str, result, outdir: str) -> list[str]:
    """Write the figures for an experiment; returns the file paths."""
    renderer = _RENDERERS.get(name)
    if renderer is None:
        return []
    return renderer(result, outdir)
