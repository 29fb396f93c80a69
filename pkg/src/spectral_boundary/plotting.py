"""Report figures (matplotlib, non-interactive Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .spectral import cumulative_midpoints, heat_trace  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes reproducible
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_spectrum(eigenvalues, oracle=None, path="spectrum.png", title="spectrum"):
    lam = np.asarray(eigenvalues)
    fig, axes = plt.subplots(1, 2 if oracle is not None else 1, figsize=(9, 3.6), squeeze=False)
    ax = axes[0, 0]
    ax.plot(np.arange(len(lam)), lam, "o", ms=3, label="computed")
    if oracle is not None:
        ax.plot(np.arange(len(lam)), oracle, "x", ms=4, label="oracle")
        err = axes[0, 1]
        nz = np.asarray(oracle) != 0
        err.semilogy(np.abs(np.asarray(oracle)[nz]), np.abs(lam - oracle)[nz], "o", ms=3)
        err.set_xlabel("|n|")
        err.set_ylabel("|lambda - n|")
    ax.set_xlabel("index (|lambda| order)")
    ax.set_ylabel("lambda")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def plot_residue_fit(points, partial, fit, path="residue.png"):
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.semilogx(points, np.real(partial), ".", ms=2, label="partial sums")
    lo, hi = fit.windows[0][0], fit.windows[-1][1]
    x = np.geomspace(lo, hi, 100)
    c = fit.coefficients
    if fit.model == "log":
        y = c["c0"] + fit.r * np.log(x)
        ax.semilogx(x, y, "-", label=f"fit r = {fit.r:.4g}")
    for a, b in fit.windows:
        ax.axvspan(a, b, alpha=0.08, color="gray")
    ax.set_xlabel("cutoff")
    ax.set_ylabel("weighted partial sum")
    ax.set_title(f"residue fit ({fit.model}), spread {fit.spread:.2g}")
    ax.legend()
    return _save(fig, path)


def plot_weyl(sd, fit=None, path="weyl.png"):
    lam = sd.abs[sd.window_mask()]
    pts, F = cumulative_midpoints(lam, np.ones_like(lam))
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.loglog(pts, F, ".", ms=2, label="N(L)")
    if fit is not None:
        lo, hi = fit["window"]
        x = np.geomspace(lo, hi, 50)
        ax.loglog(x, np.exp(fit["intercept"]) * x ** fit["slope"], "-", label=f"slope {fit['slope']:.3f}")
    ax.set_xlabel("L")
    ax.set_ylabel("#{0 < |lambda| <= L}")
    ax.legend()
    return _save(fig, path)


def plot_heat(sd, fit, path="heat.png"):
    t0, t1 = fit["t_range"]
    t = np.geomspace(t0, t1, 40)
    vals = np.array([heat_trace(sd, ti) for ti in t])
    d = sd.dimension
    coef = [fit["coefficients"][f"a{k}"] for k in range(len(fit["coefficients"]))]
    model = sum(c * t ** ((k - d) / 2) for k, c in enumerate(coef))
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.loglog(t, vals, "o", ms=3, label="heat trace")
    ax.loglog(t, model, "-", label=f"a0 = {coef[0]:.5g}")
    ax.set_xlabel("t")
    ax.set_ylabel("Tr exp(-t D^2)")
    ax.legend()
    return _save(fig, path)


def plot_regularity(reports, path="regularity.png"):
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for rep in reports:
        norms = np.asarray(rep.norms)
        for k in range(1, norms.shape[1]):
            ax.loglog(rep.levels, norms[:, k], "o-", label=f"{rep.function}, k={k} ({rep.exponents[k]:.2f})")
    ax.set_xlabel("N")
    ax.set_ylabel("||delta_1^k(a)||")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_action(rows, path="action.png"):
    L = [r["cutoff"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.loglog(L, [r["relative_error"] for r in rows], "o-")
    ax.set_xlabel("Lambda")
    ax.set_ylabel("|direct - series| / direct")
    return _save(fig, path)


def plot_tadpole(results: dict, path="tadpole.png"):
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for name, tp in results.items():
        height = max(abs(tp.fit.r), 1e-18)
        ax.bar(name, height, log=True)
        ax.text(name, height, f"{tp.fit.r:.2e}", ha="center", va="bottom", fontsize=8)
    ax.set_ylabel("|r|")
    ax.set_title("tadpole residue against the control")
    return _save(fig, path)


def render_report(results, directory) -> list[Path]:
    """Figures for every criterion result that carries plot data."""
    out = []
    d = Path(directory)
    for r in results:
        p = r.plots
        if "spectrum" in p:
            s = p["spectrum"]
            out.append(plot_spectrum(s["eigenvalues"], s["oracle"], d / "spectrum_1d.png", "1D example"))
        if "residue" in p:
            s = p["residue"]
            out.append(plot_residue_fit(s["points"], s["partial"], s["fit"], d / "residue_1d.png"))
        if "heat" in p:
            out.append(plot_heat(p["heat"]["sd"], p["heat"]["fit"], d / "heat_1d.png"))
        if "action" in p:
            out.append(plot_action(p["action"], d / "action_1d.png"))
        if "tadpole" in p:
            out.append(plot_tadpole(p["tadpole"], d / "tadpole_halftorus.png"))
        if "regularity" in p:
            out.append(plot_regularity(p["regularity"], d / "regularity_1d.png"))
        if "weyl" in p:
            out.append(plot_weyl(p["weyl"]["sd"], p["weyl"]["fit"], d / "weyl_halftorus.png"))
    return out
