"""Report figures (SVG). Output is byte-stable for identical inputs."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
FIG_WIDTH = 5.0  # inches

STYLE = {
    "font.family": "sans-serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.fonttype": "none",   # keep text as text, no glyph paths
    "svg.hashsalt": "floor-prc",  # fixed element ids
}


def _figure(scale=1.0, aspect=GOLDEN):
    w = FIG_WIDTH * scale
    return plt.subplots(figsize=(w, w * aspect))


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def scatter_xy(truth, predicted, path, filtered=None, axis: int = 0, label: str = "x"):
    """Predicted against true coordinate, with the identity line."""
    t = np.asarray(truth, dtype=float).reshape(-1, 2)[:, axis]
    p = np.asarray(predicted, dtype=float).reshape(-1, 2)[:, axis]
    with plt.rc_context(STYLE):
        fig, ax = _figure(aspect=1.0)
        lo = float(min(t.min(), p.min()))
        hi = float(max(t.max(), p.max()))
        ax.plot([lo, hi], [lo, hi], color="0.5", lw=0.8, ls="--", label="ideal")
        ax.plot(t, p, "o", color="C0", alpha=0.7, label="readout")
        if filtered is not None:
            f = np.asarray(filtered, dtype=float).reshape(-1, 2)[:, axis]
            ax.plot(t, f, "s", color="C3", alpha=0.7, mfc="none", label="Kalman")
        ax.set_xlabel(f"true {label} (m)")
        ax.set_ylabel(f"estimated {label} (m)")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(loc="upper left")
        return _save(fig, path)


def eta_curve(eta, path, marker_d=None):
    eta = np.asarray(eta, dtype=float)
    d = np.arange(1, eta.size + 1)
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.plot(d, 100 * eta, color="C0")
        if marker_d is not None and 1 <= marker_d <= eta.size:
            ax.axvline(marker_d, color="C3", lw=0.8, ls=":")
            ax.plot([marker_d], [100 * eta[marker_d - 1]], "o", color="C3")
        ax.set_xscale("log")
        ax.set_xlabel("retained components D")
        ax.set_ylabel("retained variance (%)")
        return _save(fig, path)


def confusion(counts, edges, path, label: str = "x"):
    """Row-normalized confusion matrix as a heat map."""
    c = np.asarray(counts, dtype=float)
    rows = c.sum(axis=1, keepdims=True)
    frac = np.divide(c, rows, out=np.zeros_like(c), where=rows > 0)
    with plt.rc_context(STYLE):
        fig, ax = _figure(aspect=0.85)
        im = ax.imshow(frac, origin="lower", cmap="viridis", vmin=0, vmax=1)
        ticks = np.arange(c.shape[0])
        centers = 0.5 * (np.asarray(edges)[:-1] + np.asarray(edges)[1:])
        step = max(1, len(ticks) // 10)
        ax.set_xticks(ticks[::step], [f"{v:.2f}" for v in centers[::step]])
        ax.set_yticks(ticks[::step], [f"{v:.2f}" for v in centers[::step]])
        ax.set_xlabel(f"predicted {label} bin (m)")
        ax.set_ylabel(f"true {label} bin (m)")
        ax.grid(False)
        fig.colorbar(im, ax=ax, label="fraction of row")
        return _save(fig, path)


def sweep(rows, key: str, path, metric: str = "test_raw_total", xlabel: str = ""):
    """Mean +/- std of a sweep table column against the swept value."""
    v = np.array([r[key] for r in rows], dtype=float)
    m = np.array([r[f"{metric}_mean"] for r in rows], dtype=float)
    s = np.array([r[f"{metric}_std"] for r in rows], dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.errorbar(v, m, yerr=s, fmt="o-", capsize=3, color="C0")
        ax.set_xlabel(xlabel or key)
        ax.set_ylabel("RMSE (m)")
        return _save(fig, path)
