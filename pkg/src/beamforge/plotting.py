"""Static figures for finished runs."""

from __future__ import annotations

import matplotlib
from matplotlib.figure import Figure

import numpy as np

DB_FLOOR = -120.0

# fixed ids and no timestamp so identical runs give identical SVG files
_SVG_RC = {"svg.hashsalt": "beamforge", "svg.fonttype": "path"}
_SVG_METADATA = {"Date": None, "Creator": None}


def normalized_db(powers, floor: float = DB_FLOOR) -> np.ndarray:
    """Powers in dB relative to their peak, clipped at ``floor``."""
    p = np.asarray(powers, dtype=float)
    peak = p.max()
    if peak <= 0:
        return np.full(p.shape, floor)
    ratio = np.clip(p / peak, 10 ** (floor / 10), None)
    db = 10 * np.log10(ratio)
    db[p == peak] = 0.0
    return db


def _save(fig, path):
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata=_SVG_METADATA)


def plot_beampattern(angles, desired, achieved_soft, achieved_hard, path,
                     title=None, intervals=(), ylim=(-50, 3)):
    fig = Figure(figsize=(7, 4))
    ax = fig.add_subplot()
    for lo, hi in intervals:
        ax.axvspan(lo, hi, color="0.85", lw=0)
    ax.plot(angles, normalized_db(desired), color="k", ls="--", lw=1, label="desired")
    ax.plot(angles, normalized_db(achieved_soft), color="tab:orange", lw=1, alpha=0.8, label="soft selection")
    ax.plot(angles, normalized_db(achieved_hard), color="tab:blue", lw=1.5, label="hard selection")
    ax.set_xlim(-90, 90)
    ax.set_ylim(*ylim)
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("normalized power (dB)")
    ax.grid(True, lw=0.3)
    ax.legend(loc="lower right", fontsize=8)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    _save(fig, path)


def plot_history(history, path, title=None):
    """Loss terms per optimizer step on a log scale."""
    fig = Figure(figsize=(7, 4))
    ax = fig.add_subplot()
    steps = [h["step"] for h in history]
    for key, label in (("loss", "total"), ("pattern_error", "pattern error"),
                       ("penalty_rf", "RF penalty"), ("penalty_ant", "antenna penalty")):
        values = np.array([h[key] for h in history])
        if np.any(values > 0):
            ax.semilogy(steps, np.where(values > 0, values, np.nan), lw=0.8, label=label)
    ax.set_xlabel("step")
    ax.grid(True, lw=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    _save(fig, path)
