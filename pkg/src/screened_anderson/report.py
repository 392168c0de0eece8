"""Report emission: delimited tables, JSON documents, and figures.

Every run writes a self-describing pair (CSV with stable documented
columns, JSON carrying the full resolved config, master seed and tool
version) and, unless plotting is disabled, a PNG figure rendered next
to them.  CSV and JSON bytes are deterministic functions of
(config, seed); matplotlib is imported lazily so headless table-only
runs stay cheap.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import ValidationError


def run_meta(command: str, config: dict, master_seed: Optional[int]) -> dict:
    return {
        "tool": "screened-anderson",
        "version": __version__,
        "command": command,
        "master_seed": master_seed,
        "config": config,
    }


def ensure_out_dir(path) -> Path:
    out = Path(path)
    if out.exists():
        if not out.is_dir():
            raise ValidationError(f"output path {out} exists and is not a directory")
        return out
    if not out.parent.exists():
        raise ValidationError(f"missing output directory: parent {out.parent} does not exist")
    out.mkdir()
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def write_json(path, document: dict) -> None:
    Path(path).write_text(json.dumps(document, sort_keys=True, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    fig.savefig(path, dpi=130, bbox_inches="tight")
    _plt().close(fig)


def fig_charfun(path, t, log_inv, slope, intercept, title) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    mask = np.isfinite(log_inv) & (log_inv > 0)
    ax.loglog(t[mask], log_inv[mask], "o", ms=4, label=r"ln $|\varphi_S(t)|^{-1}$")
    ax.loglog(t[mask], np.exp(intercept) * t[mask] ** slope, "-", lw=1,
              label=f"fit slope {slope:.3f}")
    ax.set_xlabel("t")
    ax.set_ylabel("log inverse modulus")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def fig_concentration(path, exact, bounds, title) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(exact, bounds, "o", ms=4)
    top = max(max(bounds), max(exact)) * 1.1
    ax.plot([0, top], [0, top], "k--", lw=1, label="y = x")
    ax.set_xlabel("exact interval measure")
    ax.set_ylabel("certified bound")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def fig_dos(path, edges, density, title) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    centers = 0.5 * (edges[:-1] + edges[1:])
    ax.bar(centers, density, width=edges[1] - edges[0], alpha=0.7)
    ax.set_xlabel("energy")
    ax.set_ylabel("density of states")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def fig_spectrum_shift(path, base, shifted, xi, title) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    idx = np.arange(len(base))
    ax.plot(idx, base, "o", ms=4, label="spectrum of H")
    ax.plot(idx, shifted, "x", ms=5, label=f"H-tilde + xi (xi={xi:.3g})")
    ax.set_xlabel("eigenvalue index")
    ax.set_ylabel("energy")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def fig_probability_bars(path, labels, values, bound, title, bound_label) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(labels))
    ax.bar(x, values, alpha=0.7, label="empirical")
    if np.ndim(bound) == 0:
        ax.axhline(bound, color="r", ls="--", label=bound_label)
    else:
        ax.plot(x, bound, "r--", label=bound_label)
    ax.set_xticks(x)
    ax.set_xticklabels([str(l) for l in labels], rotation=45, fontsize=7)
    ax.set_ylabel("probability")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def fig_decay_curve(path, x, y, xlabel, ylabel, title, logy=True) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    if logy:
        ax.semilogy(x, y, "o-")
    else:
        ax.plot(x, y, "o-")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)
