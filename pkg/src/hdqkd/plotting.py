"""Figures from the CSV files written by the command-line tool.

Reads only the CSV, so it works on any saved run.  ΔI curves are drawn
clamped at zero and stop where a protocol becomes insecure.
"""
from __future__ import annotations

import csv
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLES = {
    "infinite": dict(color="black", marker="x", linestyle="-"),
    "two_decoy": dict(color="tab:red", linestyle="-"),
    "one_decoy": dict(color="tab:blue", linestyle="--"),
    "no_decoy": dict(color="tab:green", linestyle=":"),
    "ideal_single_photon": dict(color="tab:gray", linestyle="-."),
}


def read_csv(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    """Header comments and data rows of a tool CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    comments = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    data = [ln for ln in lines if ln and not ln.startswith("#")]
    return comments, list(csv.DictReader(data))


def _number(cell: str) -> float | None:
    return float(cell) if cell not in ("", None) else None


def _save(fig, path: str | Path) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", suffix=path.suffix)
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=150, bbox_inches="tight")
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)


def plot_sweep(csv_path: str | Path, out_path: str | Path, title: str | None = None) -> None:
    _, rows = read_csv(csv_path)
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    lengths = [float(r["length_km"]) for r in rows]
    protocols = [c[: -len("_delta_i_bpc")] for c in rows[0] if c.endswith("_delta_i_bpc")]

    fig, ax = plt.subplots(figsize=(5.5, 4))
    for protocol in protocols:
        xs, ys = [], []
        for x, r in zip(lengths, rows):
            y = _number(r[f"{protocol}_delta_i_bpc"])
            if y is None or y <= 0:
                break
            xs.append(x)
            ys.append(y)
        ax.plot(xs, ys, label=protocol.replace("_", " "), **STYLES.get(protocol, {}))
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("ΔI (bits per coincidence)")
    ax.set_xlim(min(lengths), max(lengths))
    ax.set_ylim(bottom=0)
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    _save(fig, out_path)


def plot_nu2(csv_path: str | Path, out_path: str | Path, title: str | None = None) -> None:
    _, rows = read_csv(csv_path)
    pts = [(float(r["length_km"]), _number(r["nu2_opt"])) for r in rows]
    pts = [(x, y) for x, y in pts if y is not None]
    if not pts:
        raise ValueError(f"{csv_path}: no ν₂ values to plot")
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.semilogy(*zip(*pts), marker="o", color="tab:red")
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("optimal ν₂")
    if title:
        ax.set_title(title)
    _save(fig, out_path)
