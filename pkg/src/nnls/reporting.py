"""Report persistence: JSON/CSV writers and the rendered figures.

The delimited outputs are the contract (summary and decay-point CSVs, binary
field dumps, the JSON report); figures are rendered alongside them for quick
inspection of profiles, tails, and the energy trend.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .grids import Field, write_field, write_field_csv  # noqa: E402


def _native(obj):
    if isinstance(obj, dict):
        return {k: _native(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_native(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_native(v) for v in obj.tolist()]
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_native(payload), fh, indent=2)
        fh.write("\n")


def write_csv(path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def eps_tag(eps: float) -> str:
    return f"{eps:.4f}".replace(".", "p")


def dump_solution_fields(outdir, eps: float, pair) -> list:
    """Binary dumps of both components; CSV alternatives in one dimension."""
    paths = []
    fdir = os.path.join(outdir, "fields")
    os.makedirs(fdir, exist_ok=True)
    for name, f in (("u", pair.u), ("v", pair.v)):
        path = os.path.join(fdir, f"{name}_eps_{eps_tag(eps)}.nnls")
        write_field(path, f)
        paths.append(path)
        if f.grid.dimension == 1:
            cpath = os.path.join(fdir, f"{name}_eps_{eps_tag(eps)}.csv")
            write_field_csv(cpath, f)
            paths.append(cpath)
    return paths


def dump_decay_points(outdir, eps: float, fits: dict) -> list:
    """Per-component (radius, log max) fit points as CSV."""
    paths = []
    ddir = os.path.join(outdir, "decay")
    os.makedirs(ddir, exist_ok=True)
    for name, fit in fits.items():
        path = os.path.join(ddir, f"decay_{name}_eps_{eps_tag(eps)}.csv")
        write_csv(path, ["r", "log_max"], [[float(a), float(b)] for a, b in fit.points])
        paths.append(path)
    return paths


def _figdir(outdir) -> str:
    fdir = os.path.join(outdir, "figures")
    os.makedirs(fdir, exist_ok=True)
    return fdir


def render_profile(outdir, eps: float, pair, potential) -> str:
    path = os.path.join(_figdir(outdir), f"profile_eps_{eps_tag(eps)}.png")
    grid = pair.grid
    if grid.dimension == 1:
        x = grid.axis()
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(x, pair.u.values, label="u")
        ax.plot(x, pair.v.values, "--", label="v")
        vv = potential.values.values
        ax.plot(x, vv / vv.max() * pair.u.values.max(), ":", color="gray",
                label="V (scaled)", lw=1)
        ax.set_xlabel("x")
        ax.set_ylabel("amplitude")
        ax.set_title(f"solution pair, eps = {eps:g}")
        ax.legend()
    else:
        fig, axes = plt.subplots(1, 2, figsize=(9, 4))
        ext = [-grid.half_extent, grid.half_extent] * 2
        sl = (slice(None), slice(None)) if grid.dimension == 2 else (
            slice(None), slice(None), grid.points_per_axis // 2)
        for ax, (name, f) in zip(axes, (("u", pair.u), ("v", pair.v))):
            im = ax.imshow(f.values[sl].T, origin="lower", extent=ext, cmap="viridis")
            ax.set_title(f"{name}, eps = {eps:g}")
            fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_decay(outdir, eps: float, fits: dict) -> str:
    path = os.path.join(_figdir(outdir), f"decay_eps_{eps_tag(eps)}.png")
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for name, fit in fits.items():
        r = fit.points[:, 0]
        ax.plot(r, fit.points[:, 1], ".", ms=4, label=f"{name} shells")
        ax.plot(r, fit.intercept - fit.slope * r, "-", lw=1,
                label=f"{name} fit: rate {fit.slope:.2f}, r2 {fit.r_squared:.3f}")
    ax.set_xlabel("distance from spike")
    ax.set_ylabel("log shell max")
    ax.set_title(f"tail decay, eps = {eps:g}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_energy_trend(outdir, epsilons: list, scaled_energies: list, target: float) -> str:
    path = os.path.join(_figdir(outdir), "energy_trend.png")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epsilons, scaled_energies, "o-", label="J / eps^d")
    ax.axhline(target, color="gray", ls="--", label="sum of ground levels")
    ax.set_xlabel("eps")
    ax.set_ylabel("scaled energy")
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_title("energy concentration trend")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_levels(outdir, lams: list, levels: list) -> str:
    path = os.path.join(_figdir(outdir), "clambda.png")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(lams, levels, "o-")
    ax.set_xlabel("lambda")
    ax.set_ylabel("ground level")
    ax.set_title("ground-state level vs lambda")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
