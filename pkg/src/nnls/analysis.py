"""Post-processing: concentration, decay fits, and localization checks.

Everything here is diagnostic over converged pairs: locate per-well maxima
and screen for spurious ones, fit the exponential tail rate on radial shells,
verify that the capped modification never actually engaged (so the pair
solves the original system), and compare per-well energies against the
ground-state targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np

from .coupling import CouplingParams
from .energy import gradient_residual, pairing_norm, total_energy
from .grids import Field, PairField


@dataclass
class DecayFit:
    """Least-squares line through (shell radius, log shell max)."""

    center: list
    slope: float          # decay rate, positive on success
    intercept: float
    r_squared: float
    window: tuple
    n_shells: int
    points: np.ndarray    # (r, log max) rows, for export

    def to_dict(self) -> dict:
        return {
            "center": [float(c) for c in self.center],
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "window": [float(w) for w in self.window],
            "n_shells": self.n_shells,
        }


class DecayFitError(RuntimeError):
    pass


def decay_fit(
    field: Field,
    center,
    eps: float,
    window: tuple | None = None,
    amplitude_floor: float = 1e-14,
) -> DecayFit:
    """Fit the tail rate of ``field`` around ``center``.

    Shells of width dx collect the max of |field|; the fit runs over radii in
    ``window`` (default [3 eps, +inf), callers cap the outer radius), skipping
    shells below the amplitude floor.  The returned slope is the decay rate
    (the negative of the fitted line slope).
    """
    grid = field.grid
    center = np.atleast_1d(np.asarray(center, dtype=float))
    pts = grid.coordinates()
    r = np.sqrt(np.sum((pts - center) ** 2, axis=-1)).ravel()
    vals = np.abs(field.values).ravel()
    r_min = 3.0 * eps if window is None else window[0]
    r_max = np.inf if window is None else window[1]
    nbins = int(np.floor(r.max() / grid.dx)) + 1
    idx = np.minimum((r / grid.dx).astype(int), nbins - 1)
    shell_max = np.zeros(nbins)
    np.maximum.at(shell_max, idx, vals)
    radii = (np.arange(nbins) + 0.5) * grid.dx
    sel = (radii >= r_min) & (radii <= r_max) & (shell_max > amplitude_floor)
    if np.count_nonzero(sel) < 8:
        raise DecayFitError(
            f"only {np.count_nonzero(sel)} usable shells in window [{r_min:g}, {r_max:g}]"
        )
    x = radii[sel]
    y = np.log(shell_max[sel])
    coeffs = np.polyfit(x, y, 1)
    pred = np.polyval(coeffs, x)
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return DecayFit(
        center=list(center),
        slope=float(-coeffs[0]),
        intercept=float(coeffs[1]),
        r_squared=float(r2),
        window=(float(r_min), float(x.max())),
        n_shells=int(np.count_nonzero(sel)),
        points=np.column_stack([x, y]),
    )


def default_fit_window(potential, well_index: int, eps: float) -> tuple:
    """[3 eps, min(box-edge distance, nearest-other-well distance)/1.5]."""
    grid = potential.grid
    wells = potential.wells
    c = np.asarray(wells[well_index].center, dtype=float)
    edge = float(grid.half_extent - np.max(np.abs(c)))
    other = np.inf
    for j, w in enumerate(wells):
        if j != well_index:
            other = min(other, float(np.linalg.norm(np.asarray(w.center) - c)))
    return (3.0 * eps, min(edge, other) / 1.5)


@dataclass
class WellMaxima:
    index: int
    u_argmax: list
    v_argmax: list
    u_max: float
    v_max: float
    offset: float           # |x_u - x_v| / eps
    V_at_umax: float
    interior: bool          # argmax strictly inside the inner region ring


@dataclass
class ConcentrationReport:
    wells: list
    spurious: list          # (location, amplitude) outside the well union
    flagged: list = dfield(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "wells": [w.__dict__ for w in self.wells],
            "spurious": [{"location": loc, "amplitude": amp} for loc, amp in self.spurious],
            "flagged": self.flagged,
        }


def _local_maxima(values: np.ndarray) -> np.ndarray:
    """Strict local maxima against all axis neighbors (Dirichlet ghosts)."""
    padded = np.pad(values, 1, constant_values=-np.inf)
    mask = np.ones(values.shape, dtype=bool)
    d = values.ndim
    for ax in range(d):
        lo = [slice(1, -1)] * d
        hi = [slice(1, -1)] * d
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        mask &= values > padded[tuple(lo)]
        mask &= values > padded[tuple(hi)]
    return mask


def find_maxima(
    pair: PairField, potential, eps: float, spurious_floor: float = 1e-3
) -> ConcentrationReport:
    """Per-well argmax of both components plus a spurious-maxima scan outside."""
    grid = pair.grid
    pts = grid.coordinates()
    Vv = potential.values.values
    wells_out = []
    flagged = []
    for i, w in enumerate(potential.wells):
        m = w.inner_mask
        entries = []
        for vals in (pair.u.values, pair.v.values):
            masked = np.where(m, vals, -np.inf)
            k = np.unravel_index(int(np.argmax(masked)), grid.shape)
            entries.append((k, float(vals[k])))
        (ku, umax), (kv, vmax) = entries
        xu = pts[ku]
        xv = pts[kv]
        ring = w.boundary_mask
        # interior means not adjacent to the discrete inner boundary
        interior = not (ring[ku] or ring[kv])
        lm = _local_maxima(pair.u.values) | _local_maxima(pair.v.values)
        if not np.any(lm & m):
            flagged.append(f"well {i}: no interior local maximum (not concentrated?)")
            interior = False
        wells_out.append(
            WellMaxima(
                index=i,
                u_argmax=[float(x) for x in np.atleast_1d(xu)],
                v_argmax=[float(x) for x in np.atleast_1d(xv)],
                u_max=umax,
                v_max=vmax,
                offset=float(np.linalg.norm(np.atleast_1d(xu) - np.atleast_1d(xv)) / eps),
                V_at_umax=float(Vv[ku]),
                interior=interior,
            )
        )
    union = potential.indicator_inner()
    spurious = []
    for vals in (pair.u.values, pair.v.values):
        cand = _local_maxima(vals) & ~union & (vals > spurious_floor)
        for k in zip(*np.nonzero(cand)):
            spurious.append(([float(x) for x in np.atleast_1d(pts[k])], float(vals[k])))
    return ConcentrationReport(wells=wells_out, spurious=spurious, flagged=flagged)


@dataclass
class ModificationReport:
    sup_outside: float
    cap_radius: float
    passed: bool
    modified_residual: float
    unmodified_residual: float | None
    residual_gap: float | None
    witness: list | None = None

    def to_dict(self) -> dict:
        return {
            "sup_outside": self.sup_outside,
            "cap_radius": self.cap_radius,
            "passed": self.passed,
            "modified_residual": self.modified_residual,
            "unmodified_residual": self.unmodified_residual,
            "residual_gap": self.residual_gap,
            "witness": self.witness,
        }


def modification_check(
    pair: PairField, potential, eps: float, params: CouplingParams
) -> ModificationReport:
    """Check that the pair never reaches the cap radius outside the wells.

    On pass, the unmodified residual is evaluated too; it must equal the
    modified one to round-off, certifying that the pair solves the original
    (uncapped) system.
    """
    grid = pair.grid
    union = potential.indicator_inner()
    rho = np.sqrt(pair.u.values**2 + pair.v.values**2)
    outside = np.where(union, 0.0, rho)
    sup = float(np.max(outside))
    passed = sup < params.mod_radius
    witness = None
    if not passed:
        k = np.unravel_index(int(np.argmax(outside)), grid.shape)
        witness = [float(x) for x in np.atleast_1d(grid.coordinates()[k])]
    mod_res = pairing_norm(gradient_residual(pair, potential, eps, params))
    unmod_res = None
    gap = None
    if passed:
        unmod_res = pairing_norm(gradient_residual(pair, potential, eps, params.unmodified()))
        gap = abs(unmod_res - mod_res)
    return ModificationReport(
        sup_outside=sup,
        cap_radius=params.mod_radius,
        passed=passed,
        modified_residual=mod_res,
        unmodified_residual=unmod_res,
        residual_gap=gap,
        witness=witness,
    )


@dataclass
class LocalizationReport:
    per_well_gap: list
    total_gap: float
    exterior_fraction: float
    per_well_energy: list
    total_energy: float
    targets: list

    def to_dict(self) -> dict:
        return {
            "per_well_gap": self.per_well_gap,
            "total_gap": self.total_gap,
            "exterior_fraction": self.exterior_fraction,
            "per_well_energy": self.per_well_energy,
            "total_energy": self.total_energy,
            "targets": self.targets,
        }


def energy_localization(
    pair: PairField, potential, eps: float, params: CouplingParams, c_targets: list
) -> LocalizationReport:
    """Per-well energies against eps^d-scaled ground-state levels."""
    grid = pair.grid
    d = grid.dimension
    bd = total_energy(pair, potential, eps, params)
    if len(c_targets) != len(bd.per_well):
        raise ValueError(f"{len(c_targets)} targets for {len(bd.per_well)} wells")
    per_gap = [
        abs(jw / eps**d - ci) / ci for jw, ci in zip(bd.per_well, c_targets)
    ]
    total_target = float(np.sum(c_targets))
    total_gap = abs(bd.total / eps**d - total_target) / total_target
    exterior_fraction = abs(bd.exterior) / abs(bd.total) if bd.total != 0 else np.inf
    return LocalizationReport(
        per_well_gap=[float(g) for g in per_gap],
        total_gap=float(total_gap),
        exterior_fraction=float(exterior_fraction),
        per_well_energy=[float(x) for x in bd.per_well],
        total_energy=float(bd.total),
        targets=[float(c) for c in c_targets],
    )


def strictly_decreasing(seq) -> bool:
    return all(b < a for a, b in zip(seq, seq[1:]))
