"""Trapping potentials, well geometry, and smooth cutoff functions.

A well is a triple of nested regions (inner, middle, outer) around a strict
local minimizer of V; the cutoff is 1 on the inner region, 0 outside the
middle one, with a C^2 quintic ramp across the transition.  Wells of distinct
minima must be mutually disjoint (outer regions included).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np
from scipy import ndimage

from .grids import Field, GridSpec


class PotentialError(ValueError):
    """Well geometry or potential hypothesis violation."""


@dataclass(frozen=True)
class Region:
    """Axis-aligned box (sup-norm) or ball (Euclidean) around a center."""

    kind: str  # "box" | "ball"
    center: tuple
    radius: float

    def __post_init__(self):
        if self.kind not in ("box", "ball"):
            raise PotentialError(f"unknown region kind {self.kind!r}")
        if self.radius <= 0:
            raise PotentialError("region radius must be positive")

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Distance from the center in the region's own norm."""
        delta = points - np.asarray(self.center, dtype=float)
        if self.kind == "box":
            return np.max(np.abs(delta), axis=-1)
        return np.sqrt(np.sum(delta**2, axis=-1))

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.distance(points) < self.radius


@dataclass
class WellSpec:
    """Nested regions, cutoff, and grid masks for one potential well."""

    center: np.ndarray
    inner: Region
    middle: Region
    outer: Region
    cutoff: Field | None = None
    inner_mask: np.ndarray | None = None
    middle_mask: np.ndarray | None = None
    outer_mask: np.ndarray | None = None
    boundary_mask: np.ndarray | None = None  # nodes adjacent to inner from outside

    def bind(self, grid: GridSpec) -> "WellSpec":
        """Attach grid masks and the cutoff field."""
        pts = grid.coordinates()
        self.inner_mask = self.inner.contains(pts)
        self.middle_mask = self.middle.contains(pts)
        self.outer_mask = self.outer.contains(pts)
        dilated = ndimage.binary_dilation(self.inner_mask)
        self.boundary_mask = dilated & ~self.inner_mask
        self.cutoff = build_cutoff(self, grid)
        return self


def well(center, inner: float, middle: float, outer: float, kind: str = "box") -> WellSpec:
    """Convenience constructor; radii must strictly nest."""
    c = tuple(np.atleast_1d(np.asarray(center, dtype=float)))
    if not (0 < inner < middle < outer):
        raise PotentialError(f"well radii must nest: {inner} < {middle} < {outer}")
    return WellSpec(
        center=np.asarray(c),
        inner=Region(kind, c, inner),
        middle=Region(kind, c, middle),
        outer=Region(kind, c, outer),
    )


def full_box_well(grid: GridSpec) -> WellSpec:
    """Synthetic single well covering the whole box (constant-potential solves).

    Its cutoff is identically 1 and all region masks are all-true; the nesting
    invariants of a genuine well do not apply.
    """
    c = (0.0,) * grid.dimension
    r = 2.0 * grid.half_extent + 1.0
    w = WellSpec(
        center=np.zeros(grid.dimension),
        inner=Region("box", c, r),
        middle=Region("box", c, r + 1.0),
        outer=Region("box", c, r + 2.0),
    )
    ones = np.ones(grid.shape, dtype=bool)
    w.inner_mask = ones
    w.middle_mask = ones.copy()
    w.outer_mask = ones.copy()
    w.boundary_mask = np.zeros(grid.shape, dtype=bool)
    w.cutoff = Field(grid, np.ones(grid.shape))
    return w


def quintic_ramp(x: np.ndarray) -> np.ndarray:
    """C^2 smoothstep: 0 for x<=0, 1 for x>=1, 6x^5-15x^4+10x^3 between."""
    t = np.clip(x, 0.0, 1.0)
    return t**3 * (10.0 + t * (-15.0 + 6.0 * t))


def build_cutoff(w: WellSpec, grid: GridSpec) -> Field:
    """Cutoff = 1 on the inner region, 0 outside the middle region.

    Box wells use a product of per-axis ramps (C^2 at edges and corners);
    ball wells use a single radial ramp.
    """
    width = w.middle.radius - w.inner.radius
    if width < 3.0 * grid.dx:
        raise PotentialError(
            f"cutoff transition {width:g} thinner than 3 grid cells ({3 * grid.dx:g})"
        )
    pts = grid.coordinates()
    if w.inner.kind == "box":
        vals = np.ones(grid.shape)
        for ax in range(grid.dimension):
            r = np.abs(pts[..., ax] - w.center[ax])
            vals = vals * (1.0 - quintic_ramp((r - w.inner.radius) / width))
    else:
        r = w.inner.distance(pts)
        vals = 1.0 - quintic_ramp((r - w.inner.radius) / width)
    return Field(grid, vals)


@dataclass
class Potential:
    """Sampled potential with its infimum and well geometry."""

    values: Field
    alpha: float
    wells: list = dfield(default_factory=list)

    @property
    def grid(self) -> GridSpec:
        return self.values.grid

    def indicator_inner(self) -> np.ndarray:
        """Sharp indicator of the union of inner well regions."""
        mask = np.zeros(self.grid.shape, dtype=bool)
        for w in self.wells:
            mask |= w.inner_mask
        return mask

    def minima(self) -> list:
        return [w.center for w in self.wells]


def _check_separation(wells: list) -> None:
    for i in range(len(wells)):
        for j in range(i + 1, len(wells)):
            a, b = wells[i], wells[j]
            delta = np.asarray(a.center) - np.asarray(b.center)
            if a.outer.kind == b.outer.kind == "box":
                dist = np.max(np.abs(delta))
            else:
                dist = np.sqrt(np.sum(delta**2))
            if dist <= a.outer.radius + b.outer.radius:
                raise PotentialError(f"wells {i} and {j} overlap (outer regions)")


def _check_geometry(wells: list, grid: GridSpec) -> None:
    margin = 2.0 * grid.dx
    for i, w in enumerate(wells):
        if w.middle.radius + margin > w.outer.radius:
            raise PotentialError(
                f"well {i}: middle/outer gap below 2 grid cells"
            )
        reach = np.max(np.abs(np.asarray(w.center))) + w.outer.radius
        if reach > grid.half_extent:
            raise PotentialError(f"well {i}: outer region leaves the box")
    _check_separation(wells)


def _paper_values(grid: GridSpec, centers: list) -> np.ndarray:
    pts = grid.coordinates()
    dist = None
    for c in centers:
        d = np.sqrt(np.sum((pts - np.asarray(c, dtype=float)) ** 2, axis=-1))
        dist = d if dist is None else np.minimum(dist, d)
    return (1.0 + dist) ** 2


def build_potential(kind: str, wells: list, grid: GridSpec, value: float = 1.0) -> Potential:
    """Sample V on the grid, bind wells, and validate the hypotheses.

    kinds: "paper" -> V(x) = (1 + min_i |x - x_i|)^2 with minima at the well
    centers; "constant" -> V = value everywhere (fails the strict-minimum
    check whenever genuine wells are declared).
    """
    if not wells:
        raise PotentialError("at least one well is required")
    _check_geometry(wells, grid)
    if kind == "paper":
        vals = _paper_values(grid, [w.center for w in wells])
    elif kind == "constant":
        vals = np.full(grid.shape, float(value))
    else:
        raise PotentialError(f"unknown potential kind {kind!r}")
    return _assemble(vals, wells, grid, validate_minima=True)


def _assemble(vals: np.ndarray, wells: list, grid: GridSpec, validate_minima: bool) -> Potential:
    alpha = float(np.min(vals))
    if alpha <= 0:
        raise PotentialError(f"inf V = {alpha:g} is not positive")
    pot = Potential(values=Field(grid, vals), alpha=alpha, wells=[w.bind(grid) for w in wells])
    if validate_minima:
        for i, w in enumerate(pot.wells):
            inside = vals[w.inner_mask]
            ring = vals[w.boundary_mask]
            if ring.size == 0 or inside.size == 0:
                raise PotentialError(f"well {i}: inner region resolves to no grid nodes")
            if not (inside.min() < ring.min()):
                raise PotentialError(
                    f"well {i}: no strict local minimum "
                    f"(min inside {inside.min():g} vs boundary {ring.min():g})"
                )
    return pot


def constant_potential(lam: float, grid: GridSpec) -> Potential:
    """Constant V = lam with the synthetic full-box well (ground-state solves).

    Bypasses the strict-minimum check, which a constant cannot satisfy.
    """
    if lam <= 0:
        raise PotentialError(f"constant potential must be positive, got {lam}")
    vals = np.full(grid.shape, float(lam))
    pot = Potential(values=Field(grid, vals), alpha=float(lam), wells=[full_box_well(grid)])
    return pot


def growth_exponent(pot: Potential) -> float:
    """Fitted exponent of V against (1 + |x|) over the outer radius decile.

    Sanity surrogate for polynomial growth; the reverse-Hoelder membership of
    the continuum hypothesis has no finite-dimensional counterpart.
    """
    grid = pot.grid
    pts = grid.coordinates()
    r = np.sqrt(np.sum(pts**2, axis=-1)).ravel()
    v = pot.values.values.ravel()
    sel = r >= 0.9 * r.max()
    x = np.log1p(r[sel])
    y = np.log(np.maximum(v[sel], 1e-300))
    if np.ptp(x) < 1e-12:
        return float("nan")
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


def cutoff_sum(pot: Potential) -> np.ndarray:
    total = np.zeros(pot.grid.shape)
    for w in pot.wells:
        total += w.cutoff.values
    return total
