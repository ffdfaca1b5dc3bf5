"""Truncated-box grids, scalar fields, and the weighted energy inner product.

The unbounded domain is truncated to the box [-L, L]^d with homogeneous
Dirichlet values outside; solutions of interest decay exponentially, so the
truncation error is controlled by placing wells a few decay lengths from the
boundary.  All differential operators are second-order central stencils with
zero ghost values, and all integrals are trapezoidal quadrature on the grid.

Sign/weight conventions used throughout the package:

* ``cross_gradient(u, w)`` is the edge-midpoint quadrature of grad(u).grad(w),
  which satisfies the exact summation-by-parts identity
  ``cross_gradient(u, w) == -sum(u * laplacian(w)) * dx**d`` for fields that
  vanish on the boundary.  This makes the strong-form residual the exact
  gradient of the discrete energy in the L2 pairing.
* ``quadrature(f)`` uses trapezoid weights (boundary nodes halved).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

# Refuse grids that would not fit a desktop memory budget.
MAX_POINTS = 2**24


class GridError(ValueError):
    """Invalid grid construction or mismatched grids in a binary operation."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on the box [-L, L]^d, d in {1, 2, 3}.

    ``n`` points per axis, odd so the origin is a grid point; spacing
    dx = 2L/(n-1).
    """

    dimension: int
    half_extent: float
    points_per_axis: int

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.half_extent <= 0:
            raise GridError(f"half_extent must be positive, got {self.half_extent}")
        n = self.points_per_axis
        if n < 3 or n % 2 == 0:
            raise GridError(f"points_per_axis must be odd and >= 3, got {n}")
        if n**self.dimension > MAX_POINTS:
            raise GridError(f"{n}^{self.dimension} grid points exceed the memory budget")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_extent / (self.points_per_axis - 1)

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dimension

    @property
    def npoints(self) -> int:
        return self.points_per_axis**self.dimension

    def axis(self) -> np.ndarray:
        """Coordinates along one axis: x_j = -L + j*dx (origin included)."""
        return _axis(self)

    def coordinates(self) -> np.ndarray:
        """Array of shape ``shape + (d,)`` with the point coordinates."""
        return _coordinates(self)

    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights, shape ``shape``."""
        return _weights(self)

    def interior(self) -> np.ndarray:
        """Boolean mask of non-boundary nodes."""
        return _interior(self)


def build_grid(dimension: int, half_extent: float, points_per_axis: int) -> GridSpec:
    return GridSpec(dimension, float(half_extent), int(points_per_axis))


@functools.lru_cache(maxsize=64)
def _axis(grid: GridSpec) -> np.ndarray:
    x = np.linspace(-grid.half_extent, grid.half_extent, grid.points_per_axis)
    x[grid.points_per_axis // 2] = 0.0  # exact origin, immune to round-off
    x.flags.writeable = False
    return x


@functools.lru_cache(maxsize=64)
def _coordinates(grid: GridSpec) -> np.ndarray:
    axes = np.meshgrid(*[_axis(grid)] * grid.dimension, indexing="ij")
    pts = np.stack(axes, axis=-1)
    pts.flags.writeable = False
    return pts


@functools.lru_cache(maxsize=64)
def _weights(grid: GridSpec) -> np.ndarray:
    one = np.ones(grid.points_per_axis)
    one[0] = one[-1] = 0.5
    w = np.ones(grid.shape)
    for ax in range(grid.dimension):
        sh = [1] * grid.dimension
        sh[ax] = grid.points_per_axis
        w = w * one.reshape(sh)
    w *= grid.dx**grid.dimension
    w.flags.writeable = False
    return w


@functools.lru_cache(maxsize=64)
def _interior(grid: GridSpec) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    mask[(slice(1, -1),) * grid.dimension] = True
    mask.flags.writeable = False
    return mask


@dataclass
class Field:
    """A real scalar function sampled on a grid.

    Treated as an immutable value: operations return new fields.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise GridError("field contains non-finite values")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


def zeros(grid: GridSpec) -> Field:
    return Field(grid, np.zeros(grid.shape))


def same_grid(*fields) -> GridSpec:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridError("fields live on different grids")
    return grid


@dataclass
class PairField:
    """A candidate solution pair (u, v) on a common grid."""

    u: Field
    v: Field

    def __post_init__(self):
        same_grid(self.u, self.v)

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    def copy(self) -> "PairField":
        return PairField(self.u.copy(), self.v.copy())


def pair_of(grid: GridSpec, u_values: np.ndarray, v_values: np.ndarray) -> PairField:
    return PairField(Field(grid, u_values), Field(grid, v_values))


def apply_dirichlet(values: np.ndarray) -> np.ndarray:
    """Zero the boundary layer of an array (in place) and return it."""
    d = values.ndim
    for ax in range(d):
        sl0 = [slice(None)] * d
        sl0[ax] = 0
        values[tuple(sl0)] = 0.0
        sl0[ax] = -1
        values[tuple(sl0)] = 0.0
    return values


# ---------------------------------------------------------------------------
# differential operators and quadratures
# ---------------------------------------------------------------------------

def laplacian_values(grid: GridSpec, vals: np.ndarray) -> np.ndarray:
    """Second-order central Laplacian with homogeneous Dirichlet ghosts."""
    d = grid.dimension
    padded = np.pad(vals, 1)
    out = -2.0 * d * vals
    for ax in range(d):
        lo = [slice(1, -1)] * d
        hi = [slice(1, -1)] * d
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        out = out + padded[tuple(lo)] + padded[tuple(hi)]
    return out / grid.dx**2


def laplacian_apply(f: Field) -> Field:
    return Field(f.grid, laplacian_values(f.grid, f.values))


def quadrature(grid: GridSpec, integrand: np.ndarray) -> float:
    """Trapezoid quadrature of a nodal integrand."""
    return float(np.sum(grid.weights() * integrand))


def cross_gradient(u: Field, w: Field) -> float:
    """Edge-midpoint quadrature of grad(u).grad(w) with Dirichlet ghosts."""
    grid = same_grid(u, w)
    d = grid.dimension
    scale = grid.dx ** (d - 2)
    total = 0.0
    for ax in range(d):
        du = np.diff(np.pad(u.values, _pad_axis(d, ax)), axis=ax)
        dw = np.diff(np.pad(w.values, _pad_axis(d, ax)), axis=ax)
        total += float(np.sum(du * dw))
    return total * scale


def _pad_axis(d: int, ax: int):
    pad = [(0, 0)] * d
    pad[ax] = (1, 1)
    return pad


def central_gradient(f: Field) -> list:
    """Per-axis central differences with Dirichlet ghosts (nodal gradient)."""
    grid = f.grid
    d = grid.dimension
    padded = np.pad(f.values, 1)
    comps = []
    for ax in range(d):
        lo = [slice(1, -1)] * d
        hi = [slice(1, -1)] * d
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        comps.append((padded[tuple(hi)] - padded[tuple(lo)]) / (2.0 * grid.dx))
    return comps


def coefficient_values(V, grid: GridSpec) -> np.ndarray:
    """Accept a Potential, Field, array, or scalar as a coefficient on ``grid``."""
    if hasattr(V, "values") and isinstance(getattr(V, "values"), Field):
        field = V.values
        if field.grid != grid:
            raise GridError("potential lives on a different grid")
        return field.values
    if isinstance(V, Field):
        if V.grid != grid:
            raise GridError("coefficient field lives on a different grid")
        return V.values
    if np.isscalar(V):
        return np.full(grid.shape, float(V))
    arr = np.asarray(V, dtype=float)
    if arr.shape != grid.shape:
        raise GridError("coefficient array shape does not match grid")
    return arr


def inner_eps(u: Field, w: Field, V, eps: float) -> float:
    """The weighted scalar product: integral of eps^2 grad(u).grad(w) + V u w."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    grid = same_grid(u, w)
    Vv = coefficient_values(V, grid)
    return eps**2 * cross_gradient(u, w) + quadrature(grid, Vv * u.values * w.values)


def norm_eps_sq(pair: PairField, V, eps: float) -> float:
    """Squared pair norm: |u|_eps^2 + |v|_eps^2 (positive for nonzero pairs)."""
    return inner_eps(pair.u, pair.u, V, eps) + inner_eps(pair.v, pair.v, V, eps)


def norm_eps(pair: PairField, V, eps: float) -> float:
    return float(np.sqrt(max(norm_eps_sq(pair, V, eps), 0.0)))


def l2_pairing(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> float:
    """The duality pairing all residuals are measured in: trapezoid L2."""
    return float(np.sum(grid.weights() * a * b))


# ---------------------------------------------------------------------------
# interpolation (ansatz rescaling and warm starts)
# ---------------------------------------------------------------------------

def sample_at(src: Field, points: np.ndarray) -> np.ndarray:
    """Linear interpolation of ``src`` at arbitrary points; 0 outside its box."""
    from scipy.interpolate import RegularGridInterpolator

    grid = src.grid
    axes = [grid.axis()] * grid.dimension
    interp = RegularGridInterpolator(
        axes, src.values, method="linear", bounds_error=False, fill_value=0.0
    )
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, grid.dimension)
    return interp(flat).reshape(pts.shape[:-1])


def rescale_profile(src: Field, grid: GridSpec, center: np.ndarray, eps: float) -> Field:
    """Evaluate ``src((x - center)/eps)`` on ``grid`` (spike ansatz rescaling)."""
    pts = (grid.coordinates() - np.asarray(center, dtype=float)) / eps
    vals = sample_at(src, pts)
    return Field(grid, apply_dirichlet(vals))


def rescale_about(src: Field, grid: GridSpec, center: np.ndarray, ratio: float) -> Field:
    """Evaluate ``src(center + (x - center)*ratio)`` on ``grid`` (warm starts)."""
    c = np.asarray(center, dtype=float)
    pts = c + (grid.coordinates() - c) * ratio
    vals = sample_at(src, pts)
    return Field(grid, apply_dirichlet(vals))


# ---------------------------------------------------------------------------
# field persistence: "NNLS1 d n L" header + row-major float64, little-endian
# ---------------------------------------------------------------------------

def write_field(path, f: Field) -> None:
    grid = f.grid
    header = f"NNLS1 {grid.dimension} {grid.points_per_axis} {grid.half_extent!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 4 or header[0] != "NNLS1":
            raise ValueError(f"{path}: not an NNLS1 field dump")
        d, n, L = int(header[1]), int(header[2]), float(header[3])
        grid = GridSpec(d, L, n)
        raw = fh.read(8 * grid.npoints)
        vals = np.frombuffer(raw, dtype="<f8", count=grid.npoints).reshape(grid.shape)
    return Field(grid, vals.copy())


def write_field_csv(path, f: Field) -> None:
    """CSV alternative for d=1: columns x, value."""
    if f.grid.dimension != 1:
        raise ValueError("CSV field dumps are only defined for d=1")
    data = np.column_stack([f.grid.axis(), f.values])
    np.savetxt(path, data, delimiter=",", header="x,value", comments="")
