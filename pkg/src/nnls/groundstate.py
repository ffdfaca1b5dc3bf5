"""Constant-potential ground states and their energy levels.

For constant V = lambda at unit scale the manifold machinery degenerates to
the classical scaling condition (the synthetic well covers the whole box, so
its cutoff is identically 1), and the minimized energy estimates the ground
state level c(lambda).  The estimate is an upper bound on the true infimum
over nontrivial critical points; several starts are run and the lowest
converged energy kept.

When the two exponents agree, substituting u = v = w reduces the system to
the scalar equation -w'' + lambda w = 3p w^(2p-1) in one dimension, whose
positive even solution is the closed-form sech power used as an independent
oracle for both the profile and the level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .coupling import CouplingParams
from .energy import constant_energy, gradient_residual, pairing_norm
from .grids import Field, GridSpec, PairField, apply_dirichlet
from .manifold import (
    NehariError,
    SolveOptions,
    Solution,
    minimize_on_nehari,
    project_to_nehari,
)
from .potentials import constant_potential
from .reduction import ReductionError

log = logging.getLogger("nnls")

# The eps^4 membership floor is an eps -> 0 device; at unit scale it is
# replaced by a tiny positive floor that still excludes the zero pair.
GROUND_STATE_MASS_FLOOR = 1e-8


@dataclass
class GroundState:
    lam: float
    pair: PairField
    level: float
    residual_norm: float
    method: str

    def to_row(self) -> dict:
        return {
            "lambda": self.lam,
            "level": self.level,
            "residual": self.residual_norm,
            "method": self.method,
        }


def explicit_scalar_solution(lam: float, p: float, grid: GridSpec) -> Field:
    """Closed-form positive even solution of -w'' + lam w = 3p w^(2p-1), d=1.

    w(x) = (lam (s+1) / (2K))^(1/(s-1)) sech^(2/(s-1))(sqrt(lam) (s-1) x / 2)
    with s = 2p - 1 and K = 3p; this is the diagonal reduction of the system
    when the two exponents coincide.
    """
    if grid.dimension != 1:
        raise ValueError("the explicit profile is one-dimensional only")
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    s = 2.0 * p - 1.0
    K = 3.0 * p
    amp = (lam * (s + 1.0) / (2.0 * K)) ** (1.0 / (s - 1.0))
    rate = np.sqrt(lam) * (s - 1.0) / 2.0
    x = grid.axis()
    vals = amp * np.cosh(rate * x) ** (-2.0 / (s - 1.0))
    return Field(grid, apply_dirichlet(vals))


def explicit_ground_state(lam: float, params: CouplingParams, grid: GridSpec) -> GroundState:
    """Diagonal pair built from the closed form, tagged as the oracle."""
    if params.p != params.q:
        raise ValueError("the explicit oracle requires p == q")
    w = explicit_scalar_solution(lam, params.p, grid)
    pair = PairField(w, w.copy())
    level = constant_energy(pair, lam, params)
    residual = pairing_norm(gradient_residual(pair, float(lam), 1.0, params.unmodified()))
    return GroundState(lam, pair, level, residual, method="explicit-oracle")


def _gaussian_pair(grid: GridSpec, rng: np.random.Generator) -> PairField:
    pts = grid.coordinates()
    r2 = np.sum(pts**2, axis=-1)
    fields = []
    for _ in range(2):
        amp = rng.uniform(0.45, 1.1)
        width = rng.uniform(0.8, 1.6)
        fields.append(Field(grid, apply_dirichlet(amp * np.exp(-r2 / (2.0 * width**2)))))
    return PairField(*fields)


def compute_ground_state(
    lam: float,
    params: CouplingParams,
    grid: GridSpec,
    tol: float = 1e-7,
    n_starts: int = 3,
    seed: int = 0,
    opts: SolveOptions | None = None,
) -> GroundState:
    """Minimize the constant-potential functional over the degenerate manifold.

    The first seed is the diagonal closed-form profile when it exists (one
    dimension, equal exponents) and a diagonal Gaussian bump otherwise; the
    remaining starts are random bump pairs.  The lowest converged energy is
    returned (ties resolved toward the earlier seed).
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    V = constant_potential(lam, grid)
    params_un = params.unmodified()
    if opts is None:
        opts = SolveOptions(tol=tol)
    else:
        opts.tol = tol
    opts.mass_floor = GROUND_STATE_MASS_FLOOR

    rng = np.random.default_rng(seed)
    seeds = []
    if grid.dimension == 1 and params.p == params.q:
        w = explicit_scalar_solution(lam, params.p, grid)
        seeds.append(PairField(w, w.copy()))
    else:
        pts = grid.coordinates()
        r2 = np.sum(pts**2, axis=-1)
        bump = Field(grid, apply_dirichlet(0.8 * np.exp(-r2 / 2.0)))
        seeds.append(PairField(bump, bump.copy()))
    while len(seeds) < n_starts:
        seeds.append(_gaussian_pair(grid, rng))

    best: Solution | None = None
    failures = []
    for idx, seed_pair in enumerate(seeds):
        try:
            member = project_to_nehari(seed_pair, V, 1.0, params_un, opts=opts)
            sol = minimize_on_nehari(member, V, 1.0, params_un, opts=opts)
        except (NehariError, ReductionError) as exc:
            log.warning("ground state start %d failed: %s", idx, exc)
            failures.append(str(exc))
            continue
        if best is None or sol.energy.total < best.energy.total - 1e-12:
            best = sol
    if best is None:
        raise NehariError(
            f"all {len(seeds)} ground-state starts failed at lambda={lam:g}: {failures}"
        )
    level = best.energy.total
    if level <= 0:
        log.warning("ground state level %.3g is not positive at lambda=%g", level, lam)
    return GroundState(
        lam=float(lam),
        pair=best.pair,
        level=float(level),
        residual_norm=best.residual_norm,
        method="nehari-diagonal",
    )


@dataclass
class MonotonicityReport:
    lams: list
    levels: list
    margins: list
    passed: bool
    violation: tuple | None = None

    def to_dict(self) -> dict:
        return {
            "lambda": self.lams,
            "levels": self.levels,
            "margins": self.margins,
            "passed": self.passed,
            "violation": self.violation,
        }


def check_c_monotonicity(levels: list) -> MonotonicityReport:
    """Assert strict increase of the ground-state level along lambda.

    ``levels`` is a list of (lambda, c) with at least three distinct lambdas;
    duplicated lambdas are rejected outright.
    """
    if len(levels) < 3:
        raise ValueError("need at least three (lambda, level) entries")
    lams = [float(l) for l, _ in levels]
    if len(set(lams)) != len(lams):
        raise ValueError("duplicated lambda entries")
    order = np.argsort(lams)
    lams_sorted = [lams[i] for i in order]
    cs = [float(levels[i][1]) for i in order]
    margins = [cs[i + 1] - cs[i] for i in range(len(cs) - 1)]
    violation = None
    for i, m in enumerate(margins):
        if m <= 0:
            violation = (lams_sorted[i], lams_sorted[i + 1])
            break
    return MonotonicityReport(
        lams=lams_sorted,
        levels=cs,
        margins=margins,
        passed=violation is None,
        violation=violation,
    )
