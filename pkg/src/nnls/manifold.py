"""The generalized Nehari manifold: ansatz, scale solve, projection, descent.

A pair belongs to the manifold when (1) it is stationary along every
antisymmetric direction, (2) the k well-scale derivatives along the
cutoff-masked pair directions vanish, and (3) each inner well region carries
squared mass above eps^4.  Members are produced by alternating the inner
reduction with a bracketed root solve for the per-well amplitudes t in
[0, 2]^k (the sign bracket at the box walls is verified explicitly, in the
spirit of the Poincare-Miranda argument the construction rests on).

The constrained minimization walks the manifold by damped descent: step the
pair along the Riesz representative of the residual in the weighted inner
product, re-project, and accept under an Armijo decrease of the energy.  At
the constrained minimum the full residual vanishes, so the stopping rule is
the plain residual norm.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dfield

import numpy as np

from .coupling import CouplingParams
from .energy import (
    EnergyBreakdown,
    energy_value,
    gradient_residual,
    pairing,
    pairing_norm,
    total_energy,
)
from .grids import (
    Field,
    PairField,
    apply_dirichlet,
    central_gradient,
    norm_eps_sq,
    rescale_profile,
)
from .reduction import ReductionError, ReductionResult, reduce_pair
from .solvers import EllipticOperator

log = logging.getLogger("nnls")


class NehariError(RuntimeError):
    pass


class ScaleSolveError(NehariError):
    pass


class DescentError(NehariError):
    pass


@dataclass
class SolveOptions:
    tol: float = 1e-7              # full residual, trapezoid-L2 pairing norm
    max_outer: int = 800
    armijo: float = 1e-4
    max_backtracks: int = 20
    reduce_tol: float = 1e-9
    reduce_max_iters: int = 50
    scale_rtol: float = 1e-8       # |theta_i| <= scale_rtol * eps^d
    scale_max_evals: int = 100
    stagnation_steps: int = 10
    stagnation_drop: float = 1e-14
    mass_floor: float | None = None  # None: the eps^4 membership floor

    def scale_tol(self, eps: float, dimension: int) -> float:
        return self.scale_rtol * eps**dimension

    def floor(self, eps: float) -> float:
        return eps**4 if self.mass_floor is None else self.mass_floor


@dataclass
class NehariState:
    """Manifold membership certificate for a pair."""

    pair: PairField
    t: np.ndarray
    psi: Field
    scale_residuals: np.ndarray
    hminus_residual: float
    mass_margins: np.ndarray

    def to_dict(self) -> dict:
        return {
            "t": [float(x) for x in self.t],
            "scale_residuals": [float(x) for x in self.scale_residuals],
            "hminus_residual": float(self.hminus_residual),
            "mass_margins": [float(x) for x in self.mass_margins],
        }


@dataclass
class Solution:
    pair: PairField
    energy: EnergyBreakdown
    residual_norm: float
    nehari: NehariState
    iterations: int


def build_ansatz(ground_pairs: list, potential, eps: float) -> PairField:
    """Cutoff-masked, eps-rescaled ground-state profiles, one per well.

    ``ground_pairs[i]`` is the reference pair at unit scale; the ansatz sums
    phi_i(x) * g((x - x_i)/eps) over the wells.  Warns when a profile has not
    decayed below 1e-8 where its cutoff mask starts to bite.
    """
    grid = potential.grid
    wells = potential.wells
    if len(ground_pairs) != len(wells):
        raise NehariError(f"{len(ground_pairs)} profiles for {len(wells)} wells")
    u = np.zeros(grid.shape)
    v = np.zeros(grid.shape)
    for i, (w, gp) in enumerate(zip(wells, ground_pairs)):
        ru = rescale_profile(gp.u, grid, w.center, eps).values
        rv = rescale_profile(gp.v, grid, w.center, eps).values
        masked = w.cutoff.values < 1e-12
        edge = max(
            float(np.max(np.abs(ru[masked]), initial=0.0)),
            float(np.max(np.abs(rv[masked]), initial=0.0)),
        )
        if edge > 1e-8:
            log.warning(
                "well %d: profile amplitude %.3g at the cutoff edge (eps=%g)", i, edge, eps
            )
        u += w.cutoff.values * ru
        v += w.cutoff.values * rv
    return PairField(Field(grid, apply_dirichlet(u)), Field(grid, apply_dirichlet(v)))


def _assemble(t: np.ndarray, components: list, exterior: PairField | None) -> PairField:
    grid = components[0].grid
    u = np.zeros(grid.shape)
    v = np.zeros(grid.shape)
    for ti, comp in zip(t, components):
        u += ti * comp.u.values
        v += ti * comp.v.values
    if exterior is not None:
        u += exterior.u.values
        v += exterior.v.values
    return PairField(Field(grid, u), Field(grid, v))


def scale_residual(
    t: np.ndarray,
    components: list,
    V,
    eps: float,
    params: CouplingParams,
    exterior: PairField | None = None,
    psi0: Field | None = None,
    reduce_tol: float = 1e-9,
    reduce_max_iters: int = 50,
):
    """Well-scale derivatives of the energy at the reduced pair.

    Assembles the pair at amplitudes ``t``, applies the inner reduction, and
    returns the k directional derivatives along the cutoff-masked
    (pre-correction) pair directions, together with the reduction result.
    """
    t = np.asarray(t, dtype=float)
    wells = V.wells
    pair = _assemble(t, components, exterior)
    red = reduce_pair(
        pair, V, eps, params, tol=reduce_tol, max_iters=reduce_max_iters, psi0=psi0
    )
    corrected = red.corrected(pair)
    R = gradient_residual(corrected, V, eps, params)
    grid = pair.grid
    w = grid.weights()
    theta = np.empty(len(wells))
    for i, well_i in enumerate(wells):
        phi = well_i.cutoff.values
        theta[i] = float(
            np.sum(w * (R.u.values * phi * pair.u.values + R.v.values * phi * pair.v.values))
        )
    return theta, red


def solve_scales(
    components: list,
    V,
    eps: float,
    params: CouplingParams,
    exterior: PairField | None = None,
    tol: float | None = None,
    opts: SolveOptions | None = None,
    t0: np.ndarray | None = None,
    psi0: Field | None = None,
):
    """Solve the k-dimensional scale system theta(t) = 0 inside [0, 2]^k.

    The sign bracket theta_i(0.2) / theta_i(1.8) (others held at 1) is
    verified first; the orientation is measured, not assumed.  A damped
    finite-difference Newton iteration does the work, falling back to
    per-coordinate bisection on the verified brackets.
    """
    opts = opts or SolveOptions()
    grid = components[0].grid
    if tol is None:
        tol = opts.scale_tol(eps, grid.dimension)
    k = len(components)
    evals = [0]
    psi_cache = [psi0]

    def theta_of(t):
        if evals[0] >= opts.scale_max_evals:
            raise ScaleSolveError(f"scale solve exceeded {opts.scale_max_evals} evaluations")
        evals[0] += 1
        th, red = scale_residual(
            t, components, V, eps, params,
            exterior=exterior, psi0=psi_cache[0],
            reduce_tol=opts.reduce_tol, reduce_max_iters=opts.reduce_max_iters,
        )
        psi_cache[0] = red.psi
        return th, red

    lo_t, hi_t = 0.2, 1.8
    sign_lo = np.empty(k)
    lo = np.full(k, lo_t)
    hi = np.full(k, hi_t)
    for i in range(k):
        tt = np.ones(k)
        tt[i] = lo_t
        th_lo, _ = theta_of(tt)
        tt[i] = hi_t
        th_hi, _ = theta_of(tt)
        if th_lo[i] == 0.0:
            sign_lo[i] = 1.0
            continue
        if np.sign(th_lo[i]) == np.sign(th_hi[i]):
            raise ScaleSolveError(
                f"no sign bracket for well {i} on [0.2, 1.8] "
                f"(theta {th_lo[i]:.3g} / {th_hi[i]:.3g}); "
                "try a smaller eps or a better ground-state input"
            )
        sign_lo[i] = np.sign(th_lo[i])

    t = np.ones(k) if t0 is None else np.clip(np.asarray(t0, dtype=float), 0.05, 1.95)
    theta, red = theta_of(t)
    best = float(np.max(np.abs(theta)))
    while best > tol:
        # refresh brackets from the current signs (exact for k = 1)
        for i in range(k):
            if np.sign(theta[i]) == sign_lo[i]:
                if t[i] < hi[i]:
                    lo[i] = max(lo[i], t[i])
            elif t[i] > lo[i]:
                hi[i] = min(hi[i], t[i])
        h = 1e-5
        Jac = np.empty((k, k))
        for j in range(k):
            tp = t.copy()
            tp[j] += h
            thp, _ = theta_of(tp)
            Jac[:, j] = (thp - theta) / h
        try:
            step = np.linalg.solve(Jac, -theta)
        except np.linalg.LinAlgError:
            step = None
        accepted = False
        if step is not None:
            s = 1.0
            for _ in range(6):
                cand = np.clip(t + s * step, 0.02, 2.0)
                th_c, red_c = theta_of(cand)
                if np.max(np.abs(th_c)) < best:
                    t, theta, red = cand, th_c, red_c
                    best = float(np.max(np.abs(theta)))
                    accepted = True
                    break
                s *= 0.5
        if not accepted:
            cand = 0.5 * (lo + hi)
            th_c, red_c = theta_of(cand)
            t, theta, red = cand, th_c, red_c
            best = float(np.max(np.abs(theta)))
    return t, theta, red


def well_masses(pair: PairField, V) -> np.ndarray:
    grid = pair.grid
    w = grid.weights()
    dens = pair.u.values**2 + pair.v.values**2
    return np.array([float(np.sum((w * dens)[wl.inner_mask])) for wl in V.wells])


def membership_residuals(pair: PairField, V, eps: float, params: CouplingParams):
    """Independent check of the manifold conditions at ``pair`` itself.

    Directional derivatives along (phi_i u, phi_i v) of the pair as it
    stands, and the antisymmetric residual norm; no solver state enters.
    """
    grid = pair.grid
    w = grid.weights()
    R = gradient_residual(pair, V, eps, params)
    theta = np.array(
        [
            float(
                np.sum(
                    w
                    * (
                        R.u.values * wl.cutoff.values * pair.u.values
                        + R.v.values * wl.cutoff.values * pair.v.values
                    )
                )
            )
            for wl in V.wells
        ]
    )
    g = R.u.values - R.v.values
    hminus = float(np.sqrt(np.sum(w * g * g)))
    return theta, hminus


def project_to_nehari(
    pair: PairField,
    V,
    eps: float,
    params: CouplingParams,
    tol: float | None = None,
    opts: SolveOptions | None = None,
    t0: np.ndarray | None = None,
    psi0: Field | None = None,
) -> NehariState:
    """Project a pair onto the manifold by scaling its well components.

    The pair is split into cutoff-masked well components plus the untouched
    remainder; the scale solve and inner reduction then restore membership.
    Fails when any inner region ends up at or below the eps^4 mass floor.
    """
    opts = opts or SolveOptions()
    grid = pair.grid
    masses = well_masses(pair, V)
    if np.any(masses <= 0.0):
        raise NehariError(f"pair carries no mass in wells {np.where(masses <= 0)[0].tolist()}")

    cut_sum = np.zeros(grid.shape)
    components = []
    for wl in V.wells:
        phi = wl.cutoff.values
        cut_sum += phi
        components.append(
            PairField(Field(grid, phi * pair.u.values), Field(grid, phi * pair.v.values))
        )
    rest = np.clip(1.0 - cut_sum, 0.0, 1.0)
    exterior = PairField(
        Field(grid, apply_dirichlet(rest * pair.u.values)),
        Field(grid, apply_dirichlet(rest * pair.v.values)),
    )

    t, _, red = solve_scales(
        components, V, eps, params,
        exterior=exterior, tol=tol, opts=opts, t0=t0, psi0=psi0,
    )
    final = red.corrected(_assemble(t, components, exterior))
    margins = well_masses(final, V) - opts.floor(eps)
    if np.any(margins <= 0.0):
        raise NehariError(
            f"mass condition violated: margins {margins.tolist()} at eps={eps:g}"
        )
    theta_def, hminus = membership_residuals(final, V, eps, params)
    return NehariState(
        pair=final,
        t=t,
        psi=red.psi,
        scale_residuals=theta_def,
        hminus_residual=hminus,
        mass_margins=margins,
    )


def minimize_on_nehari(
    start: NehariState,
    V,
    eps: float,
    params: CouplingParams,
    opts: SolveOptions | None = None,
) -> Solution:
    """Constrained descent to the energy minimizer on the manifold.

    Each iteration steps against the Riesz representative of the residual in
    the weighted inner product (a Sobolev gradient; the raw strong-form
    residual would force mesh-limited steps), re-projects onto the manifold,
    and accepts under the Armijo rule.  Terminates when the full residual
    pairing norm reaches ``opts.tol``; at that point the constrained minimum
    is an unconstrained critical point.
    """
    opts = opts or SolveOptions()
    grid = start.pair.grid
    Vv = V.values.values
    riesz = EllipticOperator(grid, eps**2, Vv)

    state = start
    pair = state.pair
    J_curr = energy_value(pair, V, eps, params)
    stagnant = 0
    iterations = 0
    prev_J = None
    prev_rnorm = None
    while True:
        R = gradient_residual(pair, V, eps, params)
        rnorm = pairing_norm(R)
        if rnorm <= opts.tol:
            break
        # stagnation means progress in neither energy nor residual
        if prev_J is not None:
            if prev_J - J_curr < opts.stagnation_drop and rnorm > 0.999 * prev_rnorm:
                stagnant += 1
                if stagnant >= opts.stagnation_steps:
                    raise DescentError(
                        f"stagnation: energy decrease below {opts.stagnation_drop:g} "
                        f"for {opts.stagnation_steps} steps at residual {rnorm:.3g}"
                    )
            else:
                stagnant = 0
        if iterations >= opts.max_outer:
            raise DescentError(
                f"no convergence in {opts.max_outer} outer iterations "
                f"(residual {rnorm:.3g}, energy {J_curr:.6g})"
            )
        Z = PairField(
            Field(grid, riesz.solve(R.u.values, rtol=1e-10)),
            Field(grid, riesz.solve(R.v.values, rtol=1e-10)),
        )
        slope = -pairing(R, Z)
        noise_floor = 1e-13 * (1.0 + abs(J_curr))
        step = 1.0
        accepted = None
        for _ in range(opts.max_backtracks):
            cand = PairField(
                Field(grid, pair.u.values - step * Z.u.values),
                Field(grid, pair.v.values - step * Z.v.values),
            )
            try:
                proj = project_to_nehari(
                    cand, V, eps, params, opts=opts, t0=np.ones(len(V.wells)),
                )
            except (NehariError, ReductionError) as exc:
                log.debug("projection failed at step %.3g: %s", step, exc)
                step *= 0.5
                continue
            J_new = energy_value(proj.pair, V, eps, params)
            if J_new <= J_curr + opts.armijo * step * slope:
                accepted = (proj, J_new)
                break
            if -opts.armijo * step * slope < noise_floor and J_new <= J_curr + noise_floor:
                # the predicted decrease is below energy round-off: accept on
                # residual progress instead
                rn_new = pairing_norm(gradient_residual(proj.pair, V, eps, params))
                if rn_new < rnorm:
                    accepted = (proj, J_new)
                    break
            step *= 0.5
        if accepted is None:
            raise DescentError(
                f"membership lost: no acceptable step after {opts.max_backtracks} "
                f"shrinks (residual {rnorm:.3g})"
            )
        proj, J_new = accepted
        prev_J, prev_rnorm = J_curr, rnorm
        state, pair, J_curr = proj, proj.pair, J_new
        iterations += 1

    theta_def, hminus = membership_residuals(pair, V, eps, params)
    final_state = NehariState(
        pair=pair,
        t=state.t,
        psi=state.psi,
        scale_residuals=theta_def,
        hminus_residual=hminus,
        mass_margins=well_masses(pair, V) - opts.floor(eps),
    )
    return Solution(
        pair=pair,
        energy=total_energy(pair, V, eps, params),
        residual_norm=pairing_norm(gradient_residual(pair, V, eps, params)),
        nehari=final_state,
        iterations=iterations,
    )


def apriori_quantities(pair: PairField, V, eps: float, params: CouplingParams) -> dict:
    """The scaling-law quantities: squared norm, per-well mass and gradient
    energy, and the energy value."""
    grid = pair.grid
    w = grid.weights()
    gu = central_gradient(pair.u)
    gv = central_gradient(pair.v)
    grad_density = sum(g**2 for g in gu) + sum(g**2 for g in gv)
    mass_density = pair.u.values**2 + pair.v.values**2
    return {
        "norm_sq": norm_eps_sq(pair, V, eps),
        "well_mass": [float(np.sum((w * mass_density)[wl.inner_mask])) for wl in V.wells],
        "well_gradient": [
            eps**2 * float(np.sum((w * grad_density)[wl.inner_mask])) for wl in V.wells
        ],
        "energy": energy_value(pair, V, eps, params),
    }


@dataclass
class AprioriReport:
    epsilons: list
    values: dict
    exponents: dict
    flagged: bool
    notes: list = dfield(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "epsilons": self.epsilons,
            "values": self.values,
            "exponents": self.exponents,
            "flagged": self.flagged,
            "notes": self.notes,
        }


def verify_apriori_bounds(quantities: list, epsilons: list) -> AprioriReport:
    """Fit the epsilon-scaling exponent of each a-priori quantity.

    ``quantities[j]`` comes from ``apriori_quantities`` at ``epsilons[j]``.
    Per-well lists are summed.  Zero or nonpositive values flag the report
    (log-log fits are then undefined for that quantity).
    """
    names = ("norm_sq", "well_mass", "well_gradient", "energy")
    values = {}
    exponents = {}
    notes = []
    flagged = False
    for name in names:
        series = []
        for q in quantities:
            val = q[name]
            if isinstance(val, (list, tuple)):
                val = float(np.sum(val))
            series.append(float(val))
        values[name] = series
        if len(series) >= 2 and all(v > 0.0 for v in series):
            slope = np.polyfit(np.log(epsilons), np.log(series), 1)[0]
            exponents[name] = float(slope)
        else:
            exponents[name] = float("nan")
            flagged = True
            notes.append(f"{name}: nonpositive or insufficient values, exponent undefined")
    return AprioriReport(
        epsilons=[float(e) for e in epsilons],
        values=values,
        exponents=exponents,
        flagged=flagged,
        notes=notes,
    )
