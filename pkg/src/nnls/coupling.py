"""The coupling nonlinearity, its capped modification, and hypothesis checks.

The base coupling on the open quadrant is

    h(s, t) = c1 s^(p+q) + c2 t^(p+q) + c3 s^p t^q,   2 < p, q < 3,

extended by zero whenever s <= 0 or t <= 0.  The raw formula is discontinuous
across the axes (the pure powers do not vanish as the other variable crosses
zero), so every term is multiplied by the axis mollifier m(s) m(t), where m is
a C^4 ramp vanishing below ``axis_sigma`` and equal to 1 above twice that.
The mollified h is then identically zero in a strip around the axes and C^4 on
the whole plane; all derivatives reported here are exact.

Outside the wells the solver uses the capped modification: in polar
coordinates (rho, theta) of the (s, t) plane,

    h_mod = h                                             for rho <= a,
    h_mod = h(a,th) + h_rho(a,th) (rho-a)
            + h_rhorho(a,th) (rho-a)^2 / 2                for rho > a,

a quadratic radial prolongation that matches h to second order on the circle
rho = a and grows at most quadratically, so its gradient is linearly bounded.
Cartesian first and second derivatives of the prolongation are assembled from
order-2 jets of the circle restriction, which consume derivatives of h up to
fourth order; this is why the mollifier must be C^4 rather than C^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield
from math import comb

import numpy as np

from .grids import Field

# 9th-order smoothstep: S(0)=0, S(1)=1, derivatives 1..4 vanish at both ends.
_SMOOTH9 = np.array([70.0, -315.0, 540.0, -420.0, 126.0, 0.0, 0.0, 0.0, 0.0, 0.0])
_SMOOTH9_DERIVS = [_SMOOTH9]
for _ in range(4):
    _SMOOTH9_DERIVS.append(np.polyder(_SMOOTH9_DERIVS[-1]))


class CouplingError(ValueError):
    pass


@dataclass
class CouplingParams:
    """Exponents, cap radius, axis mollifier scale, and well indicator.

    ``coeffs`` scales the three terms (pure-s, pure-t, cross); (1, 1, 1) is
    the reference coupling and (0, 0, 0) switches the nonlinearity off.
    ``well_indicator`` is the sharp indicator of the union of inner well
    regions; None means the unmodified coupling acts everywhere.
    """

    p: float = 2.5
    q: float = 2.5
    mod_radius: float = 0.1
    axis_sigma: float = 1e-3
    coeffs: tuple = (1.0, 1.0, 1.0)
    well_indicator: Field | None = None

    def __post_init__(self):
        if not (2.0 < self.p < 3.0 and 2.0 < self.q < 3.0):
            raise CouplingError(f"exponents must lie in (2,3), got p={self.p}, q={self.q}")
        if self.mod_radius <= 0:
            raise CouplingError(f"cap radius must be positive, got {self.mod_radius}")
        if self.axis_sigma <= 0:
            raise CouplingError(f"axis mollifier scale must be positive")
        if len(self.coeffs) != 3:
            raise CouplingError("coeffs must have three entries (pure-s, pure-t, cross)")

    def with_indicator(self, indicator: Field | None) -> "CouplingParams":
        return CouplingParams(
            self.p, self.q, self.mod_radius, self.axis_sigma, self.coeffs, indicator
        )

    def unmodified(self) -> "CouplingParams":
        return self.with_indicator(None)

    def term_exponents(self):
        """(s-exponent, t-exponent) per separable term."""
        p, q = self.p, self.q
        return ((p + q, 0.0), (0.0, p + q), (p, q))


@dataclass
class CouplingSample:
    """Value, gradient, and Hessian of the coupling at one or many points."""

    value: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    duu: np.ndarray
    duv: np.ndarray
    dvv: np.ndarray

    def gradient_norm(self) -> np.ndarray:
        return np.sqrt(self.du**2 + self.dv**2)


def _ramp_derivs(z: np.ndarray, sigma: float, order: int) -> np.ndarray:
    """m(z) and derivatives up to ``order``; m ramps on [sigma, 2 sigma]."""
    z = np.asarray(z, dtype=float)
    x = (z - sigma) / sigma
    inside = (x > 0.0) & (x < 1.0)
    out = np.zeros((order + 1,) + z.shape)
    out[0] = np.where(x >= 1.0, 1.0, 0.0)
    if np.any(inside):
        xi = x[inside]
        for k in range(order + 1):
            out[k][inside] = np.polyval(_SMOOTH9_DERIVS[k], xi) / sigma**k
    return out


def _falling(e: float, j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= e - i
    return out


def _factor_derivs(z: np.ndarray, exponent: float, sigma: float, order: int) -> np.ndarray:
    """Derivatives up to ``order`` of F(z) = m(z) z^exponent (0 for z <= sigma)."""
    z = np.asarray(z, dtype=float)
    m = _ramp_derivs(z, sigma, order)
    active = z > sigma
    zsafe = np.where(active, z, 1.0)
    # powers[j] = falling(e, j) * z^(e-j) on the active set
    powers = np.zeros((order + 1,) + z.shape)
    for j in range(order + 1):
        powers[j] = np.where(active, _falling(exponent, j) * zsafe ** (exponent - j), 0.0)
    out = np.zeros_like(powers)
    for i in range(order + 1):
        acc = np.zeros(z.shape)
        for l in range(i + 1):
            acc += comb(i, l) * m[l] * powers[i - l]
        out[i] = acc
    return out


def derivative_table(s, t, params: CouplingParams, order: int = 2) -> np.ndarray:
    """Mixed partials D[i, j] = d^i/ds^i d^j/dt^j h for i, j <= order."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    sg = params.axis_sigma
    D = np.zeros((order + 1, order + 1) + s.shape)
    for coeff, (es, et) in zip(params.coeffs, params.term_exponents()):
        if coeff == 0.0:
            continue
        F = _factor_derivs(s, es, sg, order)
        G = _factor_derivs(t, et, sg, order)
        for i in range(order + 1):
            for j in range(order + 1):
                D[i, j] += coeff * F[i] * G[j]
    return D


def _sample_from_table(D: np.ndarray) -> CouplingSample:
    return CouplingSample(
        value=D[0, 0], du=D[1, 0], dv=D[0, 1], duu=D[2, 0], duv=D[1, 1], dvv=D[0, 2]
    )


def coupling_eval(s, t, params: CouplingParams) -> CouplingSample:
    """The base (axis-mollified) coupling h with exact derivatives.

    Scalars in give scalar-shaped (0-d) arrays out.
    """
    return _sample_from_table(derivative_table(s, t, params, order=2))


# ---------------------------------------------------------------------------
# quadratic radial prolongation
# ---------------------------------------------------------------------------

def _jet_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Multiply order-2 jets stored as [f, f', f'']."""
    return np.stack(
        [a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[0] * b[2] + 2.0 * a[1] * b[1] + a[2] * b[0]]
    )


def _jet_compose(table, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Order-2 jet of f(X(tau), Y(tau)) from partials of f up to order 2.

    ``table(i, j)`` returns the (i, j) partial at the base point; X, Y are
    order-2 jets in the derivative convention [value, d/dtau, d2/dtau2].
    """
    f0 = table(0, 0)
    f1 = table(1, 0) * X[1] + table(0, 1) * Y[1]
    f2 = (
        table(1, 0) * X[2]
        + table(0, 1) * Y[2]
        + table(2, 0) * X[1] ** 2
        + 2.0 * table(1, 1) * X[1] * Y[1]
        + table(0, 2) * Y[1] ** 2
    )
    return np.stack([f0, f1, f2])


def _prolonged_subset(s: np.ndarray, t: np.ndarray, params: CouplingParams) -> CouplingSample:
    """Prolongation branch for points with rho = |(s,t)| > mod_radius."""
    a = params.mod_radius
    rho = np.hypot(s, t)
    theta = np.arctan2(t, s)
    ct = np.cos(theta)
    st = np.sin(theta)
    x0 = a * ct
    y0 = a * st

    # Full fourth-order table of h at the circle point.
    D = derivative_table(x0, y0, params, order=4)

    # Jets of cos(theta+tau), sin(theta+tau) and the circle point.
    cj = np.stack([ct, -st, -ct])
    sj = np.stack([st, ct, -st])
    X = a * cj
    Y = a * sj

    A = _jet_compose(lambda i, j: D[i, j], X, Y)
    hu = _jet_compose(lambda i, j: D[i + 1, j], X, Y)
    hv = _jet_compose(lambda i, j: D[i, j + 1], X, Y)
    B = _jet_mul(hu, cj) + _jet_mul(hv, sj)
    huu = _jet_compose(lambda i, j: D[i + 2, j], X, Y)
    huv = _jet_compose(lambda i, j: D[i + 1, j + 1], X, Y)
    hvv = _jet_compose(lambda i, j: D[i, j + 2], X, Y)
    C = _jet_mul(huu, _jet_mul(cj, cj)) + 2.0 * _jet_mul(huv, _jet_mul(cj, sj)) + _jet_mul(
        hvv, _jet_mul(sj, sj)
    )

    r = rho - a
    value = A[0] + B[0] * r + 0.5 * C[0] * r**2
    g_rho = B[0] + C[0] * r
    g_rr = C[0]
    g_th = A[1] + B[1] * r + 0.5 * C[1] * r**2
    g_rth = B[1] + C[1] * r
    g_thth = A[2] + B[2] * r + 0.5 * C[2] * r**2

    # Polar-to-Cartesian chain rule; rho > a > 0 on this branch.
    rho_s, rho_t = ct, st
    th_s, th_t = -st / rho, ct / rho
    rho_ss = st**2 / rho
    rho_st = -st * ct / rho
    rho_tt = ct**2 / rho
    th_ss = 2.0 * st * ct / rho**2
    th_st = (st**2 - ct**2) / rho**2
    th_tt = -2.0 * st * ct / rho**2

    du = g_rho * rho_s + g_th * th_s
    dv = g_rho * rho_t + g_th * th_t
    duu = g_rr * rho_s**2 + 2.0 * g_rth * rho_s * th_s + g_thth * th_s**2 \
        + g_rho * rho_ss + g_th * th_ss
    duv = g_rr * rho_s * rho_t + g_rth * (rho_s * th_t + rho_t * th_s) \
        + g_thth * th_s * th_t + g_rho * rho_st + g_th * th_st
    dvv = g_rr * rho_t**2 + 2.0 * g_rth * rho_t * th_t + g_thth * th_t**2 \
        + g_rho * rho_tt + g_th * th_tt
    return CouplingSample(value, du, dv, duu, duv, dvv)


def prolonged_eval(s, t, params: CouplingParams) -> CouplingSample:
    """The capped coupling: h below the cap radius, quadratic beyond it."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(s.shape, t.shape)
    s = np.broadcast_to(s, shape).copy()
    t = np.broadcast_to(t, shape).copy()
    out = coupling_eval(s, t, params)
    beyond = s**2 + t**2 > params.mod_radius**2
    if np.any(beyond):
        sub = _prolonged_subset(s[beyond], t[beyond], params)
        for name in ("value", "du", "dv", "duu", "duv", "dvv"):
            arr = np.array(getattr(out, name), dtype=float)
            arr[beyond] = getattr(sub, name)
            setattr(out, name, arr)
    return out


def spatial_eval(x_index, s, t, params: CouplingParams) -> CouplingSample:
    """Point evaluation of the switched coupling: h inside the wells, the
    capped modification outside (sharp indicator)."""
    if params.well_indicator is None:
        return coupling_eval(s, t, params)
    chi = params.well_indicator.values[tuple(np.atleast_1d(x_index))]
    if chi > 0.5:
        return coupling_eval(s, t, params)
    return prolonged_eval(s, t, params)


def sample_fields(
    u: np.ndarray, v: np.ndarray, params: CouplingParams, chi: np.ndarray | None
) -> CouplingSample:
    """Vectorized switched coupling over whole fields.

    ``chi`` is a boolean mask (True = inside the wells); None applies the
    unmodified coupling everywhere.  Points outside the wells only need the
    prolongation where u^2 + v^2 exceeds the cap radius squared.
    """
    out = coupling_eval(u, v, params)
    if chi is None:
        return out
    beyond = (~chi) & (u**2 + v**2 > params.mod_radius**2)
    if np.any(beyond):
        sub = _prolonged_subset(u[beyond], v[beyond], params)
        for name in ("value", "du", "dv", "duu", "duv", "dvv"):
            arr = getattr(out, name)
            arr[beyond] = getattr(sub, name)
    return out


# ---------------------------------------------------------------------------
# hypothesis checks
# ---------------------------------------------------------------------------

@dataclass
class HypothesisRecord:
    passed: bool
    margin: float
    witness: tuple | None = None
    detail: dict = dfield(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "margin": float(self.margin),
            "witness": None if self.witness is None else [float(x) for x in self.witness],
            "detail": self.detail,
        }


@dataclass
class HypothesisReport:
    records: dict

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.records.values())

    def failures(self) -> list:
        return [name for name, r in self.records.items() if not r.passed]

    def to_dict(self) -> dict:
        return {name: r.to_dict() for name, r in self.records.items()}


def _argmin_witness(values: np.ndarray, s: np.ndarray, t: np.ndarray) -> tuple:
    k = int(np.argmin(values))
    return (float(s[k]), float(t[k]))


def check_hypotheses(
    params: CouplingParams,
    sample_box: tuple = (0.01, 2.0),
    n_samples: int = 10_000,
    seed: int = 0,
    eval_fn=None,
) -> HypothesisReport:
    """Sampled verification of the structural hypotheses on the coupling.

    Reports, per hypothesis, the worst margin over ``n_samples`` points of
    ``sample_box``^2 (plus its corners): nonnegativity and the axis zero set;
    the matrix lower bound as the best feasible diagonal excess; the
    superquadraticity gap; growth-constant fits; and the linear gradient
    bound of the capped modification outside the wells.

    ``eval_fn(s, t)`` overrides the coupling evaluation (used to probe
    deliberately broken couplings).
    """
    lo, hi = sample_box
    if not (0.0 < lo < hi):
        raise CouplingError(f"sample box must satisfy 0 < lo < hi, got {sample_box}")
    if n_samples < 100:
        raise CouplingError("n_samples must be at least 100")
    rng = np.random.default_rng(seed)
    s = rng.uniform(lo, hi, n_samples)
    t = rng.uniform(lo, hi, n_samples)
    corners = np.array([lo, lo, hi, hi]), np.array([lo, hi, lo, hi])
    s = np.concatenate([s, corners[0]])
    t = np.concatenate([t, corners[1]])
    if eval_fn is None:
        eval_fn = lambda a, b: coupling_eval(a, b, params)
    H = eval_fn(s, t)

    records = {}

    # h1: nonnegativity of value and all derivatives; exact axis zero set.
    stack = np.stack([H.value, H.du, H.dv, H.duu, H.duv, H.dvv])
    worst = stack.min(axis=0)
    probe = eval_fn(np.array([-1.0, 1.0, 0.0]), np.array([1.0, -0.5, 0.0]))
    axis_zero = all(
        float(np.max(np.abs(getattr(probe, n)))) == 0.0
        for n in ("value", "du", "dv", "duu", "duv", "dvv")
    )
    m1 = float(worst.min())
    records["h1"] = HypothesisRecord(
        passed=(m1 >= 0.0) and axis_zero,
        margin=m1,
        witness=_argmin_witness(worst, s, t),
        detail={"axis_zero_set_exact": axis_zero},
    )

    # h2: superlinear growth of the partials at large amplitude.
    big = s >= lo + 0.75 * (hi - lo)
    ratio_u = H.du[big] / s[big] ** (params.p + params.q - 1.0)
    bigt = t >= lo + 0.75 * (hi - lo)
    ratio_v = H.dv[bigt] / t[bigt] ** (params.p + params.q - 1.0)
    c2 = float(min(ratio_u.min(), ratio_v.min()))
    records["h2"] = HypothesisRecord(
        passed=c2 > 0.0, margin=c2, detail={"threshold": float(lo + 0.75 * (hi - lo))}
    )

    # h3: largest feasible diagonal excess delta' with
    #     Hessian >= (1 + delta') diag(h_u/s, h_v/t).
    d1 = H.du / s
    d2 = H.dv / t
    a1 = H.duu - d1
    a2 = H.dvv - d2
    beta = H.duv
    disc = (a1 * d2 - a2 * d1) ** 2 + 4.0 * d1 * d2 * beta**2
    delta_pt = ((a1 * d2 + a2 * d1) - np.sqrt(disc)) / (2.0 * d1 * d2)
    m3 = float(delta_pt.min())
    records["h3"] = HypothesisRecord(
        passed=m3 > 0.0, margin=m3, witness=_argmin_witness(delta_pt, s, t)
    )

    # h5: gap delta'' with  grad(h).(s,t) - 2h >= delta'' grad(h).(s,t).
    radial = H.du * s + H.dv * t
    with np.errstate(divide="ignore", invalid="ignore"):
        dpp = np.where(radial > 0.0, 1.0 - 2.0 * H.value / radial, -np.inf)
    m5 = float(dpp.min())
    records["h5"] = HypothesisRecord(
        passed=m5 > 0.0, margin=m5, witness=_argmin_witness(dpp, s, t)
    )

    # h4: growth-bound constant fit (existence, not a threshold).
    rhs = s**2 + t**2 + s ** (params.p + params.q - 2.0) + t ** (params.p + params.q - 2.0)
    ratios = np.stack(
        [
            (np.abs(H.duu) + np.abs(H.dvv) + np.abs(H.duv)) / rhs,
            np.abs(H.du) / (s * rhs),
            np.abs(H.dv) / (t * rhs),
        ]
    )
    c4 = float(ratios.max())
    records["h4"] = HypothesisRecord(
        passed=np.isfinite(c4), margin=c4, detail={"fitted_constant": c4}
    )

    # h6: for each mu, the smallest feasible C_mu for both bounds; the
    # first-bound constants must decrease as mu grows.
    lhs = np.abs(H.du * t) + np.abs(H.dv * s)
    mus = (0.5, 1.0, 2.0, 5.0, 10.0)
    sixth = s**6 + t**6
    c_first, c_second = [], []
    for mu in mus:
        excess = np.maximum(lhs - mu * (s**2 + t**2), 0.0)
        c_first.append(float(np.max(excess / sixth)))
        with np.errstate(divide="ignore", invalid="ignore"):
            second = np.where(radial > 0.0, excess / radial, np.inf)
        c_second.append(float(np.max(second)))
    decreasing = all(c_first[i + 1] <= c_first[i] + 1e-12 for i in range(len(mus) - 1))
    finite = all(np.isfinite(c_first)) and all(np.isfinite(c_second))
    records["h6"] = HypothesisRecord(
        passed=finite and decreasing,
        margin=float(c_first[-1]),
        detail={"mu": list(mus), "C_mu_first": c_first, "C_mu_second": c_second},
    )

    # hm: linear gradient bound of the capped coupling, sampled far beyond
    # the cap radius; the fitted delta must not grow with the range.
    a = params.mod_radius
    n_hm = max(n_samples // 2, 100)
    rho = rng.uniform(1e-3, 40.0 * a, n_hm)
    th = rng.uniform(0.0, np.pi / 2.0, n_hm)
    sh, thv = rho * np.cos(th), rho * np.sin(th)
    Hm = prolonged_eval(sh, thv, params)
    ratio = Hm.gradient_norm() / rho
    near = rho <= 20.0 * a
    delta_near = float(np.max(ratio[near])) if np.any(near) else 0.0
    delta_far = float(np.max(ratio[~near])) if np.any(~near) else 0.0
    delta = float(np.max(ratio))
    k = int(np.argmax(ratio))
    records["hm"] = HypothesisRecord(
        passed=np.isfinite(delta) and delta > 0.0,
        margin=delta,
        witness=(float(sh[k]), float(thv[k])),
        detail={"delta_near": delta_near, "delta_far": delta_far, "range": 40.0 * a},
    )

    # h7 is referenced in the source hypothesis list but never defined.
    records["h7"] = HypothesisRecord(
        passed=True,
        margin=float("nan"),
        detail={"note": "label referenced but undefined; h1-h6 and hm are checked"},
    )
    return HypothesisReport(records)
