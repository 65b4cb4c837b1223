# adsdirac/geometry.py
"""
Exterior Schwarzschild-Anti-de Sitter geometry in 1+1 channel coordinates.

The static metric factor is

    F(r) = 1 - 2M/r + r**2/l**2,        r > r_sads,

with black-hole mass M > 0 and AdS radius l > 0 (cosmological constant
Λ = -3/l²).  F has a single simple root r_sads on (0, ∞); the surface
gravity is κ = F'(r_sads)/2.

The tortoise coordinate integrates dr_*/dr = 1/F in closed form:

    r_*(r) = ln[ (r - r_sads)^{α₁} · (r² + r_sads·r + r_sads² + l²)^{-α₁/2} ]
             + C · arctan( (2r + r_sads) / √(3·r_sads² + 4l²) ),

    α₁ = r_sads·l² / (3·r_sads² + l²)  =  1/(2κ),
    C  = l²(3·r_sads² + 2l²) / ( (3·r_sads²+l²) · √(3·r_sads²+4l²) ).

The working coordinate is x = r_* - Cπ/2, which maps the exterior onto
(-∞, 0): x → -∞ at the horizon (like α₁·ln(r-r_sads)) and x → 0⁻ at the
conformal boundary r → ∞ (like -l²/r).

Numerical conventions
---------------------
- Near the horizon r - r_sads underflows the float spacing of r_sads
  long before anything else degrades, so all evaluators run on the gap
  δ = r - r_sads.  F is computed through the cancellation-free identity
      F(r_sads + δ) = 2Mδ/(r_sads(r_sads+δ)) + δ(2·r_sads+δ)/l²,
  which is exact relative to the computed root.
- The inverse map x ↦ r solves in u = ln δ, where x(u) is smooth,
  strictly increasing and asymptotically linear (slope α₁) — no infinite
  derivatives, bracketing is safe for any x < 0.
- For -1e-8 < x < 0 the boundary series is used directly:
      r = -l²/x + x/3,   √F = -l/x - x/(6l),   √F/r = 1/l + x²/(2l³).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "Regime",
    "Params",
    "CoordinateMap",
    "horizon_radius",
    "surface_gravity",
    "metric_factor",
    "metric_factor_deriv",
    "make_params",
    "expansion_residuals",
]

# crossover below which the boundary series replaces root finding
_X_SERIES = -1e-8


class Regime(Enum):
    """Boundary regime classified by the dimensionless product 2·m·l."""

    SUBCRITICAL = "subcritical"      # 2ml < 1: boundary condition required
    CRITICAL = "critical"            # 2ml = 1: limiting case
    SUPERCRITICAL = "supercritical"  # 2ml > 1: no boundary condition needed


def classify_regime(m: float, l: float) -> Regime:
    two_ml = 2.0 * m * l
    if two_ml < 1.0:
        return Regime.SUBCRITICAL
    if two_ml == 1.0:
        return Regime.CRITICAL
    return Regime.SUPERCRITICAL


def metric_factor(r, M: float, l: float):
    """F(r) = 1 - 2M/r + r²/l² (vectorized in r)."""
    r = np.asarray(r, dtype=float)
    return 1.0 - 2.0 * M / r + r * r / (l * l)


def metric_factor_deriv(r, M: float, l: float):
    """F'(r) = 2M/r² + 2r/l² (vectorized in r)."""
    r = np.asarray(r, dtype=float)
    return 2.0 * M / (r * r) + 2.0 * r / (l * l)


def horizon_radius(M: float, l: float) -> float:
    """
    Unique positive root r_sads of F.

    Closed form via the real Cardano branch:

        r_sads = p₊ + p₋,   p± = ( M·l² ± √(M²l⁴ + l⁶/27) )^{1/3},

    with the real (sign-carrying) cube root: the p₋ radicand is negative.

    Parameters
    ----------
    M, l : float
        Mass and AdS radius, both > 0.

    Returns
    -------
    float
        Horizon radius.
    """
    if M <= 0 or l <= 0:
        raise ValueError("require M > 0 and l > 0")
    s = math.sqrt(M * M * l**4 + l**6 / 27.0)
    r = float(np.cbrt(M * l * l + s) + np.cbrt(M * l * l - s))
    # one Newton polish on F (the cube roots lose a couple of ulps)
    for _ in range(2):
        f = 1.0 - 2.0 * M / r + r * r / (l * l)
        r -= f / (2.0 * M / r**2 + 2.0 * r / l**2)
    return r


def surface_gravity(M: float, l: float) -> float:
    """κ = F'(r_sads)/2."""
    return 0.5 * metric_factor_deriv(horizon_radius(M, l), M, l).item()


@dataclass(frozen=True)
class Params:
    """
    Model parameters with derived geometric constants.

    Attributes
    ----------
    M, l : float
        Black-hole mass and AdS radius.
    m : float
        Field mass (enters only through the regime and the mass potential).
    r_sads : float
        Horizon radius.
    kappa : float
        Surface gravity F'(r_sads)/2.
    alpha1 : float
        Horizon log-exponent of the tortoise map, 1/(2·kappa).
    c_const : float
        Coefficient of the arctan term of the tortoise map.
    regime : Regime
        Boundary regime from 2·m·l.
    """

    M: float
    l: float
    m: float
    r_sads: float = field(init=False)
    kappa: float = field(init=False)
    alpha1: float = field(init=False)
    c_const: float = field(init=False)
    regime: Regime = field(init=False)

    def __post_init__(self):
        if self.M <= 0 or self.l <= 0:
            raise ValueError("require M > 0 and l > 0")
        if self.m < 0:
            raise ValueError("require m >= 0")
        rh = horizon_radius(self.M, self.l)
        kap = 0.5 * (2.0 * self.M / rh**2 + 2.0 * rh / self.l**2)
        q = 3.0 * rh * rh + self.l * self.l
        c = (
            self.l * self.l
            * (3.0 * rh * rh + 2.0 * self.l * self.l)
            / (q * math.sqrt(3.0 * rh * rh + 4.0 * self.l * self.l))
        )
        object.__setattr__(self, "r_sads", rh)
        object.__setattr__(self, "kappa", kap)
        object.__setattr__(self, "alpha1", 1.0 / (2.0 * kap))
        object.__setattr__(self, "c_const", c)
        object.__setattr__(self, "regime", classify_regime(self.m, self.l))

    @property
    def two_ml(self) -> float:
        return 2.0 * self.m * self.l

    @property
    def cosmological_constant(self) -> float:
        return -3.0 / (self.l * self.l)


def make_params(M: float, l: float, m: float) -> Params:
    """Convenience constructor (mirrors the config entry point)."""
    return Params(M=M, l=l, m=m)


class CoordinateMap:
    """
    r ↔ r_* ↔ x maps for a fixed :class:`Params`.

    All evaluators accept scalars or arrays.  The horizon gap
    δ = r - r_sads is the internal variable; :meth:`delta_of_x` stays
    accurate down to δ ≈ 1e-300 where :meth:`r_of_x` would round to
    r_sads.
    """

    def __init__(self, params: Params):
        self.params = params
        p = params
        self._q = 3.0 * p.r_sads**2 + p.l**2               # P(r_sads)
        self._sq4 = math.sqrt(3.0 * p.r_sads**2 + 4.0 * p.l**2)

    # -- forward maps -----------------------------------------------------

    def tortoise_of_delta(self, delta):
        """r_*(r_sads + δ) via the closed form, stable for tiny δ."""
        p = self.params
        delta = np.asarray(delta, dtype=float)
        r = p.r_sads + delta
        poly = r * r + p.r_sads * r + p.r_sads**2 + p.l**2
        return (
            p.alpha1 * np.log(delta)
            - 0.5 * p.alpha1 * np.log(poly)
            + p.c_const * np.arctan((2.0 * r + p.r_sads) / self._sq4)
        )

    def tortoise(self, r):
        """
        Closed-form tortoise coordinate r_*(r), r > r_sads.

        Raises
        ------
        ValueError
            If any r ≤ r_sads.
        """
        r = np.asarray(r, dtype=float)
        if np.any(r <= self.params.r_sads):
            raise ValueError("tortoise requires r > horizon radius")
        return self.tortoise_of_delta(r - self.params.r_sads)

    def x_of_r(self, r):
        """Working coordinate x(r) = r_*(r) - C·π/2 ∈ (-∞, 0)."""
        return self.tortoise(r) - self.params.c_const * math.pi / 2.0

    def x_of_delta(self, delta):
        return self.tortoise_of_delta(delta) - self.params.c_const * math.pi / 2.0

    # -- inverse map ------------------------------------------------------

    def _x_of_logdelta(self, u: float) -> float:
        return float(self.x_of_delta(math.exp(u)))

    def _delta_of_x_scalar(self, x: float) -> float:
        p = self.params
        if not x < 0.0:
            raise ValueError("working coordinate must satisfy x < 0")
        if math.isinf(x):
            raise ValueError("x must be finite")
        # initial guesses: horizon asymptote and boundary asymptote
        # x(u) ≈ α₁·u + const  for u → -∞ ;  δ ≈ -l²/x for x → 0⁻
        c_h = self._x_of_logdelta(0.0)  # x at δ = 1
        u_lo = (x - c_h) / p.alpha1 - 1.0
        while self._x_of_logdelta(u_lo) >= x:
            u_lo -= max(8.0, (self._x_of_logdelta(u_lo) - x) / p.alpha1 + 1.0)
            if u_lo < -700.0:
                # δ below double-precision range: return the asymptote
                return math.exp(max(u_lo, -745.0))
        u_hi = math.log(max(1.0, -p.l**2 / x)) + 2.0
        while self._x_of_logdelta(u_hi) <= x:
            u_hi += 4.0
        u = brentq(lambda v: self._x_of_logdelta(v) - x, u_lo, u_hi,
                   xtol=1e-15, rtol=8.9e-16, maxiter=200)
        return math.exp(u)

    def delta_of_x(self, x):
        """Horizon gap δ(x) = r(x) - r_sads, accurate for all x < 0."""
        if np.isscalar(x) or np.asarray(x).ndim == 0:
            return self._delta_of_x_scalar(float(x))
        return np.array([self._delta_of_x_scalar(float(v)) for v in np.asarray(x)])

    def r_of_x(self, x):
        """
        Inverse map r(x).  Uses the boundary series for -1e-8 < x < 0 and
        log-gap bracketing (:func:`scipy.optimize.brentq`) otherwise.
        """
        p = self.params
        xs = np.asarray(x, dtype=float)
        scalar = xs.ndim == 0
        xs = np.atleast_1d(xs)
        if np.any(xs >= 0.0):
            raise ValueError("working coordinate must satisfy x < 0")
        out = np.empty_like(xs)
        near = xs > _X_SERIES
        if np.any(near):
            xn = xs[near]
            out[near] = -p.l**2 / xn + xn / 3.0
        if np.any(~near):
            out[~near] = p.r_sads + np.array(
                [self._delta_of_x_scalar(float(v)) for v in xs[~near]]
            )
        return out[0] if scalar else out

    # -- metric quantities along x ---------------------------------------

    def F_of_delta(self, delta):
        """Cancellation-free F(r_sads + δ)."""
        p = self.params
        delta = np.asarray(delta, dtype=float)
        return (
            2.0 * p.M * delta / (p.r_sads * (p.r_sads + delta))
            + delta * (2.0 * p.r_sads + delta) / (p.l * p.l)
        )

    def sqrtF_of_x(self, x):
        """√F(r(x)); boundary series −l/x − x/(6l) for -1e-8 < x < 0."""
        p = self.params
        xs = np.asarray(x, dtype=float)
        scalar = xs.ndim == 0
        xs = np.atleast_1d(xs)
        if np.any(xs >= 0.0):
            raise ValueError("working coordinate must satisfy x < 0")
        out = np.empty_like(xs)
        near = xs > _X_SERIES
        if np.any(near):
            xn = xs[near]
            out[near] = -p.l / xn - xn / (6.0 * p.l)
        if np.any(~near):
            deltas = np.array([self._delta_of_x_scalar(float(v)) for v in xs[~near]])
            out[~near] = np.sqrt(self.F_of_delta(deltas))
        return out[0] if scalar else out

    def angular_factor_of_x(self, x):
        """√F(r(x)) / r(x); boundary series 1/l + x²/(2l³) near x = 0."""
        p = self.params
        xs = np.asarray(x, dtype=float)
        scalar = xs.ndim == 0
        xs = np.atleast_1d(xs)
        if np.any(xs >= 0.0):
            raise ValueError("working coordinate must satisfy x < 0")
        out = np.empty_like(xs)
        near = xs > _X_SERIES
        if np.any(near):
            xn = xs[near]
            out[near] = 1.0 / p.l + xn * xn / (2.0 * p.l**3)
        if np.any(~near):
            deltas = np.array([self._delta_of_x_scalar(float(v)) for v in xs[~near]])
            r = p.r_sads + deltas
            out[~near] = np.sqrt(self.F_of_delta(deltas)) / r
        return out[0] if scalar else out


def expansion_residuals(params: Params, x_boundary=None, x_horizon=None) -> dict:
    """
    Check the two asymptotic expansions of the coordinate map.

    Boundary side (x → 0⁻): residuals of r(x), √F(x) and √F/r against
        r = -l²/x + x/3,  √F = -l/x - x/(6l),  √F/r = 1/l + x²/(2l³),
    evaluated at `x_boundary` together with the observed decay order of
    each residual between consecutive points.

    Horizon side (x → -∞): least-squares slope of ln √F(x) against x on
    `x_horizon`, which must reproduce the surface gravity κ (√F decays
    like e^{κx}), and the same for the angular factor √F/r.

    Returns a dict with keys ``boundary`` (list of rows), ``horizon_slope_B``,
    ``horizon_slope_A`` and ``kappa``.
    """
    cm = CoordinateMap(params)
    p = params
    if x_boundary is None:
        # below |x| ~ 1e-3 the residuals sink under the inversion noise floor
        x_boundary = np.array([-1e-1, -1e-2, -1e-3])
    if x_horizon is None:
        lo = -40.0 / (2.0 * p.kappa) * 2.0
        x_horizon = np.linspace(2 * lo, lo, 21)  # safely exponential region
    x_boundary = np.asarray(x_boundary, dtype=float)
    x_horizon = np.asarray(x_horizon, dtype=float)

    rows = []
    for xv in x_boundary:
        r = cm.r_of_x(xv) if xv <= _X_SERIES else float(-p.l**2 / xv)
        delta = cm.delta_of_x(xv)
        sqrtF = math.sqrt(float(cm.F_of_delta(delta)))
        rows.append(
            {
                "x": float(xv),
                "r_residual": float(r - (-p.l**2 / xv + xv / 3.0)),
                "sqrtF_residual": float(sqrtF - (-p.l / xv - xv / (6.0 * p.l))),
                "ang_residual": float(sqrtF / r - (1.0 / p.l + xv * xv / (2.0 * p.l**3))),
            }
        )
    # decay orders between consecutive sample points (expected ≥ stated order)
    orders = {}
    for key, expected in (("r_residual", 1.0), ("sqrtF_residual", 1.0), ("ang_residual", 2.0)):
        res = np.array([abs(row[key]) for row in rows])
        xs = np.abs(x_boundary)
        with np.errstate(divide="ignore"):
            slopes = np.diff(np.log(res)) / np.diff(np.log(xs))
        orders[key] = {"expected_at_least": expected, "observed": slopes.tolist()}

    lnB = np.log(cm.sqrtF_of_x(x_horizon))
    lnA = np.log(cm.angular_factor_of_x(x_horizon))
    slope_B = float(np.polyfit(x_horizon, lnB, 1)[0])
    slope_A = float(np.polyfit(x_horizon, lnA, 1)[0])
    return {
        "boundary": rows,
        "boundary_orders": orders,
        "horizon_slope_B": slope_B,
        "horizon_slope_A": slope_A,
        "kappa": p.kappa,
    }
