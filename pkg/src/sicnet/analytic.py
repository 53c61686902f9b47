"""Closed forms, quadrature bounds, and scaling laws for the outage model.

The typical receiver cancels the L strongest interferers of a Poisson field
in which each interferer carries a chi-square mark (pre-cancellation power).
Everything here is expressed through three random quantities:

* ``W``       own-link power after beamforming, Gamma(N - L, 1);
* ``J_P``     the (L+1)-st strongest mark, with closed-form law
              ``Pr(J_P <= g) = Q(L + 1, nu * lam * g**(-2/alpha))`` where
              ``nu = pi * Gamma(N + 2/alpha) / Gamma(N)``;
* ``I_S``     total power of the weaker (secondary) interferers, with
              closed-form conditional mean and variance given ``J_P = g``.

Outage is the event ``I_S + I_P > W / theta``.  The lower bound keeps only
the primary interferer; the upper bound splits the (W, J_P) plane along the
curve ``g + E[I_S | g] = w / theta`` and applies Chebyshev's inequality on
the far side.  Both reduce to one-dimensional adaptive integrals over W
with smooth inner integrals evaluated by fixed Gauss rules.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate as _si
from scipy import special as _sp

from .errors import NumericalError, ParameterError
from .network import SystemParams

__all__ = [
    "DerivedConstants",
    "BoundReport",
    "TrainingLength",
    "nu_coefficient",
    "w_neg_moment",
    "delta_moment",
    "jp_cdf",
    "jp_pdf",
    "secondary_moments",
    "pout_lower",
    "pout_upper",
    "kappas",
    "tc_asymptotic_eps",
    "tc_scaling_constants",
    "training_length",
    "capacity_loss_bound",
    "training_length_scaling",
    "mean_total_interference",
    "mean_primary_interference",
    "write_bounds_csv",
]


@dataclass(frozen=True)
class DerivedConstants:
    """Constants derived from the system parameters.

    ``kappa1``/``kappa2`` bracket the small-density outage power law
    ``P_out ~ kappa * density**(L+1)`` (they require the W moment of order
    -(2/alpha)(L+1) to exist); ``kappa3`` bounds the alternative exponent
    when L + 1 > alpha (requires a finite second inverse moment of W, i.e.
    N - L > 2).  ``omega = Gamma(L+1)**(-1/L)`` drives the training-length
    formula.  Unavailable constants are None.
    """

    nu: float
    omega: float | None
    kappa1: float | None
    kappa2: float | None
    kappa3: float | None


@dataclass(frozen=True)
class BoundReport:
    """Outage-probability bounds at one density, with upper-bound pieces.

    ``upper = lambda1 + lambda2 + lambda3`` clamped to 1:  ``lambda1`` is
    the probability the primary mark alone exceeds ``w/theta``; ``lambda2``
    the mass of the strip where the secondary mean pushes the pair over the
    threshold; ``lambda3`` the Chebyshev tail beyond the strip.
    """

    density: float
    lower: float
    upper: float
    lambda1: float
    lambda2: float
    lambda3: float
    quadrature_error_estimate: float


class TrainingLength(NamedTuple):
    m: int
    omega: float


# ---------------------------------------------------------------------------
# Derived constants and closed forms
# ---------------------------------------------------------------------------

def nu_coefficient(params: SystemParams) -> float:
    """Mark-intensity coefficient: pi * Gamma(N + 2/alpha) / Gamma(N)."""
    n, a = params.n_antennas, params.pathloss_alpha
    return float(np.pi * np.exp(_sp.gammaln(n + 2.0 / a) - _sp.gammaln(n)))


def w_neg_moment(s: float, params: SystemParams) -> float | None:
    """E[W**(-s)] for W ~ Gamma(N - L, 1); None when the moment diverges."""
    k = params.array_gain
    if s >= k:
        return None
    return float(np.exp(_sp.gammaln(k - s) - _sp.gammaln(k)))


def delta_moment(s: float, params: SystemParams) -> float:
    """E[delta**s] for delta ~ beta(1, N - 1)."""
    n = params.n_antennas
    return float(np.exp(_sp.gammaln(n) + _sp.gammaln(s + 1.0) - _sp.gammaln(n + s)))


def jp_cdf(g, params: SystemParams):
    """Cumulative law of the (L+1)-st strongest pre-cancellation power."""
    nlam = nu_coefficient(params) * params.density
    a = params.pathloss_alpha
    garr = np.asarray(g, dtype=float)
    if np.any(garr <= 0.0):
        raise ParameterError("jp_cdf requires g > 0")
    out = _sp.gammaincc(params.n_cancel + 1, nlam * garr ** (-2.0 / a))
    return float(out) if garr.ndim == 0 else out


def jp_pdf(g, params: SystemParams):
    """Density of the (L+1)-st strongest pre-cancellation power."""
    L = params.n_cancel
    a = params.pathloss_alpha
    nlam = nu_coefficient(params) * params.density
    garr = np.asarray(g, dtype=float)
    if np.any(garr <= 0.0):
        raise ParameterError("jp_pdf requires g > 0")
    logpdf = (
        np.log(2.0) + (L + 1) * np.log(nlam)
        - np.log(a) - _sp.gammaln(L + 1)
        + (-2.0 * (L + 1) / a - 1.0) * np.log(garr)
        - nlam * garr ** (-2.0 / a)
    )
    out = np.exp(logpdf)
    return float(out) if garr.ndim == 0 else out


def secondary_moments(g, params: SystemParams):
    """Conditional mean and variance of the secondary interference power,
    given the primary pre-cancellation power equals ``g``."""
    n, a = params.n_antennas, params.pathloss_alpha
    nlam = nu_coefficient(params) * params.density
    garr = np.asarray(g, dtype=float)
    mean = 2.0 * nlam / (n * (a - 2.0)) * garr ** (1.0 - 2.0 / a)
    var = 2.0 * nlam / (n * (n + 1.0) * (a - 1.0)) * garr ** (2.0 - 2.0 / a)
    if garr.ndim == 0:
        return float(mean), float(var)
    return mean, var


# ---------------------------------------------------------------------------
# Quadrature machinery
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _beta_z_rule(params: SystemParams, n_nodes: int):
    """Nodes/weights for E over delta ~ beta(1, N-1) in the variable
    z = delta**(2/alpha) (the integrand depends on delta only through z)."""
    n, a = params.n_antennas, params.pathloss_alpha
    x, w = _leggauss(n_nodes)
    z = 0.5 * (x + 1.0)
    half = a / 2.0
    dens = (n - 1.0) * (1.0 - z ** half) ** (n - 2.0) * half * z ** (half - 1.0)
    return z, 0.5 * w * dens


def _w_upper(params: SystemParams) -> float:
    """Truncation point leaving < 1e-16 of the Gamma(N-L, 1) tail."""
    return float(_sp.gammainccinv(params.array_gain, 1e-16))


def _adaptive_w_quad(f, params: SystemParams, epsabs: float, epsrel: float,
                     w_layer: float):
    """Adaptive integral of f(w) * f_W(w) over the W support.

    Integration runs in log(w): the integrands have a transition layer near
    ``w_layer`` (tiny at small density) that a linear-domain rule undersamples,
    while in the log domain the layer and the exponential tail are both benign.
    """
    k = params.array_gain
    lognorm = _sp.gammaln(k)
    s_lo = math.log(min(w_layer, 1.0)) - 45.0
    s_hi = math.log(_w_upper(params))

    def integrand(s):
        w = math.exp(s)
        return math.exp(k * s - w - lognorm) * f(w)

    val, err = _si.quad(
        integrand, s_lo, s_hi,
        epsabs=epsabs, epsrel=epsrel, limit=400,
    )
    return val, err


def _mark_mass(ga: float, gb: float, nlam: float, L: int, alpha: float) -> float:
    """Probability mass of the primary-mark law on the interval [ga, gb].

    Computed in the transformed variable t = nu*lam*g**(-2/alpha), where the
    law is Gamma(L+1, 1); a fixed Gauss rule on the finite t-interval avoids
    the catastrophic cancellation of differencing two nearby CDF values.
    """
    if gb <= ga:
        return 0.0
    tb = nlam * gb ** (-2.0 / alpha)
    if ga <= 0.0:
        return float(_sp.gammaincc(L + 1, tb))
    ta = nlam * ga ** (-2.0 / alpha)
    if tb > 745.0:
        return 0.0
    x, w = _leggauss(48)
    t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * x
    vals = np.exp(L * np.log(t) - t - _sp.gammaln(L + 1))
    return float(np.sum(w * vals) * 0.5 * (ta - tb))


def _bisect_increasing(fn, lo: float, hi: float, iters: int = 80) -> float:
    """Root of an increasing function on [lo, hi] with fn(lo) <= 0 <= fn(hi)."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _g_star(wt: float, mean_coeff: float, alpha: float) -> float:
    """Unique root of g + mean_coeff * g**(1 - 2/alpha) = wt on (0, wt)."""
    e = 1.0 - 2.0 / alpha
    return _bisect_increasing(lambda g: g + mean_coeff * g ** e - wt, 0.0, wt)


def _g_kink(wt: float, mean_coeff: float, var_coeff: float, alpha: float,
            g_star: float) -> float:
    """Point below g_star where the Chebyshev ratio reaches one."""
    em = 1.0 - 2.0 / alpha
    ev = 1.0 - 1.0 / alpha
    sv = math.sqrt(var_coeff)

    def fn(g):
        return sv * g ** ev - (wt - g - mean_coeff * g ** em)

    return _bisect_increasing(fn, 0.0, g_star)


# ---------------------------------------------------------------------------
# Outage-probability bounds
# ---------------------------------------------------------------------------

def _pout_lower_once(density: float, params: SystemParams, n_z: int,
                     epsabs: float, epsrel: float):
    L = params.n_cancel
    a = params.pathloss_alpha
    c = nu_coefficient(params) * density * params.sir_threshold ** (2.0 / a)
    z, wz = _beta_z_rule(params, n_z)

    def inner(w):
        return float(wz @ _sp.gammainc(L + 1, c * z * w ** (-2.0 / a)))

    return _adaptive_w_quad(inner, params, epsabs, epsrel, w_layer=c ** (a / 2.0))


def pout_lower(density: float, params: SystemParams, rel_tol: float = 1e-6) -> float:
    """Lower outage bound: probability the primary interferer alone breaks
    the SIR threshold, averaged over the own-link power and the primary's
    beamforming leak fraction."""
    if not density > 0.0:
        raise ParameterError("density must be positive")
    coarse, _ = _pout_lower_once(density, params, 96, 0.0, 0.3 * rel_tol)
    fine, err = _pout_lower_once(density, params, 192, 0.0, 0.3 * rel_tol)
    inner_err = abs(fine - coarse)
    if fine > 0 and inner_err > 10.0 * rel_tol * fine + 1e-300:
        raise NumericalError(
            f"inner quadrature not converged: delta {inner_err:g} at value {fine:g}"
        )
    return min(float(fine), 1.0)


def _chebyshev_tail(wt, g_kink, mean_coeff, var_coeff, nlam, L, alpha, n_t):
    """Integral of min(ratio, 1) * f_P over (0, g_kink), in the t variable."""
    if g_kink <= 0.0:
        return 0.0
    tk = nlam * g_kink ** (-2.0 / alpha)
    if tk > 700.0:
        return 0.0
    x, w = _leggauss(n_t)
    t = tk + 30.0 * (x + 1.0)          # covers [tk, tk + 60]
    g = (nlam / t) ** (alpha / 2.0)
    shortfall = wt - g - mean_coeff * g ** (1.0 - 2.0 / alpha)
    ratio = np.minimum(var_coeff * g ** (2.0 - 2.0 / alpha) / shortfall**2, 1.0)
    dens = np.exp(L * np.log(t) - t - _sp.gammaln(L + 1))
    return float(np.sum(w * ratio * dens) * 30.0)


def pout_upper(density: float, params: SystemParams, rel_tol: float = 1e-6) -> BoundReport:
    """Upper outage bound split into its three pieces (see module docstring).

    The boundary curve root and the Chebyshev kink are located by bisection
    for every own-link power sample of the outer adaptive quadrature.
    """
    if not density > 0.0:
        raise ParameterError("density must be positive")
    L = params.n_cancel
    n = params.n_antennas
    a = params.pathloss_alpha
    theta = params.sir_threshold
    nu = nu_coefficient(params)
    nlam = nu * density
    mean_coeff = 2.0 * nlam / (n * (a - 2.0))
    var_coeff = 2.0 * nlam / (n * (n + 1.0) * (a - 1.0))

    lower = pout_lower(density, params, rel_tol)
    scale = max(lower, 1e-280)
    epsabs = 0.25 * rel_tol * scale
    epsrel = 0.25 * rel_tol

    c = nlam * theta ** (2.0 / a)
    w_layer = c ** (a / 2.0)
    lam1, err1 = _adaptive_w_quad(
        lambda w: float(_sp.gammainc(L + 1, c * w ** (-2.0 / a))),
        params, epsabs, epsrel, w_layer,
    )

    def strip_mass(w):
        wt = w / theta
        gs = _g_star(wt, mean_coeff, a)
        return _mark_mass(gs, wt, nlam, L, a)

    lam2, err2 = _adaptive_w_quad(strip_mass, params, epsabs, epsrel, w_layer)

    def tail_mass(n_t):
        def f(w):
            wt = w / theta
            gs = _g_star(wt, mean_coeff, a)
            gk = _g_kink(wt, mean_coeff, var_coeff, a, gs)
            head = _mark_mass(gk, gs, nlam, L, a)
            tail = _chebyshev_tail(wt, gk, mean_coeff, var_coeff, nlam, L, a, n_t)
            return head + tail
        return _adaptive_w_quad(f, params, epsabs, epsrel, w_layer)

    lam3_coarse, _ = tail_mass(64)
    lam3, err3 = tail_mass(128)
    inner_err = abs(lam3 - lam3_coarse)

    upper = min(lam1 + lam2 + lam3, 1.0)
    err = err1 + err2 + err3 + inner_err
    if upper < lower - max(err, rel_tol * lower):
        raise NumericalError(
            f"bound ordering violated: lower {lower:g} > upper {upper:g}"
        )
    return BoundReport(
        density=density,
        lower=lower,
        upper=max(upper, lower),
        lambda1=lam1,
        lambda2=lam2,
        lambda3=lam3,
        quadrature_error_estimate=float(err),
    )


# ---------------------------------------------------------------------------
# Scaling constants and capacity brackets
# ---------------------------------------------------------------------------

def kappas(params: SystemParams) -> DerivedConstants:
    """Power-law constants for the small-density / small-outage regime."""
    L = params.n_cancel
    n = params.n_antennas
    a = params.pathloss_alpha
    theta = params.sir_threshold
    nu = nu_coefficient(params)

    omega = float(_sp.gamma(L + 1) ** (-1.0 / L)) if L >= 1 else None

    s = (2.0 / a) * (L + 1)
    wmom = w_neg_moment(s, params)
    base = (nu * theta ** (2.0 / a)) ** (L + 1) / _sp.gamma(L + 2)
    kappa1 = kappa2 = None
    if wmom is not None:
        kappa1 = float(delta_moment(s, params) * wmom * base)
        kappa2 = float(2.0 ** (s + 1.0) * wmom * base)

    kappa3 = None
    if L + 1 > a and params.array_gain > 2:
        w2 = w_neg_moment(2.0, params)
        kappa3 = float(
            8.0 * theta**2 * nu**a * _sp.gamma(L - a + 2.0) * w2
            / (n * (n + 1.0) * (a - 1.0) * _sp.gamma(L + 1.0))
        )
    return DerivedConstants(nu, omega, kappa1, kappa2, kappa3)


def tc_asymptotic_eps(eps: float, params: SystemParams):
    """Small-outage transmission-capacity bracket ``(lower, upper)``.

    For L + 1 <= alpha the bracket constants are ``kappa2**(-1/(L+1))`` and
    ``kappa1**(-1/(L+1))`` on the scale ``log2(1+theta) * eps**(1/(L+1))``.
    For L + 1 > alpha the lower side switches to the kappa3 constant on the
    ``eps**(1/alpha)`` scale.  A side whose constant does not exist is None.
    """
    if not 0.0 < eps < 1.0:
        raise ParameterError("eps must lie in (0, 1)")
    L = params.n_cancel
    a = params.pathloss_alpha
    rate = math.log2(1.0 + params.sir_threshold)
    ks = kappas(params)
    upper = None
    if ks.kappa1 is not None:
        upper = float(ks.kappa1 ** (-1.0 / (L + 1)) * rate * eps ** (1.0 / (L + 1)))
    if L + 1 <= a:
        lower = None
        if ks.kappa2 is not None:
            lower = float(ks.kappa2 ** (-1.0 / (L + 1)) * rate * eps ** (1.0 / (L + 1)))
    else:
        lower = None
        if ks.kappa3 is not None:
            lower = float(ks.kappa3 ** (-1.0 / a) * rate * eps ** (1.0 / a))
    return lower, upper


def tc_scaling_constants(params: SystemParams, eps: float):
    """Constants bracketing ``C(L) / ((1-eps) * log2(1+theta) * L**(1-2/alpha))``
    in the many-canceled-interferers regime with the array gain N - L held
    fixed.  The lower constant needs a finite E[1/W], i.e. N - L >= 2."""
    if not 0.0 < eps < 1.0:
        raise ParameterError("eps must lie in (0, 1)")
    a = params.pathloss_alpha
    theta = params.sir_threshold
    k = params.array_gain
    upper = (2.0 / np.pi) * (k / (theta * (1.0 - eps))) ** (2.0 / a)
    lower = None
    if k >= 2:
        ew_inv = 1.0 / (k - 1.0)
        lower = (1.0 / np.pi) * (eps * (a - 2.0) / (2.0 * theta * ew_inv)) ** (2.0 / a)
    return lower, float(upper)


def training_length(n_cancel: int, theta_p: float, theta_b: float) -> TrainingLength:
    """Training length guaranteeing outage increase <= theta_p and rate loss
    <= theta_b (bits), never below the number of canceled interferers.

    ``M = max(ceil((ln L - ln theta_p) / (omega * (2**theta_b - 1))), L)``
    with ``omega = Gamma(L+1)**(-1/L)``; logarithms are natural.
    """
    if n_cancel < 1:
        raise ParameterError("n_cancel must be >= 1")
    if not 0.0 < theta_p < 1.0:
        raise ParameterError("theta_p must lie in (0, 1)")
    if not theta_b > 0.0:
        raise ParameterError("theta_b must be positive")
    omega = float(_sp.gamma(n_cancel + 1) ** (-1.0 / n_cancel))
    z = (math.log(n_cancel) - math.log(theta_p)) / (omega * (2.0 ** theta_b - 1.0))
    return TrainingLength(max(math.ceil(z), n_cancel), omega)


def capacity_loss_bound(theta_p: float, theta_b: float, eps: float,
                        sir_threshold: float) -> float:
    """Bound on the normalized capacity loss from imperfect estimation:
    ``theta_p / (1 - eps) + theta_b / log2(1 + theta)``."""
    return theta_p / (1.0 - eps) + theta_b / math.log2(1.0 + sir_threshold)


def training_length_scaling(eps: float, rho: float, n_cancel: int,
                            include_correction: bool = False) -> float:
    """Training length achieving the perfect-CSI capacity scaling as the
    outage target vanishes: leading term ``((1 + rho)/omega) * eps**(-rho)``,
    optionally plus the ``(ln L / omega) * eps**(-rho) / ln(1/eps)`` term."""
    if not rho > 0.0:
        raise ParameterError("rho must be positive")
    if n_cancel < 1:
        raise ParameterError("n_cancel must be >= 1")
    if not 0.0 < eps < 1.0:
        raise ParameterError("eps must lie in (0, 1)")
    omega = float(_sp.gamma(n_cancel + 1) ** (-1.0 / n_cancel))
    m = (1.0 + rho) / omega * eps ** (-rho)
    if include_correction:
        m += math.log(n_cancel) / omega * eps ** (-rho) / math.log(1.0 / eps)
    return m


def mean_total_interference(params: SystemParams) -> float | None:
    """Mean total post-cancellation interference power; None when the
    underlying gamma argument is non-positive (L <= alpha/2 - 1)."""
    L = params.n_cancel
    a = params.pathloss_alpha
    if L <= a / 2.0 - 1.0:
        return None
    nlam = nu_coefficient(params) * params.density
    return float(
        2.0 * nlam ** (a / 2.0) / (a - 2.0)
        * L * _sp.gamma(L - a / 2.0 + 1.0)
        / (params.n_antennas * _sp.gamma(L + 1.0))
    )


def mean_primary_interference(params: SystemParams) -> float | None:
    """Mean post-cancellation power of the primary interferer alone."""
    L = params.n_cancel
    a = params.pathloss_alpha
    if L + 1.0 - a / 2.0 <= 0.0:
        return None
    nlam = nu_coefficient(params) * params.density
    return float(
        _sp.gamma(L + 1.0 - a / 2.0) * nlam ** (a / 2.0)
        / (params.n_antennas * _sp.gamma(L + 1.0))
    )


def write_bounds_csv(path, reports) -> None:
    """One row per density: (lambda, lower, upper, Lambda1, Lambda2, Lambda3,
    quad_err)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "lower", "upper", "Lambda1", "Lambda2", "Lambda3", "quad_err"])
        for r in reports:
            w.writerow([
                repr(r.density), repr(r.lower), repr(r.upper),
                repr(r.lambda1), repr(r.lambda2), repr(r.lambda3),
                repr(r.quadrature_error_estimate),
            ])
