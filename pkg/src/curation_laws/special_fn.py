"""Scalar Gaussian special functions and quadrature primitives.

Everything downstream (curation constants, lens boundaries, closed-form
integrals) reduces to the standard normal pdf/cdf, its inverse, the
bivariate normal cdf, and integrals of the form

    I_k(alpha) = int_0^alpha f_k(t) phi(t) dt,

where phi is the standard normal density and f_k involves phi/Phi at a
scaled argument tau*t, tau = rho_g / sqrt(1 - rho_g^2).

All functions here are pure and stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy import integrate

__all__ = [
    "IntervalUnion",
    "QuadratureError",
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_quantile",
    "std_normal_quantile_extended",
    "bivariate_normal_cdf",
    "expectation_over_gaussian",
    "gaussian_mass",
    "fold_integral",
]

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)
_PHI0 = 1.0 / _SQRT2PI

#: Gaussian tails carry mass < 1e-31 beyond |t| = 12; all integrands here are
#: polynomially bounded times phi, so truncation at 12 is below double rounding.
TAIL_CUTOFF = 12.0


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge to the requested tolerance."""


@dataclass(frozen=True)
class IntervalUnion:
    """Finite ordered union of disjoint intervals on the half-line [0, inf].

    ``intervals`` is a tuple of (a_j, b_j) pairs with
    0 <= a_1 < b_1 < a_2 < ... < b_k, where only the last b_k may be +inf.
    """

    intervals: Tuple[Tuple[float, float], ...]

    def __post_init__(self) -> None:
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        prev_b = -1.0
        for j, (a, b) in enumerate(ivs):
            if not (a >= 0.0 and a < b):
                raise ValueError(f"interval {j} invalid: ({a}, {b})")
            if a <= prev_b:
                raise ValueError(f"interval {j} overlaps or touches predecessor")
            if math.isinf(b) and j != len(ivs) - 1:
                raise ValueError("only the last interval may be unbounded")
            if math.isinf(a):
                raise ValueError("interval start must be finite")
            prev_b = b

    def contains(self, t: np.ndarray | float) -> np.ndarray | bool:
        """Indicator of membership, vectorized over ``t`` (t >= 0 expected)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (t >= a) & (t <= b)
        return out if out.shape else bool(out)


def std_normal_pdf(x: float) -> float:
    """phi(x) = exp(-x^2/2) / sqrt(2*pi). Rejects NaN; +-inf maps to 0."""
    if math.isnan(x):
        raise ValueError("std_normal_pdf: input is NaN")
    if math.isinf(x):
        return 0.0
    return math.exp(-0.5 * x * x) / _SQRT2PI


def std_normal_cdf(x: float) -> float:
    """Phi(x) via the complementary error function (abs err < 1e-15)."""
    if math.isnan(x):
        raise ValueError("std_normal_cdf: input is NaN")
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    return 0.5 * math.erfc(-x / _SQRT2)


# Acklam's rational approximation to Phi^{-1}, ~1.15e-9 relative accuracy,
# used as the initial guess and then polished by two Newton steps.
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def _acklam(u: float) -> float:
    plow, phigh = 0.02425, 1.0 - 0.02425
    if u < plow:
        q = math.sqrt(-2.0 * math.log(u))
        return (((((_ACK_C[0] * q + _ACK_C[1]) * q + _ACK_C[2]) * q + _ACK_C[3]) * q
                 + _ACK_C[4]) * q + _ACK_C[5]) / \
               ((((_ACK_D[0] * q + _ACK_D[1]) * q + _ACK_D[2]) * q + _ACK_D[3]) * q + 1.0)
    if u > phigh:
        return -_acklam(1.0 - u)
    q = u - 0.5
    r = q * q
    return (((((_ACK_A[0] * r + _ACK_A[1]) * r + _ACK_A[2]) * r + _ACK_A[3]) * r
             + _ACK_A[4]) * r + _ACK_A[5]) * q / \
           (((((_ACK_B[0] * r + _ACK_B[1]) * r + _ACK_B[2]) * r + _ACK_B[3]) * r
             + _ACK_B[4]) * r + 1.0)


def std_normal_quantile(u: float) -> float:
    """Phi^{-1}(u) for u in (0, 1); |Phi(x) - u| <= 1e-13 after polishing."""
    if not (0.0 < u < 1.0):
        raise ValueError(f"std_normal_quantile: u must be in (0,1), got {u}")
    x = _acklam(u)
    for _ in range(2):
        err = std_normal_cdf(x) - u
        d = std_normal_pdf(x)
        if d > 0.0:
            x -= err / d
    return x


def std_normal_quantile_extended(u: float) -> float:
    """Extended-value quantile: u = 0 maps to -inf, u = 1 to +inf."""
    if u == 0.0:
        return -math.inf
    if u == 1.0:
        return math.inf
    return std_normal_quantile(u)


# 128-point Gauss-Legendre rule, cached; the bivariate integrand below is
# analytic on the (compact) integration range, so convergence is spectral.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(128)


def _phi2_arc(x: float, y: float, lo: float, hi: float) -> float:
    """(1/2pi) * int_lo^hi exp(-(x^2 + y^2 - 2 x y sin th) / (2 cos^2 th)) dth."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    th = mid + half * _GL_NODES
    s = np.sin(th)
    c2 = np.cos(th) ** 2
    expo = -(x * x + y * y - 2.0 * x * y * s) / (2.0 * c2)
    vals = np.where(c2 > 0.0, np.exp(np.clip(expo, -745.0, 0.0)), 0.0)
    return half * float(np.dot(_GL_WEIGHTS, vals)) / (2.0 * math.pi)


def bivariate_normal_cdf(x: float, y: float, corr: float) -> float:
    """P(G1 <= x, G2 <= y) for standard bivariate normals with correlation corr.

    Uses the classical single-integral reduction over the correlation angle
    (substitution r = sin(theta), so the integrand is analytic):

        Phi2(x, y; rho) = Phi(x) Phi(y)
            + (1/2pi) int_0^{arcsin rho} exp(-(x^2+y^2-2xy sin t)/(2 cos^2 t)) dt
    """
    if math.isnan(corr) or abs(corr) > 1.0:
        raise ValueError(f"bivariate_normal_cdf: |corr| must be <= 1, got {corr}")
    if math.isnan(x) or math.isnan(y):
        raise ValueError("bivariate_normal_cdf: NaN argument")
    if math.isinf(x) or math.isinf(y):
        if x == -math.inf or y == -math.inf:
            return 0.0
        if x == math.inf:
            return std_normal_cdf(y)
        return std_normal_cdf(x)
    if corr == 1.0:
        return std_normal_cdf(min(x, y))
    if corr == -1.0:
        return max(0.0, std_normal_cdf(x) + std_normal_cdf(y) - 1.0)
    base = std_normal_cdf(x) * std_normal_cdf(y)
    hi = math.asin(corr)
    # split the arc for |corr| near 1, where a boundary layer forms at theta=+-pi/2
    if abs(corr) > 0.9:
        mid = math.copysign(math.asin(0.9), corr)
        val = _phi2_arc(x, y, 0.0, mid) + _phi2_arc(x, y, mid, hi)
    else:
        val = _phi2_arc(x, y, 0.0, hi)
    return base + val


def gaussian_mass(domain: IntervalUnion) -> float:
    """int_domain phi(t) dt = sum_j Phi(b_j) - Phi(a_j)."""
    return sum(std_normal_cdf(b) - std_normal_cdf(a) for a, b in domain.intervals)


def expectation_over_gaussian(f: Callable[[float], float], domain: IntervalUnion,
                              rel_tol: float = 1e-11) -> float:
    """int_domain f(t) phi(t) dt by adaptive quadrature, tails cut at |t| = 12.

    ``f`` must be bounded on the domain. Symmetric extension to -S u S is the
    caller's responsibility.
    """
    total = 0.0
    for a, b in domain.intervals:
        hi = min(b, TAIL_CUTOFF)
        if hi <= a:
            continue
        val, err = integrate.quad(lambda t: f(t) * std_normal_pdf(t), a, hi,
                                  epsabs=1e-14, epsrel=rel_tol, limit=200)
        if err > max(1e-9, 1e-6 * abs(val)):
            raise QuadratureError(
                f"integral over ({a}, {b}) did not converge: estimate {val}, error {err}")
        total += val
    return total


def _tau_sigma(rho_g: float) -> Tuple[float, float]:
    if abs(rho_g) >= 1.0:
        raise ValueError(f"fold_integral: |rho_g| must be < 1, got {rho_g}")
    sigma = math.sqrt(1.0 - rho_g * rho_g)
    return rho_g / sigma, sigma


def fold_integral(alpha: float, k: int, rho_g: float) -> float:
    """Closed form of I_k(alpha) = int_0^alpha f_k(t) phi(t) dt, k in 1..4.

    f_1 = Phi(tau t), f_2 = phi(tau t), f_3 = t Phi(tau t), f_4 = t^2 Phi(tau t),
    with tau = rho_g / sqrt(1 - rho_g^2). alpha = +inf is handled by the
    vanishing limits of phi(alpha) and alpha*phi(alpha).
    """
    if math.isnan(alpha) or alpha < 0.0:
        raise ValueError(f"fold_integral: alpha must be >= 0, got {alpha}")
    tau, sigma = _tau_sigma(rho_g)
    if k == 2:
        return sigma * _PHI0 * (std_normal_cdf(alpha / sigma) - 0.5)
    if k == 1:
        if math.isinf(alpha):
            phi2_a = std_normal_cdf(0.0)  # Phi2(inf, 0; rho) = Phi(0)
        else:
            phi2_a = bivariate_normal_cdf(alpha, 0.0, rho_g)
        phi2_0 = bivariate_normal_cdf(0.0, 0.0, rho_g)
        return std_normal_cdf(alpha) - 0.5 - (phi2_a - phi2_0)
    if k == 3:
        if math.isinf(alpha):
            edge = 0.0
        else:
            edge = std_normal_pdf(alpha) * std_normal_cdf(tau * alpha)
        return tau * fold_integral(alpha, 2, rho_g) - (edge - 0.5 * _PHI0)
    if k == 4:
        if math.isinf(alpha):
            edge1 = 0.0
            edge2 = 0.0
        else:
            edge1 = alpha * std_normal_pdf(alpha) * std_normal_cdf(tau * alpha)
            edge2 = std_normal_pdf(alpha) * std_normal_pdf(tau * alpha)
        return (fold_integral(alpha, 1, rho_g) - edge1
                + rho_g * sigma * (_PHI0 * _PHI0 - edge2))
    raise ValueError(f"fold_integral: k must be in 1..4, got {k}")
