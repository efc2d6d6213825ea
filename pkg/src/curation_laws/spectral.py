"""Pruning-deformed Marchenko-Pastur spectral functions.

The trace resolvent of the pruned sample covariance converges to m(z), the
unique positive solution (for z = -lambda < 0) of

    1/m = -z + p / (1 + phi m),

with closed form m(z) = (p - phi - z - sqrt((p - phi - z)^2 - 4 phi z)) / (2 phi z).
All derived quantities (m_bar = z m, s, m_tilde, r) and their z-derivatives
are evaluated analytically; ridgeless (lambda -> 0) limits branch at the
interpolation threshold phi = p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .curation import CurationConstants

__all__ = [
    "SpectralPoint",
    "RidgelessLimits",
    "stieltjes_m",
    "spectral_point",
    "ridgeless_limits",
    "general_t_solver",
]


def stieltjes_m(p: float, phi: float, lam: float) -> float:
    """m(-lambda) for the pruning-deformed MP law, cancellation-safe.

    With A = p - phi + lambda, the two algebraically equal forms

        m = (sqrt(A^2 + 4 phi lambda) - A) / (2 phi lambda)
        m = 2 / (A + sqrt(A^2 + 4 phi lambda))

    lose precision for A < 0 and A > 0 respectively; we pick per sign.
    """
    if not (0.0 < p <= 1.0):
        raise ValueError(f"stieltjes_m: p must be in (0, 1], got {p}")
    if not phi > 0.0:
        raise ValueError(f"stieltjes_m: phi must be > 0, got {phi}")
    if not lam > 0.0:
        raise ValueError(
            f"stieltjes_m: lambda must be > 0 (got {lam}); use ridgeless_limits at 0")
    a = p - phi + lam
    root = math.sqrt(a * a + 4.0 * phi * lam)
    if a >= 0.0:
        return 2.0 / (a + root)
    return (root - a) / (2.0 * phi * lam)


@dataclass(frozen=True)
class SpectralPoint:
    """All spectral functions and derivatives at z = -lambda."""

    z: float
    m: float
    m_prime: float
    m_bar: float
    m_bar_prime: float
    s: float
    m_tilde: float
    m_tilde_prime: float
    r: float
    r_prime: float
    # inputs echoed
    p: float
    gamma: float
    beta: float
    beta_tilde: float
    phi: float


def spectral_point(c: CurationConstants, phi: float, lam: float) -> SpectralPoint:
    """Evaluate m, m_bar, s, m_tilde, r and their z-derivatives at z = -lambda."""
    z = -lam
    m = stieltjes_m(c.p, phi, lam)
    residual = 1.0 / m - (-z + c.p / (1.0 + phi * m))
    if abs(residual) > 1e-12 * max(1.0, 1.0 / m):
        raise AssertionError(f"fixed-point residual {residual:.3e} too large")
    m_bar = z * m
    one_plus = 1.0 + phi * m
    s = c.gamma / one_plus
    denom_tilde = s - z
    assert denom_tilde > 0.0, "s - z must be positive for z < 0, gamma >= 0"
    m_tilde = 1.0 / denom_tilde
    m_prime = m * m / (1.0 - (1.0 + m_bar) ** 2 * phi / c.p)
    m_bar_prime = c.p / ((phi + 1.0 / m) ** 2 - c.p * phi)
    m_tilde_prime = m_tilde * m_tilde * (c.gamma * phi * m_prime / one_plus ** 2 + 1.0)
    r = c.beta ** 2 * m + c.beta_tilde ** 2 * m_tilde
    r_prime = c.beta ** 2 * m_prime + c.beta_tilde ** 2 * m_tilde_prime
    assert m_prime > 0.0, "Stieltjes transform must be increasing in z on (-inf, 0)"
    return SpectralPoint(z=z, m=m, m_prime=m_prime, m_bar=m_bar,
                         m_bar_prime=m_bar_prime, s=s, m_tilde=m_tilde,
                         m_tilde_prime=m_tilde_prime, r=r, r_prime=r_prime,
                         p=c.p, gamma=c.gamma, beta=c.beta,
                         beta_tilde=c.beta_tilde, phi=phi)


@dataclass(frozen=True)
class RidgelessLimits:
    """lambda -> 0 limits of the spectral functions.

    Under-parametrized branch (phi < p): the unscaled limits (m, m_tilde,
    derivatives, r, r_prime) are finite and populated; the -z and z^2 scaled
    limits all vanish except m_bar_prime.

    Over-parametrized branch (phi > p): only the scaled limits are finite;
    c0 = 1 - p/phi and c1 = gamma/phi + c0 are populated.
    """

    branch: str  # "under" (phi < p) or "over" (phi > p)
    neg_z_m: float
    z2_m_prime: float
    m_bar_prime: float
    neg_z_m_tilde: float
    z2_m_tilde_prime: float
    neg_z_r: float
    z2_r_prime: float
    c0: Optional[float] = None
    c1: Optional[float] = None
    m: Optional[float] = None
    m_tilde: Optional[float] = None
    m_prime: Optional[float] = None
    m_tilde_prime: Optional[float] = None
    r: Optional[float] = None
    r_prime: Optional[float] = None


def ridgeless_limits(c: CurationConstants, phi: float) -> RidgelessLimits:
    """Branch-resolved lambda -> 0 limits; rejects the threshold phi = p."""
    if not phi > 0.0:
        raise ValueError(f"ridgeless_limits: phi must be > 0, got {phi}")
    if abs(phi - c.p) < 1e-9:
        raise ValueError(
            f"ridgeless_limits: at interpolation threshold phi = p = {c.p}; "
            "use finite-lambda evaluation instead")
    p, gamma, b2, b1 = c.p, c.gamma, c.beta ** 2, c.beta_tilde ** 2
    if phi < p:
        d = p - phi
        m = 1.0 / d
        m_tilde = (p / gamma) / d
        m_prime = p / d ** 3
        m_bar_prime = 1.0 / d
        m_tilde_prime = (p / gamma ** 2) * (p * d + phi * gamma) / d ** 3
        return RidgelessLimits(
            branch="under",
            neg_z_m=0.0, z2_m_prime=0.0, m_bar_prime=m_bar_prime,
            neg_z_m_tilde=0.0, z2_m_tilde_prime=0.0, neg_z_r=0.0, z2_r_prime=0.0,
            m=m, m_tilde=m_tilde, m_prime=m_prime,
            m_tilde_prime=m_tilde_prime,
            r=b2 * m + b1 * m_tilde,
            r_prime=b2 * m_prime + b1 * m_tilde_prime)
    c0 = 1.0 - p / phi
    c1 = gamma / phi + c0
    neg_z_mt = c0 / c1
    neg_z_r = b2 * c0 + b1 * neg_z_mt
    return RidgelessLimits(
        branch="over",
        neg_z_m=c0, z2_m_prime=c0,
        m_bar_prime=(p / phi) / (phi - p),
        neg_z_m_tilde=neg_z_mt, z2_m_tilde_prime=neg_z_mt,
        neg_z_r=neg_z_r, z2_r_prime=neg_z_r,
        c0=c0, c1=c1)


def general_t_solver(c_spectrum: Sequence[Tuple[float, float]], p: float,
                     phi: float, lam: float, tol: float = 1e-14,
                     max_iter: int = 200) -> float:
    """Solve p - phi - t = -lambda * phi * sum_i w_i / (t * ev_i + lambda).

    ``c_spectrum`` is a list of (eigenvalue, weight) pairs with weights
    summing to 1; this is the covariance-spectrum generalization of the
    isotropic fixed point (identity spectrum gives t = 1/m + z).

    The residual p - phi - t - RHS(t) is strictly decreasing in t and
    positive at t = 0, so bisection on [0, p] is safe.
    """
    evs = [float(e) for e, _ in c_spectrum]
    wts = [float(w) for _, w in c_spectrum]
    if any(e <= 0.0 for e in evs):
        raise ValueError("spectrum eigenvalues must be positive")
    if abs(sum(wts) - 1.0) > 1e-12:
        raise ValueError(f"spectrum weights must sum to 1, got {sum(wts)}")
    if not lam > 0.0:
        raise ValueError("general_t_solver requires lambda > 0")

    def residual(t: float) -> float:
        rhs = -lam * phi * sum(w / (t * e + lam) for e, w in zip(evs, wts))
        return p - phi - t - rhs

    lo, hi = 0.0, p
    if residual(hi) > 0.0:
        # can only happen through rounding; expand conservatively
        while residual(hi) > 0.0 and hi < 1e6:
            hi *= 2.0
        if residual(hi) > 0.0:
            raise RuntimeError("general_t_solver: failed to bracket the root")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        res = residual(mid)
        if abs(res) <= tol:
            return mid
        if res > 0.0:
            lo = mid
        else:
            hi = mid
    if hi - lo > 1e-12 * max(1.0, hi):
        raise RuntimeError("general_t_solver: bisection did not converge")
    return 0.5 * (lo + hi)
