"""Pruning strategies and the fundamental curation constants.

A pruning strategy is a symmetric binary keep-rule q(t) = q(-t) in {0,1},
encoded by the set S of |t| values it keeps (a finite union of intervals on
[0, inf]). Every named strategy lives in this class:

    keep-easy   q(t) = 1[|t| >= alpha]        S = [alpha, inf)
    keep-hard   q(t) = 1[|t| <= alpha]        S = [0, alpha]
    q_{p,u}     keep-hard/keep-easy blend     S = [0, a] u [b, inf)
    all         q == 1                        S = [0, inf)

Given a strategy, a curation mode (label-agnostic or label-aware) and the
generator/oracle alignment tau, four scalars (p, gamma, beta, beta_tilde)
fully determine the downstream error laws. They are computed in closed form
from the I_k integrals, with generic Gaussian quadrature available as an
independent cross-check.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Tuple

import numpy as np

from .special_fn import (
    IntervalUnion,
    expectation_over_gaussian,
    fold_integral,
    gaussian_mass,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    std_normal_quantile_extended,
)

__all__ = [
    "CurationMode",
    "PruningFunction",
    "GeometrySpec",
    "CurationConstants",
    "InfeasibleGeometryError",
    "make_keep_easy",
    "make_keep_hard",
    "make_keep_all",
    "make_qpu",
    "make_intervals",
    "strategy_from_spec",
    "constants",
    "constants_quadrature",
    "gamma_bounds",
    "solve_u_for_gamma",
    "j_ratio",
]

_PHI0 = std_normal_pdf(0.0)


class InfeasibleGeometryError(ValueError):
    """The requested alignment cosines admit no embedding in R^d."""


class CurationMode(enum.Enum):
    LABEL_AGNOSTIC = "label_agnostic"
    LABEL_AWARE = "label_aware"


@dataclass(frozen=True)
class PruningFunction:
    """Symmetric keep-rule q with q(t) = 1 iff |t| in ``half_support``."""

    half_support: IntervalUnion

    def __call__(self, t: np.ndarray | float) -> np.ndarray | bool:
        return self.half_support.contains(np.abs(np.asarray(t, dtype=float)))

    def keep_fraction(self) -> float:
        """p = E[q(G)] for G ~ N(0,1), i.e. the Gaussian mass of -S u S."""
        return 2.0 * gaussian_mass(self.half_support)


@dataclass(frozen=True)
class GeometrySpec:
    """Alignment cosines between truth (w_*), generator (w_g), oracle (w_o).

    rho = cos(w_g, w_*), rho_g = cos(w_o, w_g), rho_star = cos(w_o, w_*).
    With ``strict=True`` (default) the 3x3 Gram matrix of the unit directions
    must be positive semidefinite; ``strict=False`` admits nominal triples
    used for asymptotic-regime evaluation (e.g. rho_star -> 1 limits) that
    have no exact finite-dimensional embedding.
    """

    rho: float
    rho_g: float
    rho_star: float
    strict: bool = True

    def __post_init__(self) -> None:
        for name in ("rho", "rho_g", "rho_star"):
            v = getattr(self, name)
            if not (-1.0 <= v <= 1.0):
                raise InfeasibleGeometryError(f"{name} = {v} outside [-1, 1]")
        if self.strict:
            lam_min = float(np.linalg.eigvalsh(self.gram_matrix())[0])
            if lam_min < -1e-12:
                raise InfeasibleGeometryError(
                    f"Gram matrix of (w_*, w_g, w_o) not PSD (min eig {lam_min:.3e}); "
                    "the cosine triple is not realizable")

    def gram_matrix(self) -> np.ndarray:
        return np.array([
            [1.0, self.rho, self.rho_star],
            [self.rho, 1.0, self.rho_g],
            [self.rho_star, self.rho_g, 1.0],
        ])

    @property
    def tau(self) -> float:
        return self.rho_g / self.sigma_perp

    @property
    def sigma_perp(self) -> float:
        return math.sqrt(1.0 - self.rho_g ** 2)

    @property
    def cos_xi(self) -> float:
        """Dihedral cosine (spherical law of cosines); defined when both
        rho_g and rho_star are interior."""
        denom = self.sigma_perp * math.sqrt(1.0 - self.rho_star ** 2)
        if denom == 0.0:
            raise InfeasibleGeometryError("cos_xi undefined: rho_g or rho_star is +-1")
        return (self.rho - self.rho_g * self.rho_star) / denom


@dataclass(frozen=True)
class CurationConstants:
    """The four scalars driving every error law."""

    p: float
    gamma: float
    beta: float
    beta_tilde: float

    def __post_init__(self) -> None:
        if not (-1e-12 <= self.p <= 1.0 + 1e-12):
            raise ValueError(f"p = {self.p} outside [0, 1]")
        if self.gamma < -1e-12:
            raise ValueError(f"gamma = {self.gamma} negative")


def make_keep_easy(alpha: float) -> PruningFunction:
    """q(t) = 1[|t| >= alpha]; keeps the two large-margin tails."""
    if not alpha > 0.0:
        raise ValueError(f"make_keep_easy: alpha must be > 0, got {alpha}")
    return PruningFunction(IntervalUnion(((alpha, math.inf),)))


def make_keep_hard(alpha: float) -> PruningFunction:
    """q(t) = 1[|t| <= alpha]; keeps the central small-margin band."""
    if not alpha > 0.0:
        raise ValueError(f"make_keep_hard: alpha must be > 0, got {alpha}")
    return PruningFunction(IntervalUnion(((0.0, alpha),)))


def make_keep_all() -> PruningFunction:
    """q == 1 (no difficulty filtering)."""
    return PruningFunction(IntervalUnion(((0.0, math.inf),)))


def qpu_thresholds(p: float, u: float) -> Tuple[float, float]:
    """(a, b) for the blend q_{p,u}: keep |t| <= a and |t| > b.

    a = Phi^{-1}((1 + (1-u) p) / 2), b = Phi^{-1}(1 - p u / 2); the central
    band carries Gaussian mass (1-u)p and the tails carry mass u*p.
    """
    a = std_normal_quantile_extended((1.0 + (1.0 - u) * p) / 2.0)
    b = std_normal_quantile_extended(1.0 - p * u / 2.0)
    return a, b


def make_qpu(p: float, u: float) -> PruningFunction:
    """Blend of keep-hard (fraction 1-u of the kept mass) and keep-easy (u)."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"make_qpu: p must be in (0, 1], got {p}")
    if not (0.0 <= u <= 1.0):
        raise ValueError(f"make_qpu: u must be in [0, 1], got {u}")
    a, b = qpu_thresholds(p, u)
    if u == 0.0 or math.isinf(a):
        # pure keep-hard (a may be inf when (1-u)p = 1, i.e. q == 1)
        if math.isinf(a):
            return make_keep_all()
        return make_keep_hard(a)
    if u == 1.0:
        # b = 0 (at p = 1) keeps the whole line
        return make_keep_easy(b) if b > 0.0 else make_keep_all()
    if b <= a:
        # only possible at p = 1, where the band and tails tile the line
        return make_keep_all()
    return PruningFunction(IntervalUnion(((0.0, a), (b, math.inf))))


def make_intervals(pairs) -> PruningFunction:
    """Strategy from explicit half-support interval pairs [(a, b), ...]."""
    cleaned = tuple((float(a), math.inf if b in (None, "inf") else float(b))
                    for a, b in pairs)
    return PruningFunction(IntervalUnion(cleaned))


def strategy_from_spec(spec: Mapping) -> PruningFunction:
    """Build a strategy from a config literal.

    Accepted forms:
        {"strategy": "keep_hard", "p": 0.5}
        {"strategy": "keep_easy", "p": 0.5}
        {"strategy": "qpu", "p": 0.5, "u": 0.3}
        {"strategy": "intervals", "half_support": [[a, b], ...]}
        {"strategy": "all"}
    """
    kind = spec.get("strategy")
    if kind == "all":
        return make_keep_all()
    if kind == "intervals":
        return make_intervals(spec["half_support"])
    p = float(spec["p"])
    if not (0.0 < p <= 1.0):
        raise ValueError(f"strategy p must be in (0, 1], got {p}")
    if kind == "keep_hard":
        if p == 1.0:
            return make_keep_all()
        return make_keep_hard(std_normal_quantile((1.0 + p) / 2.0))
    if kind == "keep_easy":
        if p == 1.0:
            return make_keep_all()
        return make_keep_easy(std_normal_quantile(1.0 - p / 2.0))
    if kind == "qpu":
        return make_qpu(p, float(spec["u"]))
    raise ValueError(f"unknown strategy kind: {kind!r}")


def _diff(g: Callable[[float], float], intervals) -> float:
    return sum(g(b) - g(a) for a, b in intervals)


def _closed_form(q: PruningFunction, mode: CurationMode, tau: float,
                 rho_g: float) -> CurationConstants:
    ivs = q.half_support.intervals
    sigma = math.sqrt(1.0 - rho_g ** 2)
    if mode is CurationMode.LABEL_AGNOSTIC:
        p = 2.0 * _diff(std_normal_cdf, ivs)

        def g_gamma(z: float) -> float:
            if math.isinf(z):
                return 1.0
            return std_normal_cdf(z) - z * std_normal_pdf(z)

        gamma = 2.0 * _diff(g_gamma, ivs)
        beta = 4.0 * _diff(lambda z: fold_integral(z, 2, rho_g), ivs)
        # beta_tilde = 2 E[q(G) Phi(tau G) G]; the integrand folds to
        # t (2 Phi(tau t) - 1) phi(t) on the half-line, and
        # int_a^b t phi(t) dt = phi(a) - phi(b)
        beta_tilde = (4.0 * _diff(lambda z: fold_integral(z, 3, rho_g), ivs)
                      + 2.0 * _diff(std_normal_pdf, ivs))
        return CurationConstants(p, gamma, beta, beta_tilde)
    p = 2.0 * _diff(lambda z: fold_integral(z, 1, rho_g), ivs)
    gamma = 2.0 * _diff(lambda z: fold_integral(z, 4, rho_g), ivs)
    beta = 2.0 * _diff(lambda z: fold_integral(z, 2, rho_g), ivs)
    beta_tilde = 2.0 * _diff(lambda z: fold_integral(z, 3, rho_g), ivs)
    return CurationConstants(p, gamma, beta, beta_tilde)


def constants_quadrature(q: PruningFunction, mode: CurationMode,
                         tau: float) -> CurationConstants:
    """The four constants by adaptive quadrature of their defining integrals.

    Serves as the independent oracle for the closed forms. All integrands are
    reduced to the half-line using the symmetry of q.
    """
    dom = q.half_support
    phi, Phi = std_normal_pdf, std_normal_cdf
    if mode is CurationMode.LABEL_AGNOSTIC:
        p = 2.0 * expectation_over_gaussian(lambda t: 1.0, dom)
        gamma = 2.0 * expectation_over_gaussian(lambda t: t * t, dom)
        beta = 4.0 * expectation_over_gaussian(lambda t: phi(tau * t), dom)
        # Phi(tau t) t + Phi(-tau t)(-t) = t (2 Phi(tau t) - 1)
        beta_tilde = 2.0 * expectation_over_gaussian(
            lambda t: t * (2.0 * Phi(tau * t) - 1.0), dom)
    else:
        p = 2.0 * expectation_over_gaussian(lambda t: Phi(tau * t), dom)
        gamma = 2.0 * expectation_over_gaussian(lambda t: Phi(tau * t) * t * t, dom)
        beta = 2.0 * expectation_over_gaussian(lambda t: phi(tau * t), dom)
        beta_tilde = 2.0 * expectation_over_gaussian(lambda t: Phi(tau * t) * t, dom)
    return CurationConstants(p, gamma, beta, beta_tilde)


def constants(q: PruningFunction, mode: CurationMode, geom: GeometrySpec,
              verify: bool = False, verify_tol: float = 1e-8) -> CurationConstants:
    """The fundamental constants (p, gamma, beta, beta_tilde).

    Label-agnostic:  p = E[q(G)],            gamma = E[q(G) G^2],
                     beta = 2 E[q(G) phi(tau G)],
                     beta_tilde = 2 E[q(G) Phi(tau G) G].
    Label-aware:     p = E[q(G) Phi(tau|G|)], gamma = E[q(G) Phi(tau|G|) G^2],
                     beta = E[q(G) phi(tau G)],
                     beta_tilde = E[q(G) Phi(tau|G|) |G|].

    Closed forms are returned; with ``verify=True`` they are cross-checked
    against generic quadrature to ``verify_tol``.
    """
    if abs(geom.rho_g) >= 1.0:
        raise InfeasibleGeometryError("constants undefined at |rho_g| = 1 (sigma = 0)")
    cf = _closed_form(q, mode, geom.tau, geom.rho_g)
    if verify:
        qd = constants_quadrature(q, mode, geom.tau)
        for name in ("p", "gamma", "beta", "beta_tilde"):
            a, b = getattr(cf, name), getattr(qd, name)
            if abs(a - b) > verify_tol:
                raise AssertionError(
                    f"closed-form {name} = {a!r} disagrees with quadrature {b!r}")
    return cf


def gamma_bounds(p: float) -> Tuple[float, float]:
    """Attainable range of gamma at keep fraction p (the Spec(Q) lens).

    gamma_min(p) = p - 2 a phi(a) at a = Phi^{-1}((1+p)/2)  (keep-hard),
    gamma_max(p) = p + 2 b phi(b) at b = Phi^{-1}(1 - p/2)  (keep-easy).
    """
    if not (0.0 < p <= 1.0):
        raise ValueError(f"gamma_bounds: p must be in (0, 1], got {p}")
    if p == 1.0:
        return 1.0, 1.0
    a_min = std_normal_quantile((1.0 + p) / 2.0)
    a_max = std_normal_quantile(1.0 - p / 2.0)
    gmin = p - 2.0 * a_min * std_normal_pdf(a_min)
    gmax = p + 2.0 * a_max * std_normal_pdf(a_max)
    return gmin, gmax


def _gamma_of_qpu(p: float, u: float) -> float:
    a, b = qpu_thresholds(p, u)
    pa = a * std_normal_pdf(a) if not math.isinf(a) else 0.0
    pb = b * std_normal_pdf(b) if not math.isinf(b) else 0.0
    return p - 2.0 * pa + 2.0 * pb


def solve_u_for_gamma(p: float, gamma_target: float, tol: float = 1e-10) -> float:
    """Find u in [0, 1] with gamma(q_{p,u}) = gamma_target, by bisection.

    gamma(q_{p,u}) increases continuously from gamma_min(p) at u = 0 to
    gamma_max(p) at u = 1, so a unique solution exists inside the lens.
    """
    gmin, gmax = gamma_bounds(p)
    if not (gmin - 1e-12 <= gamma_target <= gmax + 1e-12):
        raise ValueError(
            f"gamma_target = {gamma_target} outside the attainable lens "
            f"[{gmin}, {gmax}] at p = {p}")
    lo, hi = 0.0, 1.0
    if _gamma_of_qpu(p, lo) >= gamma_target:
        return 0.0
    if _gamma_of_qpu(p, hi) <= gamma_target:
        return 1.0
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        g = _gamma_of_qpu(p, mid)
        if abs(g - gamma_target) <= tol:
            return mid
        if g < gamma_target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def j_ratio(c: CurationConstants) -> float:
    """j = gamma * beta / (p * beta_tilde); the strategy-selection ratio."""
    if c.p <= 0.0:
        raise ValueError("j_ratio undefined: p = 0")
    if c.beta_tilde == 0.0:
        raise ZeroDivisionError(
            "j_ratio undefined: beta_tilde = 0 (orthogonal oracle, tau = 0)")
    return c.gamma * c.beta / (c.p * c.beta_tilde)
