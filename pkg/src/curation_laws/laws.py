"""Exact error laws for curated linear classification and regression.

Classification: the test error of the ridge estimator trained on pruned data
converges to (1/pi) arccos(|m0| / sqrt(nu0)), where m0 and nu0 are assembled
from the curation constants, the alignment geometry, and the deformed-MP
spectral functions at z = -lambda. The data-rich double limit
(lambda -> 0 then phi -> 0) collapses to a ratio involving only the four
constants and the geometry, which drives the strategy-selection results.

Regression: the excess risk decomposes exactly into a bias term B, a noise
variance term V, and a shift correction coming from the generator/truth
mismatch; the ridgeless limit branches at the interpolation threshold
phi = p, where the variance blows up.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict

from .curation import (
    CurationConstants,
    CurationMode,
    GeometrySpec,
    make_keep_easy,
    make_keep_hard,
    make_qpu,
    constants as curation_constants,
)
from .special_fn import std_normal_quantile
from .spectral import ridgeless_limits, spectral_point

__all__ = [
    "OmegaConvention",
    "ClassificationPrediction",
    "RegressionGeometry",
    "RegressionPrediction",
    "classification_error",
    "classification_error_ridgeless",
    "data_rich_F",
    "compare_strategies",
    "regression_error",
    "regression_error_ridgeless",
    "collapse_mitigation",
    "optimal_p_asymptotic",
]


class OmegaConvention(enum.Enum):
    """Two published definitions of the truth/generator overlap weight omega.

    The statement-level definition is omega = rho - rho_g rho_*; the
    derivation produces omega = beta (rho - rho_g rho_*) / sqrt(1 - rho_g^2),
    which carries the beta factor that makes its units match
    omega_tilde = beta_tilde rho_*. The derivation form is the default; the
    Monte Carlo acceptance suite adjudicates.
    """

    THEOREM_STATEMENT = "theorem_statement"
    PROOF_DERIVATION = "proof_derivation"


@dataclass(frozen=True)
class ClassificationPrediction:
    m0: float
    nu0: float
    omega: float
    omega_tilde: float
    error: float
    convention: OmegaConvention


def _clamp_error(raw: float) -> float:
    """Clamp to [0, 0.5]; anything further than 1e-8 outside is a hard error."""
    if not (-1e-8 <= raw <= 0.5 + 1e-8):
        raise AssertionError(f"error {raw} outside [0, 0.5] beyond tolerance")
    return min(max(raw, 0.0), 0.5)


def _arccos_error(ratio: float, lenient: bool = False) -> float:
    """(1/pi) arccos |ratio|. Feasible geometries satisfy |ratio| <= 1 up to
    rounding; nominal infeasible triples (strict=False) may exceed 1 and are
    clamped to error 0 when ``lenient``."""
    if not lenient and abs(ratio) > 1.0 + 1e-10:
        raise AssertionError(f"|m0|/sqrt(nu0) = {abs(ratio)} exceeds 1")
    ratio = min(max(ratio, -1.0), 1.0)
    return _clamp_error(math.acos(abs(ratio)) / math.pi)


def _omega(geom: GeometrySpec, c: CurationConstants,
           convention: OmegaConvention) -> float:
    k = geom.rho - geom.rho_g * geom.rho_star
    if convention is OmegaConvention.PROOF_DERIVATION:
        if geom.sigma_perp == 0.0:
            if abs(k) > 1e-12:
                raise ValueError(
                    "omega undefined: rho_g = +-1 with rho != rho_g rho_star")
            return 0.0
        return c.beta * k / geom.sigma_perp
    return k


def classification_error(geom: GeometrySpec, c: CurationConstants, phi: float,
                         lam: float,
                         convention: OmegaConvention = OmegaConvention.PROOF_DERIVATION,
                         ) -> ClassificationPrediction:
    """Exact asymptotic test error of the ridge classifier on curated data.

    m0 = omega m(-lambda) + omega_tilde m_tilde(-lambda), omega_tilde =
    beta_tilde rho_*; nu0 = p phi m' + r' - 2 phi m' r / (1 + phi m);
    error = (1/pi) arccos(|m0| / sqrt(nu0)).
    """
    sp = spectral_point(c, phi, lam)
    omega = _omega(geom, c, convention)
    omega_tilde = c.beta_tilde * geom.rho_star
    m0 = omega * sp.m + omega_tilde * sp.m_tilde
    nu0 = (c.p * phi * sp.m_prime + sp.r_prime
           - 2.0 * phi * sp.m_prime * sp.r / (1.0 + phi * sp.m))
    assert nu0 > 0.0, f"nu0 = {nu0} must be positive"
    err = _arccos_error(m0 / math.sqrt(nu0), lenient=not geom.strict)
    return ClassificationPrediction(m0=m0, nu0=nu0, omega=omega,
                                    omega_tilde=omega_tilde, error=err,
                                    convention=convention)


def classification_error_ridgeless(geom: GeometrySpec, c: CurationConstants,
                                   phi: float,
                                   convention: OmegaConvention = OmegaConvention.PROOF_DERIVATION,
                                   ) -> float:
    """Ridgeless (lambda -> 0) classification error on either branch.

    Under-parametrized (phi < p): all spectral limits are finite and the
    finite-lambda assembly passes to the limit directly. Over-parametrized
    (phi > p): m0 and sqrt(nu0) both diverge like 1/lambda and only their
    ratio survives.
    """
    rl = ridgeless_limits(c, phi)
    omega = _omega(geom, c, convention)
    omega_tilde = c.beta_tilde * geom.rho_star
    if rl.branch == "under":
        m0 = omega * rl.m + omega_tilde * rl.m_tilde
        one_plus = 1.0 + phi * rl.m
        nu0 = (c.p * phi * rl.m_prime + rl.r_prime
               - 2.0 * phi * rl.m_prime * rl.r / one_plus)
    else:
        # scaled limits: multiply m0 by lambda and nu0 by lambda^2
        c0, c1 = rl.c0, rl.c1
        m0 = omega * c0 + omega_tilde * (c0 / c1)
        r0 = c.beta ** 2 + c.beta_tilde ** 2 / c1
        # p phi m' + r' - 2 phi m' r / (1 + phi m) -> c0 (p phi - r0) / lam^2
        nu0 = c0 * (c.p * phi - r0)
    if m0 == 0.0:
        return 0.5
    assert nu0 > 0.0, f"scaled nu0 = {nu0} must be positive"
    return _arccos_error(m0 / math.sqrt(nu0), lenient=not geom.strict)


def data_rich_ratio(geom: GeometrySpec, c: CurationConstants) -> float:
    """The alignment ratio whose arccos gives the data-rich limit F.

    ratio = ((beta/p) k + (beta_tilde/gamma) rho_*)
            / sqrt(beta^2/p^2 + beta_tilde^2/gamma^2)
    with k = (rho - rho_g rho_*) / sqrt(1 - rho_g^2). For feasible cosine
    triples |ratio| <= 1; nominal asymptotic-regime triples (strict=False)
    may exceed 1 slightly and are clamped by data_rich_F.
    """
    if c.beta == 0.0 and c.beta_tilde == 0.0:
        raise ValueError("data_rich limit undefined: beta = beta_tilde = 0")
    k = (geom.rho - geom.rho_g * geom.rho_star) / geom.sigma_perp
    num = (c.beta / c.p) * k + (c.beta_tilde / c.gamma) * geom.rho_star
    den = math.hypot(c.beta / c.p, c.beta_tilde / c.gamma)
    return num / den


def data_rich_F(geom: GeometrySpec, c: CurationConstants) -> float:
    """The data-rich limit F = lim_{phi->0} lim_{lambda->0} of the error.

    F = (1/pi) arccos min(|ratio|, 1); ratios beyond 1 occur only for
    nominal infeasible triples and map to error 0.
    """
    ratio = min(abs(data_rich_ratio(geom, c)), 1.0)
    return _clamp_error(math.acos(ratio) / math.pi)


def compare_strategies(geom: GeometrySpec, p: float, mode: CurationMode,
                       u_mid: float = 0.5) -> Dict:
    """data_rich_F for keep-easy, keep-hard and the q_{p,u_mid} blend at equal p.

    Returns per-strategy F values, the argmin label, and the per-strategy
    curation constants for inspection. No strategy ordering is assumed.
    """
    if not (0.0 < p < 1.0):
        raise ValueError(f"compare_strategies: p must be in (0, 1), got {p}")
    if not geom.rho_g > 0.0:
        raise ValueError("compare_strategies requires rho_g > 0")
    strategies = {
        "keep_hard": make_keep_hard(std_normal_quantile((1.0 + p) / 2.0)),
        "keep_easy": make_keep_easy(std_normal_quantile(1.0 - p / 2.0)),
        "qpu_mid": make_qpu(p, u_mid),
    }
    values: Dict[str, float] = {}
    ratios: Dict[str, float] = {}
    consts: Dict[str, CurationConstants] = {}
    for name, q in strategies.items():
        cc = curation_constants(q, mode, geom)
        consts[name] = cc
        ratios[name] = data_rich_ratio(geom, cc)
        values[name] = data_rich_F(geom, cc)
    # rank by the unclamped ratio: error is strictly decreasing in |ratio|,
    # and nominal triples can clamp several strategies' F to 0
    argmin = max(ratios, key=lambda nm: abs(ratios[nm]))
    return {"F": values, "ratio": ratios, "argmin": argmin,
            "constants": consts, "p": p, "mode": mode.value}


@dataclass(frozen=True)
class RegressionGeometry:
    """Generator/truth geometry for regression: r = ||w_g||, ||w_*|| = 1."""

    norm_wg: float
    rho: float
    rho_g: float
    rho_star: float
    strict: bool = True

    def __post_init__(self) -> None:
        if not self.norm_wg > 0.0:
            raise ValueError(f"norm_wg must be > 0, got {self.norm_wg}")
        # reuse the cosine-triple feasibility check
        GeometrySpec(self.rho, self.rho_g, self.rho_star, strict=self.strict)

    @property
    def r(self) -> float:
        return self.norm_wg

    @property
    def parallel_sq(self) -> float:
        """||w_g^par||^2: squared projection of w_g onto w_o."""
        return self.rho_g ** 2 * self.r ** 2

    @property
    def perp_sq(self) -> float:
        """||w_g^perp||^2 = ||w_g||^2 - ||w_g^par||^2."""
        return (1.0 - self.rho_g ** 2) * self.r ** 2

    @property
    def a(self) -> float:
        """eps . w_g^perp with eps = w_g - w_*."""
        return self.perp_sq - self.r * (self.rho - self.rho_g * self.rho_star)

    @property
    def b(self) -> float:
        """eps . w_g^par."""
        return self.parallel_sq - self.r * self.rho_g * self.rho_star

    @property
    def c_sq(self) -> float:
        """||w_g - w_*||^2 = 1 + r^2 - 2 r rho."""
        return 1.0 + self.r ** 2 - 2.0 * self.r * self.rho


@dataclass(frozen=True)
class RegressionPrediction:
    bias_B: float
    variance_V: float
    shift_correction: float
    total: float


def regression_error(rg: RegressionGeometry, c: CurationConstants, phi: float,
                     lam: float, sigma: float = 0.0) -> RegressionPrediction:
    """Exact asymptotic excess risk of ridge regression on curated data.

    B = lambda^2 (m' ||w_g^perp||^2 + m_tilde' ||w_g^par||^2),
    V = sigma^2 phi m_bar', shift = c^2 - 2 lambda (m a + m_tilde b),
    total = B + V + shift.
    """
    if not lam > 0.0:
        raise ValueError("regression_error requires lambda > 0; "
                         "use regression_error_ridgeless at 0")
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    sp = spectral_point(c, phi, lam)
    bias = lam * lam * (sp.m_prime * rg.perp_sq + sp.m_tilde_prime * rg.parallel_sq)
    var = sigma * sigma * phi * sp.m_bar_prime
    shift = rg.c_sq - 2.0 * lam * (sp.m * rg.a + sp.m_tilde * rg.b)
    return RegressionPrediction(bias_B=bias, variance_V=var,
                                shift_correction=shift,
                                total=bias + var + shift)


def regression_error_ridgeless(rg: RegressionGeometry, c: CurationConstants,
                               phi: float, sigma: float = 0.0) -> float:
    """Ridgeless excess risk on either branch.

    Under-parametrized (phi < p): bias and the lambda-weighted shift terms
    vanish, leaving sigma^2 phi / (p - phi) + c^2. Over-parametrized
    (phi > p): the lambda-scaled limits survive in both the bias and shift.
    """
    rl = ridgeless_limits(c, phi)
    if rl.branch == "under":
        return sigma * sigma * phi * rl.m_bar_prime + rg.c_sq
    c0, c1 = rl.c0, rl.c1
    return (sigma * sigma * phi * rl.m_bar_prime
            + (rg.perp_sq + rg.parallel_sq / c1) * c0
            + rg.c_sq
            - 2.0 * (rg.a + rg.b / c1) * c0)


def collapse_mitigation(rg: RegressionGeometry) -> Dict:
    """Whether curation improves the heavy-pruning regression limit.

    Uncurated training converges to the generator (excess risk c^2 =
    ||w_g - w_*||^2); aggressive oracle-parallel curation instead converges
    toward the projection w_g^par, provided the generator sits strictly
    between its projections in distance to the truth:
        ||w_* - w_g^par|| < ||w_* - w_g|| < ||w_* - w_g^perp||.
    """
    uncurated = rg.c_sq
    r = rg.r
    dist_par = 1.0 + r * r * rg.rho_g ** 2 - 2.0 * r * rg.rho_g * rg.rho_star
    dist_perp = (1.0 + r * r * (1.0 - rg.rho_g ** 2)
                 - 2.0 * r * (rg.rho - rg.rho_g * rg.rho_star))
    condition = dist_par < uncurated < dist_perp
    curated = dist_par if condition else uncurated
    return {
        "mitigates": curated < uncurated,
        "uncurated_limit": uncurated,
        "curated_limit": curated,
        "dist_parallel_sq": dist_par,
        "dist_perp_sq": dist_perp,
        "condition_holds": condition,
    }


def optimal_p_asymptotic(phi: float, t: float) -> float:
    """Leading-order optimal pruning ratio p0 ~ sqrt(t) / sqrt(2 log(1/phi)).

    Valid as a small-phi asymptotic only; t = -D/E must be positive for an
    interior optimum to exist.
    """
    if not (0.0 < phi < 1.0):
        raise ValueError(f"optimal_p_asymptotic: phi must be in (0, 1), got {phi}")
    if not t > 0.0:
        raise ValueError(f"optimal_p_asymptotic: t must be > 0, got {t} "
                         "(no interior optimum)")
    return math.sqrt(t) / math.sqrt(2.0 * math.log(1.0 / phi))
