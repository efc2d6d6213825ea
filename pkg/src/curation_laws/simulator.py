"""Finite-size Monte Carlo ground truth for the asymptotic error laws.

Every trial draws an i.i.d. Gaussian design, labels it with the generator
direction, curates it with the oracle rule, ridge-fits the survivors, and
evaluates the error of the fitted direction in closed form (no test-set
sampling noise). Per-trial randomness comes from a counter-based Philox
stream keyed by (seed, stream, trial), so results are bit-identical
regardless of execution order or parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .curation import CurationMode, GeometrySpec, PruningFunction
from .laws import RegressionGeometry, classification_error
from .spectral import spectral_point

__all__ = [
    "ExperimentConfig",
    "TrialResult",
    "TrialAggregate",
    "CollapseConfig",
    "EmptyKeptSetError",
    "construct_vectors",
    "sample_dataset",
    "apply_curation",
    "ridge_fit",
    "exact_classification_error",
    "exact_regression_error",
    "run_trials",
    "collapse_loop",
    "resolvent_probe",
    "margin_probe",
]


class EmptyKeptSetError(RuntimeError):
    """Curation removed every example; the trial cannot produce a fit."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo setting; (config, seed) fully determines all outputs."""

    n: int
    d: int
    lam: float
    mode: CurationMode
    strategy: PruningFunction
    geometry: Union[GeometrySpec, RegressionGeometry]
    sigma: float = 0.0
    trials: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1 or self.d < 2:
            raise ValueError(f"need n >= 1 and d >= 2, got n={self.n}, d={self.d}")
        if not self.lam > 0.0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")

    @property
    def phi(self) -> float:
        return self.d / self.n

    @property
    def task(self) -> str:
        return ("regression" if isinstance(self.geometry, RegressionGeometry)
                else "classification")

    def cosines(self) -> GeometrySpec:
        g = self.geometry
        if isinstance(g, RegressionGeometry):
            return GeometrySpec(g.rho, g.rho_g, g.rho_star, strict=g.strict)
        return g


@dataclass(frozen=True)
class TrialResult:
    kept_count: int
    w_hat_cosine: float
    test_error: float
    regression_error: Optional[float] = None
    degenerate: bool = False


@dataclass(frozen=True)
class TrialAggregate:
    mean: float
    std_error: float
    per_trial: Tuple[TrialResult, ...]
    skipped_trials: int
    kept_fraction_mean: float


@dataclass(frozen=True)
class CollapseConfig:
    base: ExperimentConfig
    rounds: int
    curate_each_round: bool = True
    fresh_inputs_each_round: bool = True
    #: first round at which curation applies (lets paired curated/uncurated
    #: arms share an identical round-0 fit)
    curate_from_round: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.rounds <= 1000):
            raise ValueError(f"rounds must be in [0, 1000], got {self.rounds}")
        if self.curate_from_round < 0:
            raise ValueError("curate_from_round must be >= 0")


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream, trial)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([seed & (2 ** 64 - 1),
                                                 stream, trial])))


def construct_vectors(geom: GeometrySpec, d: int,
                      rng: Optional[np.random.Generator] = None,
                      ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit vectors (w_star, w_g, w_o) in R^d realizing the cosine triple.

    Supported on the first 3 coordinates via an eigendecomposition of the
    3x3 Gram matrix (robust to the rank-deficient boundary cases that defeat
    Cholesky); deterministic given the geometry, so ``rng`` is unused.
    """
    if d < 3:
        raise ValueError(f"construct_vectors requires d >= 3, got {d}")
    gram = geom.gram_matrix()
    evals, evecs = np.linalg.eigh(gram)
    if evals[0] < -1e-10:
        raise ValueError(f"Gram matrix not PSD (min eig {evals[0]:.3e})")
    factor = evecs * np.sqrt(np.clip(evals, 0.0, None))  # rows: coordinates
    out = np.zeros((3, d))
    out[:, :3] = factor
    norms = np.linalg.norm(out, axis=1)
    out /= norms[:, None]
    return out[0], out[1], out[2]


def sample_dataset(cfg: ExperimentConfig, rng: np.random.Generator,
                   w_g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """i.i.d. standard normal rows; labels from the generator direction."""
    X = rng.standard_normal((cfg.n, cfg.d))
    scores = X @ w_g
    if cfg.task == "regression":
        y = scores + (cfg.sigma * rng.standard_normal(cfg.n)
                      if cfg.sigma > 0.0 else 0.0)
    else:
        y = np.where(scores >= 0.0, 1.0, -1.0)
    return X, y


def apply_curation(X: np.ndarray, y: np.ndarray, w_o: np.ndarray,
                   q: PruningFunction, mode: CurationMode) -> np.ndarray:
    """Keep mask: q(x_i . w_o), plus oracle-label agreement when label-aware.

    The oracle's own labels sign(x_i . w_o) act only as a veto; they are
    never substituted into the returned dataset.
    """
    t = X @ w_o
    mask = np.asarray(q(t), dtype=bool)
    if mode is CurationMode.LABEL_AWARE:
        mask &= np.sign(t) == np.sign(y)
    if not mask.any():
        raise EmptyKeptSetError(
            f"curation kept 0 of {len(y)} examples; "
            "reduce pruning aggressiveness or increase n")
    return mask


def ridge_fit(X: np.ndarray, y: np.ndarray, mask: np.ndarray,
              lam: float) -> np.ndarray:
    """Solve (X_kept^T X_kept / n + lam I) w = X_kept^T y_kept / n.

    Normalization uses the original n (pre-curation), and the symmetric
    positive-definite solve is verified to residual 1e-10 relative.
    """
    if not lam > 0.0:
        raise ValueError(f"ridge_fit requires lambda > 0, got {lam}")
    n, d = X.shape
    Xk = X[mask]
    yk = y[mask]
    S = (Xk.T @ Xk) / n
    S[np.diag_indices_from(S)] += lam
    rhs = (Xk.T @ yk) / n
    try:
        cho = np.linalg.cholesky(S)
        w = np.linalg.solve(cho.T, np.linalg.solve(cho, rhs))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - lam > 0 guards
        raise RuntimeError(f"SPD ridge solve failed: {exc}") from exc
    rhs_norm = np.linalg.norm(rhs)
    resid = np.linalg.norm(S @ w - rhs)
    if rhs_norm > 0.0 and resid > 1e-10 * rhs_norm:
        raise RuntimeError(f"ridge solve residual {resid:.3e} exceeds "
                           f"1e-10 * {rhs_norm:.3e}")
    return w


def exact_classification_error(w_hat: np.ndarray,
                               w_star: np.ndarray) -> Tuple[float, bool]:
    """Population misclassification rate (1/pi) arccos(cos(w_hat, w_star)).

    Returns (error, degenerate); a zero estimator is reported as chance
    level 0.5 with the degenerate flag set.
    """
    norm = np.linalg.norm(w_hat)
    if norm == 0.0:
        return 0.5, True
    cos = float(w_hat @ w_star) / (norm * float(np.linalg.norm(w_star)))
    cos = min(max(cos, -1.0), 1.0)
    return math.acos(cos) / math.pi, False


def exact_regression_error(w_hat: np.ndarray, w_star: np.ndarray) -> float:
    """Population excess risk ||w_hat - w_star||^2 under isotropic inputs."""
    return float(np.sum((w_hat - w_star) ** 2))


def _single_trial(cfg: ExperimentConfig, trial: int,
                  stream: int = 0) -> TrialResult:
    rng = trial_rng(cfg.seed, trial, stream)
    geom = cfg.cosines()
    w_star, w_g, w_o = construct_vectors(geom, cfg.d)
    if cfg.task == "regression":
        w_g = cfg.geometry.norm_wg * w_g
    X, y = sample_dataset(cfg, rng, w_g)
    mask = apply_curation(X, y, w_o, cfg.strategy, cfg.mode)
    w_hat = ridge_fit(X, y, mask, cfg.lam)
    norm = np.linalg.norm(w_hat)
    cosine = float(w_hat @ w_star) / norm if norm > 0.0 else 0.0
    err, degenerate = exact_classification_error(w_hat, w_star)
    reg_err = (exact_regression_error(w_hat, w_star)
               if cfg.task == "regression" else None)
    return TrialResult(kept_count=int(mask.sum()), w_hat_cosine=cosine,
                       test_error=err, regression_error=reg_err,
                       degenerate=degenerate)


def run_trials(cfg: ExperimentConfig, stream: int = 0) -> TrialAggregate:
    """Independent trials; EmptyKeptSet trials are counted as skipped."""
    results: List[TrialResult] = []
    skipped = 0
    for trial in range(cfg.trials):
        try:
            results.append(_single_trial(cfg, trial, stream))
        except EmptyKeptSetError:
            skipped += 1
    if not results:
        raise EmptyKeptSetError(
            f"all {cfg.trials} trials skipped: curation kept 0 examples")
    key = ("regression_error" if cfg.task == "regression" else "test_error")
    vals = np.array([getattr(r, key) for r in results])
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    kept = float(np.mean([r.kept_count / cfg.n for r in results]))
    return TrialAggregate(mean=mean, std_error=se, per_trial=tuple(results),
                          skipped_trials=skipped, kept_fraction_mean=kept)


def collapse_loop(cc: CollapseConfig, stream: int = 0) -> List[Dict]:
    """Iterative self-training: each round refits on its own labels.

    Round t labels the data with the current generator w_g^(t) (the previous
    round's normalized fit), optionally curates with the fixed oracle w_o,
    fits, and records the error plus the recomputed alignment cosines of the
    actual vectors (the fit leaves the initial 3-dimensional span at finite n).
    """
    cfg = cc.base
    if cfg.task != "classification":
        raise ValueError("collapse_loop supports classification configs only")
    geom = cfg.cosines()
    w_star, w_g, w_o = construct_vectors(geom, cfg.d)
    rng = trial_rng(cfg.seed, 0, stream)
    X0 = None
    rows: List[Dict] = []
    for rnd in range(cc.rounds):
        if cc.fresh_inputs_each_round or X0 is None:
            X = rng.standard_normal((cfg.n, cfg.d))
            if not cc.fresh_inputs_each_round:
                X0 = X
        else:
            X = X0
        scores = X @ w_g
        y = np.where(scores >= 0.0, 1.0, -1.0)
        if cc.curate_each_round and rnd >= cc.curate_from_round:
            mask = apply_curation(X, y, w_o, cfg.strategy, cfg.mode)
        else:
            mask = np.ones(cfg.n, dtype=bool)
        w_hat = ridge_fit(X, y, mask, cfg.lam)
        err, degenerate = exact_classification_error(w_hat, w_star)
        norm = float(np.linalg.norm(w_hat))
        rows.append({
            "round": rnd,
            "error": err,
            "rho": float(w_g @ w_star),
            "rho_g": float(w_o @ w_g),
            "kept_fraction": float(mask.mean()),
            "degenerate": degenerate,
        })
        if degenerate:
            break
        w_g = w_hat / norm
    return rows


def resolvent_probe(cfg: ExperimentConfig, stream: int = 0) -> Dict:
    """Concentration gaps of the empirical resolvent against its limits.

    R = (X^T D X / n + lam I)^{-1}; reports |tr R / d - m|, the gap of the
    oracle-parallel block w_o^T R w_o against both candidate limits (m_tilde
    and s), and the perpendicular block against m, averaged over trials.
    """
    if cfg.task != "classification":
        raise ValueError("resolvent_probe expects a classification config")
    from .curation import constants as curation_constants
    geom = cfg.cosines()
    c = curation_constants(cfg.strategy, cfg.mode, geom)
    sp = spectral_point(c, cfg.phi, cfg.lam)
    trace_gaps, par_mt, par_s, perp_gaps = [], [], [], []
    for trial in range(cfg.trials):
        rng = trial_rng(cfg.seed, trial, stream)
        w_star, w_g, w_o = construct_vectors(geom, cfg.d)
        X, y = sample_dataset(cfg, rng, w_g)
        mask = apply_curation(X, y, w_o, cfg.strategy, cfg.mode)
        Xk = X[mask]
        S = (Xk.T @ Xk) / cfg.n
        S[np.diag_indices_from(S)] += cfg.lam
        R = np.linalg.inv(S)
        # unit vector orthogonal to w_o (deterministic)
        u = np.zeros(cfg.d)
        u[3] = 1.0
        u -= (u @ w_o) * w_o
        u /= np.linalg.norm(u)
        trace_gaps.append(abs(float(np.trace(R)) / cfg.d - sp.m))
        par = float(w_o @ R @ w_o)
        par_mt.append(abs(par - sp.m_tilde))
        par_s.append(abs(par - sp.s))
        perp_gaps.append(abs(float(u @ R @ u) - sp.m))
    return {
        "trace_gap": float(np.mean(trace_gaps)),
        "parallel_gap": float(np.mean(par_mt)),
        "parallel_gap_s_convention": float(np.mean(par_s)),
        "perp_gap": float(np.mean(perp_gaps)),
        "m": sp.m,
        "m_tilde": sp.m_tilde,
        "s": sp.s,
    }


def margin_probe(cfg: ExperimentConfig, n_test: int = 100_000,
                 stream: int = 0) -> Dict:
    """Moments of the test margin y x^T w_hat against the folded-Gaussian law.

    The limiting representation m |G1| + sqrt(nu - m^2) G2 implies first
    moment m sqrt(2/pi) and second moment nu, with m = m0 / (1 + phi m(-lam))
    and nu = nu0 / (1 + phi m(-lam))^2. Empirical moments are averaged over
    the config's trials and reported with cross-trial standard errors.
    """
    if cfg.task != "classification":
        raise ValueError("margin_probe expects a classification config")
    from .curation import constants as curation_constants
    geom = cfg.cosines()
    c = curation_constants(cfg.strategy, cfg.mode, geom)
    sp = spectral_point(c, cfg.phi, cfg.lam)
    pred = classification_error(geom, c, cfg.phi, cfg.lam)
    scale = 1.0 + cfg.phi * sp.m
    m_th = pred.m0 / scale
    nu_th = pred.nu0 / scale ** 2
    first, second = [], []
    for trial in range(cfg.trials):
        rng = trial_rng(cfg.seed, trial, stream)
        w_star, w_g, w_o = construct_vectors(geom, cfg.d)
        X, y = sample_dataset(cfg, rng, w_g)
        mask = apply_curation(X, y, w_o, cfg.strategy, cfg.mode)
        w_hat = ridge_fit(X, y, mask, cfg.lam)
        # for isotropic test inputs, (x.w_hat, x.w_star) is exactly bivariate
        # normal; sampling that 2-D law avoids materializing n_test x d designs
        a = float(np.linalg.norm(w_hat))
        cos = float(w_hat @ w_star) / a if a > 0.0 else 0.0
        g1 = rng.standard_normal(n_test)
        g2 = rng.standard_normal(n_test)
        score_star = g1
        score_hat = a * (cos * g1 + math.sqrt(max(0.0, 1.0 - cos * cos)) * g2)
        yt = np.where(score_star >= 0.0, 1.0, -1.0)
        margins = yt * score_hat
        first.append(float(margins.mean()))
        second.append(float(np.mean(margins ** 2)))
    first = np.array(first)
    second = np.array(second)
    k = len(first)
    se1 = float(first.std(ddof=1) / math.sqrt(k)) if k > 1 else float("nan")
    se2 = float(second.std(ddof=1) / math.sqrt(k)) if k > 1 else float("nan")
    th1 = abs(m_th) * math.sqrt(2.0 / math.pi)
    return {
        "first_moment_empirical": float(np.abs(first.mean())),
        "first_moment_theory": th1,
        "first_moment_se": se1,
        "second_moment_empirical": float(second.mean()),
        "second_moment_theory": nu_th,
        "second_moment_se": se2,
        "m": m_th,
        "nu": nu_th,
    }
