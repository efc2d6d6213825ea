"""Pruning strategies and curation constants against quadrature/MC oracles."""

import math

import numpy as np
import pytest

from curation_laws import (
    CurationConstants,
    CurationMode,
    GeometrySpec,
    InfeasibleGeometryError,
    constants,
    constants_quadrature,
    gamma_bounds,
    j_ratio,
    make_intervals,
    make_keep_all,
    make_keep_easy,
    make_keep_hard,
    make_qpu,
    solve_u_for_gamma,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    strategy_from_spec,
)

AGN = CurationMode.LABEL_AGNOSTIC
AWARE = CurationMode.LABEL_AWARE


def _geom_for_tau(tau: float) -> GeometrySpec:
    """Feasible triple with the requested oracle/generator alignment."""
    rho_g = tau / math.sqrt(1.0 + tau * tau)
    return GeometrySpec(1.0, rho_g, rho_g)


def _random_strategy(rng) -> object:
    """Random finite interval-union strategy on the half-line."""
    k = int(rng.integers(1, 4))
    cuts = np.sort(rng.uniform(0.0, 3.5, 2 * k))
    pairs = [(float(cuts[2 * j]), float(cuts[2 * j + 1])) for j in range(k)]
    if rng.random() < 0.3:
        pairs[-1] = (pairs[-1][0], math.inf)
    if any(b - a < 1e-3 for a, b in pairs if math.isfinite(b)):
        return _random_strategy(rng)
    return make_intervals(pairs)


class TestNamedStrategies:
    def test_keep_easy_fraction(self):
        assert make_keep_easy(1.0).keep_fraction() == pytest.approx(
            0.3173105079, abs=1e-9)
        p = 0.37
        q = make_keep_easy(std_normal_quantile(1 - p / 2))
        assert q.keep_fraction() == pytest.approx(p, abs=1e-12)
        assert make_keep_easy(1e-9).keep_fraction() == pytest.approx(1.0, abs=1e-8)

    def test_keep_hard_fraction(self):
        assert make_keep_hard(1.0).keep_fraction() == pytest.approx(
            0.6826894921, abs=1e-9)
        p = 0.37
        q = make_keep_hard(std_normal_quantile((1 + p) / 2))
        assert q.keep_fraction() == pytest.approx(p, abs=1e-12)
        assert make_keep_hard(50.0).keep_fraction() == pytest.approx(1.0, abs=1e-12)

    def test_keep_all(self):
        assert make_keep_all().keep_fraction() == pytest.approx(1.0, abs=1e-15)

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            make_keep_easy(0.0)
        with pytest.raises(ValueError):
            make_keep_hard(-1.0)


class TestQpu:
    def test_endpoints(self):
        p = 0.4
        a_min = std_normal_quantile((1 + p) / 2)
        a_max = std_normal_quantile(1 - p / 2)
        assert make_qpu(p, 0.0).half_support.intervals == \
            make_keep_hard(a_min).half_support.intervals
        assert make_qpu(p, 1.0).half_support.intervals == \
            make_keep_easy(a_max).half_support.intervals

    def test_keep_fraction_blend(self):
        assert make_qpu(0.5, 0.5).keep_fraction() == pytest.approx(0.5, abs=1e-12)
        for p in (0.1, 0.3, 0.8):
            for u in (0.0, 0.2, 0.7, 1.0):
                assert make_qpu(p, u).keep_fraction() == pytest.approx(p, abs=1e-12)

    def test_p_one_degenerates_to_keep_all(self):
        for u in (0.0, 0.25, 0.5, 1.0):
            assert make_qpu(1.0, u).keep_fraction() == pytest.approx(1.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            make_qpu(0.0, 0.5)
        with pytest.raises(ValueError):
            make_qpu(0.5, 1.5)


class TestStrategyFromSpec:
    def test_all_literal_forms(self):
        assert strategy_from_spec({"strategy": "all"}).keep_fraction() == \
            pytest.approx(1.0)
        assert strategy_from_spec(
            {"strategy": "keep_hard", "p": 0.3}).keep_fraction() == \
            pytest.approx(0.3, abs=1e-12)
        assert strategy_from_spec(
            {"strategy": "keep_easy", "p": 0.3}).keep_fraction() == \
            pytest.approx(0.3, abs=1e-12)
        assert strategy_from_spec(
            {"strategy": "qpu", "p": 0.3, "u": 0.4}).keep_fraction() == \
            pytest.approx(0.3, abs=1e-12)
        q = strategy_from_spec({"strategy": "intervals",
                                "half_support": [[0.5, 1.5], [2.0, "inf"]]})
        assert bool(q(1.0)) and bool(q(3.0)) and not bool(q(1.8))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            strategy_from_spec({"strategy": "nope", "p": 0.5})


class TestGeometrySpec:
    def test_feasibility(self):
        GeometrySpec(0.5, 0.5, 0.5)  # PSD triple
        with pytest.raises(InfeasibleGeometryError):
            GeometrySpec(1.0, 0.5, 0.999)
        with pytest.raises(InfeasibleGeometryError):
            GeometrySpec(1.5, 0.0, 0.0)
        # strict=False admits nominal triples
        g = GeometrySpec(1.0, 0.5, 0.999, strict=False)
        assert g.tau == pytest.approx(0.5 / math.sqrt(0.75))

    def test_derived_quantities(self):
        g = GeometrySpec(0.8, 0.6, 0.5)
        assert g.sigma_perp == pytest.approx(0.8)
        assert g.tau == pytest.approx(0.75)
        assert g.cos_xi == pytest.approx(
            (0.8 - 0.3) / (0.8 * math.sqrt(0.75)))


class TestConstantsClosedForm:
    def test_table_row_keep_all_agnostic(self):
        c = constants(make_keep_all(), AGN, _geom_for_tau(0.0))
        assert c.p == pytest.approx(1.0, abs=1e-12)
        assert c.gamma == pytest.approx(1.0, abs=1e-12)
        assert c.beta_tilde == pytest.approx(0.0, abs=1e-12)
        assert c.beta == pytest.approx(2 * std_normal_pdf(0.0), abs=1e-10)

    def test_table_row_keep_hard_agnostic(self):
        c = constants(make_keep_hard(1.0), AGN, _geom_for_tau(0.7))
        assert c.p == pytest.approx(0.6826894921, abs=1e-9)
        assert c.gamma == pytest.approx(
            0.6826894921 - 2 * std_normal_pdf(1.0), abs=1e-9)
        assert c.gamma == pytest.approx(0.1987480431, abs=1e-9)

    def test_table_row_keep_all_aware_tau_zero(self):
        c = constants(make_keep_all(), AWARE, _geom_for_tau(0.0))
        assert c.p == pytest.approx(0.5, abs=1e-12)

    def test_beta_tilde_vanishes_at_tau_zero_agnostic(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            q = _random_strategy(rng)
            c = constants(q, AGN, _geom_for_tau(0.0))
            assert c.beta_tilde == pytest.approx(0.0, abs=1e-12)

    def test_closed_form_vs_quadrature_random(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            q = _random_strategy(rng)
            for mode in (AGN, AWARE):
                for tau in (0.0, 0.5, 2.0):
                    geom = _geom_for_tau(tau)
                    cf = constants(q, mode, geom)
                    qd = constants_quadrature(q, mode, tau)
                    for f in ("p", "gamma", "beta", "beta_tilde"):
                        assert getattr(cf, f) == pytest.approx(
                            getattr(qd, f), abs=1e-8), (mode, tau, f)

    def test_verify_flag(self):
        constants(make_keep_hard(1.2), AWARE, _geom_for_tau(1.0), verify=True)

    def test_rho_g_one_rejected(self):
        with pytest.raises(InfeasibleGeometryError):
            constants(make_keep_all(), AGN, GeometrySpec(1.0, 1.0, 1.0))

    def test_monte_carlo_oracle(self):
        # all four constants are plain expectations of functions of G ~ N(0,1)
        rng = np.random.default_rng(6)
        g = rng.standard_normal(1_000_000)
        tau = 0.8
        geom = _geom_for_tau(tau)
        phi = lambda x: np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
        Phi = lambda x: 0.5 * (1.0 + np.vectorize(math.erf)(x / math.sqrt(2)))
        for q in (make_keep_hard(1.0), make_keep_easy(0.8), make_qpu(0.5, 0.5)):
            keep = np.asarray(q(g), dtype=float)
            for mode in (AGN, AWARE):
                c = constants(q, mode, geom)
                if mode is AGN:
                    samples = {
                        "p": keep,
                        "gamma": keep * g * g,
                        "beta": 2.0 * keep * phi(tau * g),
                        "beta_tilde": 2.0 * keep * Phi(tau * g) * g,
                    }
                else:
                    w = Phi(tau * np.abs(g))
                    samples = {
                        "p": keep * w,
                        "gamma": keep * w * g * g,
                        "beta": keep * phi(tau * g),
                        "beta_tilde": keep * w * np.abs(g),
                    }
                for f, s in samples.items():
                    mean = float(s.mean())
                    se = float(s.std(ddof=1)) / math.sqrt(len(s))
                    assert abs(getattr(c, f) - mean) <= 4 * se + 1e-12, (
                        q, mode, f)


class TestLens:
    def test_bounds_at_p_one(self):
        assert gamma_bounds(1.0) == (1.0, 1.0)

    def test_bounds_match_named_strategies(self):
        gmin, _ = gamma_bounds(0.6826894921)
        assert gmin == pytest.approx(0.1987480431, abs=1e-9)
        _, gmax = gamma_bounds(0.3173105079)
        assert gmax == pytest.approx(
            0.3173105079 + 2 * std_normal_pdf(1.0), abs=1e-9)
        assert gmax == pytest.approx(0.8012519569, abs=1e-9)

    def test_qpu_endpoints_hit_bounds(self):
        for p in np.arange(0.1, 0.95, 0.1):
            p = float(p)
            gmin, gmax = gamma_bounds(p)
            g0 = constants(make_qpu(p, 0.0), AGN, _geom_for_tau(0.0)).gamma
            g1 = constants(make_qpu(p, 1.0), AGN, _geom_for_tau(0.0)).gamma
            assert g0 == pytest.approx(gmin, abs=1e-9)
            assert g1 == pytest.approx(gmax, abs=1e-9)

    def test_gamma_monotone_in_u(self):
        for p in np.linspace(0.05, 0.95, 20):
            gammas = [constants(make_qpu(float(p), float(u)), AGN,
                                _geom_for_tau(0.0)).gamma
                      for u in np.linspace(0.0, 1.0, 20)]
            assert all(b >= a - 1e-12 for a, b in zip(gammas, gammas[1:])), p

    def test_solve_u_round_trip(self):
        u = solve_u_for_gamma(0.5, 0.5)
        assert 0.0 < u < 1.0
        assert constants(make_qpu(0.5, u), AGN,
                         _geom_for_tau(0.0)).gamma == pytest.approx(0.5, abs=1e-10)
        assert solve_u_for_gamma(0.5, gamma_bounds(0.5)[0]) == 0.0
        assert solve_u_for_gamma(0.5, gamma_bounds(0.5)[1]) == 1.0
        with pytest.raises(ValueError):
            solve_u_for_gamma(0.5, 2.0)


class TestJRatio:
    def test_identity(self):
        c = CurationConstants(p=0.5, gamma=0.5, beta=0.3, beta_tilde=0.3)
        assert j_ratio(c) == pytest.approx(1.0)

    def test_depends_only_on_constants(self):
        c1 = CurationConstants(p=0.4, gamma=0.3, beta=0.5, beta_tilde=0.2)
        c2 = CurationConstants(p=0.4, gamma=0.3, beta=0.5, beta_tilde=0.2)
        assert j_ratio(c1) == j_ratio(c2)

    def test_keep_hard_vs_keep_easy_distinct(self, capsys):
        # equal keep fraction, tau = 1: the two extremal strategies give
        # different selection ratios; the observed ordering is recorded.
        p = 0.4
        geom = _geom_for_tau(1.0)
        jh = j_ratio(constants(strategy_from_spec(
            {"strategy": "keep_hard", "p": p}), AGN, geom))
        je = j_ratio(constants(strategy_from_spec(
            {"strategy": "keep_easy", "p": p}), AGN, geom))
        assert jh != pytest.approx(je, rel=1e-3)
        with capsys.disabled():
            print(f"\n[j-ordering] p={p}, tau=1, label-agnostic: "
                  f"j(keep_hard)={jh:.6f}, j(keep_easy)={je:.6f} -> "
                  f"{'keep_hard' if jh > je else 'keep_easy'} maximizes j")

    def test_beta_tilde_zero_raises(self):
        c = constants(make_keep_all(), AGN, _geom_for_tau(0.0))
        with pytest.raises(ZeroDivisionError):
            j_ratio(c)
