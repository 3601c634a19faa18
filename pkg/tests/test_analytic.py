"""Analytic reference curves against independent oracles (mpmath, series, sums)."""

import math

import mpmath as mp
import numpy as np
import pytest

from bhqc import analytic as an
from bhqc.observables import ctd_and_norm, distance_distribution

mp.mp.dps = 30


# ---------------------------------------------------------------------------
# Bessel
# ---------------------------------------------------------------------------


def _power_series_jn(n: int, x: float, terms: int = 25) -> float:
    # J_n(x) = sum_m (-1)^m (x/2)^{n+2m} / (m! (n+m)!)
    total = 0.0
    for m in range(terms):
        total += (-1.0) ** m * (x / 2.0) ** (n + 2 * m) / (
            math.factorial(m) * math.factorial(n + m)
        )
    return total


@pytest.mark.parametrize("x", [1e-6, 0.05, 0.3, 0.5])
def test_bessel_small_argument_power_series(x):
    seq = an.bessel_jn(3, x)
    for n in range(4):
        assert abs(seq[n] - _power_series_jn(n, x)) <= 1e-15 * max(1.0, abs(seq[n]))


@pytest.mark.parametrize("x", [0.5, 2.0, 30.0, 99.5, 500.0, 1000.0])
def test_bessel_against_mpmath(x):
    n_max = 60
    seq = an.bessel_jn(n_max, x)
    ref = np.array([float(mp.besselj(n, mp.mpf(x))) for n in range(n_max + 1)])
    envelope = np.abs(ref).max()
    # near interior zeros the relative error is naturally amplified, so the
    # tolerance is relative to max(|J_n|, 1% of the sequence envelope)
    scale = np.maximum(np.abs(ref), 0.01 * envelope)
    assert np.max(np.abs(seq - ref) / scale) < 1e-13


def test_bessel_high_order_tail():
    seq = an.bessel_jn(200, 10.0)
    ref = float(mp.besselj(60, 10))
    assert abs(seq[60] - ref) <= 1e-13 * abs(ref)
    assert np.all(np.abs(seq[150:]) < 1e-150)  # deep in the superexponential tail


def test_bessel_edges():
    seq = an.bessel_jn(4, 0.0)
    np.testing.assert_array_equal(seq, [1.0, 0.0, 0.0, 0.0, 0.0])
    neg = an.bessel_jn(5, -3.7)
    pos = an.bessel_jn(5, 3.7)
    np.testing.assert_allclose(neg, pos * np.array([1, -1, 1, -1, 1, -1]), rtol=1e-14)
    with pytest.raises(ValueError):
        an.bessel_jn(-1, 1.0)


# ---------------------------------------------------------------------------
# 2F3
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("tau", [0.3, 1.5, 3.9])
def test_hyp2f3_against_mpmath(tau):
    z = -16.0 * tau * tau
    mine = an.hyp2f3(0.5, 0.5, 1, 1, 1, z, method="series")
    ref = float(mp.hyper([mp.mpf(1) / 2, mp.mpf(1) / 2], [1, 1, 1], z))
    assert abs(mine - ref) <= 1e-14 * abs(ref)
    mine2 = an.hyp2f3(0.5, 1.5, 2, 2, 2, z, method="series")
    ref2 = float(mp.hyper([mp.mpf(1) / 2, mp.mpf(3) / 2], [2, 2, 2], z))
    assert abs(mine2 - ref2) <= 1e-14 * abs(ref2)


def test_hyp2f3_auto_switch_and_errors():
    tau = 4.5
    z = -16.0 * tau * tau
    auto = an.hyp2f3(0.5, 0.5, 1, 1, 1, z, method="auto")
    asym = an.hyp2f3(0.5, 0.5, 1, 1, 1, z, method="asymptotic")
    assert auto == asym
    below = an.hyp2f3(0.5, 0.5, 1, 1, 1, -16.0 * 3.0**2, method="auto")
    series = an.hyp2f3(0.5, 0.5, 1, 1, 1, -16.0 * 3.0**2, method="series")
    assert below == series
    with pytest.raises(ValueError):
        an.hyp2f3(0.5, 0.5, 1, 1, 2, -100.0, method="asymptotic")
    with pytest.raises(an.SeriesError):
        an.hyp2f3(0.5, 0.5, 1, 1, 1, -1600.0, method="series", max_terms=10)
    with pytest.raises(ValueError):
        an.hyp2f3(0.5, 0.5, 1, 1, 1, -100.0, method="newton")


# ---------------------------------------------------------------------------
# Free bosons, infinite chain
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("tau", [0.5, 2.0, 5.0])
def test_free_exact_forms_match_bessel_sums(tau):
    P = an.free_pd_infinite(tau, d_max=int(8 * tau) + 60)
    d = np.arange(P.size)
    ell_sum = float((d * P).sum())
    norm_sum = float(P.sum())
    assert abs(ell_sum - an.free_ctd_exact(tau, method="series")) <= 1e-12 * ell_sum
    assert abs(norm_sum - an.free_norm_exact(tau, method="series")) <= 1e-12 * norm_sum


def test_free_asymptotes_close_to_exact():
    # the dropped remainder is O(tau^-3/2) with an oscillatory prefactor;
    # bounds below are empirical envelopes at these sample times
    for tau, ctd_tol, norm_tol in ((5.0, 4e-4, 5e-3), (8.0, 5e-5, 1e-3)):
        ctd_exact = an.free_ctd_exact(tau, method="series")
        norm_exact = an.free_norm_exact(tau, method="series")
        assert abs(an.ctd_asymptote_free(tau) - ctd_exact) <= ctd_tol * ctd_exact
        assert abs(an.norm_asymptote_free(tau) - norm_exact) <= norm_tol * norm_exact
    # leading-order-only variant drops the log correction
    assert an.ctd_asymptote_free(10.0, include_correction=False) == pytest.approx(
        160.0 / math.pi**2
    )


def test_free_exact_zero_time():
    assert an.free_ctd_exact(0.0) == 0.0
    assert an.free_norm_exact(0.0) == 0.0


# ---------------------------------------------------------------------------
# Free bosons, finite chains
# ---------------------------------------------------------------------------


def test_free_correlations_initial_and_sum_rule():
    for bc in ("hw", "pbc"):
        C0 = an.free_correlations(0.0, 7, bc)
        np.testing.assert_allclose(C0, 0.0, atol=1e-12)
        C = an.free_correlations(1.3, 7, bc)
        np.testing.assert_allclose(C, C.T, atol=1e-13)
        np.testing.assert_allclose(C.sum(axis=1), 0.0, atol=1e-12)  # number conservation


def test_short_time_law_matches_free_chain():
    # independent check of the P/ell conventions: tau^6 remainder only
    L = 10
    for tau, bound in ((0.02, 1e-9), (0.05, 2e-7)):
        C = an.free_correlations(tau, L, "hw")
        ell, _ = ctd_and_norm(distance_distribution(C, "hw", tau))
        assert abs(ell - an.short_time_ctd(tau, math.inf, L)) < bound


def test_short_time_coefficients():
    # gamma and L enter only through the tau^4 coefficient
    tau = 0.1
    base = 4 * tau**2 - 6 * tau**4
    assert an.short_time_ctd(tau, math.inf) == pytest.approx(base)
    assert an.short_time_ctd(tau, math.inf, 10.0) == pytest.approx(
        base + (20.0 / 27.0) * tau**4
    )
    assert an.short_time_ctd(tau, 0.3, 10.0) == pytest.approx(
        4 * tau**2 - (6 - 20.0 / 27.0 + 1.0 / 0.27) * tau**4
    )


def test_quadratic_regime_end():
    assert an.quadratic_regime_end(math.inf) == pytest.approx(math.sqrt(2.0 / 3.0))
    assert an.quadratic_regime_end(1.0) == pytest.approx(math.sqrt(12.0 / 19.0))
    assert an.quadratic_regime_end(0.01) == pytest.approx(
        0.01 * math.sqrt(12.0 / (18.0 * 1e-4 + 1.0))
    )


# ---------------------------------------------------------------------------
# Saturation averages
# ---------------------------------------------------------------------------


def test_ring_saturation_closed_forms():
    val11, exact11 = an.free_saturation_ctd(11, "pbc")
    assert exact11 and val11 == pytest.approx(300.0 / 121.0, rel=1e-15)
    val, exact = an.free_saturation_ctd(13, "pbc")
    assert exact and val == pytest.approx((12.0**2 * 14.0) / (4.0 * 13.0**2))


@pytest.mark.parametrize("L", [11, 12])
def test_ring_saturation_matches_numeric_time_average(L):
    rng = np.random.default_rng(5)
    taus = rng.uniform(1e3, 2e4, size=1200)
    acc = np.zeros((L, L))
    for t in taus:
        acc += np.abs(an.free_correlations(t, L, "pbc"))
    acc /= taus.size
    dist = distance_distribution(acc, "pbc")
    ell_num, _ = ctd_and_norm(dist)
    val, _ = an.free_saturation_ctd(L, "pbc")
    assert abs(ell_num - val) <= 0.02 * val


@pytest.mark.slow
def test_open_chain_saturation_is_extensive():
    rng = np.random.default_rng(6)
    L = 30
    taus = rng.uniform(1e3, 2e4, size=1500)
    acc = np.zeros((L, L))
    for t in taus:
        acc += np.abs(an.free_correlations(t, L, "hw"))
    acc /= taus.size
    ell_num, _ = ctd_and_norm(distance_distribution(acc, "hw"))
    val, exact = an.free_saturation_ctd(L, "hw")
    assert not exact  # leading-order asymptotic only
    assert abs(ell_num - val) <= 4.0  # ell_bar = L + O(1)


# ---------------------------------------------------------------------------
# Fermionized hard-core limit
# ---------------------------------------------------------------------------


def test_fermionized_short_time_reduces_to_quadratic_law():
    # expanding the bracket at tau << gamma gives ell -> (4 + 72 gamma^2) tau^2,
    # which collapses onto the universal 4 tau^2 law as gamma -> 0
    gamma = 0.1
    for tau in (1e-5, 1e-4):
        expect = (4.0 + 72.0 * gamma * gamma) * tau * tau
        assert an.fermionized_ctd(tau, gamma) == pytest.approx(expect, rel=1e-6)
    assert an.fermionized_ctd(1e-5, 0.00316) == pytest.approx(4.0 * 1e-10, rel=1e-3)
    assert an.fermionized_ctd(0.0, gamma) == 0.0
    assert an.fermionized_ctd(1e-6, 0.00316) < 5e-12


def test_fermionized_asymptote_envelope():
    gamma = 0.00316
    taus = np.linspace(20.0, 30.0, 401)
    exact = an.fermionized_ctd(taus, gamma)
    asym = an.ctd_asymptote_fermionized(taus, gamma)
    assert np.mean(np.abs(exact - asym) / asym) < 0.02
    lead = an.ctd_asymptote_fermionized(50.0, gamma, include_correction=False)
    assert lead == pytest.approx(64.0 * gamma**2 / math.pi * 50.0)


def test_fermionized_norm_saturation():
    assert an.norm_saturation_fermionized(0.00316) == pytest.approx(24.0 * 0.00316**2)


def test_sample_type():
    s = an.AnalyticCtdSample(tau=1.0, value=2.0, regime="free-exact")
    assert (s.tau, s.value, s.regime) == (1.0, 2.0, "free-exact")
    with pytest.raises(Exception):
        s.tau = 3.0  # frozen
