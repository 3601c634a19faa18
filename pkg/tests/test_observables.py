"""Correlation observables: oracles, sector folding, distance conventions."""

import math

import numpy as np
import pytest

from bhqc import analytic as an
from bhqc.chebyshev import StateVector, fock_state, plan_propagator, step
from bhqc.model import ModelParams, build_hamiltonian
from bhqc.observables import (
    connected_correlations,
    ctd_and_norm,
    ctd_observer,
    densities,
    distance_distribution,
)


def _evolved(params: ModelParams, tau: float, dtau: float = 0.5) -> StateVector:
    H = build_hamiltonian(params)
    psi = fock_state(H.sector, [1] * params.L)
    plan = plan_propagator(H, dtau)
    n = int(round(tau / dtau))
    for _ in range(n):
        psi = step(H, plan, psi)
    return psi


def test_initial_product_state_is_uncorrelated():
    params = ModelParams(5, 5, 0.8)
    H = build_hamiltonian(params)
    psi = fock_state(H.sector, [1] * 5)
    corr = connected_correlations(psi)
    np.testing.assert_allclose(corr.C, 0.0, atol=1e-14)
    np.testing.assert_allclose(corr.densities, 1.0, atol=1e-14)
    np.testing.assert_allclose(densities(psi), 1.0, atol=1e-14)


@pytest.mark.parametrize("bc", ["hw", "pbc"])
def test_free_engine_matches_mode_sum(bc):
    # gamma = inf evolution against the analytic free-boson correlation matrix
    params = ModelParams(6, 6, math.inf, bc=bc)
    psi = _evolved(params, 2.0, dtau=0.5)
    C = connected_correlations(psi).C
    C_ref = an.free_correlations(2.0, 6, bc)
    assert np.abs(C - C_ref).max() < 1e-11


def test_sum_rule_and_symmetry():
    psi = _evolved(ModelParams(5, 5, 0.6), 1.5)
    corr = connected_correlations(psi)
    # number conservation: every row of the connected matrix sums to zero
    np.testing.assert_allclose(corr.C.sum(axis=1), 0.0, atol=1e-10)
    np.testing.assert_allclose(corr.C, corr.C.T, atol=1e-14)
    # reflection-symmetric initial state keeps a mirror-symmetric profile
    np.testing.assert_allclose(corr.C, corr.C[::-1, ::-1], atol=1e-12)
    assert corr.densities.sum() == pytest.approx(5.0, abs=1e-10)


@pytest.mark.parametrize("parity", ["even"])
def test_parity_sector_measurement_equals_full(parity):
    tau = 1.2
    full = _evolved(ModelParams(5, 5, 0.7), tau, dtau=0.3)
    sect = _evolved(ModelParams(5, 5, 0.7, parity=parity), tau, dtau=0.3)
    cf = connected_correlations(full)
    cs = connected_correlations(sect)
    assert np.abs(cf.C - cs.C).max() < 1e-12
    np.testing.assert_allclose(cf.densities, cs.densities, atol=1e-12)


def test_distance_distribution_open_chain_pair_means():
    L = 4
    C = np.arange(1.0, 17.0).reshape(4, 4)
    C = -(C + C.T) / 2.0  # symmetric, negative entries exercise the |.|
    dist = distance_distribution(C, "hw", tau=0.7)
    absC = np.abs(C)
    assert dist.p[0] == pytest.approx(np.trace(absC) / 4.0)
    assert dist.p[1] == pytest.approx((absC[0, 1] + absC[1, 2] + absC[2, 3]) / 3.0)
    assert dist.p[3] == pytest.approx(absC[0, 3])
    assert dist.p.size == L
    assert dist.tau == 0.7 and dist.bc == "hw"


def test_distance_distribution_ring_wrap_and_antipode():
    L = 6
    rng = np.random.default_rng(2)
    C = rng.normal(size=(L, L))
    C = (C + C.T) / 2.0
    dist = distance_distribution(C, "pbc")
    absC = np.abs(C)
    assert dist.p.size == L // 2 + 1
    # d=2 class averages all six wrap pairs
    expect = np.mean([absC[k, (k + 2) % L] for k in range(L)])
    assert dist.p[2] == pytest.approx(expect)
    # antipodal class: k and k+3 enumerate each unordered pair twice -> same mean
    expect3 = np.mean([absC[k, (k + 3) % L] for k in range(L)])
    assert dist.p[3] == pytest.approx(expect3)
    with pytest.raises(ValueError):
        distance_distribution(C, "ring")


def test_ctd_excludes_onsite_class_from_ell_only():
    from bhqc.observables import DistanceDistribution

    p = np.array([0.5, 0.25, 0.125])
    ell, norm = ctd_and_norm(DistanceDistribution(p=p, bc="hw", tau=0.0))
    assert ell == pytest.approx(0.25 + 2 * 0.125)
    assert norm == pytest.approx(0.875)


def test_observer_keys():
    obs = ctd_observer("hw", include_pd=True)
    psi = _evolved(ModelParams(4, 4, 1.0), 0.5)
    out = obs(psi)
    assert set(out) == {"ell", "normP", "pd"}
    assert out["pd"].shape == (4,)
    obs2 = ctd_observer("hw")
    assert set(obs2(psi)) == {"ell", "normP"}
