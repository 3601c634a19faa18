"""Basis enumeration, parity sectors, Hamiltonian assembly, spectral bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oracle_dense_h, oracle_parity_projector, oracle_states
from bhqc.model import (
    CapacityError,
    ModelParams,
    SpectralBoundsError,
    build_hamiltonian,
    build_parity_sector,
    enumerate_basis,
    sector_dimension,
    sector_for,
    spectral_bounds,
)

small_LN = st.tuples(st.integers(1, 5), st.integers(0, 5))


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(L=0, N=1, gamma=1.0)
    with pytest.raises(ValueError):
        ModelParams(L=2, N=-1, gamma=1.0)
    with pytest.raises(ValueError):
        ModelParams(L=2, N=2, gamma=0.0)
    with pytest.raises(ValueError):
        ModelParams(L=2, N=2, gamma=1.0, bc="open")
    with pytest.raises(ValueError):
        ModelParams(L=2, N=2, gamma=1.0, parity="both")
    assert ModelParams(L=2, N=2, gamma=math.inf).u == 0.0
    assert ModelParams(L=2, N=2, gamma=0.25).u == 2.0


@settings(max_examples=40, deadline=None)
@given(small_LN)
def test_enumeration_descending_lex_and_complete(ln):
    L, N = ln
    sector = enumerate_basis(L, N)
    assert sector.dim == sector_dimension(L, N) == math.comb(N + L - 1, N)
    rows = [tuple(int(v) for v in r) for r in sector.occs]
    assert all(sum(r) == N for r in rows)
    assert rows == sorted(set(rows), reverse=True)
    assert set(rows) == set(oracle_states(L, N))


@settings(max_examples=40, deadline=None)
@given(small_LN)
def test_rank_is_position(ln):
    L, N = ln
    sector = enumerate_basis(L, N)
    assert np.array_equal(sector.rank(sector.occs), np.arange(sector.dim))
    for i in (0, sector.dim // 2, sector.dim - 1):
        assert sector.index(sector.occs[i]) == i


def test_index_rejects_wrong_sector():
    sector = enumerate_basis(4, 3)
    with pytest.raises(ValueError):
        sector.index([1, 1, 1, 1])  # wrong N
    with pytest.raises(ValueError):
        sector.index([3, 0, 0])  # wrong L


def test_capacity_budget():
    with pytest.raises(CapacityError):
        enumerate_basis(20, 20)
    assert enumerate_basis(20, 2).dim == 210
    with pytest.raises(CapacityError):
        enumerate_basis(6, 6, max_dim=100)


def test_two_site_example_matrix():
    # basis (2,0), (1,1), (0,2); diagonal (1, 0, 1) at gamma=1; couplings -sqrt(2)
    H = build_hamiltonian(ModelParams(L=2, N=2, gamma=1.0))
    assert [tuple(r) for r in H.sector.occs] == [(2, 0), (1, 1), (0, 2)]
    dense = H.to_dense()
    s2 = math.sqrt(2.0)
    expect = np.array([[1.0, -s2, 0.0], [-s2, 0.0, -s2], [0.0, -s2, 1.0]])
    np.testing.assert_allclose(dense, expect, atol=1e-15)


def test_pbc_two_sites_doubles_the_bond():
    # a two-site ring carries both j=1 and j=2 bonds between the same pair
    H = build_hamiltonian(ModelParams(L=2, N=1, gamma=1.0, bc="pbc"))
    np.testing.assert_allclose(H.to_dense(), [[0.0, -2.0], [-2.0, 0.0]], atol=1e-15)


@pytest.mark.parametrize(
    "L,N,gamma,bc",
    [
        (4, 4, 0.7, "hw"),
        (4, 3, 2.5, "pbc"),
        (3, 5, 0.09, "hw"),
        (5, 3, math.inf, "pbc"),
        (1, 4, 1.0, "hw"),
        (2, 3, 0.4, "pbc"),
    ],
)
def test_full_hamiltonian_matches_dense_oracle(L, N, gamma, bc):
    params = ModelParams(L=L, N=N, gamma=gamma, bc=bc)
    H = build_hamiltonian(params)
    states, H_ref = oracle_dense_h(L, N, gamma, bc)
    # reorder the oracle into the package basis
    order = [states.index(tuple(int(v) for v in occ)) for occ in H.sector.occs]
    np.testing.assert_allclose(H.to_dense(), H_ref[np.ix_(order, order)], atol=1e-13)


@pytest.mark.parametrize("L,N,gamma,bc", [(4, 4, 0.7, "hw"), (5, 4, 1.5, "pbc")])
@pytest.mark.parametrize("parity", ["even", "odd"])
def test_parity_block_matches_projected_oracle(L, N, gamma, bc, parity):
    params = ModelParams(L=L, N=N, gamma=gamma, bc=bc, parity=parity)
    H = build_hamiltonian(params)
    states, H_ref = oracle_dense_h(L, N, gamma, bc)
    B = oracle_parity_projector(states, H.sector.occs, parity)
    np.testing.assert_allclose(B.T @ B, np.eye(H.dim), atol=1e-14)
    np.testing.assert_allclose(H.to_dense(), B.T @ H_ref @ B, atol=1e-13)


def test_parity_dimensions_and_eigen_union():
    # chaos-map sector sizes at unit filling
    even9 = build_parity_sector(9, 9, "even")
    odd9 = build_parity_sector(9, 9, "odd")
    assert (even9.dim, odd9.dim) == (12190, 12120)
    assert int((even9.orbit == 1).sum()) == 70
    assert even9.dim + odd9.dim == sector_dimension(9, 9)
    # eigenvalue union on a small system
    for bc in ("hw", "pbc"):
        full = build_hamiltonian(ModelParams(4, 4, 0.8, bc=bc))
        ev = build_hamiltonian(ModelParams(4, 4, 0.8, bc=bc, parity="even"))
        od = build_hamiltonian(ModelParams(4, 4, 0.8, bc=bc, parity="odd"))
        union = np.sort(
            np.concatenate(
                [np.linalg.eigvalsh(ev.to_dense()), np.linalg.eigvalsh(od.to_dense())]
            )
        )
        np.testing.assert_allclose(union, np.linalg.eigvalsh(full.to_dense()), atol=1e-10)


@pytest.mark.slow
def test_parity_dimension_large_ring():
    assert build_parity_sector(11, 11, "even").dim == 176484


def test_hermiticity_and_matvec():
    H = build_hamiltonian(ModelParams(5, 5, 0.3, bc="pbc"))
    diff = (H.hop - H.hop.T).toarray()
    assert np.abs(diff).max() == 0.0
    x = np.random.default_rng(3).normal(size=H.dim) + 1j * np.random.default_rng(4).normal(
        size=H.dim
    )
    np.testing.assert_allclose(H.matvec(x), H.to_dense() @ x, atol=1e-12)


def test_edge_sectors():
    # single site: pure interaction energy
    H = build_hamiltonian(ModelParams(L=1, N=5, gamma=0.5))
    assert H.dim == 1
    np.testing.assert_allclose(H.to_dense(), [[1.0 * 5 * 4]])
    # no particles: a single empty state with zero energy
    H0 = build_hamiltonian(ModelParams(L=4, N=0, gamma=1.0))
    assert H0.dim == 1
    np.testing.assert_allclose(H0.to_dense(), [[0.0]])


def test_spectral_bounds_single_particle_example():
    H = build_hamiltonian(ModelParams(L=2, N=1, gamma=1.0))
    assert spectral_bounds(H, 0.0) == (-1.0, 1.0)
    lo, hi = spectral_bounds(H, 0.01)
    np.testing.assert_allclose((lo, hi), (-1.01, 1.01), atol=1e-14)


def test_spectral_bounds_iterative_matches_dense():
    H = build_hamiltonian(ModelParams(6, 6, 0.9, bc="hw"))  # dim 462, Lanczos path
    eigs = np.linalg.eigvalsh(H.to_dense())
    lo, hi = spectral_bounds(H, 0.0)
    scale = max(abs(eigs[0]), abs(eigs[-1]))
    assert lo <= eigs[0] + 1e-8 * scale
    assert hi >= eigs[-1] - 1e-8 * scale
    assert abs(lo - eigs[0]) < 1e-6 * scale
    assert abs(hi - eigs[-1]) < 1e-6 * scale
    # padding widens symmetrically around the center
    lo1, hi1 = spectral_bounds(H, 0.02)
    assert lo1 < lo and hi1 > hi
    np.testing.assert_allclose((hi1 - lo1) / (hi - lo), 1.02, rtol=1e-9)


def test_sector_for_dispatch():
    p = ModelParams(4, 4, 1.0, parity="even")
    assert sector_for(p).parity == "even"
    assert sector_for(ModelParams(4, 4, 1.0)).parity == "none"
