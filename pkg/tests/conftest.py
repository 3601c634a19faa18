"""Shared oracles: independent dense Hamiltonian and eigen-propagator."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest


def oracle_states(L: int, N: int) -> list[tuple[int, ...]]:
    """All occupation tuples by brute force (itertools, lexicographic ascending)."""
    return [s for s in itertools.product(range(N + 1), repeat=L) if sum(s) == N]


def oracle_bonds(L: int, bc: str) -> list[tuple[int, int]]:
    bonds = [(j, j + 1) for j in range(L - 1)]
    if bc == "pbc":
        bonds.append((L - 1, 0))
    return bonds


def oracle_dense_h(L: int, N: int, gamma: float, bc: str):
    """Dense H built by explicit operator algebra over the brute-force basis."""
    states = oracle_states(L, N)
    index = {s: i for i, s in enumerate(states)}
    dim = len(states)
    u = 0.0 if math.isinf(gamma) else 1.0 / (2.0 * gamma)
    H = np.zeros((dim, dim))
    for i, s in enumerate(states):
        H[i, i] = u * sum(n * (n - 1) for n in s)
        for a, b in oracle_bonds(L, bc):
            for src, dst in ((a, b), (b, a)):
                if s[src] > 0:
                    t = list(s)
                    t[src] -= 1
                    t[dst] += 1
                    j = index[tuple(t)]
                    H[j, i] += -math.sqrt(s[src] * t[dst])
    return states, H


def oracle_parity_projector(states: list[tuple[int, ...]], rep_occs: np.ndarray, parity: str):
    """Columns spanning one reflection sector, ordered like the package reps."""
    index = {s: i for i, s in enumerate(states)}
    dim = len(states)
    sign = 1.0 if parity == "even" else -1.0
    cols = []
    for occ in rep_occs:
        s = tuple(int(v) for v in occ)
        r = s[::-1]
        v = np.zeros(dim)
        if s == r:
            v[index[s]] = 1.0
        else:
            v[index[s]] = 1.0 / math.sqrt(2.0)
            v[index[r]] = sign / math.sqrt(2.0)
        cols.append(v)
    return np.stack(cols, axis=1)


def dense_propagate(H_dense: np.ndarray, psi: np.ndarray, tau: float) -> np.ndarray:
    """exp(-i H tau) psi through a full eigendecomposition."""
    E, U = np.linalg.eigh(H_dense)
    return U @ (np.exp(-1j * E * tau) * (U.conj().T @ psi))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260819)
