"""Two-particle density correlations and the correlation transport distance.

C_jk(tau) = <n_j n_k> - <n_j><n_k>; P(d, tau) averages |C| over all site
pairs at distance d (open chain: L-d pairs; ring: shortest wrap distance);
the transport distance is ell = sum_{d>=1} d P(d) and its companion norm is
normP = sum_{d>=0} P(d), which includes the d = 0 class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bhqc.chebyshev import StateVector


@dataclass(frozen=True)
class CorrelationMatrix:
    """Connected density-density correlations and the densities behind them."""

    C: np.ndarray
    densities: np.ndarray
    tau: float


@dataclass(frozen=True)
class DistanceDistribution:
    """Distance-resolved mean |C|; p[d] for d = 0..d_max."""

    p: np.ndarray
    bc: str
    tau: float


def _moments(state: StateVector) -> tuple[np.ndarray, np.ndarray]:
    """First and second density moments, reflection-folded in parity sectors."""
    sector = state.sector
    occs = sector.occupations_f64()
    w = np.abs(state.amplitudes) ** 2
    first = occs.T @ w
    second = (occs * w[:, None]).T @ occs
    if sector.parity != "none":
        first = 0.5 * (first + first[::-1])
        second = 0.5 * (second + second[::-1, ::-1])
    return first, second


def densities(state: StateVector) -> np.ndarray:
    """Site densities <n_j>."""
    return _moments(state)[0]


def connected_correlations(state: StateVector) -> CorrelationMatrix:
    """C_jk = <n_j n_k> - <n_j><n_k> (diagonal-operator folding is exact per orbit)."""
    first, second = _moments(state)
    C = second - np.outer(first, first)
    return CorrelationMatrix(C=C, densities=first, tau=state.tau)


def distance_distribution(corr, bc: str, tau: float | None = None) -> DistanceDistribution:
    """Average |C| over site pairs in each distance class.

    Open chain: d = 0..L-1 with L-d pairs per class.  Ring: d = 0..L//2 using
    the wrap distance; the mean over k = 1..L counts every unordered pair of
    a class with equal weight, including the antipodal class at even L.
    """
    if isinstance(corr, CorrelationMatrix):
        C = corr.C
        if tau is None:
            tau = corr.tau
    else:
        C = np.asarray(corr)
        if tau is None:
            tau = float("nan")
    L = C.shape[0]
    absC = np.abs(C)
    if bc == "hw":
        p = np.array([absC.diagonal(d).mean() for d in range(L)])
    elif bc == "pbc":
        cols = np.arange(L)
        p = np.array(
            [absC[cols, (cols + d) % L].mean() for d in range(L // 2 + 1)]
        )
    else:
        raise ValueError(f"bc must be 'hw' or 'pbc', got {bc!r}")
    return DistanceDistribution(p=p, bc=bc, tau=tau)


def ctd_and_norm(dist: DistanceDistribution) -> tuple[float, float]:
    """(ell, normP) = (sum_d d*P(d), sum_d P(d)); d = 0 contributes only to normP."""
    d = np.arange(dist.p.size)
    return float((d * dist.p).sum()), float(dist.p.sum())


def ctd_observer(bc: str, include_pd: bool = False):
    """Measurement callback for evolve_on_grid recording ell, normP (and P rows)."""

    def measure(state: StateVector) -> dict:
        dist = distance_distribution(connected_correlations(state), bc)
        ell, norm = ctd_and_norm(dist)
        out = {"ell": ell, "normP": norm}
        if include_pd:
            out["pd"] = dist.p
        return out

    return measure


__all__ = [
    "CorrelationMatrix",
    "DistanceDistribution",
    "connected_correlations",
    "ctd_and_norm",
    "ctd_observer",
    "densities",
    "distance_distribution",
]
