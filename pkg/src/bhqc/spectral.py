"""Exact diagonalization and eigenstate-structure statistics.

Provides full-spectrum diagonalization of small symmetry sectors, the
generalized fractal dimension D1 of states in the Fock basis, energy-windowed
statistics of D1 across the spectrum (the raw material for chaos maps), the
spectral-percentage coordinate, and the energy width of the local density of
states of an initial state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .model import HamiltonianMatrix

DEFAULT_DENSE_CEILING = 30_000

__all__ = [
    "DEFAULT_DENSE_CEILING",
    "DimensionCeilingError",
    "EigenDecomposition",
    "FractalStats",
    "chaos_map_rows",
    "diagonalize_sector",
    "fractal_dimension",
    "fractal_dimensions",
    "lds_width_sigma",
    "spectral_percentage",
    "windowed_fractal_stats",
]


class DimensionCeilingError(ValueError):
    """Sector dimension exceeds the configured dense-solver ceiling."""


@dataclass(frozen=True)
class EigenDecomposition:
    """Full spectrum of one sector: ``vectors[:, k]`` belongs to ``energies[k]``.

    Energies are ascending and expressed in units of the hopping scale J.
    """

    energies: np.ndarray
    vectors: np.ndarray

    def __post_init__(self) -> None:
        if self.energies.ndim != 1 or self.vectors.ndim != 2:
            raise ValueError("energies must be 1-d and vectors 2-d")
        if self.vectors.shape[1] != self.energies.shape[0]:
            raise ValueError("one eigenvector column per energy required")
        if np.any(np.diff(self.energies) < 0):
            raise ValueError("energies must be ascending")

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    def states_at_or_below(self, energy):
        """Integrated density of states: number of eigenvalues <= energy."""
        return np.searchsorted(self.energies, energy, side="right")


def diagonalize_sector(
    H: HamiltonianMatrix,
    *,
    ceiling: int = DEFAULT_DENSE_CEILING,
    driver: str = "evr",
    check: bool = True,
) -> EigenDecomposition:
    """Dense symmetric diagonalization of a full sector Hamiltonian.

    ``driver='evr'`` keeps LAPACK workspace linear in the dimension so the
    peak footprint stays near two dense copies of the matrix.  ``check``
    spot-verifies eigenpair residuals and orthonormality on a few columns.
    """
    dim = H.dim
    if dim > ceiling:
        raise DimensionCeilingError(
            f"sector dimension {dim} exceeds the dense-solver ceiling {ceiling}"
        )
    dense = H.to_dense()
    energies, vectors = eigh(dense, overwrite_a=True, driver=driver)
    del dense
    eig = EigenDecomposition(energies=np.ascontiguousarray(energies), vectors=vectors)
    if check:
        _spot_check(H, eig)
    return eig


def _spot_check(H: HamiltonianMatrix, eig: EigenDecomposition) -> None:
    """Verify residual and orthonormality invariants on sampled eigenpairs."""
    dim = eig.dim
    cols = sorted({0, dim // 2, dim - 1})
    scale = max(1.0, float(np.max(np.abs(eig.energies))))
    sample = eig.vectors[:, cols]
    for j, k in enumerate(cols):
        v = sample[:, j]
        resid = np.linalg.norm(H.matvec(v) - eig.energies[k] * v)
        if resid > 1e-8 * scale:
            raise np.linalg.LinAlgError(
                f"eigenpair {k} residual {resid:.3e} exceeds 1e-8 * {scale:.3e}"
            )
    gram = sample.T @ sample
    if np.max(np.abs(gram - np.eye(len(cols)))) > 1e-10:
        raise np.linalg.LinAlgError("sampled eigenvectors are not orthonormal to 1e-10")


def _occupation_probabilities(amplitudes: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(amplitudes):
        return amplitudes.real**2 + amplitudes.imag**2
    return amplitudes * amplitudes


def fractal_dimension(psi, dim: int | None = None) -> float:
    """Generalized fractal dimension D1 = -sum p ln p / ln(dim), 0 ln 0 := 0.

    ``psi`` is a normalized state (array of basis amplitudes, or any object
    with an ``amplitudes`` attribute); ``dim`` defaults to the basis size.
    """
    amps = np.asarray(getattr(psi, "amplitudes", psi))
    p = _occupation_probabilities(amps)
    total = float(p.sum())
    if abs(total - 1.0) > 1e-8:
        raise ValueError(f"state is not normalized: sum of probabilities {total!r}")
    if dim is None:
        dim = p.size
    if dim < 2:
        raise ValueError("fractal dimension needs a basis of at least two states")
    mask = p > 0.0
    entropy = -float(np.sum(p[mask] * np.log(p[mask])))
    return entropy / math.log(dim)


def fractal_dimensions(
    vectors: np.ndarray, dim: int | None = None, *, block: int = 1024
) -> np.ndarray:
    """Column-wise D1 for a (basis, states) array, computed in column blocks."""
    if dim is None:
        dim = vectors.shape[0]
    if dim < 2:
        raise ValueError("fractal dimension needs a basis of at least two states")
    n_states = vectors.shape[1]
    out = np.empty(n_states)
    for start in range(0, n_states, block):
        p = _occupation_probabilities(vectors[:, start : start + block])
        logp = np.zeros_like(p)
        np.log(p, out=logp, where=p > 0.0)
        out[start : start + block] = -np.einsum("ij,ij->j", p, logp)
    return out / math.log(dim)


@dataclass(frozen=True)
class FractalStats:
    """Windowed mean/variance of D1 across an ordered spectrum.

    ``starts[i]``/``sizes[i]`` delimit window i in eigenstate index order;
    ``sp_centers[i]`` is its center mapped to the spectral-percentage axis.
    """

    window_frac: float
    mode: str
    window_size: int
    starts: np.ndarray
    sizes: np.ndarray
    sp_centers: np.ndarray
    d1_mean: np.ndarray
    d1_var: np.ndarray


def windowed_fractal_stats(
    eig: EigenDecomposition,
    window_frac: float = 0.01,
    *,
    mode: str = "sliding",
    d1: np.ndarray | None = None,
) -> FractalStats:
    """Mean and variance of D1 over energy-ordered eigenstate windows.

    ``mode='sliding'`` advances one state at a time (maximal overlap, for
    maps); ``mode='partition'`` tiles the spectrum into non-overlapping
    windows covering every state exactly once (the final window absorbs the
    remainder).  ``d1`` may pass precomputed per-state values to avoid
    recomputing them across calls.
    """
    if not 0.0 < window_frac <= 0.2:
        raise ValueError("window_frac must lie in (0, 0.2]")
    dim = eig.dim
    width = math.ceil(window_frac * dim)
    if width < 2:
        raise ValueError(
            f"window of {width} state(s) is too small; need at least 2 per window"
        )
    if d1 is None:
        d1 = fractal_dimensions(eig.vectors)
    d1 = np.asarray(d1, dtype=float)
    if d1.shape != (dim,):
        raise ValueError("d1 must hold one value per eigenstate")

    if mode == "sliding":
        starts = np.arange(dim - width + 1)
        sizes = np.full(starts.shape, width)
    elif mode == "partition":
        count = dim // width
        starts = np.arange(count) * width
        sizes = np.full(count, width)
        sizes[-1] += dim - count * width
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'sliding' or 'partition'")

    if mode == "sliding":
        # two-pass moments on strided windows: immune to the cancellation a
        # running-sum formulation would suffer on near-constant data
        view = np.lib.stride_tricks.sliding_window_view(d1, width)
        mean = view.mean(axis=1)
        # a constant window has zero variance by definition; mask out the
        # rounding residue the mean subtraction would otherwise leave
        var = np.where(view.min(axis=1) == view.max(axis=1), 0.0, view.var(axis=1))
    else:
        mean = np.empty(len(starts))
        var = np.empty(len(starts))
        for i, (s, w) in enumerate(zip(starts, sizes)):
            chunk = d1[s : s + w]
            mean[i] = chunk.mean()
            var[i] = 0.0 if chunk.min() == chunk.max() else chunk.var()

    n0 = float(eig.states_at_or_below(0.0))
    centers = starts + 0.5 * (sizes - 1)
    sp_centers = 100.0 * (centers + 1.0 - n0) / dim

    return FractalStats(
        window_frac=window_frac,
        mode=mode,
        window_size=width,
        starts=starts,
        sizes=sizes,
        sp_centers=sp_centers,
        d1_mean=mean,
        d1_var=var,
    )


def spectral_percentage(eig: EigenDecomposition, energy, *, return_clamped: bool = False):
    """Percentage of states between E=0 and the given energy.

    sp(E) = 100 [N(E) - N(0)] / dim with N the integrated density of states
    (eigenvalues <= E).  Energies outside the spectrum hull are clamped to it;
    pass ``return_clamped=True`` to also receive the clamping flag.
    """
    e = np.asarray(energy, dtype=float)
    lo = float(eig.energies[0])
    hi = float(eig.energies[-1])
    clamped = (e < lo) | (e > hi)
    counts = eig.states_at_or_below(np.clip(e, lo, hi))
    n0 = eig.states_at_or_below(0.0)
    sp = 100.0 * (np.asarray(counts, dtype=float) - n0) / eig.dim
    if np.isscalar(energy) or e.ndim == 0:
        sp = float(sp)
        clamped = bool(clamped)
    if return_clamped:
        return sp, clamped
    return sp


def lds_width_sigma(H: HamiltonianMatrix, psi0) -> float:
    """Energy width sigma/J = sqrt(<H^2> - <H>^2) of a normalized state."""
    amps = np.asarray(getattr(psi0, "amplitudes", psi0))
    if amps.shape != (H.dim,):
        raise ValueError("state does not live in the Hamiltonian's sector")
    norm2 = float(np.real(np.vdot(amps, amps)))
    if abs(norm2 - 1.0) > 1e-8:
        raise ValueError(f"state is not normalized: |psi|^2 = {norm2!r}")
    hpsi = H.matvec(amps)
    e1 = float(np.real(np.vdot(amps, hpsi)))
    e2 = float(np.real(np.vdot(hpsi, hpsi)))
    return math.sqrt(max(e2 - e1 * e1, 0.0))


def chaos_map_rows(gamma: float, stats: FractalStats) -> list[tuple[float, float, float, float]]:
    """Long-format (gamma, sp, mean D1, var D1) rows for heat-map plotting."""
    return [
        (float(gamma), float(sp), float(m), float(v))
        for sp, m, v in zip(stats.sp_centers, stats.d1_mean, stats.d1_var)
    ]


def central_window(stats: FractalStats) -> tuple[float, float, float]:
    """(sp_center, D1 mean, D1 var) of the window nearest the band center.

    The band center is spectral percentage zero; ties resolve to the first
    (lowest-energy) window, so the result is deterministic.
    """
    idx = int(np.argmin(np.abs(stats.sp_centers)))
    return (
        float(stats.sp_centers[idx]),
        float(stats.d1_mean[idx]),
        float(stats.d1_var[idx]),
    )
