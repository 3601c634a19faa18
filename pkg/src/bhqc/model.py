"""Bose-Hubbard chain at fixed particle number: basis, sectors, Hamiltonian.

Energies are measured in units of the hopping J throughout, so the only
coupling is u = U/(2J) = 1/(2*gamma) and time is the dimensionless tau = J*t/hbar.
The basis is the descending-lexicographic list of occupation vectors at fixed
(L, N); reflection-parity sectors store one representative per mirror orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigvalsh

BC_CHOICES = ("hw", "pbc")
PARITY_CHOICES = ("none", "even", "odd")

#: refuse to enumerate sectors larger than this unless the caller raises the cap
DEFAULT_MAX_DIM = 4_000_000

_SQRT2 = math.sqrt(2.0)


class CapacityError(RuntimeError):
    """A requested sector exceeds the configured dimension budget."""


class SpectralBoundsError(RuntimeError):
    """Iterative extremal eigenvalue estimation failed to converge."""


@dataclass(frozen=True)
class ModelParams:
    """Chain geometry and coupling. gamma = J/U may be math.inf (free bosons)."""

    L: int
    N: int
    gamma: float
    bc: str = "hw"
    parity: str = "none"

    def __post_init__(self) -> None:
        if self.L < 1:
            raise ValueError(f"need at least one site, got L={self.L}")
        if self.N < 0:
            raise ValueError(f"particle number must be non-negative, got N={self.N}")
        if not (self.gamma > 0.0):  # also rejects NaN
            raise ValueError(f"gamma must be positive (math.inf allowed), got {self.gamma}")
        if self.bc not in BC_CHOICES:
            raise ValueError(f"bc must be one of {BC_CHOICES}, got {self.bc!r}")
        if self.parity not in PARITY_CHOICES:
            raise ValueError(f"parity must be one of {PARITY_CHOICES}, got {self.parity!r}")

    @property
    def u(self) -> float:
        """On-site coupling u = 1/(2*gamma) in units of J; exactly 0 for gamma=inf."""
        return 0.0 if math.isinf(self.gamma) else 1.0 / (2.0 * self.gamma)


def _binom_table(nmax: int, kmax: int) -> np.ndarray:
    """Pascal table of binomials C(n, k) for 0 <= n <= nmax, 0 <= k <= kmax (int64)."""
    table = np.zeros((nmax + 1, kmax + 1), dtype=np.int64)
    table[:, 0] = 1
    for n in range(1, nmax + 1):
        hi = min(n, kmax)
        table[n, 1 : hi + 1] = table[n - 1, 1 : hi + 1] + table[n - 1, 0:hi]
    return table


def sector_dimension(L: int, N: int) -> int:
    """Number of occupation vectors of length L summing to N."""
    return math.comb(N + L - 1, N)


def _enumerate_descending(L: int, N: int) -> np.ndarray:
    """All occupation vectors (dim, L) in descending lexicographic order, uint8."""
    memo: dict[tuple[int, int], np.ndarray] = {}

    def build(sites: int, bosons: int) -> np.ndarray:
        key = (sites, bosons)
        cached = memo.get(key)
        if cached is not None:
            return cached
        if sites == 1:
            arr = np.array([[bosons]], dtype=np.uint8)
        else:
            parts = []
            for v in range(bosons, -1, -1):
                tail = build(sites - 1, bosons - v)
                block = np.empty((tail.shape[0], sites), dtype=np.uint8)
                block[:, 0] = v
                block[:, 1:] = tail
                parts.append(block)
            arr = np.vstack(parts)
        memo[key] = arr
        return arr

    return build(L, N)


def _rank_occupations(occs: np.ndarray, N: int, table: np.ndarray) -> np.ndarray:
    """Positions of occupation vectors in the descending-lexicographic list.

    Combinatorial number system: rank = sum_i C(R_i - n_i - 1 + M_i, M_i) over
    sites i where R_i - n_i >= 1, with R_i the bosons not yet placed before
    site i and M_i the number of sites to the right of i.
    """
    occ = occs.astype(np.int64, copy=False)
    L = occ.shape[1]
    rem = N - np.cumsum(occ, axis=1) + occ
    sites_right = (L - 1) - np.arange(L, dtype=np.int64)
    top = rem - occ - 1 + sites_right
    valid = (rem - occ) >= 1
    vals = np.where(valid, table[np.clip(top, 0, None), sites_right], 0)
    return vals.sum(axis=1)


@dataclass(frozen=True, eq=False)
class BasisSector:
    """Occupation basis for fixed (L, N), optionally one reflection-parity block.

    For parity sectors `occs` holds one representative per mirror orbit (the
    occupation vector with the smaller full-basis rank) and `orbit` records the
    orbit size (1 for reflection-symmetric states, else 2); the symmetrization
    weights 1 and 1/sqrt(2) follow from the orbit size. `rep_ranks` are the
    full-basis ranks of the representatives, ascending.
    """

    L: int
    N: int
    parity: str
    occs: np.ndarray
    orbit: np.ndarray | None = None
    rep_ranks: np.ndarray | None = None
    _table: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    @property
    def dim(self) -> int:
        return self.occs.shape[0]

    def rank(self, occs: np.ndarray) -> np.ndarray:
        """Sector positions of occupation vectors (batched, shape (M, L))."""
        full = _rank_occupations(np.atleast_2d(occs), self.N, self._table)
        if self.parity == "none":
            return full
        pos = np.searchsorted(self.rep_ranks, full)
        return pos

    def index(self, occupation) -> int:
        """Sector position of a single occupation vector."""
        occ = np.asarray(occupation, dtype=np.uint8)[None, :]
        if occ.sum() != self.N or occ.shape[1] != self.L:
            raise ValueError("occupation vector does not match the sector (L, N)")
        if self.parity != "none":
            r = int(_rank_occupations(occ, self.N, self._table)[0])
            rr = int(_rank_occupations(occ[:, ::-1], self.N, self._table)[0])
            rep = min(r, rr)
            pos = int(np.searchsorted(self.rep_ranks, rep))
            if pos >= self.dim or self.rep_ranks[pos] != rep:
                raise ValueError("occupation vector has no orbit in this parity sector")
            return pos
        return int(self.rank(occ)[0])

    def occupations_f64(self) -> np.ndarray:
        """Occupation matrix as float64 (cached), for expectation values."""
        cached = getattr(self, "_occs_f64", None)
        if cached is None:
            cached = self.occs.astype(np.float64)
            object.__setattr__(self, "_occs_f64", cached)
        return cached


def enumerate_basis(L: int, N: int, *, max_dim: int = DEFAULT_MAX_DIM) -> BasisSector:
    """Full fixed-N basis in descending lexicographic order."""
    dim = sector_dimension(L, N)
    if dim > max_dim:
        raise CapacityError(
            f"sector (L={L}, N={N}) has dimension {dim} > budget {max_dim}"
        )
    occs = _enumerate_descending(L, N)
    table = _binom_table(N + L, L)
    return BasisSector(L=L, N=N, parity="none", occs=occs, _table=table)


def build_parity_sector(
    L: int, N: int, parity: str, *, max_dim: int = DEFAULT_MAX_DIM
) -> BasisSector:
    """Reflection-parity block of the fixed-N basis.

    The reflection is the site map j -> L+1-j (occupation-vector reversal),
    which commutes with the Hamiltonian for both boundary conditions.
    """
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    full = enumerate_basis(L, N, max_dim=max_dim)
    table = full._table
    ranks_rev = _rank_occupations(full.occs[:, ::-1], N, table)
    ranks = np.arange(full.dim, dtype=np.int64)
    if parity == "even":
        keep = ranks <= ranks_rev
    else:
        keep = ranks < ranks_rev
    occs = full.occs[keep]
    rep_ranks = ranks[keep]
    orbit = np.where(ranks_rev[keep] == rep_ranks, 1, 2).astype(np.int8)
    return BasisSector(
        L=L, N=N, parity=parity, occs=occs, orbit=orbit, rep_ranks=rep_ranks, _table=table
    )


def sector_for(params: ModelParams, *, max_dim: int = DEFAULT_MAX_DIM) -> BasisSector:
    """Basis sector selected by params.parity."""
    if params.parity == "none":
        return enumerate_basis(params.L, params.N, max_dim=max_dim)
    return build_parity_sector(params.L, params.N, params.parity, max_dim=max_dim)


@dataclass(eq=False)
class HamiltonianMatrix:
    """H/J split as sparse off-diagonal hopping plus dense interaction diagonal."""

    params: ModelParams
    sector: BasisSector
    hop: sp.csr_matrix
    diag: np.ndarray
    _bounds_cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.diag.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """H @ x for real or complex x (complex input split to keep the CSR real)."""
        if np.iscomplexobj(x):
            re = self.hop @ x.real + self.diag * x.real
            im = self.hop @ x.imag + self.diag * x.imag
            return re + 1j * im
        return self.hop @ x + self.diag * x

    def to_dense(self) -> np.ndarray:
        dense = self.hop.toarray()
        dense[np.diag_indices_from(dense)] += self.diag
        return dense

    def expectation(self, amplitudes: np.ndarray) -> float:
        """<psi|H|psi> (real for Hermitian H and normalized or not psi)."""
        return float(np.real(np.vdot(amplitudes, self.matvec(amplitudes))))


def _bonds(L: int, bc: str) -> list[tuple[int, int]]:
    bonds = [(j, j + 1) for j in range(L - 1)]
    if bc == "pbc" and L > 2:
        bonds.append((L - 1, 0))
    elif bc == "pbc" and L == 2:
        # the wrap bond coincides with the open bond; count it twice
        bonds.append((1, 0))
    return bonds


def build_hamiltonian(params: ModelParams, sector: BasisSector | None = None) -> HamiltonianMatrix:
    """Assemble H/J = -sum_<jk> (b_j^dag b_k + h.c.) + u sum_j n_j(n_j-1)."""
    if sector is None:
        sector = sector_for(params)
    if (sector.L, sector.N, sector.parity) != (params.L, params.N, params.parity):
        raise ValueError("sector does not match params")
    occs = sector.occs
    dim = sector.dim
    table = sector._table
    u = params.u
    occ64 = occs.astype(np.int64)
    diag = u * np.einsum("ij,ij->i", occ64, occ64 - 1).astype(np.float64)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    col_idx = np.arange(dim, dtype=np.int64)

    if sector.parity == "none":
        for j, k in _bonds(params.L, params.bc):
            for src, dst in ((j, k), (k, j)):
                mask = occs[:, src] > 0
                sub = occ64[mask]
                amp = -np.sqrt(sub[:, src] * (sub[:, dst] + 1.0))
                tgt = sub.copy()
                tgt[:, src] -= 1
                tgt[:, dst] += 1
                rows.append(_rank_occupations(tgt, params.N, table))
                cols.append(col_idx[mask])
                vals.append(amp)
    else:
        sign = 1.0 if params.parity == "even" else -1.0
        nb = np.where(sector.orbit == 2, _SQRT2, 1.0)
        rep_ranks = sector.rep_ranks
        for j, k in _bonds(params.L, params.bc):
            for src, dst in ((j, k), (k, j)):
                mask = occs[:, src] > 0
                sub = occ64[mask]
                amp = -np.sqrt(sub[:, src] * (sub[:, dst] + 1.0)) * nb[mask]
                tgt = sub.copy()
                tgt[:, src] -= 1
                tgt[:, dst] += 1
                r_t = _rank_occupations(tgt, params.N, table)
                r_tr = _rank_occupations(tgt[:, ::-1], params.N, table)
                sym = r_t == r_tr
                rep = np.minimum(r_t, r_tr)
                if params.parity == "odd":
                    # symmetric targets have no odd component
                    keep = ~sym
                    rep = rep[keep]
                    coef = amp[keep] / _SQRT2
                    coef = np.where(r_t[keep] == rep, coef, sign * coef)
                    src_pos = col_idx[mask][keep]
                else:
                    coef = np.where(sym, amp, amp / _SQRT2)
                    src_pos = col_idx[mask]
                rows.append(np.searchsorted(rep_ranks, rep))
                cols.append(src_pos)
                vals.append(coef)

    if rows:
        row = np.concatenate(rows)
        col = np.concatenate(cols)
        val = np.concatenate(vals)
    else:  # single-site chain or N = 0: no hopping at all
        row = np.empty(0, dtype=np.int64)
        col = np.empty(0, dtype=np.int64)
        val = np.empty(0, dtype=np.float64)
    hop = sp.coo_matrix((val, (row, col)), shape=(dim, dim)).tocsr()
    return HamiltonianMatrix(params=params, sector=sector, hop=hop, diag=diag)


def spectral_bounds(
    H: HamiltonianMatrix,
    padding: float = 0.01,
    *,
    tol: float = 1e-9,
    dense_cutoff: int = 32,
) -> tuple[float, float]:
    """Interval [lo, hi] enclosing spec(H/J), widened by relative `padding`.

    Small problems are solved densely; otherwise extremal eigenvalues come
    from a Lanczos solve whose residuals are checked and folded into the
    enclosure before padding is applied.
    """
    key = (padding, tol)
    cached = H._bounds_cache.get(key)
    if cached is not None:
        return cached
    dim = H.dim
    if dim <= dense_cutoff:
        eigs = eigvalsh(H.to_dense())
        lo, hi = float(eigs[0]), float(eigs[-1])
        resid = 0.0
    else:
        op = spla.LinearOperator(
            (dim, dim), matvec=H.matvec, rmatvec=H.matvec, dtype=np.float64
        )
        # fixed-seed start vector: reruns must produce bit-identical bounds
        v0 = np.random.default_rng(1905).standard_normal(dim)
        try:
            e_lo, v_lo = spla.eigsh(op, k=1, which="SA", tol=tol, v0=v0)
            e_hi, v_hi = spla.eigsh(op, k=1, which="LA", tol=tol, v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise SpectralBoundsError(
                f"extremal eigenvalue iteration did not converge: {exc}"
            ) from exc
        lo, hi = float(e_lo[0]), float(e_hi[0])
        r_lo = float(np.linalg.norm(H.matvec(v_lo[:, 0]) - lo * v_lo[:, 0]))
        r_hi = float(np.linalg.norm(H.matvec(v_hi[:, 0]) - hi * v_hi[:, 0]))
        resid = max(r_lo, r_hi)
        scale = max(abs(lo), abs(hi), 1.0)
        if resid > 1e-6 * scale:
            raise SpectralBoundsError(
                f"extremal eigenvector residual {resid:.3e} too large for bounds"
            )
    lo -= resid
    hi += resid
    center = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    bounds = (center - half * (1.0 + padding), center + half * (1.0 + padding))
    H._bounds_cache[key] = bounds
    return bounds
