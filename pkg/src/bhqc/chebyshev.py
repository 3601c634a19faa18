"""Chebyshev expansion of exp(-i H dtau) acting on sector state vectors.

The Hamiltonian is rescaled to H~ = (H - b)/a with spec(H~) inside (-1, 1),
so U(dtau) = e^{-i b dtau} [c_0 v_0 + 2 sum_{n>=1} c_n v_n] with coefficients
c_n = (-i)^n J_n(a dtau) and the recursion v_{n+1} = 2 H~ v_n - v_{n-1}.
Because H~ is real, a real input component keeps every v_n real and the
(-i)^n factors route even orders to the real accumulator and odd orders to
the imaginary one; a complex state costs two real recursions per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from bhqc.analytic import bessel_jn
from bhqc.model import BasisSector, HamiltonianMatrix, spectral_bounds


class NormDriftError(RuntimeError):
    """State norm left the allowed band around 1; carries partial records."""

    def __init__(self, message: str, records: dict | None = None):
        super().__init__(message)
        self.records = records or {}


@dataclass
class StateVector:
    """Complex amplitudes over a basis sector at dimensionless time tau."""

    sector: BasisSector
    amplitudes: np.ndarray
    tau: float = 0.0

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.sector, self.amplitudes.copy(), self.tau)


def fock_state(sector: BasisSector, occupation) -> StateVector:
    """Product Fock state |n_1, ..., n_L> as a sector state vector.

    In a parity sector the occupation must be reflection symmetric (then the
    Fock state coincides with its symmetrized representative).
    """
    occ = np.asarray(occupation, dtype=np.int64)
    if sector.parity != "none" and not np.array_equal(occ, occ[::-1]):
        raise ValueError(
            "only reflection-symmetric product states exist inside one parity sector"
        )
    idx = sector.index(occ)
    amplitudes = np.zeros(sector.dim, dtype=np.complex128)
    amplitudes[idx] = 1.0
    return StateVector(sector=sector, amplitudes=amplitudes, tau=0.0)


@dataclass(frozen=True)
class TimeGrid:
    """Piecewise-uniform sampling grid: contiguous (start, end, step) segments."""

    segments: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("time grid needs at least one segment")
        prev_end = None
        for start, end, step in self.segments:
            if not (end > start):
                raise ValueError(f"segment ({start}, {end}, {step}) must move forward")
            if not (step > 0.0):
                raise ValueError(f"segment step must be positive, got {step}")
            n = (end - start) / step
            if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)):
                raise ValueError(
                    f"segment ({start}, {end}) length is not a multiple of step {step}"
                )
            if prev_end is not None and abs(start - prev_end) > 1e-12 * max(1.0, abs(start)):
                raise ValueError("segments must be contiguous and increasing")
            prev_end = end

    @classmethod
    def from_spec(cls, text: str) -> "TimeGrid":
        """Parse 'start:end:step[,start:end:step...]'."""
        segments = []
        for part in text.split(","):
            pieces = part.split(":")
            if len(pieces) != 3:
                raise ValueError(f"bad grid segment {part!r}, want start:end:step")
            segments.append(tuple(float(p) for p in pieces))
        return cls(tuple(segments))

    def segment_counts(self) -> list[int]:
        return [int(round((end - start) / step)) for start, end, step in self.segments]

    def samples(self) -> np.ndarray:
        """All sample times, starting at the first segment's start."""
        out = [np.array([self.segments[0][0]])]
        for (start, end, step), n in zip(self.segments, self.segment_counts()):
            pts = start + step * np.arange(1, n + 1)
            pts[-1] = end
            out.append(pts)
        return np.concatenate(out)

    @property
    def end(self) -> float:
        return self.segments[-1][1]


DEFAULT_GRID = TimeGrid(((0.0, 10.0, 0.01), (10.0, 200.0, 0.5)))


@dataclass(eq=False)
class PropagatorPlan:
    """Frozen per-(H, dtau) expansion: rescaling, coefficients, scaled operators."""

    H: HamiltonianMatrix
    dtau: float
    cutoff: float
    rescale_a: float
    rescale_b: float
    order: int
    bessels: np.ndarray
    phase: complex
    _inv_a: float = field(repr=False, default=1.0)
    _diag_scaled: np.ndarray = field(repr=False, default=None)


def plan_propagator(
    H: HamiltonianMatrix,
    dtau: float,
    *,
    cutoff: float = 1e-12,
    padding: float = 0.01,
) -> PropagatorPlan:
    """Build the Chebyshev plan for one step size.

    The expansion order M is the largest n with |J_n(a dtau)| >= cutoff; the
    superexponential tail beyond the Bessel turning point makes every later
    coefficient smaller than the cutoff.
    """
    if dtau <= 0.0:
        raise ValueError(f"dtau must be positive, got {dtau}")
    if not (0.0 < cutoff < 1.0):
        raise ValueError(f"cutoff must be in (0, 1), got {cutoff}")
    lo, hi = spectral_bounds(H, padding)
    a = 0.5 * (hi - lo)
    b = 0.5 * (hi + lo)
    if a == 0.0:
        a = 1.0  # single-point spectrum: H~ = 0 and only J_0 survives
    x = a * dtau
    n_hi = int(math.ceil(x)) + int(14.0 * max(x, 1.0) ** (1.0 / 3.0)) + 40
    while True:
        j = bessel_jn(n_hi, x)
        big = np.flatnonzero(np.abs(j) >= cutoff)
        if big.size == 0:
            order = 0
            break
        order = int(big[-1])
        if order < n_hi:
            break
        n_hi = int(n_hi * 1.5) + 20  # tail not resolved yet, extend
    bessels = j[: order + 1].copy()
    diag_scaled = (H.diag - b) / a
    phase = complex(np.exp(-1j * b * dtau))
    return PropagatorPlan(
        H=H,
        dtau=dtau,
        cutoff=cutoff,
        rescale_a=a,
        rescale_b=b,
        order=order,
        bessels=bessels,
        phase=phase,
        _inv_a=1.0 / a,
        _diag_scaled=diag_scaled,
    )


def _cheb_accumulate(plan: PropagatorPlan, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real and imaginary parts of sum_n c_n v_n for a real input vector x."""
    J = plan.bessels
    hop = plan.H.hop
    inv_a = plan._inv_a
    diag = plan._diag_scaled
    acc_re = J[0] * x
    acc_im = np.zeros_like(x)
    if plan.order == 0:
        return acc_re, acc_im
    v_prev = x
    v = inv_a * (hop @ x) + diag * x
    for n in range(1, plan.order + 1):
        if n > 1:
            v, v_prev = 2.0 * (inv_a * (hop @ v) + diag * v) - v_prev, v
        c = 2.0 * J[n]
        r = n & 3
        if r == 0:
            acc_re += c * v
        elif r == 1:
            acc_im -= c * v
        elif r == 2:
            acc_re -= c * v
        else:
            acc_im += c * v
    return acc_re, acc_im


def step(H: HamiltonianMatrix, plan: PropagatorPlan, psi: StateVector) -> StateVector:
    """One Chebyshev step of size plan.dtau; the norm is never renormalized."""
    if plan.H is not H:
        raise ValueError("plan was built for a different Hamiltonian")
    if psi.amplitudes.shape[0] != H.dim:
        raise ValueError("state dimension does not match the Hamiltonian")
    x_re = np.ascontiguousarray(psi.amplitudes.real)
    x_im = np.ascontiguousarray(psi.amplitudes.imag)
    rr, ri = _cheb_accumulate(plan, x_re)
    if np.any(x_im):
        ir, ii = _cheb_accumulate(plan, x_im)
        out = (rr - ii) + 1j * (ri + ir)
    else:
        out = rr + 1j * ri
    out *= plan.phase
    return StateVector(sector=psi.sector, amplitudes=out, tau=psi.tau + plan.dtau)


def evolve_on_grid(
    H: HamiltonianMatrix,
    psi0: StateVector,
    grid: TimeGrid,
    observers=(),
    *,
    cutoff: float = 1e-12,
    padding: float = 0.01,
    norm_abort: float = 1e-6,
    checkpoint_every: int = 0,
    checkpoint_hook=None,
) -> dict[str, np.ndarray]:
    """Propagate psi0 across the grid, recording observers at every sample.

    Always records tau, energy and norm_error (= |norm - 1|).  Starting from
    a checkpointed state whose tau sits on an interior grid sample resumes
    the identical trajectory.  A norm excursion beyond norm_abort flushes a
    final checkpoint (when a hook is given) and raises NormDriftError with
    the partial records attached.
    """
    samples = grid.samples()
    tol = 1e-9 * max(1.0, abs(psi0.tau))
    start_idx = int(np.searchsorted(samples, psi0.tau - tol))
    if start_idx >= samples.size or abs(samples[start_idx] - psi0.tau) > 1e-9:
        raise ValueError(f"state tau {psi0.tau} is not a grid sample")

    records: dict[str, list] = {"tau": [], "energy": [], "norm_error": []}

    def record(state: StateVector) -> None:
        records["tau"].append(state.tau)
        records["energy"].append(H.expectation(state.amplitudes))
        records["norm_error"].append(abs(state.norm() - 1.0))
        for obs in observers:
            for key, val in obs(state).items():
                records.setdefault(key, []).append(val)

    def finalize() -> dict[str, np.ndarray]:
        return {key: np.asarray(vals) for key, vals in records.items()}

    psi = psi0.copy()
    record(psi)
    plans: dict[float, PropagatorPlan] = {}
    emitted = 1
    for seg, n_steps in zip(grid.segments, grid.segment_counts()):
        seg_start, seg_end, seg_step = seg
        seg_samples = np.concatenate([[seg_start], seg_start + seg_step * np.arange(1, n_steps + 1)])
        seg_samples[-1] = seg_end
        for i in range(n_steps):
            if seg_samples[i + 1] <= psi.tau + 1e-12:
                continue  # already behind us (resumed run)
            plan = plans.get(seg_step)
            if plan is None:
                plan = plan_propagator(H, seg_step, cutoff=cutoff, padding=padding)
                plans[seg_step] = plan
            psi = step(H, plan, psi)
            psi.tau = float(seg_samples[i + 1])  # pin to the grid against float drift
            drift = abs(psi.norm() - 1.0)
            if drift > norm_abort:
                if checkpoint_hook is not None:
                    checkpoint_hook(psi)
                raise NormDriftError(
                    f"norm drift {drift:.3e} exceeded {norm_abort:.1e} at tau={psi.tau:g} "
                    f"(order {plan.order}, cutoff {plan.cutoff:g}); "
                    "check spectral bounds or lower the coefficient cutoff",
                    records=finalize(),
                )
            record(psi)
            emitted += 1
            if checkpoint_hook is not None and checkpoint_every > 0 and emitted % checkpoint_every == 0:
                checkpoint_hook(psi)
    return finalize()


__all__ = [
    "DEFAULT_GRID",
    "NormDriftError",
    "PropagatorPlan",
    "StateVector",
    "TimeGrid",
    "evolve_on_grid",
    "fock_state",
    "plan_propagator",
    "step",
]
