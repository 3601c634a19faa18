"""Post-processing statistics and fits for correlation-transport series.

Covers saturation-window statistics (time average, temporal variance),
system-size scaling fits (linear, exponential, inverse-polynomial), power-law
growth fits in log-log coordinates, infinite-size extrapolation of curves
measured at several L, and the diffusion-constant estimate built from a
power-law fit and the window-averaged correlation norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DiffusionEstimate",
    "PowerLawFit",
    "SaturationStats",
    "ScalingFit",
    "SizeExtrapolation",
    "SATURATION_WINDOW",
    "GROWTH_WINDOW",
    "diffusion_constant",
    "extrapolate_Linf",
    "fit_powerlaw",
    "fit_scaling",
    "saturation_stats",
]

SATURATION_WINDOW = (100.0, 200.0)
GROWTH_WINDOW = (2.2, 3.3)

_EDGE_TOL = 1e-9

SCALING_MODES = ("linear_L", "exponential_L", "inverse_poly_L")


def _window_mask(tau: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError(f"window must satisfy a < b, got {window!r}")
    if lo < tau.min() - _EDGE_TOL or hi > tau.max() + _EDGE_TOL:
        raise ValueError(
            f"window {window!r} extends beyond the series range "
            f"[{tau.min()!r}, {tau.max()!r}]"
        )
    return (tau >= lo - _EDGE_TOL) & (tau <= hi + _EDGE_TOL)


@dataclass(frozen=True)
class SaturationStats:
    """Time average and temporal variance of a series over one window."""

    window: tuple[float, float]
    ell_sat: float
    var_tau: float
    rel_var: float
    n_samples: int


def saturation_stats(
    tau: np.ndarray,
    values: np.ndarray,
    window: tuple[float, float] = SATURATION_WINDOW,
    *,
    min_samples: int = 10,
) -> SaturationStats:
    """Mean and population variance of ``values`` over an inclusive tau window."""
    tau = np.asarray(tau, dtype=float)
    values = np.asarray(values, dtype=float)
    if tau.shape != values.shape or tau.ndim != 1:
        raise ValueError("tau and values must be matching 1-d arrays")
    mask = _window_mask(tau, window)
    n = int(mask.sum())
    if n < min_samples:
        raise ValueError(f"window holds {n} samples; need at least {min_samples}")
    chunk = values[mask]
    mean = float(chunk.mean())
    # a constant window has zero variance by definition (no rounding residue)
    var = 0.0 if chunk.min() == chunk.max() else float(chunk.var())
    rel = var / (mean * mean) if mean != 0.0 else math.inf
    return SaturationStats(
        window=(float(window[0]), float(window[1])),
        ell_sat=mean,
        var_tau=var,
        rel_var=rel,
        n_samples=n,
    )


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of a size-dependence law.

    ``coefficients``/``errors`` by mode:
      linear_L        (a, b)    for  a*L + b
      exponential_L   (A, c)    for  A*exp(c*L)
      inverse_poly_L  (a, b, c) for  a + b/L + c/L^2
    ``residuals`` are data minus model in the original (unlinearized)
    coordinates, one entry per input point.
    """

    mode: str
    coefficients: tuple[float, ...]
    errors: tuple[float, ...]
    residuals: np.ndarray


def _lstsq_with_errors(design: np.ndarray, y: np.ndarray):
    """Solve min ||design p - y|| and return (p, per-parameter sigma, fitted)."""
    n, k = design.shape
    p, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < k:
        raise np.linalg.LinAlgError("singular design matrix")
    fitted = design @ p
    resid = y - fitted
    if n > k:
        sigma2 = float(resid @ resid) / (n - k)
        cov = sigma2 * np.linalg.inv(design.T @ design)
        errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    else:
        errs = np.zeros(k)
    return p, errs, fitted


def fit_scaling(sizes, values, mode: str) -> ScalingFit:
    """Fit one of the size-scaling laws to (L, value) points.

    The exponential mode is fit in log coordinates and therefore requires
    positive values; its amplitude error follows from the log-amplitude error
    by linear propagation.
    """
    L = np.asarray(sizes, dtype=float)
    y = np.asarray(values, dtype=float)
    if L.shape != y.shape or L.ndim != 1:
        raise ValueError("sizes and values must be matching 1-d arrays")
    if L.size < 3:
        raise ValueError(f"need at least 3 points, got {L.size}")
    if mode == "linear_L":
        design = np.column_stack([L, np.ones_like(L)])
        p, errs, fitted = _lstsq_with_errors(design, y)
        return ScalingFit(mode, (float(p[0]), float(p[1])), (float(errs[0]), float(errs[1])), y - fitted)
    if mode == "exponential_L":
        if np.any(y <= 0.0):
            raise ValueError("exponential_L requires strictly positive values")
        design = np.column_stack([np.ones_like(L), L])
        p, errs, _ = _lstsq_with_errors(design, np.log(y))
        amp = math.exp(p[0])
        model = amp * np.exp(p[1] * L)
        return ScalingFit(mode, (amp, float(p[1])), (amp * float(errs[0]), float(errs[1])), y - model)
    if mode == "inverse_poly_L":
        if np.any(L <= 0.0):
            raise ValueError("inverse_poly_L requires positive sizes")
        design = np.column_stack([np.ones_like(L), 1.0 / L, 1.0 / (L * L)])
        p, errs, fitted = _lstsq_with_errors(design, y)
        return ScalingFit(mode, tuple(map(float, p)), tuple(map(float, errs)), y - fitted)
    raise ValueError(f"unknown mode {mode!r}; expected one of {SCALING_MODES}")


@dataclass(frozen=True)
class PowerLawFit:
    """alpha * tau^beta fitted by unweighted least squares in log-log space."""

    window: tuple[float, float]
    alpha: float
    beta: float
    alpha_err: float
    beta_err: float
    residual_norm: float
    n_samples: int


def fit_powerlaw(
    tau: np.ndarray,
    ell: np.ndarray,
    window: tuple[float, float] = GROWTH_WINDOW,
) -> PowerLawFit:
    """Fit ell = alpha * tau^beta on an inclusive window of the series."""
    tau = np.asarray(tau, dtype=float)
    ell = np.asarray(ell, dtype=float)
    if tau.shape != ell.shape or tau.ndim != 1:
        raise ValueError("tau and ell must be matching 1-d arrays")
    mask = _window_mask(tau, window)
    t = tau[mask]
    y = ell[mask]
    if t.size < 2:
        raise ValueError(f"window holds {t.size} samples; need at least 2")
    if np.any(y <= 0.0):
        raise ValueError("power-law fit requires strictly positive values in the window")
    if np.any(t <= 0.0):
        raise ValueError("power-law fit requires strictly positive times in the window")
    design = np.column_stack([np.log(t), np.ones_like(t)])
    p, errs, fitted = _lstsq_with_errors(design, np.log(y))
    alpha = math.exp(p[1])
    resid = np.log(y) - fitted
    return PowerLawFit(
        window=(float(window[0]), float(window[1])),
        alpha=alpha,
        beta=float(p[0]),
        alpha_err=alpha * float(errs[1]),
        beta_err=float(errs[0]),
        residual_norm=float(np.linalg.norm(resid)),
        n_samples=int(t.size),
    )


@dataclass(frozen=True)
class SizeExtrapolation:
    """Per-time infinite-size limit a(tau) of curves measured at several L."""

    tau: np.ndarray
    value: np.ndarray
    error: np.ndarray
    sizes: tuple[float, ...]


def extrapolate_Linf(
    tau: np.ndarray,
    curves: dict[float, np.ndarray],
    window: tuple[float, float] | None = None,
) -> SizeExtrapolation:
    """Extrapolate curves on a shared tau grid to L -> infinity.

    Fits value = a + b/L + c/L^2 across system sizes independently at every
    tau sample and returns a(tau) with its covariance-based uncertainty.
    """
    tau = np.asarray(tau, dtype=float)
    sizes = sorted(float(L) for L in curves)
    if len(sizes) < 3:
        raise ValueError(f"need curves for at least 3 sizes, got {len(sizes)}")
    rows = [np.asarray(curves[L], dtype=float) for L in sizes]
    if any(row.shape != tau.shape for row in rows):
        raise ValueError("every curve must share the tau grid")
    Y = np.vstack(rows)
    if window is not None:
        mask = _window_mask(tau, window)
        tau = tau[mask]
        Y = Y[:, mask]
    Ls = np.asarray(sizes)
    design = np.column_stack([np.ones_like(Ls), 1.0 / Ls, 1.0 / (Ls * Ls)])
    coeffs, _, rank, _ = np.linalg.lstsq(design, Y, rcond=None)
    if rank < 3:
        raise np.linalg.LinAlgError("singular design matrix")
    resid = Y - design @ coeffs
    n, k = design.shape
    gram_inv_00 = float(np.linalg.inv(design.T @ design)[0, 0])
    if n > k:
        sigma2 = np.einsum("ij,ij->j", resid, resid) / (n - k)
        err = np.sqrt(np.clip(sigma2 * gram_inv_00, 0.0, None))
    else:
        err = np.zeros(tau.size)
    return SizeExtrapolation(
        tau=tau, value=coeffs[0], error=err, sizes=tuple(sizes)
    )


@dataclass(frozen=True)
class DiffusionEstimate:
    """Diffusion constant (pi/4)(alpha/norm_bar)^2 in units of J a^2/hbar."""

    alpha: float
    norm_bar: float
    D: float
    window: tuple[float, float]


def diffusion_constant(
    fit: PowerLawFit,
    tau: np.ndarray,
    norm: np.ndarray,
    window: tuple[float, float] | None = None,
) -> DiffusionEstimate:
    """Estimate D from a growth fit and the matching window-averaged norm."""
    if window is None:
        window = fit.window
    if tuple(window) != tuple(fit.window):
        raise ValueError(
            f"norm-average window {window!r} must equal the fit window {fit.window!r}"
        )
    tau = np.asarray(tau, dtype=float)
    norm = np.asarray(norm, dtype=float)
    mask = _window_mask(tau, window)
    norm_bar = float(norm[mask].mean())
    if norm_bar <= 0.0:
        raise ValueError(f"window-averaged norm must be positive, got {norm_bar!r}")
    ratio = fit.alpha / norm_bar
    return DiffusionEstimate(
        alpha=fit.alpha,
        norm_bar=norm_bar,
        D=0.25 * math.pi * ratio * ratio,
        window=tuple(fit.window),
    )
