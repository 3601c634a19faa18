"""Acceptance gate: ten shipped criteria, one pass/fail line each.

Every test asserts the strictest stated tolerance for its criterion and
nothing looser.  Expensive trajectories are computed once and shared through
module-level caches:

* the exact saturation runs (open chain, tau <= 200) feed criteria 6 and 8;
* the three L = 40 matrix-product runs feed criteria 4, 9 and 10.

Tiers: criteria 1-2 run in the default tier (about a minute), criteria 3-8
carry ``slow`` (minutes each; criterion 4 additionally pulls in the shared
near-hard-core L = 40 run), and criteria 9-10 carry ``extended`` (the two
remaining multi-hour L = 40 runs).  Deselect with ``-m "not slow and not
extended"``.

The exact engine evolves reflection-symmetric quench states inside the even
parity sector wherever that is available; sector-folded measurement is
verified equal to the full-sector one elsewhere in the suite, and halving
the basis roughly halves the matrix-vector cost.
"""

import math

import numpy as np
import pytest

from bhqc.analysis import (
    diffusion_constant,
    fit_powerlaw,
    fit_scaling,
    saturation_stats,
)
from bhqc.analytic import fermionized_ctd, free_correlations
from bhqc.chebyshev import (
    TimeGrid,
    evolve_on_grid,
    fock_state,
    plan_propagator,
    step,
)
from bhqc.cli import homogeneous_occupation
from bhqc.model import ModelParams, build_hamiltonian, sector_dimension
from bhqc.mps import TruncationPolicy, init_product_mps
from bhqc.observables import (
    connected_correlations,
    ctd_and_norm,
    ctd_observer,
    distance_distribution,
)
from bhqc.spectral import (
    central_window,
    diagonalize_sector,
    fractal_dimension,
    windowed_fractal_stats,
)
from bhqc.tebd import build_gate_schedule, calibrate_occupation, evolve_mps

SATURATION_GRID = TimeGrid(((0.0, 200.0, 0.5),))
SATURATION_WINDOW = (100.0, 200.0)
GROWTH_GRID = TimeGrid(((0.0, 3.3, 0.1),))
GROWTH_WINDOW = (2.2, 3.3)

# Large-chain matrix-product settings per interaction strength: occupation
# ceilings from the calibration stage (nearly free needs deep local spaces,
# near-hard-core needs shallow ones) and time steps from the step-size stage.
L40 = 40
L40_SETTINGS = {
    100.0: dict(n_max=8, delta=0.05),
    0.2: dict(n_max=5, delta=0.02),
    0.00316: dict(n_max=3, delta=0.002),
}
L40_EPS = 1e-10
L40_CHI = 600

_EXACT_SAT: dict = {}
_TEBD40: dict = {}


def exact_saturation_series(gamma: float, L: int) -> dict:
    """Exact open-chain quench to tau = 200, measured every 0.5 (cached)."""
    key = (gamma, L)
    if key not in _EXACT_SAT:
        params = ModelParams(L=L, N=L, gamma=gamma, bc="hw", parity="even")
        H = build_hamiltonian(params)
        psi0 = fock_state(H.sector, [1] * L)
        _EXACT_SAT[key] = evolve_on_grid(
            H, psi0, SATURATION_GRID, observers=(ctd_observer("hw"),)
        )
    return _EXACT_SAT[key]


def tebd_growth_series(gamma: float) -> dict:
    """L = 40 matrix-product quench to tau = 3.3, measured every 0.1 (cached)."""
    if gamma not in _TEBD40:
        cfg = L40_SETTINGS[gamma]
        mps = init_product_mps(L40, [1] * L40, cfg["n_max"])
        schedule = build_gate_schedule(gamma, cfg["delta"], L=L40, n_max=cfg["n_max"])
        policy = TruncationPolicy(eps=L40_EPS, chi_max=L40_CHI, n_max=cfg["n_max"])
        _TEBD40[gamma] = evolve_mps(
            mps, schedule, policy, GROWTH_GRID, with_energy=False
        )
    return _TEBD40[gamma]


def test_criterion_01_propagator_matches_dense_exponential():
    # Spectral-rescaled polynomial propagation vs the dense eigenbasis
    # exponential, across every sector with dimension <= 500 (sizes and
    # fillings up to 12 keep the sweep in the seconds-to-a-minute range;
    # larger L or N only re-enter that dimension window at dilute filling).
    taus = (0.1, 1.0, 10.0)
    gammas = (0.1, 1.0, math.inf)
    worst = 0.0
    for L in range(2, 13):
        for N in range(1, 13):
            if sector_dimension(L, N) > 500:
                continue
            for gamma in gammas:
                H = build_hamiltonian(ModelParams(L=L, N=N, gamma=gamma))
                psi0 = fock_state(H.sector, homogeneous_occupation(L, N))
                energies, modes = np.linalg.eigh(H.to_dense())
                coeffs = modes.conj().T @ psi0.amplitudes
                for tau in taus:
                    plan = plan_propagator(H, tau)
                    got = step(H, plan, psi0)
                    ref = modes @ (np.exp(-1j * energies * tau) * coeffs)
                    infidelity = 1.0 - abs(np.vdot(ref, got.amplitudes)) ** 2
                    worst = max(worst, infidelity)
    assert worst <= 1e-10


def test_criterion_02_short_time_quartic_law():
    # One exact step to tau = 0.05 at L = 10; the quartic coefficient
    # 6 - 20/27 + 1/(3 gamma^2) carries the open-boundary edge correction
    # 20/(3 (L-1)) evaluated at L = 10.
    tau = 0.05
    for gamma in (0.3, 1.0, math.inf):
        H = build_hamiltonian(ModelParams(L=10, N=10, gamma=gamma))
        psi0 = fock_state(H.sector, [1] * 10)
        plan = plan_propagator(H, tau)
        state = step(H, plan, psi0)
        dist = distance_distribution(connected_correlations(state), "hw")
        ell, _ = ctd_and_norm(dist)
        c4 = 6.0 - 20.0 / 27.0
        if math.isfinite(gamma):
            c4 += 1.0 / (3.0 * gamma * gamma)
        ref = 4.0 * tau**2 - c4 * tau**4
        assert abs(ell - ref) <= 1e-6, f"gamma={gamma}: ell={ell!r}, ref={ref!r}"


@pytest.mark.slow
def test_criterion_03_free_boson_dual_route():
    # (a) nearly free interacting engine vs the analytic mode sum, entrywise.
    params = ModelParams(L=12, N=12, gamma=1e6, bc="hw", parity="even")
    H = build_hamiltonian(params)
    psi0 = fock_state(H.sector, [1] * 12)
    devs = []

    def against_mode_sum(state):
        ref = free_correlations(state.tau, 12, "hw")
        devs.append(float(np.abs(connected_correlations(state).C - ref).max()))
        return {}

    evolve_on_grid(H, psi0, TimeGrid(((0.0, 5.0, 0.5),)), observers=(against_mode_sum,))
    assert max(devs) <= 1e-6

    # (b) odd ring at gamma = inf: the late-time CTD average has the closed
    # form 2 (1/L - 1/L^2) * d_max (d_max + 1) / 2 = 300/121 at L = 11.
    params = ModelParams(L=11, N=11, gamma=math.inf, bc="pbc", parity="even")
    H = build_hamiltonian(params)
    psi0 = fock_state(H.sector, [1] * 11)
    rec = evolve_on_grid(H, psi0, SATURATION_GRID, observers=(ctd_observer("pbc"),))
    stats = saturation_stats(rec["tau"], rec["ell"], SATURATION_WINDOW)
    target = 300.0 / 121.0
    assert abs(stats.ell_sat - target) <= 0.05 * target


@pytest.mark.slow
def test_criterion_04_hard_core_closed_form():
    # Near-hard-core L = 40 run vs the fermionized Bessel closed form.
    rec = tebd_growth_series(0.00316)
    mask = (rec["tau"] >= 1.0) & (rec["tau"] <= 3.0)
    taus = rec["tau"][mask]
    ref = np.asarray(fermionized_ctd(taus, 0.00316))
    dev = (rec["ell"][mask] - ref) / ref
    worst = int(np.argmax(np.abs(dev)))
    assert float(np.max(np.abs(dev))) <= 0.05, (
        f"max |rel dev| {np.max(np.abs(dev)):.4f} at tau={taus[worst]:.2f} "
        f"(signed {dev[worst]:+.4f}); mean |rel dev| {np.mean(np.abs(dev)):.4f}"
    )


@pytest.mark.slow
def test_criterion_05_calibrated_tebd_matches_exact():
    # The occupation stage must land on a ceiling, and an independent run at
    # the selected ceiling must track the exact engine within the stated
    # relative tolerance for tau <= 4.
    report = calibrate_occupation(0.5)
    assert report.selected is not None
    n_max = int(report.selected)

    grid = TimeGrid(((0.0, 4.0, 0.25),))
    params = ModelParams(L=9, N=9, gamma=0.5, bc="hw")
    H = build_hamiltonian(params)
    psi0 = fock_state(H.sector, [1] * 9)
    ref = evolve_on_grid(H, psi0, grid, observers=(ctd_observer("hw"),))

    mps = init_product_mps(9, [1] * 9, n_max)
    schedule = build_gate_schedule(0.5, 0.01, L=9, n_max=n_max)
    policy = TruncationPolicy(eps=1e-12, chi_max=512, n_max=n_max)
    rec = evolve_mps(mps, schedule, policy, grid, with_energy=False)

    mask = ref["tau"] > 0.0
    dev = float(
        np.max(np.abs(rec["ell"][mask] - ref["ell"][mask]) / ref["ell"][mask])
    )
    assert dev <= 0.005, f"n_max={n_max}: max relative CTD deviation {dev:.3e}"


@pytest.mark.slow
def test_criterion_06_dynamical_chaos_window():
    # Relative temporal variance of the CTD over the late-time window:
    # intermediate coupling must sit far below both the nearly free and the
    # near-hard-core chains.
    rel_var = {}
    for gamma in (2.74, 0.0316, 100.0):
        rec = exact_saturation_series(gamma, 10)
        stats = saturation_stats(rec["tau"], rec["ell"], SATURATION_WINDOW)
        rel_var[gamma] = stats.rel_var
    assert rel_var[2.74] * 100.0 <= rel_var[0.0316], (
        f"rel_var(2.74)={rel_var[2.74]:.3e}, rel_var(0.0316)={rel_var[0.0316]:.3e}"
    )
    assert rel_var[2.74] * 10.0 <= rel_var[100.0], (
        f"rel_var(2.74)={rel_var[2.74]:.3e}, rel_var(100)={rel_var[100.0]:.3e}"
    )


@pytest.mark.slow
def test_criterion_07_spectral_chaos_window():
    # Central-window eigenstate D1 statistics in the even sector at L = 9:
    # the intermediate-coupling variance must sit at least 10x below the
    # nearly free one, and its mean must agree with a Monte-Carlo sampled
    # maximally-delocalized (GOE-vector) reference within two standard
    # errors of that sample mean.
    central = {}
    dim = None
    for gamma in (2.74, 0.0316):
        H = build_hamiltonian(ModelParams(L=9, N=9, gamma=gamma, parity="even"))
        dim = H.dim
        eig = diagonalize_sector(H, driver="evr")
        stats = windowed_fractal_stats(eig, 0.01)
        central[gamma] = central_window(stats)
        del eig, stats

    _, mean_mid, var_mid = central[2.74]
    _, _, var_free = central[0.0316]
    assert var_mid * 10.0 <= var_free, (
        f"var(2.74)={var_mid:.3e}, var(0.0316)={var_free:.3e}"
    )

    rng = np.random.default_rng(20260819)
    draws = np.empty(100)
    for i in range(draws.size):
        v = rng.standard_normal(dim)
        draws[i] = fractal_dimension(v / np.linalg.norm(v))
    goe_mean = float(draws.mean())
    goe_se = float(draws.std(ddof=1) / math.sqrt(draws.size))
    assert abs(mean_mid - goe_mean) <= 2.0 * goe_se, (
        f"central mean {mean_mid:.7f} vs GOE reference {goe_mean:.7f} "
        f"(2 SE = {2.0 * goe_se:.2e})"
    )


@pytest.mark.slow
def test_criterion_08_variance_decays_with_size():
    # Late-time CTD variance at intermediate coupling: exponentially
    # decreasing with chain length (negative fitted rate, monotone data).
    sizes = (6, 7, 8, 9, 10)
    variances = []
    for L in sizes:
        rec = exact_saturation_series(2.74, L)
        stats = saturation_stats(rec["tau"], rec["ell"], SATURATION_WINDOW)
        variances.append(stats.var_tau)
    fit = fit_scaling(sizes, variances, "exponential_L")
    rate = fit.coefficients[1]
    assert rate < 0.0, f"fitted exponential rate {rate:.3f}"
    assert all(a > b for a, b in zip(variances, variances[1:])), (
        f"variances not monotone decreasing: {variances}"
    )


@pytest.mark.extended
def test_criterion_09_growth_exponent_crossover():
    # Ballistic transport (beta = 1) at both coupling extremes, sub-ballistic
    # growth at intermediate coupling, fitted on the late growth window.
    # All three exponents are measured before asserting so a single
    # out-of-band leg still reports every value.
    bands = {100.0: (0.9, 1.1), 0.00316: (0.9, 1.1), 0.2: (0.4, 0.65)}
    betas = {}
    for gamma in bands:
        rec = tebd_growth_series(gamma)
        fit = fit_powerlaw(rec["tau"], rec["ell"], GROWTH_WINDOW)
        betas[gamma] = fit.beta
    failures = [
        f"gamma={gamma}: beta={betas[gamma]:.4f} outside {band}"
        for gamma, band in bands.items()
        if not band[0] <= betas[gamma] <= band[1]
    ]
    assert not failures, "; ".join(
        failures + [f"all exponents: { {g: round(b, 4) for g, b in betas.items()} }"]
    )


@pytest.mark.extended
def test_criterion_10_diffusion_constant():
    # Diffusive window at intermediate coupling: D = (pi/4)(alpha/norm)^2
    # from the same L = 40 run, inside the stated band.
    rec = tebd_growth_series(0.2)
    fit = fit_powerlaw(rec["tau"], rec["ell"], GROWTH_WINDOW)
    est = diffusion_constant(fit, rec["tau"], rec["normP"])
    assert 0.4 <= est.D <= 1.6, f"D={est.D:.4f}"
