"""Command-line front end: deterministic runs, manifests, checkpoints, sweeps.

Exit codes: 0 success, 2 usage/validation error, 3 numeric failure, 4 IO
failure.  Every command writes its outputs into ``--out`` together with an
append-only ``manifest.json`` whose entries hash each output file.
"""

from __future__ import annotations

import argparse
import inspect
import json
import math
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .analysis import (
    GROWTH_WINDOW,
    SATURATION_WINDOW,
    diffusion_constant,
    fit_powerlaw,
    fit_scaling,
    saturation_stats,
)
from .analytic import (
    SeriesError,
    ctd_asymptote_fermionized,
    ctd_asymptote_free,
    fermionized_ctd,
    free_correlations,
    free_ctd_exact,
    free_norm_exact,
    norm_asymptote_free,
    short_time_ctd,
)
from .chebyshev import (
    NormDriftError,
    StateVector,
    TimeGrid,
    evolve_on_grid,
    fock_state,
)
from .io import (
    CheckpointMismatchError,
    _atomic_write_text,
    append_manifest,
    format_float,
    gamma_from_string,
    gamma_to_string,
    load_checkpoint,
    manifest_entry,
    read_series_csv,
    save_checkpoint,
    sha256_file,
    utc_now,
    verify_manifest,
    write_pd_csv,
    write_series_csv,
)
from .model import (
    BC_CHOICES,
    PARITY_CHOICES,
    CapacityError,
    ModelParams,
    SpectralBoundsError,
    build_hamiltonian,
    sector_for,
)
from .mps import TruncationPolicy, init_product_mps
from .observables import ctd_and_norm, ctd_observer, distance_distribution
from .spectral import (
    DimensionCeilingError,
    central_window,
    chaos_map_rows,
    diagonalize_sector,
    fractal_dimensions,
    lds_width_sigma,
    windowed_fractal_stats,
)
from .tebd import (
    _STAGE_FUNCTIONS,
    DESK_CHI_MAX,
    build_gate_schedule,
    calibrate,
    evolve_mps,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

WORKERS_ENV = "BHQC_WORKERS"

DEFAULT_GRID_SPEC = "0:10:0.01,10:200:0.5"

ANALYTIC_CURVES = (
    "short-time",
    "free-exact",
    "free-asymptotic",
    "free-finite",
    "fermionized",
    "fermionized-asymptotic",
)

FIT_KINDS = ("powerlaw", "saturation", "diffusion", "scaling")

SCALING_MODES = ("linear_L", "exponential_L", "inverse_poly_L")


def homogeneous_occupation(L: int, N: int) -> list[int]:
    """N particles on L sites: floor filling plus one extra on the leftmost sites."""
    base, rem = divmod(N, L)
    return [base + (1 if j < rem else 0) for j in range(L)]


def _parse_window(text: str | None, default: tuple[float, float]) -> tuple[float, float]:
    if text is None:
        return default
    pieces = text.split(":")
    if len(pieces) != 2:
        raise ValueError(f"bad window {text!r}, want start:end")
    lo, hi = (float(p) for p in pieces)
    if not hi > lo:
        raise ValueError(f"window must move forward, got {text!r}")
    return (lo, hi)


def _write_json(path: str, payload: dict) -> None:
    _atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def _write_rows_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(float(v)) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


# ----------------------------------------------------------------------
# evolve


def cmd_evolve(args) -> int:
    gamma = gamma_from_string(args.gamma)
    params = ModelParams(L=args.L, N=args.N, gamma=gamma, bc=args.bc, parity=args.parity)
    grid = TimeGrid.from_spec(args.grid)
    started = utc_now()
    sector = sector_for(params)
    H = build_hamiltonian(params, sector)
    if args.resume:
        ck_params, tau0, amps = load_checkpoint(args.resume)
        if ck_params != params:
            raise CheckpointMismatchError(
                f"checkpoint was written for {ck_params}, requested {params}"
            )
        if amps.shape != (sector.dim,):
            raise CheckpointMismatchError(
                f"checkpoint holds {amps.size} amplitudes; sector dimension is {sector.dim}"
            )
        psi0 = StateVector(sector=sector, amplitudes=amps, tau=tau0)
    else:
        psi0 = fock_state(sector, homogeneous_occupation(params.L, params.N))

    os.makedirs(args.out, exist_ok=True)
    ckpt_path = os.path.join(args.out, "checkpoint.bhqc")
    hook = None
    if args.checkpoint_every > 0:

        def hook(state: StateVector) -> None:
            save_checkpoint(ckpt_path, params, state)

    records = evolve_on_grid(
        H,
        psi0,
        grid,
        observers=[ctd_observer(params.bc, include_pd=args.pd)],
        cutoff=args.cutoff,
        checkpoint_every=args.checkpoint_every,
        checkpoint_hook=hook,
    )

    series_path = os.path.join(args.out, "series.csv")
    write_series_csv(series_path, records)
    outputs = {"series.csv": series_path}
    if args.pd:
        pd_path = os.path.join(args.out, "pd.csv")
        write_pd_csv(pd_path, records)
        outputs["pd.csv"] = pd_path
    if args.checkpoint_every > 0 and os.path.exists(ckpt_path):
        outputs["checkpoint.bhqc"] = ckpt_path
    append_manifest(
        os.path.join(args.out, "manifest.json"),
        manifest_entry(
            command="evolve",
            params={
                "L": params.L,
                "N": params.N,
                "gamma": gamma_to_string(gamma),
                "bc": params.bc,
                "parity": params.parity,
            },
            settings={
                "grid": args.grid,
                "cutoff": args.cutoff,
                "checkpoint_every": args.checkpoint_every,
                "resume": os.fspath(args.resume) if args.resume else None,
            },
            outputs=outputs,
            started=started,
        ),
    )
    print(f"evolve: {records['tau'].size} samples -> {series_path}")
    return EXIT_OK


# ----------------------------------------------------------------------
# tebd


def cmd_tebd(args) -> int:
    gamma = gamma_from_string(args.gamma)
    grid = TimeGrid.from_spec(args.grid)
    started = utc_now()
    schedule = build_gate_schedule(gamma, args.delta, L=args.L, n_max=args.n_max)
    policy = TruncationPolicy(eps=args.eps, chi_max=args.chi_max, n_max=args.n_max)
    mps = init_product_mps(args.L, [1] * args.L, args.n_max)
    os.makedirs(args.out, exist_ok=True)
    records = evolve_mps(
        mps,
        schedule,
        policy,
        grid,
        include_pd=args.pd,
        with_energy=not args.no_energy,
    )
    series_path = os.path.join(args.out, "series.csv")
    write_series_csv(series_path, records)
    outputs = {"series.csv": series_path}
    if args.pd:
        pd_path = os.path.join(args.out, "pd.csv")
        write_pd_csv(pd_path, records)
        outputs["pd.csv"] = pd_path
    append_manifest(
        os.path.join(args.out, "manifest.json"),
        manifest_entry(
            command="tebd",
            params={
                "L": args.L,
                "N": args.L,
                "gamma": gamma_to_string(gamma),
                "bc": "hw",
                "parity": "none",
            },
            settings={
                "grid": args.grid,
                "delta": args.delta,
                "eps": args.eps,
                "chi_max": args.chi_max,
                "n_max": args.n_max,
                "energy": not args.no_energy,
            },
            outputs=outputs,
            started=started,
        ),
    )
    peak_chi = int(records["chi"].max()) if records["chi"].size else 1
    print(f"tebd: {records['tau'].size} samples, peak bond {peak_chi} -> {series_path}")
    return EXIT_OK


# ----------------------------------------------------------------------
# calibrate


_CALIBRATE_OVERRIDES = (
    "L",
    "tau_max",
    "sample_step",
    "delta",
    "eps",
    "n_max",
    "chi_max",
    "criterion",
    "n_steps",
)


def cmd_calibrate(args) -> int:
    gamma = gamma_from_string(args.gamma)
    started = utc_now()
    fn = _STAGE_FUNCTIONS[args.stage]
    allowed = set(inspect.signature(fn).parameters) - {"gamma"}
    context: dict = {"gamma": gamma}
    for key in _CALIBRATE_OVERRIDES:
        val = getattr(args, key)
        if val is None:
            continue
        if key not in allowed:
            raise ValueError(
                f"--{key.replace('_', '-')} does not apply to stage {args.stage!r}"
            )
        context[key] = val
    if args.ladder is not None:
        if "ladder" not in allowed:
            raise ValueError(f"--ladder does not apply to stage {args.stage!r}")
        values = [float(v) for v in args.ladder.split(",") if v]
        if not values:
            raise ValueError("--ladder must list at least one value")
        if args.stage == "occupation":
            context["ladder"] = tuple(int(v) for v in values)
        else:
            context["ladder"] = tuple(values)
    try:
        report = calibrate(args.stage, context)
    except TypeError as exc:  # missing required stage override
        raise ValueError(str(exc)) from exc

    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.json")
    _write_json(
        report_path,
        {
            "stage": report.stage,
            "parameter": report.parameter,
            "gamma": gamma_to_string(gamma),
            "tested": [[float(v), float(d)] for v, d in report.tested],
            "selected": report.selected,
            "criterion": report.criterion,
            "notes": report.notes,
        },
    )
    append_manifest(
        os.path.join(args.out, "manifest.json"),
        manifest_entry(
            command="calibrate",
            params={"gamma": gamma_to_string(gamma), "stage": args.stage},
            settings={k: v for k, v in context.items() if k != "gamma"},
            outputs={"report.json": report_path},
            started=started,
        ),
    )
    print(report)
    return EXIT_OK


# ----------------------------------------------------------------------
# spectral


def cmd_spectral(args) -> int:
    started = utc_now()
    gammas = [gamma_from_string(part) for part in args.gamma.split(",") if part]
    if not gammas:
        raise ValueError("--gamma must list at least one value")
    os.makedirs(args.out, exist_ok=True)
    rows: list[tuple[float, float, float, float]] = []
    entries = []
    occ = homogeneous_occupation(args.L, args.N)
    for gamma in gammas:
        params = ModelParams(L=args.L, N=args.N, gamma=gamma, bc=args.bc, parity=args.parity)
        sector = sector_for(params)
        H = build_hamiltonian(params, sector)
        eig = diagonalize_sector(H, driver=args.driver)
        d1 = fractal_dimensions(eig.vectors)
        stats = windowed_fractal_stats(eig, args.window_frac, mode=args.mode, d1=d1)
        rows.extend(chaos_map_rows(gamma, stats))
        sp_c, mean_c, var_c = central_window(stats)
        sigma = None
        if params.parity == "none" or occ == occ[::-1]:
            sigma = lds_width_sigma(H, fock_state(sector, occ))
        entries.append(
            {
                "gamma": gamma_to_string(gamma),
                "dim": sector.dim,
                "window_size": stats.window_size,
                "n_windows": int(stats.starts.size),
                "central_sp": sp_c,
                "central_d1_mean": mean_c,
                "central_d1_var": var_c,
                "d1_mean_all": float(np.mean(d1)),
                "quench_energy_width": sigma,
            }
        )
        del eig, d1, stats  # free the dense spectrum before the next gamma

    windows_path = os.path.join(args.out, "windows.csv")
    _write_rows_csv(windows_path, ["gamma", "sp", "d1_mean", "d1_var"], rows)
    summary_path = os.path.join(args.out, "summary.json")
    _write_json(
        summary_path,
        {
            "L": args.L,
            "N": args.N,
            "bc": args.bc,
            "parity": args.parity,
            "window_frac": args.window_frac,
            "mode": args.mode,
            "driver": args.driver,
            "entries": entries,
        },
    )
    append_manifest(
        os.path.join(args.out, "manifest.json"),
        manifest_entry(
            command="spectral",
            params={
                "L": args.L,
                "N": args.N,
                "bc": args.bc,
                "parity": args.parity,
                "gamma": [gamma_to_string(g) for g in gammas],
            },
            settings={
                "window_frac": args.window_frac,
                "mode": args.mode,
                "driver": args.driver,
            },
            outputs={"windows.csv": windows_path, "summary.json": summary_path},
            started=started,
        ),
    )
    print(f"spectral: {len(gammas)} gamma value(s) -> {windows_path}")
    return EXIT_OK


# ----------------------------------------------------------------------
# analytic


def _analytic_curve(curve: str, taus, gamma, L, bc) -> dict[str, np.ndarray]:
    """Columns (tau, ell[, normP]) of one closed-form reference curve."""
    needs_gamma = curve in ("short-time", "fermionized", "fermionized-asymptotic")
    if needs_gamma and gamma is None:
        raise ValueError(f"curve {curve!r} needs --gamma")
    if curve == "free-finite" and L is None:
        raise ValueError("curve 'free-finite' needs --L")
    out: dict[str, np.ndarray] = {"tau": np.asarray(taus, dtype=float)}
    if curve == "short-time":
        L_eff = math.inf if L is None else L
        out["ell"] = np.asarray([float(short_time_ctd(t, gamma, L=L_eff)) for t in taus])
    elif curve == "free-exact":
        out["ell"] = np.asarray([free_ctd_exact(float(t)) for t in taus])
        out["normP"] = np.asarray([free_norm_exact(float(t)) for t in taus])
    elif curve == "free-asymptotic":
        out["ell"] = np.asarray([float(ctd_asymptote_free(t)) for t in taus])
        out["normP"] = np.asarray([float(norm_asymptote_free(t)) for t in taus])
    elif curve == "free-finite":
        ells, norms = [], []
        for t in taus:
            dist = distance_distribution(free_correlations(float(t), L, bc), bc, float(t))
            ell, norm = ctd_and_norm(dist)
            ells.append(ell)
            norms.append(norm)
        out["ell"] = np.asarray(ells)
        out["normP"] = np.asarray(norms)
    elif curve == "fermionized":
        out["ell"] = np.asarray([float(fermionized_ctd(t, gamma)) for t in taus])
    elif curve == "fermionized-asymptotic":
        out["ell"] = np.asarray([float(ctd_asymptote_fermionized(t, gamma)) for t in taus])
    else:
        raise ValueError(f"unknown curve {curve!r}")
    return out


def cmd_analytic(args) -> int:
    started = utc_now()
    gamma = gamma_from_string(args.gamma) if args.gamma is not None else None
    grid = TimeGrid.from_spec(args.grid)
    taus = grid.samples()
    cols = _analytic_curve(args.curve, taus, gamma, args.L, args.bc)
    os.makedirs(args.out, exist_ok=True)
    curve_path = os.path.join(args.out, "curve.csv")
    header = list(cols)
    _write_rows_csv(curve_path, header, zip(*(cols[name] for name in header)))
    append_manifest(
        os.path.join(args.out, "manifest.json"),
        manifest_entry(
            command="analytic",
            params={
                "curve": args.curve,
                "gamma": gamma_to_string(gamma) if gamma is not None else None,
                "L": args.L,
                "bc": args.bc,
            },
            settings={"grid": args.grid},
            outputs={"curve.csv": curve_path},
            started=started,
        ),
    )
    print(f"analytic: {taus.size} rows of {args.curve} -> {curve_path}")
    return EXIT_OK


# ----------------------------------------------------------------------
# fit


def cmd_fit(args) -> int:
    started = utc_now()
    inputs: dict[str, str] = {}
    if args.kind in ("powerlaw", "saturation", "diffusion"):
        if args.series is None:
            raise ValueError(f"fit {args.kind} needs --series")
        series = read_series_csv(args.series)
        inputs[os.fspath(args.series)] = sha256_file(args.series)
        if args.column not in series:
            raise ValueError(f"{args.series}: no column {args.column!r}")
        tau = series["tau"]
        values = series[args.column]

    if args.kind == "powerlaw":
        window = _parse_window(args.window, GROWTH_WINDOW)
        fit = fit_powerlaw(tau, values, window)
        result = {
            "alpha": fit.alpha,
            "beta": fit.beta,
            "alpha_err": fit.alpha_err,
            "beta_err": fit.beta_err,
            "residual_norm": fit.residual_norm,
            "n_samples": fit.n_samples,
            "window": list(fit.window),
            "column": args.column,
        }
    elif args.kind == "saturation":
        window = _parse_window(args.window, SATURATION_WINDOW)
        stats = saturation_stats(tau, values, window)
        result = {
            "mean": stats.ell_sat,
            "var_tau": stats.var_tau,
            "rel_var": stats.rel_var,
            "n_samples": stats.n_samples,
            "window": list(stats.window),
            "column": args.column,
        }
    elif args.kind == "diffusion":
        window = _parse_window(args.window, GROWTH_WINDOW)
        fit = fit_powerlaw(tau, values, window)
        if "normP" not in series:
            raise ValueError(f"{args.series}: diffusion needs a normP column")
        est = diffusion_constant(fit, tau, series["normP"])
        result = {
            "alpha": est.alpha,
            "beta": fit.beta,
            "norm_bar": est.norm_bar,
            "D": est.D,
            "window": list(est.window),
            "column": args.column,
        }
    elif args.kind == "scaling":
        if args.data is None:
            raise ValueError("fit scaling needs --data (CSV with columns: size, value)")
        table = read_series_csv(args.data)
        inputs[os.fspath(args.data)] = sha256_file(args.data)
        names = list(table)
        if len(names) < 2:
            raise ValueError(f"{args.data}: need at least two columns (size, value)")
        sizes, values = table[names[0]], table[names[1]]
        fit = fit_scaling(sizes, values, args.model)
        result = {
            "mode": fit.mode,
            "coefficients": list(fit.coefficients),
            "errors": list(fit.errors),
            "residual_norm": float(np.linalg.norm(fit.residuals)),
            "n_points": int(np.asarray(sizes).size),
        }
    else:
        raise ValueError(f"unknown fit kind {args.kind!r}")

    os.makedirs(args.out, exist_ok=True)
    fit_path = os.path.join(args.out, "fit.json")
    _write_json(fit_path, {"kind": args.kind, "inputs": inputs, "result": result})
    append_manifest(
        os.path.join(args.out, "manifest.json"),
        manifest_entry(
            command="fit",
            params={"kind": args.kind},
            settings={
                "window": args.window,
                "column": args.column,
                "model": args.model,
                "inputs": inputs,
            },
            outputs={"fit.json": fit_path},
            started=started,
        ),
    )
    shown = ", ".join(f"{k}={v:.6g}" for k, v in result.items() if isinstance(v, float))
    print(f"fit {args.kind}: {shown} -> {fit_path}")
    return EXIT_OK


# ----------------------------------------------------------------------
# sweep


def _sweep_job_argv(engine: str, gamma: str, L: int, common: dict, outdir: str) -> list[str]:
    argv = [engine, "--L", str(L), "--gamma", gamma, "--out", outdir]
    if engine == "evolve" and "N" not in common:
        argv += ["--N", str(L)]
    for key, val in common.items():
        flag = "--" + str(key).replace("_", "-")
        if val is True:
            argv.append(flag)
        elif val is False or val is None:
            continue
        else:
            argv += [flag, str(val)]
    return argv


def cmd_sweep(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    engine = spec.get("engine", "evolve")
    if engine not in ("evolve", "tebd"):
        raise ValueError(f"sweep engine must be 'evolve' or 'tebd', got {engine!r}")
    if "gammas" not in spec or "Ls" not in spec:
        raise ValueError("sweep spec needs 'gammas' and 'Ls' lists")
    gammas: list[str] = []
    for g in spec["gammas"]:
        text = str(g)
        gamma_from_string(text)  # validate early, before any job runs
        gammas.append(text)
    sizes = [int(L) for L in spec["Ls"]]
    if not gammas or not sizes:
        raise ValueError("sweep spec lists must be non-empty")
    common = dict(spec.get("common", {}))

    os.makedirs(args.out, exist_ok=True)
    index_path = os.path.join(args.out, "index.jsonl")

    done: set[tuple[str, int]] = set()
    if os.path.exists(index_path):
        with open(index_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                if entry.get("status") != "ok":
                    continue
                manifest = os.path.join(entry["outdir"], "manifest.json")
                checks = verify_manifest(manifest) if os.path.exists(manifest) else {}
                if checks and all(checks.values()):
                    done.add((entry["gamma"], int(entry["L"])))

    jobs = list(dict.fromkeys((g, L) for g in gammas for L in sizes))
    todo = [job for job in jobs if job not in done]
    workers = args.workers or int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    print(
        f"sweep: {len(jobs)} job(s), {len(jobs) - len(todo)} already complete, "
        f"{len(todo)} to run with {workers} worker(s)"
    )

    lock = threading.Lock()

    def run_job(job: tuple[str, int]) -> int:
        gamma, L = job
        outdir = os.path.join(args.out, f"g{gamma}_L{L}")
        code = main(_sweep_job_argv(engine, gamma, L, common, outdir))
        entry = {
            "engine": engine,
            "gamma": gamma,
            "L": L,
            "outdir": outdir,
            "status": "ok" if code == EXIT_OK else "failed",
            "exit_code": code,
            "finished": utc_now(),
        }
        with lock:  # index aggregation is serialized
            with open(index_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry) + "\n")
        return code

    failures = 0
    if todo:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for code in pool.map(run_job, todo):
                if code != EXIT_OK:
                    failures += 1
    if failures:
        print(f"sweep: {failures} job(s) failed; see {index_path}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"sweep: all {len(jobs)} job(s) complete -> {index_path}")
    return EXIT_OK


# ----------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bhqc",
        description=(
            "Quench dynamics of one-dimensional lattice bosons: exact and "
            "matrix-product engines, analytic reference curves, convergence "
            "calibration, spectral statistics, fits, and parameter sweeps."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("evolve", help="exact Chebyshev propagation of the homogeneous quench")
    p.add_argument("--L", type=int, required=True, help="number of lattice sites")
    p.add_argument("--N", type=int, required=True, help="number of particles")
    p.add_argument("--gamma", required=True, help="tunneling ratio J/U; 'inf' selects free bosons")
    p.add_argument("--bc", choices=BC_CHOICES, default="hw", help="boundary conditions")
    p.add_argument("--parity", choices=PARITY_CHOICES, default="none", help="reflection-parity sector")
    p.add_argument("--grid", default=DEFAULT_GRID_SPEC, help="time grid 'start:end:step[,...]'")
    p.add_argument("--cutoff", type=float, default=1e-12, help="propagator coefficient cutoff")
    p.add_argument("--pd", action="store_true", help="also write the distance distribution (pd.csv)")
    p.add_argument(
        "--checkpoint-every", type=int, default=0, metavar="K",
        help="write a rolling checkpoint every K samples",
    )
    p.add_argument("--resume", metavar="CKPT", help="resume from a checkpoint file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("tebd", help="fourth-order gate evolution at unit filling (open chain)")
    p.add_argument("--L", type=int, required=True, help="number of lattice sites (N = L)")
    p.add_argument("--gamma", required=True, help="tunneling ratio J/U; 'inf' selects free bosons")
    p.add_argument("--grid", required=True, help="time grid 'start:end:step[,...]'")
    p.add_argument("--delta", type=float, default=0.01, help="gate time step")
    p.add_argument("--eps", type=float, default=1e-12, help="truncation threshold (discarded weight)")
    p.add_argument("--chi-max", type=int, default=DESK_CHI_MAX, help="bond dimension cap")
    p.add_argument("--n-max", type=int, default=8, help="per-site occupation cap")
    p.add_argument("--pd", action="store_true", help="also write the distance distribution (pd.csv)")
    p.add_argument("--no-energy", action="store_true", help="skip the energy measurement")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_tebd)

    p = sub.add_parser("calibrate", help="convergence-parameter selection for the gate engine")
    p.add_argument("--stage", required=True, choices=sorted(_STAGE_FUNCTIONS))
    p.add_argument("--gamma", required=True, help="tunneling ratio J/U")
    p.add_argument("--L", type=int, help="system size override")
    p.add_argument("--tau-max", type=float, help="comparison horizon override")
    p.add_argument("--sample-step", type=float, help="measurement spacing override")
    p.add_argument("--delta", type=float, help="gate time step override")
    p.add_argument("--eps", type=float, help="truncation threshold override")
    p.add_argument("--n-max", type=int, help="occupation cap override")
    p.add_argument("--chi-max", type=int, help="bond cap override")
    p.add_argument("--criterion", type=float, help="acceptance threshold override")
    p.add_argument("--n-steps", type=int, help="number of comparison steps (timestep stage)")
    p.add_argument("--ladder", help="comma-separated candidate values")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("spectral", help="eigenstate statistics and chaos-map tables")
    p.add_argument("--L", type=int, required=True, help="number of lattice sites")
    p.add_argument("--N", type=int, required=True, help="number of particles")
    p.add_argument("--gamma", required=True, help="comma-separated tunneling ratios")
    p.add_argument("--bc", choices=BC_CHOICES, default="hw", help="boundary conditions")
    p.add_argument("--parity", choices=PARITY_CHOICES, default="none", help="reflection-parity sector")
    p.add_argument("--window-frac", type=float, default=0.01, help="window size as a fraction of the sector")
    p.add_argument("--mode", choices=("sliding", "partition"), default="sliding")
    p.add_argument("--driver", choices=("evr", "evd", "ev"), default="evr", help="dense eigensolver driver")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("analytic", help="closed-form reference curves on a time grid")
    p.add_argument("--curve", required=True, choices=ANALYTIC_CURVES)
    p.add_argument("--grid", required=True, help="time grid 'start:end:step[,...]'")
    p.add_argument("--gamma", help="tunneling ratio (interaction-dependent curves)")
    p.add_argument("--L", type=int, help="system size (finite-size curves)")
    p.add_argument("--bc", choices=BC_CHOICES, default="hw", help="boundary conditions")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("fit", help="window fits: growth exponent, saturation, size scaling, diffusion")
    p.add_argument("kind", choices=FIT_KINDS)
    p.add_argument("--series", help="series.csv produced by evolve/tebd")
    p.add_argument("--data", help="two-column CSV (size, value) for scaling fits")
    p.add_argument("--column", default="ell", help="series column to fit")
    p.add_argument("--window", help="inclusive tau window 'start:end'")
    p.add_argument("--model", choices=SCALING_MODES, default="exponential_L", help="scaling law")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="fan a parameter grid out to independent jobs")
    p.add_argument("--spec", required=True, help="JSON file: engine, gammas, Ls, common flags")
    p.add_argument("--workers", type=int, help=f"parallel jobs (default ${WORKERS_ENV} or 1)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help (0) and schema errors (2)
        return EXIT_OK if exc.code in (None, 0) else EXIT_USAGE
    try:
        return args.func(args)
    except (
        CapacityError,
        SpectralBoundsError,
        NormDriftError,
        DimensionCeilingError,
        SeriesError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
