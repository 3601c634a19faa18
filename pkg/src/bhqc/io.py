"""Deterministic file formats: trajectory CSVs, run manifests, checkpoints.

CSV values are written with 17 significant digits (shortest round-trip safe
for IEEE doubles), so identical runs produce byte-identical files.  Manifests
are append-only JSON ({"runs": [entry, ...]}) where every output file is
referenced with its SHA-256.  Checkpoints are raw little-endian binaries with
magic "BHQC" holding the full complex amplitude payload for exact resumption.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import os
import platform
import struct
from dataclasses import dataclass

import numpy as np

from .chebyshev import StateVector
from .model import BC_CHOICES, PARITY_CHOICES, ModelParams

__all__ = [
    "CheckpointMismatchError",
    "append_manifest",
    "format_float",
    "gamma_to_string",
    "load_checkpoint",
    "manifest_entry",
    "read_series_csv",
    "save_checkpoint",
    "sha256_file",
    "verify_manifest",
    "write_pd_csv",
    "write_series_csv",
]

CHECKPOINT_MAGIC = b"BHQC"
CHECKPOINT_VERSION = 1
# magic, version, L, N, bc, parity, pad, gamma, tau, dim
_HEADER = struct.Struct("<4sIII BB2x ddQ")

SERIES_BASE_COLUMNS = ("tau", "ell", "normP", "energy", "norm_error")


class CheckpointMismatchError(ValueError):
    """Checkpoint header disagrees with the requested model parameters."""


def format_float(x: float) -> str:
    return f"{x:.17g}"


def gamma_to_string(gamma: float) -> str:
    return "inf" if math.isinf(gamma) else format_float(gamma)


def gamma_from_string(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    return float(text)


# ----------------------------------------------------------------------
# CSV


def write_series_csv(path: str | os.PathLike, records: dict) -> None:
    """Trajectory table: tau, ell, normP, energy, norm_error, then any extras.

    Array-valued extras (per-bond chi) fan out into indexed columns.  The
    ``pd`` key is excluded (it has its own file).
    """
    tau = np.asarray(records["tau"])
    n = tau.size
    columns: list[tuple[str, np.ndarray]] = []
    for key in SERIES_BASE_COLUMNS:
        columns.append((key, np.asarray(records[key], dtype=float)))
    for key in records:
        if key in SERIES_BASE_COLUMNS or key == "pd":
            continue
        val = np.asarray(records[key])
        if val.ndim == 1:
            columns.append((key, val.astype(float)))
        elif val.ndim == 2:
            for j in range(val.shape[1]):
                columns.append((f"{key}_{j + 1}", val[:, j].astype(float)))
        else:
            raise ValueError(f"cannot serialize record {key!r} of shape {val.shape}")
    for name, col in columns:
        if col.shape != (n,):
            raise ValueError(f"column {name!r} has {col.shape}, expected ({n},)")
    lines = [",".join(name for name, _ in columns)]
    for i in range(n):
        lines.append(",".join(format_float(float(col[i])) for _, col in columns))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_pd_csv(path: str | os.PathLike, records: dict) -> None:
    """Distance-distribution table: tau, p_0 .. p_dmax (one row per sample)."""
    tau = np.asarray(records["tau"])
    pd = np.asarray(records["pd"], dtype=float)
    if pd.ndim != 2 or pd.shape[0] != tau.size:
        raise ValueError(f"pd must be (n_samples, d_max+1), got {pd.shape}")
    header = "tau," + ",".join(f"p_{d}" for d in range(pd.shape[1]))
    lines = [header]
    for i in range(tau.size):
        row = [format_float(float(tau[i]))]
        row.extend(format_float(float(v)) for v in pd[i])
        lines.append(",".join(row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_series_csv(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        names = header.split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(names):
        raise ValueError(f"{path}: {len(names)} columns in header, {data.shape[1]} in body")
    return {name: data[:, j] for j, name in enumerate(names)}


def _atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ----------------------------------------------------------------------
# manifests


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_entry(
    *,
    command: str,
    params: dict,
    settings: dict,
    outputs: dict[str, str | os.PathLike],
    started: str,
    workers: int = 1,
) -> dict:
    """One append-only manifest record; hashes every output file."""
    from . import __version__

    hashed = {}
    for name, path in sorted(outputs.items()):
        hashed[name] = {
            "sha256": sha256_file(path),
            "bytes": os.path.getsize(path),
        }
    return {
        "command": command,
        "params": params,
        "settings": settings,
        "tool_version": __version__,
        "workers": workers,
        "started": started,
        "finished": utc_now(),
        "host": {
            "node": platform.node(),
            "platform": platform.platform(),
            "python": platform.python_version(),
        },
        "outputs": hashed,
    }


def utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def append_manifest(path: str | os.PathLike, entry: dict) -> None:
    path = os.fspath(path)
    doc = {"runs": []}
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if "runs" not in doc:
            raise ValueError(f"{path} is not a run manifest")
    doc["runs"].append(entry)
    _atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def verify_manifest(path: str | os.PathLike) -> dict[str, bool]:
    """Check every hashed output of the latest run entry against disk."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not doc.get("runs"):
        raise ValueError(f"{path} has no run entries")
    entry = doc["runs"][-1]
    base = os.path.dirname(os.fspath(path))
    result = {}
    for name, meta in entry["outputs"].items():
        fpath = os.path.join(base, name)
        try:
            result[name] = sha256_file(fpath) == meta["sha256"]
        except OSError:
            result[name] = False
    return result


# ----------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str | os.PathLike, params: ModelParams, state: StateVector) -> None:
    amps = np.ascontiguousarray(state.amplitudes, dtype=np.complex128)
    header = _HEADER.pack(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        params.L,
        params.N,
        BC_CHOICES.index(params.bc),
        PARITY_CHOICES.index(params.parity),
        params.gamma,
        state.tau,
        amps.size,
    )
    payload = amps.astype("<c16", copy=False).tobytes()
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, os.fspath(path))


def load_checkpoint(path: str | os.PathLike) -> tuple[ModelParams, float, np.ndarray]:
    """Returns (params, tau, amplitudes); validates magic, version and length."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise CheckpointMismatchError(f"{path}: truncated header")
        magic, version, L, N, bc_i, par_i, gamma, tau, dim = _HEADER.unpack(raw)
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointMismatchError(f"{path}: bad magic {magic!r}")
        if version != CHECKPOINT_VERSION:
            raise CheckpointMismatchError(f"{path}: unsupported version {version}")
        payload = fh.read()
    if len(payload) != 16 * dim:
        raise CheckpointMismatchError(
            f"{path}: payload is {len(payload)} bytes, expected {16 * dim}"
        )
    try:
        params = ModelParams(
            L=L, N=N, gamma=gamma, bc=BC_CHOICES[bc_i], parity=PARITY_CHOICES[par_i]
        )
    except (IndexError, ValueError) as exc:
        raise CheckpointMismatchError(f"{path}: invalid header fields ({exc})") from exc
    amps = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    return params, float(tau), amps
