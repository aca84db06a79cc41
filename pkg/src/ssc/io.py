"""Matrix files, sparse code files and run configs.

Dense matrices
    ``.csv``: one matrix row per line, 17 significant digits.
    ``.bin``: 16-byte header (magic ``b"SSCM"``, then little-endian u32
    version, rows, cols) followed by column-major little-endian float64.

Sparse codes (``.codes``)
    little-endian u32 ``K``, u32 ``n``; then per column a u32 count followed
    by ``count`` packed ``(u32 index, f64 value)`` pairs.

Run configs are TOML; nested tables and dotted keys are equivalent
(``[kernel] h1 = 2`` is ``kernel.h1 = 2``).
"""

from __future__ import annotations

import csv
import difflib
import math
import os
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .kernels import KernelSpec, TemporalKernel
from .trainer import TrainConfig

MAGIC = b"SSCM"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
_SPARSE_HEADER = struct.Struct("<II")
_PAIR = np.dtype([("index", "<u4"), ("value", "<f8")])


class MatrixFormatError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def _infer_format(path, fmt):
    if fmt is not None:
        return fmt
    ext = Path(path).suffix.lower()
    if ext in (".csv", ".txt"):
        return "csv"
    if ext == ".bin":
        return "bin"
    raise MatrixFormatError(f"cannot infer matrix format from {path!r}; pass fmt='csv' or 'bin'")


def _check_finite(M: np.ndarray, path) -> None:
    bad = np.argwhere(~np.isfinite(M))
    if bad.size:
        r, c = bad[0]
        raise MatrixFormatError(f"{path}: non-finite value at row {r + 1}, column {c + 1}")


def read_matrix(path, fmt: Optional[str] = None) -> np.ndarray:
    """Read a dense matrix written by :func:`write_matrix`."""
    fmt = _infer_format(path, fmt)
    if fmt == "csv":
        return _read_csv(path)
    if fmt == "bin":
        return _read_bin(path)
    raise MatrixFormatError(f"unknown matrix format {fmt!r}")


def write_matrix(M, path, fmt: Optional[str] = None) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.ndim != 2:
        raise MatrixFormatError(f"expected a 2-D matrix, got shape {M.shape}")
    fmt = _infer_format(path, fmt)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in M:
                w.writerow(format(v, ".17g") for v in row)
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, M.shape[0], M.shape[1]))
            fh.write(np.asarray(M, dtype="<f8").tobytes(order="F"))
    else:
        raise MatrixFormatError(f"unknown matrix format {fmt!r}")


def _read_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise MatrixFormatError(f"{path}: line {lineno} has {len(row)} columns, expected {width}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise MatrixFormatError(f"{path}: line {lineno}: {exc}") from None
            for col, v in enumerate(vals, start=1):
                if not math.isfinite(v):
                    raise MatrixFormatError(f"{path}: non-finite value at line {lineno}, column {col}")
            rows.append(vals)
    if not rows:
        raise MatrixFormatError(f"{path}: empty matrix file")
    return np.array(rows, dtype=np.float64)


def _read_bin(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise MatrixFormatError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise MatrixFormatError(f"{path}: unsupported version {version}")
    expected = rows * cols * 8
    if len(data) - _HEADER.size != expected:
        raise MatrixFormatError(
            f"{path}: header says {rows}x{cols} ({expected} bytes) but payload has {len(data) - _HEADER.size}"
        )
    M = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape((rows, cols), order="F")
    M = M.astype(np.float64)
    _check_finite(M, path)
    return M


def write_codes(B, path) -> None:
    """Write a K x n code matrix in the packed sparse format."""
    B = np.asarray(B, dtype=np.float64)
    K, n = B.shape
    with open(path, "wb") as fh:
        fh.write(_SPARSE_HEADER.pack(K, n))
        for i in range(n):
            nz = np.flatnonzero(B[:, i])
            rec = np.empty(nz.size, dtype=_PAIR)
            rec["index"] = nz
            rec["value"] = B[nz, i]
            fh.write(struct.pack("<I", nz.size))
            fh.write(rec.tobytes())


def read_codes(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _SPARSE_HEADER.size:
        raise MatrixFormatError(f"{path}: truncated sparse code header")
    K, n = _SPARSE_HEADER.unpack_from(data)
    B = np.zeros((K, n))
    pos = _SPARSE_HEADER.size
    for i in range(n):
        if pos + 4 > len(data):
            raise MatrixFormatError(f"{path}: truncated at column {i}")
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        end = pos + count * _PAIR.itemsize
        if end > len(data):
            raise MatrixFormatError(f"{path}: column {i} claims {count} entries past end of file")
        rec = np.frombuffer(data, dtype=_PAIR, count=count, offset=pos)
        if count and rec["index"].max() >= K:
            raise MatrixFormatError(f"{path}: column {i} has index {rec['index'].max()} >= K={K}")
        B[rec["index"], i] = rec["value"]
        pos = end
    if pos != len(data):
        raise MatrixFormatError(f"{path}: {len(data) - pos} trailing bytes")
    return B


# --------------------------------------------------------------------------
# run configs
# --------------------------------------------------------------------------

REQUIRED = object()

# flattened key -> default (REQUIRED marks keys that must be present)
CONFIG_SCHEMA: dict[str, Any] = {
    "K": REQUIRED,
    "lambda": REQUIRED,
    "data": REQUIRED,
    "labels": None,
    "timestamps": None,
    "output_dir": "out",
    "kappa": 0.0,
    "eta": 0.0,
    "gamma_monitor": 0.0,
    "max_outer_iters": 50,
    "rel_err_tol": 0.1,
    "coder": "marginal",
    "smoothing": "feature",
    "seed": 0,
    "lasso_tol": 1e-6,
    "lasso_max_iter": 1000,
    "hard_thresh": None,
    "kernel.family": "tricube",
    "kernel.h1": 1.0,
    "kernel.h2": None,
    "kernel.temporal_family": "tricube",
    "kernel.temporal_only": False,
    "classifier.reg": 1.0,
    "classifier.group_size": 5,
    "classifier.test_fraction": 0.5,
    "classifier.bandwidth_quantile": 0.1,
    "classifier.hist_bins": 20,
    "bench.dim": 100,
    "bench.separation": 3.0,
    "bench.n_per_class": 1000,
    "bench.repeats": 3,
    "bench.K_values": [128, 256, 512, 1024],
    "bench.bandwidth_quantile": 0.01,
    "bench.target_rel_err": 0.1,
    "bench.seeds": 5,
    "bench.scaling_lambda": 5.0,
    "bench.scaling_lasso_tol": 1e-8,
    "bench.scaling_lasso_max_iter": 20000,
}


@dataclass
class RunConfig:
    """Flattened config values with defaults applied."""

    values: dict[str, Any] = field(default_factory=dict)
    path: Optional[str] = None

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def resolve(self, key) -> Optional[str]:
        """Path-valued key resolved relative to the config file's directory."""
        v = self.values.get(key)
        if v is None or self.path is None or os.path.isabs(v):
            return v
        return str(Path(self.path).parent / v)

    def kernel_spec(self) -> KernelSpec:
        v = self.values
        temporal = None
        if v["kernel.h2"] is not None:
            temporal = TemporalKernel(v["kernel.temporal_family"], float(v["kernel.h2"]))
        return KernelSpec(v["kernel.family"], float(v["kernel.h1"]), temporal)

    def train_config(self) -> TrainConfig:
        v = self.values
        smoothing = v["smoothing"]
        if v["kernel.temporal_only"] and smoothing != "none":
            smoothing = "temporal_only"
        return TrainConfig(
            K=int(v["K"]),
            lam=float(v["lambda"]),
            kappa=float(v["kappa"]),
            eta=float(v["eta"]),
            gamma_monitor=float(v["gamma_monitor"]),
            max_outer_iters=int(v["max_outer_iters"]),
            rel_err_tol=float(v["rel_err_tol"]),
            coder=v["coder"],
            smoothing=smoothing,
            kernel=self.kernel_spec(),
            seed=int(v["seed"]),
            lasso_tol=float(v["lasso_tol"]),
            lasso_max_iter=int(v["lasso_max_iter"]),
            hard_thresh=None if v["hard_thresh"] is None else float(v["hard_thresh"]),
        )


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _unflatten(flat: dict) -> dict:
    out: dict = {}
    for key, v in flat.items():
        if v is None:
            continue
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = v
    # top-level scalars first so tomli_w does not emit them inside a table
    return dict(sorted(out.items(), key=lambda kv: isinstance(kv[1], dict)))


def parse_config(raw: dict, *, require=("K", "lambda", "data"), path=None) -> RunConfig:
    flat = _flatten(raw)
    for key in flat:
        if key not in CONFIG_SCHEMA:
            hint = difflib.get_close_matches(key, CONFIG_SCHEMA, n=1)
            msg = f"unknown config key {key!r}"
            raise ConfigError(msg + (f"; did you mean {hint[0]!r}?" if hint else ""))
    missing = [k for k in require if k not in flat]
    if missing:
        raise ConfigError(f"missing required config key(s): {', '.join(missing)}")
    values = {}
    for key, default in CONFIG_SCHEMA.items():
        if key in flat:
            values[key] = flat[key]
        elif default is not REQUIRED:
            values[key] = default
    cfg = RunConfig(values, None if path is None else str(path))
    if "K" in values and "lambda" in values:
        try:
            cfg.train_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None
    return cfg


def load_config(path, *, require=("K", "lambda", "data")) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, require=require, path=path)


def write_config(cfg: RunConfig, path) -> None:
    flat = {k: v for k, v in cfg.values.items()}
    try:
        with open(path, "wb") as fh:
            tomli_w.dump(_unflatten(flat), fh)
    except OSError as exc:
        raise ConfigError(f"cannot write config to {path}: {exc}") from None


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(rows, path, columns=None) -> None:
    """Write a list of dicts as CSV with a header row."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in columns])
