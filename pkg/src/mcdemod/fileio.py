"""CSV and JSON formats for signals, estimates and sweep results.

Every file starts with ``# key=value`` metadata lines (tool, version, config
hash, ...). Floats are written with 17 significant digits so a write/read
round trip is bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ._version import __version__
from .demod import DemodSeries
from .siggen import SampledSignal

__all__ = [
    "EmptyInputError",
    "FormatError",
    "write_signal_csv",
    "read_signal_csv",
    "write_estimates_csv",
    "read_estimates_csv",
    "write_sweep_json",
    "read_sweep_json",
    "write_sweep_csv",
    "write_truth_json",
    "base_metadata",
]

TOOL = "mcdemod"
SPACING_RTOL = 1e-9


class FormatError(ValueError):
    pass


class EmptyInputError(FormatError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def base_metadata(config_hash: str | None = None, **extra) -> dict:
    meta = {"tool": TOOL, "version": __version__}
    if config_hash is not None:
        meta["config_hash"] = config_hash
    meta.update(extra)
    return meta


def _header_lines(meta: dict) -> list:
    return [f"# {k}={json.dumps(v)}\n" for k, v in meta.items()]


def _read_table(path):
    """``(metadata, header, rows)``; rows as lists of strings with line numbers."""
    path = Path(path)
    meta, header, rows = {}, None, []
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                key, sep, val = s[1:].strip().partition("=")
                if sep:
                    try:
                        meta[key.strip()] = json.loads(val)
                    except json.JSONDecodeError:
                        meta[key.strip()] = val
                continue
            cells = next(csv.reader([s]))
            if header is None:
                header = [c.strip() for c in cells]
            else:
                rows.append((lineno, cells))
    if header is None or not rows:
        raise EmptyInputError(f"{path}: no data rows")
    for lineno, cells in rows:
        if len(cells) != len(header):
            raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, found {len(cells)}")
    return meta, header, rows


def _float_column(path, rows, j, name):
    out = np.empty(len(rows))
    for i, (lineno, cells) in enumerate(rows):
        try:
            out[i] = float(cells[j])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: column {name!r} is not a number: {cells[j]!r}") from None
    return out


def _check_uniform(path, t, delta=None) -> float:
    if len(t) < 2:
        return float(delta) if delta else float("nan")
    steps = np.diff(t)
    if np.any(~(steps > 0)):
        i = int(np.argmin(steps > 0))
        raise FormatError(f"{path}: time column not strictly increasing at row {i + 2}")
    if delta is None:
        delta = (t[-1] - t[0]) / (len(t) - 1)
    tol = max(SPACING_RTOL * delta, 4 * np.spacing(np.max(np.abs(t))))
    dev = np.abs(t - (t[0] + np.arange(len(t)) * delta))
    if np.any(dev > tol):
        i = int(np.argmax(dev > tol))
        raise FormatError(f"{path}: non-uniform time spacing at row {i + 1} (deviation {dev[i]:.3g})")
    return float(delta)


def write_signal_csv(path, signal: SampledSignal, meta: dict | None = None) -> None:
    m = base_metadata(**(meta or {}))
    m.setdefault("delta", signal.delta)
    m.setdefault("t0", signal.t0)
    for k, v in signal.metadata.items():
        m.setdefault(k, v)
    with Path(path).open("w") as fh:
        fh.writelines(_header_lines(m))
        fh.write("t,y\n")
        for t, y in zip(signal.times, signal.values):
            fh.write(f"{_fmt(t)},{_fmt(y)}\n")


def read_signal_csv(path) -> SampledSignal:
    meta, header, rows = _read_table(path)
    if header != ["t", "y"]:
        raise FormatError(f"{path}: expected header 't,y', found {','.join(header)!r}")
    t = _float_column(path, rows, 0, "t")
    y = _float_column(path, rows, 1, "y")
    delta = meta.get("delta")
    delta = _check_uniform(path, t, float(delta) if isinstance(delta, (int, float)) else None)
    if not np.all(np.isfinite(y)):
        raise FormatError(f"{path}: non-finite signal values")
    info = {k: v for k, v in meta.items() if k not in ("tool", "version", "delta", "t0")}
    return SampledSignal(float(t[0]), delta, y, info)


def write_estimates_csv(path, series: DemodSeries, meta: dict | None = None) -> None:
    n = series.z.shape[1]
    with Path(path).open("w") as fh:
        fh.writelines(_header_lines(base_metadata(**(meta or {}))))
        fh.write(",".join(["t"] + [f"z_{i + 1}" for i in range(n)] + ["kappa", "valid"]) + "\n")
        for i in range(len(series)):
            cells = [_fmt(series.t[i])] + [_fmt(v) for v in series.z[i]]
            cells += [_fmt(series.kappa[i]), "1" if series.valid[i] else "0"]
            fh.write(",".join(cells) + "\n")


def read_estimates_csv(path) -> DemodSeries:
    _, header, rows = _read_table(path)
    n = len(header) - 3
    expect = ["t"] + [f"z_{i + 1}" for i in range(n)] + ["kappa", "valid"]
    if n < 1 or header != expect:
        raise FormatError(f"{path}: expected header {','.join(expect)!r}")
    t = _float_column(path, rows, 0, "t")
    z = np.column_stack([_float_column(path, rows, 1 + i, expect[1 + i]) for i in range(n)])
    kappa = _float_column(path, rows, n + 1, "kappa")
    valid = np.array([c[n + 2].strip() == "1" for _, c in rows])
    return DemodSeries(t, z, kappa, valid)


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def write_sweep_json(path, results, meta: dict | None = None) -> None:
    doc = {"metadata": base_metadata(**(meta or {})), "results": [r.to_dict() for r in results]}
    Path(path).write_text(json.dumps(_jsonable(doc), indent=2) + "\n")


def read_sweep_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_sweep_csv(path, results, meta: dict | None = None) -> None:
    """Plot-ready ``(k, eps, log10 eps, error, log10 error)`` rows."""
    with Path(path).open("w") as fh:
        fh.writelines(_header_lines(base_metadata(**(meta or {}))))
        fh.write("k,epsilon,log10_epsilon,l2_error,log10_l2_error\n")
        for r in results:
            for e, err in zip(r.epsilons, r.l2_errors):
                fh.write(f"{r.k},{_fmt(e)},{_fmt(math.log10(e))},{_fmt(err)},{_fmt(math.log10(err))}\n")


def write_truth_json(path, t, z, meta: dict | None = None) -> None:
    """Ground-truth ``z_i(t)`` at the sample times, for scoring."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    doc = {
        "metadata": base_metadata(**(meta or {})),
        "t": [float(x) for x in t],
        "z": {f"z_{i + 1}": [float(x) for x in row] for i, row in enumerate(z)},
    }
    Path(path).write_text(json.dumps(doc) + "\n")
