"""Strict JSON run configurations and the registries that turn them into objects."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .carriers import (
    CarrierBasis,
    DisturbanceSupport,
    constant_carrier,
    masked_basis,
    pwm_carrier,
    sign_ramp_carrier,
    sine_carrier,
    triangle_cos_carrier,
)
from .siggen import DisturbanceModel, EncodedSignals, center_function, sinusoid_sum

__all__ = [
    "ConfigError",
    "RunConfig",
    "Scenario",
    "parse_config",
    "config_from_dict",
    "bundled_config_path",
    "MIN_DELTA_DIVISOR",
]

MIN_DELTA_DIVISOR = 16


class ConfigError(ValueError):
    """Bad configuration; the message names the offending field."""


# -- small strict-schema helpers ----------------------------------------------


def _check_keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(repr, unknown))}")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{where}.{key}: required field missing" if where else f"{key}: required field missing")


def _num(obj, key, where, default=None, positive=False, minimum=None):
    name = f"{where}.{key}" if where else key
    if key not in obj:
        if default is None:
            raise ConfigError(f"{name}: required field missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name}: expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{name}: must be positive, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{name}: must be >= {minimum}, got {v!r}")
    return float(v)


def _int(obj, key, where, default=None, minimum=None):
    name = f"{where}.{key}" if where else key
    if key not in obj:
        if default is None:
            raise ConfigError(f"{name}: required field missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{name}: must be >= {minimum}, got {v!r}")
    return v


def _pair(obj, key, where, default=None):
    name = f"{where}.{key}" if where else key
    v = obj.get(key, default)
    if v is None:
        raise ConfigError(f"{name}: required field missing")
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{name}: expected [start, end]")
    a, b = (_num({"x": x}, "x", name) for x in v)
    if not b > a:
        raise ConfigError(f"{name}: must be increasing, got {list(v)!r}")
    return (a, b)


# -- registries ---------------------------------------------------------------


_CENTER_KEYS = ("kind", "offset", "amplitude", "omega", "phase", "value")


def _center(spec, where):
    _check_keys(spec, _CENTER_KEYS, where, required=("kind",))
    kind = spec["kind"]
    if kind not in ("sin", "cos", "constant"):
        raise ConfigError(f"{where}.kind: unknown center function {kind!r}")
    return center_function(
        kind,
        _num(spec, "offset", where, 0.5),
        _num(spec, "amplitude", where, 0.5),
        _num(spec, "omega", where, 1.0),
        _num(spec, "phase", where, 0.0),
        _num(spec, "value", where, 0.0) if "value" in spec else None,
    )


def _carrier(spec, where):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{where}.kind: required field missing")
    kind = spec["kind"]
    if kind == "constant":
        _check_keys(spec, ("kind", "value"), where)
        return constant_carrier(_num(spec, "value", where, 1.0))
    if kind == "sign_ramp":
        _check_keys(spec, ("kind", "divisor", "threshold"), where)
        return sign_ramp_carrier(_num(spec, "divisor", where, 20.0, positive=True), _num(spec, "threshold", where, 0.5))
    if kind == "triangle_cos":
        _check_keys(spec, ("kind", "amplitude", "omega"), where)
        return triangle_cos_carrier(_num(spec, "amplitude", where, 1.0), _num(spec, "omega", where, 1.0))
    if kind == "pwm":
        _check_keys(spec, ("kind", "duty"), where, required=("duty",))
        return pwm_carrier(_center(spec["duty"], f"{where}.duty"))
    if kind == "sine":
        _check_keys(spec, ("kind", "harmonic", "phase", "depth", "omega"), where)
        return sine_carrier(_int(spec, "harmonic", where, 1, minimum=1), _num(spec, "phase", where, 0.0),
                            _num(spec, "depth", where, 0.0), _num(spec, "omega", where, 0.0))
    raise ConfigError(f"{where}.kind: unknown carrier kind {kind!r}")


_TERM_KEYS = ("fn", "amplitude", "omega", "divisor", "phase", "power")


def _encoded(spec, where):
    _check_keys(spec, ("terms", "constant"), where)
    if ("terms" in spec) == ("constant" in spec):
        raise ConfigError(f"{where}: give exactly one of 'terms' or 'constant'")
    if "constant" in spec:
        c = _num(spec, "constant", where)
        return lambda t: np.full(np.shape(t), c)
    terms = spec["terms"]
    if not isinstance(terms, list) or not terms:
        raise ConfigError(f"{where}.terms: expected a non-empty list")
    for i, term in enumerate(terms):
        tw = f"{where}.terms[{i}]"
        _check_keys(term, _TERM_KEYS, tw)
        if term.get("fn", "sin") not in ("sin", "cos"):
            raise ConfigError(f"{tw}.fn: expected 'sin' or 'cos'")
        for key in ("amplitude", "omega", "phase"):
            if key in term:
                _num(term, key, tw)
        if "divisor" in term:
            _num(term, "divisor", tw, positive=True)
        if "power" in term:
            _int(term, "power", tw, minimum=1)
    return sinusoid_sum(terms)


def _support(spec, where):
    intervals = spec.get("intervals", [])
    if not isinstance(intervals, list):
        raise ConfigError(f"{where}.intervals: expected a list")
    out = []
    for i, iv in enumerate(intervals):
        iw = f"{where}.intervals[{i}]"
        _check_keys(iv, ("center", "half_width"), iw, required=("center", "half_width"))
        out.append((_center(iv["center"], f"{iw}.center"), _num(iv, "half_width", iw, positive=True)))
    try:
        return DisturbanceSupport(tuple(out))
    except ValueError as exc:
        raise ConfigError(f"{where}.intervals: {exc}") from None


# -- config -------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """Everything a sweep cell or CLI run needs, built from a :class:`RunConfig`."""

    S: CarrierBasis
    R: CarrierBasis
    encoded: EncodedSignals
    disturbance: DisturbanceModel | None
    support: DisturbanceSupport
    epsilon: float
    delta_divisor: int
    order_k: int
    span: tuple
    window: tuple
    score_channel: int  # 0-based
    kappa_threshold: float
    perturbation_k: int | None
    perturbation_scale: float
    epsilon_grid: tuple
    k_list: tuple


@dataclass(frozen=True)
class RunConfig:
    epsilon: float
    delta_divisor: int
    order_k: int
    span: tuple
    window: tuple
    score_channel: int  # 1-based, as in z_1..z_n
    kappa_threshold: float
    raw: dict = field(repr=False, compare=False)
    source: str = ""

    @property
    def delta(self) -> float:
        return self.epsilon / self.delta_divisor

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.effective_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def effective_dict(self) -> dict:
        d = copy.deepcopy(self.raw)
        d.update(epsilon=self.epsilon, delta_divisor=self.delta_divisor, order_k=self.order_k,
                 span=list(self.span), window=list(self.window), score_channel=self.score_channel,
                 kappa_threshold=self.kappa_threshold)
        return d

    def with_overrides(self, **kw) -> "RunConfig":
        """Copy with CLI-style overrides, re-validated."""
        d = self.effective_dict()
        for key, v in kw.items():
            if v is not None:
                d[key] = list(v) if isinstance(v, tuple) else v
        return config_from_dict(d, self.source)

    def build(self) -> Scenario:
        raw = self.raw
        S = CarrierBasis(tuple(_carrier(c, f"carriers[{i}]") for i, c in enumerate(raw["carriers"])))
        z = EncodedSignals(tuple(_encoded(e, f"encoded[{i}]") for i, e in enumerate(raw["encoded"])))
        dist = raw.get("disturbance", {})
        D = _support(dist, "disturbance")
        mode = raw.get("demod_basis", "masked")
        try:
            if mode == "masked":
                R = masked_basis(S, D, t_check=(self.window[0],))
            else:
                S.check_independence((self.window[0],))
                R = S
        except ValueError as exc:
            raise ConfigError(f"carriers: {exc}") from None
        d = None
        if D.intervals and dist.get("enabled", True):
            d = DisturbanceModel(D, _num(dist, "amplitude", "disturbance", 5.0), dist.get("shape", "raised_cosine"))
        pert = raw.get("perturbation") or {}
        sweep = raw.get("sweep", {})
        return Scenario(
            S=S, R=R, encoded=z, disturbance=d, support=D,
            epsilon=self.epsilon, delta_divisor=self.delta_divisor, order_k=self.order_k,
            span=self.span, window=self.window, score_channel=self.score_channel - 1,
            kappa_threshold=self.kappa_threshold,
            perturbation_k=pert.get("k"), perturbation_scale=float(pert.get("scale", 1.0)),
            epsilon_grid=_sweep_grid(sweep), k_list=tuple(sweep.get("k", (1, 2, 3))),
        )


_TOP_KEYS = ("description", "epsilon", "delta_divisor", "order_k", "span", "window", "score_channel",
             "kappa_threshold", "carriers", "demod_basis", "encoded", "disturbance", "perturbation", "sweep")


def _sweep_grid(sweep) -> tuple:
    eps = sweep.get("epsilons", "auto")
    if eps == "auto":
        hi = math.log10(sweep.get("eps_max", 10**-1.5))
        lo = math.log10(sweep.get("eps_min", 1e-3))
        return tuple(float(e) for e in np.logspace(hi, lo, sweep.get("points", 6)))
    return tuple(sorted((float(e) for e in eps), reverse=True))


def config_from_dict(d: dict, source: str = "<dict>") -> RunConfig:
    _check_keys(d, _TOP_KEYS, "", required=("epsilon", "delta_divisor", "order_k", "span", "carriers", "encoded"))
    eps = _num(d, "epsilon", "", positive=True)
    N = _int(d, "delta_divisor", "")
    if N < MIN_DELTA_DIVISOR:
        raise ConfigError(f"delta_divisor: must be >= {MIN_DELTA_DIVISOR} samples per period, got {N}")
    k = _int(d, "order_k", "", minimum=1)
    span = _pair(d, "span", "")
    window = _pair(d, "window", "", default=[max(span[0], 1.0), span[1]])
    if window[0] < span[0] or window[1] > span[1]:
        raise ConfigError(f"window: {list(window)} must lie inside span {list(span)}")
    kappa = _num(d, "kappa_threshold", "", 1e6)
    if not kappa > 1:
        raise ConfigError(f"kappa_threshold: must exceed 1, got {kappa!r}")
    if not isinstance(d["carriers"], list) or not d["carriers"]:
        raise ConfigError("carriers: expected a non-empty list")
    if not isinstance(d["encoded"], list) or len(d["encoded"]) != len(d["carriers"]):
        raise ConfigError(f"encoded: expected a list of {len(d['carriers'])} signals, one per carrier")
    n = len(d["carriers"])
    ch = _int(d, "score_channel", "", min(2, n), minimum=1)
    if ch > n:
        raise ConfigError(f"score_channel: {ch} exceeds the number of carriers ({n})")
    if d.get("demod_basis", "masked") not in ("masked", "same"):
        raise ConfigError("demod_basis: expected 'masked' or 'same'")
    # validate the nested specs now so errors surface at parse time
    for i, c in enumerate(d["carriers"]):
        _carrier(c, f"carriers[{i}]")
    for i, e in enumerate(d["encoded"]):
        _encoded(e, f"encoded[{i}]")
    if "disturbance" in d:
        dist = d["disturbance"]
        _check_keys(dist, ("intervals", "amplitude", "shape", "enabled"), "disturbance")
        _support(dist, "disturbance")
        _num(dist, "amplitude", "disturbance", 5.0)
        if dist.get("shape", "raised_cosine") not in ("raised_cosine", "rectangle"):
            raise ConfigError("disturbance.shape: expected 'raised_cosine' or 'rectangle'")
        if not isinstance(dist.get("enabled", True), bool):
            raise ConfigError("disturbance.enabled: expected true or false")
    if d.get("perturbation") is not None:
        p = d["perturbation"]
        _check_keys(p, ("k", "scale"), "perturbation", required=("k",))
        _int(p, "k", "perturbation", minimum=1)
        _num(p, "scale", "perturbation", 1.0)
    if "sweep" in d:
        s = d["sweep"]
        _check_keys(s, ("k", "epsilons", "points", "eps_min", "eps_max"), "sweep")
        if "k" in s and (not isinstance(s["k"], list) or not s["k"]
                         or not all(isinstance(x, int) and not isinstance(x, bool) and x >= 1 for x in s["k"])):
            raise ConfigError("sweep.k: expected a non-empty list of positive integers")
        eps_spec = s.get("epsilons", "auto")
        if eps_spec != "auto":
            if not isinstance(eps_spec, list) or not eps_spec:
                raise ConfigError("sweep.epsilons: expected 'auto' or a non-empty list")
            for x in eps_spec:
                _num({"e": x}, "e", "sweep.epsilons", positive=True)
        _int(s, "points", "sweep", 6, minimum=3)
        lo = _num(s, "eps_min", "sweep", 1e-3, positive=True)
        hi = _num(s, "eps_max", "sweep", 10**-1.5, positive=True)
        if not hi > lo:
            raise ConfigError("sweep: eps_max must exceed eps_min")
    return RunConfig(eps, N, k, span, window, ch, kappa, copy.deepcopy(d), source)


def parse_config(path) -> RunConfig:
    """Read and validate a JSON run configuration."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    try:
        return config_from_dict(d, str(path))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


_BUNDLED_ALIASES = {"paper_section4.json": "benchmark.json"}


def bundled_config_path(name: str = "benchmark.json") -> Path:
    name = _BUNDLED_ALIASES.get(name, name)
    return Path(str(resources.files("mcdemod") / "data" / name))
