"""Synthetic composite signals ``y = sum z_i s_i + d + eps^k w``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .carriers import CarrierBasis, DisturbanceSupport, circular_distance, phase_mod1

__all__ = [
    "EncodedSignals",
    "DisturbanceModel",
    "SampledSignal",
    "sinusoid_sum",
    "center_function",
    "benchmark_encoded_signals",
    "benchmark_disturbance_support",
    "paper_encoded_signals",
    "paper_disturbance_support",
    "chirp",
    "samples_per_period",
    "synthesize",
]


@dataclass(frozen=True)
class EncodedSignals:
    z_fns: tuple

    def __post_init__(self):
        object.__setattr__(self, "z_fns", tuple(self.z_fns))

    def __len__(self):
        return len(self.z_fns)

    def __call__(self, t):
        """Shape ``(n,) + t.shape``."""
        t = np.asarray(t, dtype=float)
        return np.stack([np.asarray(z(t), dtype=float) * np.ones_like(t) for z in self.z_fns])


_TRIG = {"sin": np.sin, "cos": np.cos}


def sinusoid_sum(terms: Sequence[dict]) -> Callable:
    """``sum amplitude * fn(omega * t / divisor + phase) ** power`` over ``terms``.

    ``divisor`` exists so that slow rates such as ``t/3`` are evaluated exactly
    as written rather than through a rounded reciprocal.
    """
    parsed = []
    for term in terms:
        parsed.append((
            _TRIG[term.get("fn", "sin")],
            float(term.get("amplitude", 1.0)),
            float(term.get("omega", 1.0)),
            float(term.get("divisor", 1.0)),
            float(term.get("phase", 0.0)),
            int(term.get("power", 1)),
        ))

    def z(t):
        t = np.asarray(t, dtype=float)
        total = np.zeros_like(t)
        for fn, amp, omega, div, phase, power in parsed:
            arg = omega * t / div
            if phase:
                arg = arg + phase
            total = total + amp * fn(arg) ** power
        return total

    return z


def center_function(kind: str, offset: float = 0.5, amplitude: float = 0.5, omega: float = 1.0,
                    phase: float = 0.0, value: float | None = None) -> Callable:
    """Slowly moving arc center ``offset * (1 + fn(...))``-style, or a constant."""
    if kind == "constant":
        v = float(offset if value is None else value)
        return lambda t: np.full(np.shape(t), v) if np.ndim(t) else v
    fn = _TRIG[kind]

    def c(t):
        arg = omega * np.asarray(t, dtype=float)
        if phase:
            arg = arg + phase
        return offset + amplitude * fn(arg)

    return c


def benchmark_encoded_signals() -> EncodedSignals:
    """``z_1 = 2 sin t - 1.5 sin(t/2)``, ``z_2 = cos t - 1.2 sin(t/4)``, ``z_3 = 1.4 cos(t/3)^2``."""
    return EncodedSignals((
        sinusoid_sum([{"fn": "sin", "amplitude": 2.0}, {"fn": "sin", "amplitude": -1.5, "divisor": 2.0}]),
        sinusoid_sum([{"fn": "cos", "amplitude": 1.0}, {"fn": "sin", "amplitude": -1.2, "divisor": 4.0}]),
        sinusoid_sum([{"fn": "cos", "amplitude": 1.4, "divisor": 3.0, "power": 2}]),
    ))


def benchmark_disturbance_support() -> DisturbanceSupport:
    """Two arcs of half width 1/20 centred at ``(1 + sin t)/2`` and ``(1 + cos t)/2``."""
    return DisturbanceSupport((
        (center_function("sin", 0.5, 0.5), 1 / 20),
        (center_function("cos", 0.5, 0.5), 1 / 20),
    ))


# alternate names kept for interface compatibility
paper_encoded_signals = benchmark_encoded_signals
paper_disturbance_support = benchmark_disturbance_support


@dataclass(frozen=True)
class DisturbanceModel:
    """Spikes living inside ``D_t``: raised-cosine bumps or flat tops per arc."""

    support: DisturbanceSupport
    amplitude: float = 5.0
    shape: str = "raised_cosine"

    def __post_init__(self):
        if self.shape not in ("raised_cosine", "rectangle"):
            raise ValueError(f"unknown disturbance shape {self.shape!r}")

    def __call__(self, t, sigma):
        t, sigma = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(sigma, dtype=float))
        sb = phase_mod1(sigma)
        out = np.zeros(t.shape)
        for center, hw in self.support.intervals:
            dist = circular_distance(sb, center(t))
            inside = dist <= hw
            if self.shape == "rectangle":
                bump = np.ones_like(dist)
            else:
                bump = 0.5 * (1 + np.cos(np.pi * np.minimum(dist, hw) / hw))
            out += np.where(inside, self.amplitude * bump, 0.0)
        return out


@dataclass
class SampledSignal:
    t0: float
    delta: float
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sampled signal contains non-finite values")

    def __len__(self):
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.values)) * self.delta


def chirp(t):
    """Fixed bounded deterministic test waveform, ``|w| <= 1``."""
    t = np.asarray(t, dtype=float)
    return np.sin(2 * np.pi * (0.5 * t + 0.25 * t * t))


def samples_per_period(epsilon: float, delta: float) -> int:
    """``eps/delta`` as an integer; raises unless it is one (to 1e-9 relative)."""
    ratio = epsilon / delta
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9 * ratio:
        raise ValueError(f"delta={delta!r} does not divide epsilon={epsilon!r} into whole samples")
    return int(n)


def synthesize(z: EncodedSignals, S: CarrierBasis, d: DisturbanceModel | None, epsilon: float,
               delta: float, span: Sequence[float], perturbation_k: int | None = None,
               perturbation_scale: float = 0.0) -> SampledSignal:
    """Point samples ``y(t_a + m*delta)``, ``m = 0..M``, with ``t_a + M*delta >= t_b``."""
    if len(z) != len(S):
        raise ValueError(f"{len(z)} encoded signals for {len(S)} carriers")
    n_per = samples_per_period(epsilon, delta)
    t_a, t_b = map(float, span)
    if not t_b > t_a:
        raise ValueError("span must be increasing")
    m = int(math.ceil((t_b - t_a) / delta - 1e-9))  # cover the whole span
    t = t_a + np.arange(m + 1) * delta
    sigma = t / epsilon
    y = np.einsum("im,im->m", z(t), S(t, sigma))
    if d is not None:
        y = y + d(t, sigma)
    if perturbation_k is not None:
        y = y + perturbation_scale * epsilon**perturbation_k * chirp(t)
    meta = {"epsilon": epsilon, "n": len(S), "span": [t_a, t_b], "samples_per_period": n_per}
    return SampledSignal(t_a, delta, y, meta)
