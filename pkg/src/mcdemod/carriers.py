"""Carriers ``s(t, sigma)`` that are 1-periodic in the fast variable.

A :class:`Carrier` wraps a vectorized evaluator ``fn(t, sigma_bar)`` that
receives the fast phase already reduced modulo 1, plus an optional function
listing the phases in ``[0, 1)`` where the carrier (or one of its derivatives)
jumps at a given ``t``. Quadrature over ``sigma`` splits at those phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Carrier",
    "CarrierBasis",
    "DisturbanceSupport",
    "constant_carrier",
    "sign_ramp_carrier",
    "triangle_cos_carrier",
    "pwm_carrier",
    "sine_carrier",
    "benchmark_carrier_basis",
    "masked_basis",
    "mean_product",
    "condition_number",
    "backward_difference",
    "zero_mean_primitive",
    "circular_distance",
    "phase_mod1",
]

SMOOTHNESS = ("discontinuous", "continuous", "C1", "smooth")


def circular_distance(sigma, center):
    """Distance between phases on the unit circle, in ``[0, 0.5]``."""
    return np.abs(np.mod(np.asarray(sigma) - center + 0.5, 1.0) - 0.5)


def phase_mod1(sigma):
    """``sigma mod 1`` guaranteed in ``[0, 1)``; ``np.mod(-1e-300, 1)`` rounds to 1.0."""
    sb = np.mod(sigma, 1.0)
    return np.where(sb >= 1.0, 0.0, sb)


def _no_breakpoints(t):
    return ()


@dataclass(frozen=True)
class Carrier:
    fn: Callable
    breakpoints: Callable = _no_breakpoints
    smoothness: str = "smooth"
    name: str = ""

    def __post_init__(self):
        if self.smoothness not in SMOOTHNESS:
            raise ValueError(f"unknown smoothness hint {self.smoothness!r}")

    def __call__(self, t, sigma):
        t, sigma = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(sigma, dtype=float))
        return np.asarray(self.fn(t, phase_mod1(sigma)), dtype=float) * np.ones_like(t)


@dataclass(frozen=True)
class CarrierBasis:
    carriers: tuple

    def __post_init__(self):
        object.__setattr__(self, "carriers", tuple(self.carriers))
        if not self.carriers:
            raise ValueError("a carrier basis needs at least one carrier")

    def __len__(self):
        return len(self.carriers)

    def __iter__(self):
        return iter(self.carriers)

    def __getitem__(self, i):
        return self.carriers[i]

    def __call__(self, t, sigma):
        """Stacked evaluation, shape ``(n,) + broadcast(t, sigma).shape``."""
        return np.stack([c(t, sigma) for c in self.carriers])

    def breakpoints(self, t) -> list[float]:
        pts = set()
        for c in self.carriers:
            pts.update(float(b) % 1.0 for b in c.breakpoints(t))
        return sorted(pts)

    def gram_min_singular(self, t: float, quad_n: int = 1024) -> float:
        """Smallest singular value of the sigma-mean Gram matrix at ``t``."""
        s = np.linalg.svd(mean_product(self, self, t, quad_n), compute_uv=False)
        return float(s[-1])

    def check_independence(self, t_grid, threshold: float = 1e-8, quad_n: int = 1024):
        for t in np.atleast_1d(t_grid):
            smin = self.gram_min_singular(float(t), quad_n)
            if not smin > threshold:
                raise ValueError(
                    f"carriers are not linearly independent at t={t}: "
                    f"smallest Gram singular value {smin:.3g} <= {threshold:g}"
                )


@dataclass(frozen=True)
class DisturbanceSupport:
    """``D_t`` as a union of closed arcs ``[c(t) - w, c(t) + w]`` on the phase circle."""

    intervals: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple((fn, float(hw)) for fn, hw in self.intervals))
        for _, hw in self.intervals:
            if not 0.0 < hw < 0.5:
                raise ValueError(f"half width must lie in (0, 0.5), got {hw!r}")
        if sum(2 * hw for _, hw in self.intervals) >= 1.0:
            raise ValueError("disturbance intervals can cover the whole period; masking would kill the basis")

    def contains(self, t, sigma_bar):
        t, sigma_bar = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(sigma_bar, dtype=float))
        out = np.zeros(t.shape, dtype=bool)
        for center, hw in self.intervals:
            out |= circular_distance(sigma_bar, center(t)) <= hw
        return out

    def edges(self, t) -> list[float]:
        pts = []
        for center, hw in self.intervals:
            c = float(center(t))
            pts += [(c - hw) % 1.0, (c + hw) % 1.0]
        return pts

    def measure(self, t: float) -> float:
        """Lebesgue measure of ``D_t`` (overlaps counted once)."""
        arcs = []
        for center, hw in self.intervals:
            lo = float(center(t)) - hw
            for shift in (-1.0, 0.0, 1.0):
                a, b = max(lo + shift, 0.0), min(lo + shift + 2 * hw, 1.0)
                if b > a:
                    arcs.append((a, b))
        arcs.sort()
        total, cur_a, cur_b = 0.0, None, None
        for a, b in arcs:
            if cur_b is None or a > cur_b:
                if cur_b is not None:
                    total += cur_b - cur_a
                cur_a, cur_b = a, b
            else:
                cur_b = max(cur_b, b)
        if cur_b is not None:
            total += cur_b - cur_a
        return total


# -- carrier kinds -----------------------------------------------------------

def constant_carrier(value: float = 1.0) -> Carrier:
    value = float(value)
    return Carrier(lambda t, s: np.full(np.shape(t), value), smoothness="smooth", name="constant")


def sign_ramp_carrier(divisor: float = 20.0, threshold: float = 0.5) -> Carrier:
    """``sign(t/divisor + sigma_bar - threshold)``: a square wave whose edge drifts with ``t``."""

    def fn(t, s):
        return np.sign(t / divisor + s - threshold)

    def bps(t):
        return (0.0, (threshold - t / divisor) % 1.0)

    return Carrier(fn, bps, "discontinuous", "sign_ramp")


def triangle_cos_carrier(amplitude: float = 1.0, omega: float = 1.0) -> Carrier:
    """``amplitude*cos(omega*t) + tri(sigma_bar)`` with ``tri`` peaking at 1/2."""

    def fn(t, s):
        base = amplitude * np.cos(omega * t)
        return np.where(s <= 0.5, base + s, base + 1 - s)

    return Carrier(fn, lambda t: (0.0, 0.5), "continuous", "triangle_cos")


def pwm_carrier(duty_fn: Callable) -> Carrier:
    """Zero-mean PWM ripple ``sign(u(t) - sigma_bar) - 2u(t) + 1`` for duty cycle ``u``."""

    def fn(t, s):
        u = np.asarray(duty_fn(t), dtype=float)
        if np.any((u <= 0) | (u >= 1)):
            raise ValueError("PWM duty cycle must stay inside (0, 1)")
        return np.sign(u - s) - 2 * u + 1

    return Carrier(fn, lambda t: (0.0, float(duty_fn(t)) % 1.0), "discontinuous", "pwm")


def sine_carrier(harmonic: int = 1, phase: float = 0.0, depth: float = 0.0, omega: float = 0.0) -> Carrier:
    """``(1 + depth*sin(omega*t)) * sin(2*pi*harmonic*sigma + phase)``."""

    def fn(t, s):
        return (1 + depth * np.sin(omega * t)) * np.sin(2 * np.pi * harmonic * s + phase)

    return Carrier(fn, smoothness="smooth", name="sine")


def benchmark_carrier_basis() -> CarrierBasis:
    """``s_1 = 1``, ``s_2 = sign(t/20 + sigma - 0.5)``, ``s_3 = cos(t) + tri(sigma)``."""
    return CarrierBasis((constant_carrier(1.0), sign_ramp_carrier(20.0, 0.5), triangle_cos_carrier(1.0, 1.0)))


def _masked(carrier: Carrier, D: DisturbanceSupport) -> Carrier:
    def fn(t, s):
        return np.where(D.contains(t, s), 0.0, carrier.fn(t, s))

    def bps(t):
        return tuple(carrier.breakpoints(t)) + tuple(D.edges(t))

    return Carrier(fn, bps, "discontinuous" if D.intervals else carrier.smoothness, f"masked_{carrier.name}")


def masked_basis(S: CarrierBasis, D: DisturbanceSupport, t_check: Sequence[float] = (0.0,),
                 threshold: float = 1e-8) -> CarrierBasis:
    """Demodulating basis ``R = (1 - 1_{D_t}) S``; annihilates anything supported in ``D_t``.

    Linear independence of the masked carriers is checked at ``t_check``.
    """
    R = CarrierBasis(tuple(_masked(c, D) for c in S))
    if t_check is not None and len(t_check):
        R.check_independence(t_check, threshold)
    return R


def _sigma_nodes(breaks: Sequence[float], quad_n: int):
    """Composite midpoint nodes and weights on ``[0, 1)`` split at ``breaks``."""
    cuts = sorted({0.0, 1.0, *[b % 1.0 for b in breaks]})
    nodes, weights = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        length = b - a
        if length <= 1e-15:
            continue
        m = max(1, math.ceil(quad_n * length))
        h = length / m
        nodes.append(a + h * (np.arange(m) + 0.5))
        weights.append(np.full(m, h))
    return np.concatenate(nodes), np.concatenate(weights)


def mean_product(S: CarrierBasis, R: CarrierBasis, t: float, quad_n: int = 1024) -> np.ndarray:
    """``mean_sigma(S R^T)(t)`` by breakpoint-split composite midpoint quadrature."""
    if quad_n < 256:
        raise ValueError(f"quad_n must be at least 256, got {quad_n}")
    t = float(t)
    sig, w = _sigma_nodes(S.breakpoints(t) + R.breakpoints(t), quad_n)
    tt = np.full_like(sig, t)
    Sv = S(tt, sig)
    Rv = R(tt, sig)
    return (Sv * w) @ Rv.T


def condition_number(M) -> float:
    """Ratio of extreme singular values; ``inf`` for singular or non-finite input."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("condition number needs a square matrix")
    if not np.all(np.isfinite(M)):
        return math.inf
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] == 0.0:
        return math.inf
    return float(s[0] / s[-1])


def backward_difference(g: Callable, k: int, epsilon: float, t):
    """``sum_i (-1)^i C(k,i) g(t - i eps, (t - i eps)/eps)``.

    The fast phase of every term is taken as ``t/eps - i`` reduced modulo 1,
    so every term sees the same ``sigma``. The sum is formed as ``k``
    nested first differences, so a carrier with no slow dependence cancels
    exactly.
    """
    if k < 1:
        raise ValueError("backward difference order must be >= 1")
    t = np.asarray(t, dtype=float)
    phase = phase_mod1(t / epsilon)
    vals = [np.asarray(g(t - i * epsilon, phase), dtype=float) for i in range(k + 1)]
    for _ in range(k):
        vals = [a - b for a, b in zip(vals[:-1], vals[1:])]
    total = vals[0]
    return total if total.ndim else float(total)


def zero_mean_primitive(g: Callable, order: int = 1, quad_n: int = 4096, mean_tol: float | None = None):
    """Numerical ``g^{(-order)}``: iterated zero-mean sigma-primitive.

    Returns ``G(t, sigma)`` for scalar ``t`` and array ``sigma``. Each call
    integrates ``g(t, .)`` on ``quad_n`` midpoint cells; the primitive is
    exact at cell edges for the midpoint rule and linearly interpolated
    between them.

    ``g`` must have zero sigma-mean. The numeric mean is compared against
    ``mean_tol`` relative to ``max |g|`` (default ``4/quad_n``, the midpoint
    resolution for a carrier with jumps) and then removed, so quadrature
    error does not turn into a drift across the period.
    """
    if mean_tol is None:
        mean_tol = 4.0 / quad_n
    if order < 1:
        raise ValueError("order must be >= 1")
    edges = np.linspace(0.0, 1.0, quad_n + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    h = 1.0 / quad_n

    def primitive_on_edges(t):
        vals = np.asarray(g(np.full_like(mids, t), mids), dtype=float)
        mean = vals.mean()
        if abs(mean) > mean_tol * max(1.0, np.abs(vals).max()):
            raise ValueError(f"g has nonzero sigma-mean {mean:.3g} at t={t}; no periodic primitive")
        F = np.concatenate([[0.0], np.cumsum(vals - mean) * h])
        F -= _trapezoid(F, h)
        for _ in range(order - 1):
            F = np.concatenate([[0.0], np.cumsum(0.5 * (F[1:] + F[:-1])) * h])
            F -= _trapezoid(F, h)
        return F

    def G(t, sigma):
        F = primitive_on_edges(float(t))
        return np.interp(np.mod(np.asarray(sigma, dtype=float), 1.0), edges, F)

    return G


def _trapezoid(F, h):
    return h * (F.sum() - 0.5 * (F[0] + F[-1]))
