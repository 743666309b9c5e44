"""Error metrics, epsilon sweeps, slope fits and property checks."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .carriers import CarrierBasis, backward_difference, condition_number, mean_product, zero_mean_primitive
from .demod import DemodSeries, demodulate_batch
from .kernels import discretize, iterated_kernel
from .siggen import synthesize

__all__ = [
    "SweepResult",
    "CheckResult",
    "l2_error",
    "convergence_slope",
    "default_epsilon_grid",
    "run_sweep",
    "kappa_trace",
    "BumpKernel",
    "HarmonicCarrier",
    "check_appendix_identity",
    "backward_difference_measure",
    "scaled_difference_measure",
    "filtered_carrier_measure",
    "ak_diagnostic",
    "measured_slope",
    "run_check_suite",
]

WORKERS_ENV = "MCDEMOD_WORKERS"
DEFAULT_WINDOW = (1.0, 5.0)


@dataclass
class SweepResult:
    k: int
    epsilons: list
    l2_errors: list
    fitted_slope: float
    fit_residual: float
    cell_errors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "epsilons": list(self.epsilons),
            "l2_errors": list(self.l2_errors),
            "fitted_slope": self.fitted_slope,
            "fit_residual": self.fit_residual,
            "cell_errors": {repr(e): msg for e, msg in self.cell_errors.items()},
        }


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    threshold: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name}: measured {self.measured:.4g}, need {self.threshold:.4g}{extra}"


def l2_error(estimates: DemodSeries, truth: Callable, channel: int = 1,
             window: Sequence[float] = DEFAULT_WINDOW) -> float:
    """Trapezoidal ``(int_a^b (z - zhat)^2 dt)^(1/2)`` on one channel.

    ``truth(t)`` may return either the one channel or all ``n`` stacked.
    """
    a, b = map(float, window)
    t = np.asarray(estimates.t, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least two samples")
    tol = 1e-9 * max(1.0, abs(b))
    if t[0] > a + tol or t[-1] < b - tol:
        raise ValueError(f"window [{a}, {b}] is not inside the sampled span [{t[0]}, {t[-1]}]")
    sel = (t >= a - tol) & (t <= b + tol)
    if not np.all(estimates.valid[sel]):
        bad = t[sel][~estimates.valid[sel]]
        raise ValueError(f"{len(bad)} invalid estimates inside the scoring window, first at t={bad[0]:.6g}")
    ts = t[sel]
    z = np.asarray(truth(ts), dtype=float)
    if z.ndim == 2:
        z = z[channel]
    e = z - estimates.z[sel, channel]
    return float(math.sqrt(np.trapezoid(e * e, ts)))


def convergence_slope(epsilons, errors):
    """Least-squares slope of ``log error`` against ``log eps`` and the max abs residual."""
    x = np.asarray(epsilons, dtype=float)
    y = np.asarray(errors, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("epsilons and errors must be 1-D and the same length")
    if len(x) < 3:
        raise ValueError("need at least 3 points to fit a slope")
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise ValueError("epsilons and errors must be positive")
    lx, ly = np.log(x), np.log(y)
    slope, icept = np.polyfit(lx, ly, 1)
    resid = float(np.max(np.abs(ly - (slope * lx + icept))))
    return float(slope), resid


def default_epsilon_grid(points: int = 6, lo_exp: float = -3.0, hi_exp: float = -1.5) -> np.ndarray:
    """Log-spaced grid from ``10**hi_exp`` down to ``10**lo_exp``."""
    return np.logspace(hi_exp, lo_exp, points)


def _worker_count(workers):
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def run_cell(scenario, k: int, epsilon: float) -> float:
    """Generate, demodulate and score one ``(k, eps)`` cell."""
    delta = epsilon / scenario.delta_divisor
    sig = synthesize(scenario.encoded, scenario.S, scenario.disturbance, epsilon, delta, scenario.span,
                     scenario.perturbation_k, scenario.perturbation_scale)
    out = demodulate_batch(scenario.S, scenario.R, k, epsilon, delta, sig,
                           kappa_threshold=scenario.kappa_threshold)
    return l2_error(out, scenario.encoded, scenario.score_channel, scenario.window)


def run_sweep(config, k_list: Sequence[int], epsilon_grid=None, workers: int | None = None) -> list:
    """All ``(k, eps)`` cells, run concurrently; one :class:`SweepResult` per ``k``.

    ``config`` is anything with a ``build()`` returning a scenario (see
    :mod:`mcdemod.config`). A failing cell is recorded in ``cell_errors`` and
    left out of the fit.
    """
    scenario = config.build() if hasattr(config, "build") else config
    if epsilon_grid is None or (isinstance(epsilon_grid, str) and epsilon_grid == "auto"):
        epsilon_grid = scenario.epsilon_grid
    eps = sorted({float(e) for e in epsilon_grid}, reverse=True)
    if not eps:
        raise ValueError("epsilon grid is empty")
    if not k_list:
        raise ValueError("k list is empty")
    cells = [(int(k), e) for k in k_list for e in eps]
    # biggest jobs first so the pool drains evenly
    order = sorted(cells, key=lambda c: c[0] / c[1], reverse=True)
    results = {}

    def job(cell):
        try:
            return cell, run_cell(scenario, *cell), None
        except Exception as exc:  # reported per cell
            return cell, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=_worker_count(workers)) as pool:
        for cell, err, msg in pool.map(job, order):
            results[cell] = (err, msg)

    out = []
    for k in k_list:
        k = int(k)
        es, errs, failed = [], [], {}
        for e in eps:
            err, msg = results[(k, e)]
            if msg is None:
                es.append(e)
                errs.append(err)
            else:
                failed[e] = msg
        if len(es) >= 3 and all(v > 0 for v in errs):
            slope, resid = convergence_slope(es, errs)
        else:
            slope, resid = float("nan"), float("nan")
        out.append(SweepResult(k, es, errs, slope, resid, failed))
    return out


def kappa_trace(S: CarrierBasis, R: CarrierBasis, t_grid, quad_n: int = 1024):
    """``(t, kappa(SR^T mean (t)))`` from the quadrature oracle."""
    t_grid = np.asarray(t_grid, dtype=float)
    kappa = np.array([condition_number(mean_product(S, R, float(t), quad_n)) for t in t_grid])
    return t_grid, kappa


# -- kernel-derivative identity ----------------------------------------------


@dataclass(frozen=True)
class BumpKernel:
    """``phi(tau) = C (u(1-u))^p`` with ``u = tau/L`` on ``[0, L]``, unit integral.

    ``phi`` is ``C^{p-1}``; its derivatives are exact polynomials.
    """

    length: float
    power: int

    def __post_init__(self):
        if not self.length > 0 or self.power < 1:
            raise ValueError("bump needs positive length and power >= 1")

    def _shape(self) -> Polynomial:
        p = Polynomial([0.0, 1.0, -1.0]) ** self.power
        return p / p.integ()(1.0)

    @property
    def smoothness(self) -> int:
        return self.power - 1

    def derivative(self, i: int, tau):
        u = np.asarray(tau, dtype=float) / self.length
        vals = self._shape().deriv(i)(u) / self.length ** (i + 1) if i else self._shape()(u) / self.length
        return np.where((u >= 0) & (u <= 1), vals, 0.0)

    def __call__(self, tau):
        return self.derivative(0, tau)


@dataclass(frozen=True)
class HarmonicCarrier:
    """``g(t, sigma) = a(t) cos(2 pi h sigma)``.

    ``amplitude`` holds ``a, a', a'', ...`` as callables. All zero-mean
    primitives and slow derivatives are then closed-form.
    """

    amplitude: tuple
    harmonic: int = 1

    @classmethod
    def from_polynomial(cls, coeffs, harmonic: int = 1) -> "HarmonicCarrier":
        p = Polynomial(coeffs)
        derivs = tuple(p.deriv(m) for m in range(max(1, p.degree()) + 8))
        return cls(derivs, harmonic)

    def __call__(self, t, sigma):
        return self.amplitude[0](t) * np.cos(2 * np.pi * self.harmonic * np.asarray(sigma))

    def primitive(self, j: int, m: int, t, sigma):
        """``d^m/dt^m g^{(-j)}(t, sigma)``."""
        if m >= len(self.amplitude):
            raise ValueError(f"amplitude derivative of order {m} not supplied")
        w = 2 * np.pi * self.harmonic
        return self.amplitude[m](t) * np.cos(w * np.asarray(sigma) - j * np.pi / 2) / w**j


def check_appendix_identity(phi: BumpKernel, g: HarmonicCarrier, k: int, epsilon: float, t: float,
                            quad_n: int = 4096) -> float:
    """``|phi * s_0 - (-eps)^k sum_i (-1)^i C(k,i) phi^{(i)} * d_1^{k-i} s_k|`` at ``t``.

    Here ``s_j(t) = g^{(-j)}(t, t/eps)``. Both convolutions over ``supp phi``
    use the composite midpoint rule on ``quad_n`` cells, so the residual is
    quadrature error only.
    """
    if not isinstance(g, HarmonicCarrier):
        raise TypeError("identity check supports only the a(t) cos(2 pi h sigma) family")
    if not isinstance(phi, BumpKernel):
        raise TypeError("phi must be a BumpKernel")
    if k < 0:
        raise ValueError("k must be >= 0")
    if phi.smoothness < k:
        raise ValueError(f"phi is only C^{phi.smoothness}, identity needs C^{k}")
    h = phi.length / quad_n
    tau = (np.arange(quad_n) + 0.5) * h
    s = t - tau
    sigma = s / epsilon
    lhs = h * np.sum(phi(tau) * g.primitive(0, 0, s, sigma))
    rhs = 0.0
    for i in range(k + 1):
        term = h * np.sum(phi.derivative(i, tau) * g.primitive(k, k - i, s, sigma))
        rhs += (-1) ** i * math.comb(k, i) * term
    rhs *= (-epsilon) ** k
    return float(abs(lhs - rhs))


# -- backward-difference and filtering properties ---------------------------


def _period_points(t: float, epsilon: float, points: int) -> np.ndarray:
    return t + epsilon * np.arange(points) / points


def backward_difference_measure(g: Callable, k: int, epsilon: float, t: float = 1.0, points: int = 64) -> float:
    """``sup |Delta_k g_eps|`` over one fast period starting at ``t``.

    A single instant can land on a zero of the fast factor (e.g. ``t/eps``
    an integer for a sine carrier), so the sup over ``[t, t + eps)`` is used.
    """
    return float(np.max(np.abs(backward_difference(g, k, epsilon, _period_points(t, epsilon, points)))))


def scaled_difference_measure(g: Callable, k: int, epsilon: float, t: float = 1.0, points: int = 64) -> float:
    """``sup |K_k^{(k)} * g_eps| = sup |Delta_k g_eps| / eps^k``; bounded in eps."""
    return backward_difference_measure(g, k, epsilon, t, points) / epsilon**k


def filtered_carrier_measure(g: Callable, k: int, epsilon: float, t: float = 1.0, n_per_period: int = 64) -> float:
    """``sup |K_k * g_eps|`` over one period, with ``K_k`` as area-sampled FIR taps.

    Samples sit on the grid ``m * eps / N`` and the fast phase is the exact
    fraction ``(m mod N) / N``.
    """
    N = int(n_per_period)
    delta = epsilon / N
    w = discretize(iterated_kernel(k, epsilon), delta).weights
    L = len(w)
    n0 = int(round(t / delta))
    m = np.arange(n0 - L + 1, n0 + N)
    tm = m * delta
    gs = np.asarray(g(tm, np.mod(m, N) / N), dtype=float)
    full = np.convolve(gs, w, mode="valid")  # entry j is the output at sample n0 + j
    return float(np.max(np.abs(full)))


def ak_diagnostic(g: Callable, k: int, epsilons, t: float = 1.0, quad_n: int = 4096) -> float:
    """Advisory: slope of ``|Delta_k g^{(-k)}|`` in eps.

    Regular zero-mean carriers give slopes near ``k``; a much smaller slope
    hints that the A_k integration-by-parts chain breaks down. Not a proof.
    """
    G = zero_mean_primitive(g, k, quad_n)
    vals = []
    for e in epsilons:
        s = _period_points(t, e, 16)
        vals.append(max(abs(backward_difference(G, k, e, float(x))) for x in s))
    return measured_slope(epsilons, vals)


def measured_slope(epsilons, values) -> float:
    """Log-log slope; exact zeros (perfect cancellation) count as infinite slope."""
    v = np.asarray(values, dtype=float)
    if np.all(v == 0):
        return float("inf")
    return convergence_slope(epsilons, v)[0]


def _sin_amplitude():
    # a(t) = 1 + sin(t/2) and its derivatives
    return tuple(
        (lambda m: (lambda t: (m == 0) + 0.5**m * np.sin(np.asarray(t, dtype=float) / 2 + m * np.pi / 2)))(m)
        for m in range(12)
    )


def run_check_suite(suite: str) -> list:
    """Backward-difference and filtering property checks ("lemmas") or the kernel-derivative identity ("appendix")."""
    if suite == "lemmas":
        return _property_checks()
    if suite == "appendix":
        return _identity_checks()
    raise ValueError(f"unknown suite {suite!r}; choose 'lemmas' or 'appendix'")


def _property_checks() -> list:
    eps = np.logspace(-2, -4, 9)
    sin_g = HarmonicCarrier(_sin_amplitude())

    def quad_sine(t, s):
        return (1 + np.asarray(t) ** 2 / 4) * np.sin(2 * np.pi * np.asarray(s))

    res = []
    for k in (1, 2, 3):
        vals = [backward_difference_measure(quad_sine, k, e) for e in eps]
        slope = measured_slope(eps, vals)
        bound = 64 * np.finfo(float).eps * 2**k * 1.25  # 2^k terms of size <= 1.25 near t=1
        if max(vals) <= bound:
            slope = float("inf")  # exact cancellation up to rounding: Delta_k of a degree < k amplitude
        res.append(CheckResult(f"backward difference (1+t^2/4) sin, k={k}", slope, k - 0.15, slope >= k - 0.15))
    for k in (1, 2, 3):
        slope = measured_slope(eps, [backward_difference_measure(sin_g, k, e) for e in eps])
        res.append(CheckResult(f"backward difference (1+sin(t/2)) cos, k={k}", slope, k - 0.15, slope >= k - 0.15))
    for k in (1, 2, 3):
        slope = measured_slope(eps, [scaled_difference_measure(sin_g, k, e) for e in eps])
        res.append(CheckResult(f"scaled difference bounded, k={k}", slope, -0.15, slope >= -0.15))
    for k in (1, 2, 3):
        slope = measured_slope(eps, [filtered_carrier_measure(sin_g, k, e) for e in eps])
        res.append(CheckResult(f"filtered carrier (1+sin(t/2)) cos, k={k}", slope, k - 0.2, slope >= k - 0.2))
    return res


def _identity_checks() -> list:
    eps, t = 0.01, 1.0
    res = []
    cases = [(1, HarmonicCarrier.from_polynomial([1.0])), (2, HarmonicCarrier.from_polynomial([1.0, 1.0]))]
    for k, g in cases:
        phi = BumpKernel(3 * eps, k + 2)
        ns = [250, 500, 1000, 2000]
        r = [check_appendix_identity(phi, g, k, eps, t, n) for n in ns]
        ratio = min(a / b if b > 0 else float("inf") for a, b in zip(r, r[1:]))
        res.append(CheckResult(f"derivative identity k={k} halving ratio", ratio, 4.0, ratio >= 4.0))
        fine = check_appendix_identity(phi, g, k, eps, t, 100_000)
        res.append(CheckResult(f"derivative identity k={k} residual at 1e5 points", fine, 1e-6, fine < 1e-6))
    return res
