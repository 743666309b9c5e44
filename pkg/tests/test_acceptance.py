"""Acceptance criteria, one test each, at their stated tolerances.

Each test records a one-line PASS/FAIL verdict before asserting. Under pytest
the lines are printed in the terminal summary; run this file directly
(``python3 tests/test_acceptance.py``) to see each line as it is decided.
"""

from __future__ import annotations

import math
import time
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from mcdemod.analysis import (
    BumpKernel,
    HarmonicCarrier,
    check_appendix_identity,
    kappa_trace,
    backward_difference_measure,
    filtered_carrier_measure,
    measured_slope,
    run_cell,
    run_sweep,
)
from mcdemod.carriers import CarrierBasis, constant_carrier
from mcdemod.config import bundled_config_path, parse_config
from mcdemod.demod import demodulate_batch
from mcdemod.kernels import compensated_kernel, compensation_coefficients, kernel_moment
from mcdemod.siggen import synthesize

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # pragma: no cover - direct script use without tests/ on the path
    ACCEPTANCE_LINES = {}

# max kappa of the benchmark mean-product matrix over t in [1, 5], from the
# quadrature oracle (2001 points, 1024 and 4096 nodes agree: 231.70 at t=3.15),
# frozen with ~8% headroom
KAPPA_BOUND = 250.0


def record(n: int, title: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  criterion {n:2d} {title}: {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)


@pytest.fixture(scope="module")
def config():
    return parse_config(bundled_config_path())


@pytest.fixture(scope="module")
def scenario(config):
    return config.build()


# -- 1 -----------------------------------------------------------------------


def test_c01_compensation_coefficients():
    t0 = time.perf_counter()
    c2 = compensation_coefficients(2)
    c3 = compensation_coefficients(3)
    elapsed = time.perf_counter() - t0
    e2 = float(np.max(np.abs(c2 - [2.0, -1.0])))
    e3 = float(np.max(np.abs(c3 - [4.25, -5.0, 1.75])))
    ok = e2 <= 1e-12 and e3 <= 1e-12 and elapsed < 1.0
    record(1, "compensation coefficients", ok,
           f"k=2 {list(map(float, c2))} (err {e2:.1e}), k=3 {list(map(float, c3))} (err {e3:.1e}), {elapsed:.3f} s")
    assert ok


# -- 2 -----------------------------------------------------------------------


def test_c02_convergence_orders(config):
    t0 = time.perf_counter()
    results = run_sweep(config, [1, 2, 3], "auto")
    elapsed = time.perf_counter() - t0
    by_k = {r.k: r for r in results}
    failed_cells = {k: r.cell_errors for k, r in by_k.items() if r.cell_errors}
    slopes_ok = all(abs(by_k[k].fitted_slope - k) <= 0.15 for k in (1, 2, 3))
    order_bad = []
    for e in by_k[1].epsilons:
        if e <= 1e-2 + 1e-15:
            errs = [dict(zip(by_k[k].epsilons, by_k[k].l2_errors)).get(e, math.nan) for k in (1, 2, 3)]
            if not (errs[0] > errs[1] > errs[2]):
                order_bad.append(f"eps={e:.4g}: " + " ".join(f"{v:.3g}" for v in errs))
    ok = slopes_ok and not order_bad and not failed_cells and elapsed < 300
    slopes = ", ".join(f"k={k} {by_k[k].fitted_slope:.3f}" for k in (1, 2, 3))
    detail = f"slopes {slopes} (need k +/- 0.15); {elapsed:.0f} s"
    if order_bad:
        detail += "; ordering violated at " + "; ".join(order_bad)
    if failed_cells:
        detail += f"; failed cells {failed_cells}"
    record(2, "convergence orders", ok, detail)
    for r in results:
        print(f"  k={r.k}: " + ", ".join(f"{e:.4g}->{v:.3e}" for e, v in zip(r.epsilons, r.l2_errors)))
    assert ok


# -- 3 -----------------------------------------------------------------------


def test_c03_disturbance_rejection(scenario):
    sc = replace(scenario, delta_divisor=1000)
    on = run_cell(sc, 2, 0.01)
    off = run_cell(replace(sc, disturbance=None), 2, 0.01)
    rel = abs(on - off) / off
    ok = rel < 1e-4
    record(3, "disturbance rejection", ok, f"L2 on {on:.6e}, off {off:.6e}, relative difference {rel:.2e} (need < 1e-4)")
    assert ok


# -- 4 -----------------------------------------------------------------------


def _quad_sine(t, s):
    return (1 + np.asarray(t) ** 2 / 4) * np.sin(2 * np.pi * np.asarray(s))


def _exact_amplitude_difference(k: int, t: Fraction, eps: Fraction) -> Fraction:
    # the fast factor is identical at t - i*eps, so Delta_k g = sin(2 pi t/eps) * Delta_k a
    a = lambda x: 1 + x * x / 4
    return sum((-1) ** i * math.comb(k, i) * a(t - i * eps) for i in range(k + 1))


def test_c04_backward_difference():
    t0 = time.perf_counter()
    eps = np.logspace(-2, -4, 9)
    slopes, parts = [], []
    for k in (1, 2, 3):
        vals = [backward_difference_measure(_quad_sine, k, e) for e in eps]
        slope = measured_slope(eps, vals)
        # rounding floor for 2^k terms of size <= 1.25
        if max(vals) <= 64 * np.finfo(float).eps * 2**k * 1.25:
            slope = math.inf
        slopes.append(slope)
        parts.append(f"k={k} slope {slope:.3f} (max {max(vals):.1e})")
    # exact rational check: Delta_k of the quadratic amplitude is eps*(2t-eps)/4, eps^2/2 and 0
    t = Fraction(1)
    exact = [_exact_amplitude_difference(k, t, Fraction(1, 1000)) for k in (1, 2, 3)]
    exact_ok = exact[0] == Fraction(1, 1000) * (2 - Fraction(1, 1000)) / 4 and exact[1] == Fraction(1, 2_000_000) \
        and exact[2] == 0
    elapsed = time.perf_counter() - t0
    ok = all(s >= k - 0.15 for k, s in zip((1, 2, 3), slopes)) and exact_ok and elapsed < 10
    record(4, "backward-difference rate", ok,
           "; ".join(parts) + f"; exact Delta_3 of amplitude = {exact[2]}; {elapsed:.2f} s")
    assert ok


# -- 5 -----------------------------------------------------------------------


def _amp_cos(t, s):
    return (1 + np.sin(np.asarray(t) / 2)) * np.cos(2 * np.pi * np.asarray(s))


def test_c05_filtered_carrier():
    t0 = time.perf_counter()
    eps = np.logspace(-2, -4, 9)
    slopes = [measured_slope(eps, [filtered_carrier_measure(_amp_cos, k, e) for e in eps]) for k in (1, 2, 3)]
    elapsed = time.perf_counter() - t0
    ok = all(s >= k - 0.2 for k, s in zip((1, 2, 3), slopes)) and elapsed < 30
    record(5, "filtered-carrier rate", ok,
           ", ".join(f"k={k} slope {s:.3f}" for k, s in zip((1, 2, 3), slopes)) + f" (need >= k - 0.2); {elapsed:.2f} s")
    assert ok


# -- 6 -----------------------------------------------------------------------


def _irwin_hall_moments(k: int, jmax: int) -> list:
    # moments of U_1 + ... + U_k by repeated binomial convolution
    m = [Fraction(1)] + [Fraction(0)] * jmax
    u = [Fraction(1, l + 1) for l in range(jmax + 1)]
    for _ in range(k):
        m = [sum(math.comb(n, l) * m[l] * u[n - l] for l in range(n + 1)) for n in range(jmax + 1)]
    return m


def test_c06_polynomial_reproduction():
    worst_exact = Fraction(0)
    worst_num = 0.0
    for k in (1, 2, 3, 4):
        c = [Fraction(float(x)) for x in compensation_coefficients(k)]
        mu = _irwin_hall_moments(k, k - 1)
        # moments of K~ in units of eps: sum_i c_i E[(X + i)^j]
        M = [sum(ci * sum(math.comb(j, l) * Fraction(i) ** (j - l) * mu[l] for l in range(j + 1))
                 for i, ci in enumerate(c)) for j in range(k)]
        for deg in range(k):
            for t in (Fraction(-3), Fraction(1, 2), Fraction(7, 3)):
                # (K~ * t^deg)(t) - t^deg = sum_j C(deg,j) t^(deg-j) (-1)^j M_j - t^deg
                r = sum(math.comb(deg, j) * t ** (deg - j) * (-1) ** j * M[j] for j in range(deg + 1)) - t**deg
                worst_exact = max(worst_exact, abs(r))
        K = compensated_kernel(k, 1.0)
        worst_num = max(worst_num, abs(kernel_moment(K, 0) - 1),
                        *(abs(kernel_moment(K, j)) for j in range(1, k)))
    ok = worst_exact <= 1e-12 and worst_num <= 1e-12
    record(6, "polynomial reproduction", ok,
           f"max |(K~*p)-p| over deg <= k-1, k=1..4: {float(worst_exact):.1e} (rational), "
           f"max kernel moment defect {worst_num:.1e}")
    assert ok


# -- 7 -----------------------------------------------------------------------


def test_c07_causality(scenario):
    rng = np.random.default_rng(20240607)
    eps, N = 0.01, 20
    d = eps / N
    base = synthesize(scenario.encoded, scenario.S, scenario.disturbance, eps, d, (0.0, 0.3))
    t, y = base.times, base.values
    violations = 0
    for _ in range(100):
        k = int(rng.integers(1, 4))
        m = int(rng.integers(0, len(t) - 1))
        y2 = y.copy()
        y2[m + 1:] += rng.normal(0, 10, len(t) - m - 1)
        a = demodulate_batch(scenario.S, scenario.R, k, eps, d, (t, y))
        b = demodulate_batch(scenario.S, scenario.R, k, eps, d, (t, y2))
        same = (np.array_equal(a.z[: m + 1], b.z[: m + 1])
                and np.array_equal(a.kappa[: m + 1], b.kappa[: m + 1])
                and np.array_equal(a.valid[: m + 1], b.valid[: m + 1]))
        violations += not same
    ok = violations == 0
    record(7, "causality", ok, f"{violations} of 100 randomized trials changed an output at or before the cut")
    assert ok


# -- 8 -----------------------------------------------------------------------


def test_c08_constant_recovery():
    one = CarrierBasis((constant_carrier(1.0),))
    eps, d = 0.01, 0.01 / 50
    t = np.arange(5001) * d
    worst = 0.0
    for k in (1, 2, 3):
        for c in (3.7, -1.0e3, 2.5e-5):
            out = demodulate_batch(one, one, k, eps, d, (t, np.full_like(t, c)))
            L = (2 * k - 1) * 50
            assert out.valid[L:].all()
            worst = max(worst, float(np.max(np.abs(out.z[L:, 0] - c))) / abs(c))
    ok = worst <= 1e-10
    record(8, "constant recovery", ok, f"max relative error after warm-up {worst:.1e} (need <= 1e-10)")
    assert ok


# -- 9 -----------------------------------------------------------------------


def test_c09_condition_number_trace(scenario):
    tg, kap = kappa_trace(scenario.S, scenario.R, np.linspace(1.0, 5.0, 2001), quad_n=1024)
    eps, d = 0.01, 0.01 / 200
    sig = synthesize(scenario.encoded, scenario.S, scenario.disturbance, eps, d, (0.0, 5.0))
    out = demodulate_batch(scenario.S, scenario.R, 3, eps, d, sig)
    sel = out.t >= 1.0
    online = out.kappa[sel]
    ok = (np.all(np.isfinite(kap)) and kap.max() < KAPPA_BOUND
          and np.all(np.isfinite(online)) and online.max() < KAPPA_BOUND and out.valid[sel].all())
    record(9, "condition-number trace", ok,
           f"oracle max {kap.max():.1f} at t={tg[np.argmax(kap)]:.2f}, demodulator max {online.max():.1f} "
           f"(frozen bound {KAPPA_BOUND:g})")
    assert ok


# -- 10 ----------------------------------------------------------------------


def test_c10_derivative_identity():
    eps, t = 0.01, 1.0
    parts, ok = [], True
    for k in (1, 2):
        g = HarmonicCarrier.from_polynomial([1.0, 0.5, 0.25])
        phi = BumpKernel(3 * eps, k + 2)
        ns = [250, 500, 1000, 2000]
        r = [check_appendix_identity(phi, g, k, eps, t, n) for n in ns]
        ratio = min(a / b for a, b in zip(r, r[1:]))
        fine = check_appendix_identity(phi, g, k, eps, t, 100_000)
        ok &= ratio >= 4.0 and fine < 1e-6
        parts.append(f"k={k} min halving ratio {ratio:.2f}, residual at 1e5 points {fine:.1e}")
    record(10, "kernel-derivative identity", ok, "; ".join(parts))
    assert ok


if __name__ == "__main__":  # pragma: no cover
    import sys

    sys.exit(int(pytest.main([__file__, "-q", "-s"]) != 0))
