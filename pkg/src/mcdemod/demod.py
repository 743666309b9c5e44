"""Causal streaming demodulator.

Each sample is multiplied by the demodulating basis ``R``; the ``n`` products
``y r_j`` and the ``n^2`` products ``s_i r_j`` are pushed through one shared
FIR realization of the compensated kernel, and the estimate solves
``zhat^T M = a^T`` where ``a`` are the filtered ``y r_j`` and ``M`` the
filtered ``s_i r_j``.

Single-sample pushes and batch runs go through the same compiled loop, so a
batch run is bit-identical to pushing its samples one at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .carriers import CarrierBasis
from .kernels import FirTaps, compensated_kernel, discretize
from .siggen import SampledSignal, samples_per_period

try:
    from numba import njit
except ImportError:  # pragma: no cover - slow pure-Python fallback
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

__all__ = [
    "DemodOutput",
    "DemodSeries",
    "DemodulatorState",
    "new_demodulator",
    "push_sample",
    "demodulate_batch",
    "estimate_mean_product",
]

DEFAULT_KAPPA_THRESHOLD = 1e6
DEFAULT_KAPPA_EVERY = 10
_CHUNK = 1 << 16  # samples per compiled call; bounds the channel scratch array


@njit(nogil=True, cache=True)
def _run_bank(rtaps, chan, buf, filt, zlast, istate, fstate, n, kappa_every, kappa_threshold,
              out_z, out_kappa, out_valid):  # pragma: no cover - compiled
    # istate = [count, warmup_remaining]; fstate = [kappa]
    L = rtaps.shape[0]
    C = chan.shape[1]
    M = np.empty((n, n))
    A = np.empty((n, n))
    b = np.empty(n)
    for m in range(chan.shape[0]):
        p = istate[0] % L
        for c in range(C):
            buf[c, p] = chan[m, c]
            buf[c, p + L] = chan[m, c]
        for c in range(C):
            acc = 0.0
            for j in range(L):
                acc += rtaps[j] * buf[c, p + 1 + j]
            filt[c] = acc
        for i in range(n):
            for j in range(n):
                M[i, j] = filt[n + i * n + j]
        # zhat^T M = a^T  <=>  M^T zhat = a
        scale = 0.0
        for i in range(n):
            b[i] = filt[i]
            for j in range(n):
                A[i, j] = M[j, i]
                if abs(A[i, j]) > scale:
                    scale = abs(A[i, j])
        singular = not (scale > 0.0) or not np.isfinite(scale)
        if not singular:
            for col in range(n):
                piv = col
                for r in range(col + 1, n):
                    if abs(A[r, col]) > abs(A[piv, col]):
                        piv = r
                if not (abs(A[piv, col]) > 1e-14 * scale):
                    singular = True
                    break
                if piv != col:
                    for j in range(n):
                        tmp = A[col, j]
                        A[col, j] = A[piv, j]
                        A[piv, j] = tmp
                    tmp = b[col]
                    b[col] = b[piv]
                    b[piv] = tmp
                for r in range(col + 1, n):
                    f = A[r, col] / A[col, col]
                    for j in range(col, n):
                        A[r, j] -= f * A[col, j]
                    b[r] -= f * b[col]
        if not singular:
            for i in range(n - 1, -1, -1):
                acc = b[i]
                for j in range(i + 1, n):
                    acc -= A[i, j] * b[j]
                b[i] = acc / A[i, i]
            for i in range(n):
                zlast[i] = b[i]
        if singular:
            fstate[0] = np.inf
        elif istate[0] % kappa_every == 0:
            s = np.linalg.svd(M)[1]
            fstate[0] = s[0] / s[n - 1] if s[n - 1] > 0.0 else np.inf
        valid = istate[1] == 0 and not singular and fstate[0] <= kappa_threshold
        if istate[1] > 0:
            istate[1] -= 1
        istate[0] += 1
        for i in range(n):
            out_z[m, i] = zlast[i]
        out_kappa[m] = fstate[0]
        out_valid[m] = valid


@dataclass(frozen=True)
class DemodOutput:
    t: float
    z_estimate: np.ndarray
    kappa: float
    valid: bool

    def __eq__(self, other):
        if not isinstance(other, DemodOutput):
            return NotImplemented
        return (
            self.t == other.t
            and self.valid == other.valid
            and (self.kappa == other.kappa or (math.isnan(self.kappa) and math.isnan(other.kappa)))
            and np.array_equal(self.z_estimate, other.z_estimate, equal_nan=True)
        )


@dataclass
class DemodSeries:
    """Column-wise storage of many :class:`DemodOutput` records."""

    t: np.ndarray
    z: np.ndarray
    kappa: np.ndarray
    valid: np.ndarray

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return DemodSeries(self.t[i], self.z[i], self.kappa[i], self.valid[i])
        return DemodOutput(float(self.t[i]), self.z[i].copy(), float(self.kappa[i]), bool(self.valid[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_outputs(cls, outputs):
        outputs = list(outputs)
        n = len(outputs[0].z_estimate) if outputs else 0
        return cls(
            np.array([o.t for o in outputs], dtype=float),
            np.array([o.z_estimate for o in outputs], dtype=float).reshape(len(outputs), n),
            np.array([o.kappa for o in outputs], dtype=float),
            np.array([o.valid for o in outputs], dtype=bool),
        )


class DemodulatorState:
    """Sequential demodulator for one sample stream.

    Calls must arrive in time order, one sample period apart.
    """

    def __init__(self, S: CarrierBasis, R: CarrierBasis, k: int, epsilon: float, delta: float,
                 kappa_threshold: float = DEFAULT_KAPPA_THRESHOLD, kappa_every: int = DEFAULT_KAPPA_EVERY):
        if len(S) != len(R):
            raise ValueError(f"modulating basis has {len(S)} carriers, demodulating basis {len(R)}")
        if not kappa_threshold > 1:
            raise ValueError("kappa_threshold must exceed 1")
        if kappa_every < 1:
            raise ValueError("kappa_every must be a positive integer")
        samples_per_period(epsilon, delta)
        self.S, self.R = S, R
        self.n = len(S)
        self.order_k = int(k)
        self.epsilon = float(epsilon)
        self.sample_period = float(delta)
        self.kappa_threshold = float(kappa_threshold)
        self.kappa_every = int(kappa_every)
        self.fir_taps: FirTaps = discretize(compensated_kernel(k, epsilon), delta)
        L = len(self.fir_taps)
        n = self.n
        self._rtaps = np.ascontiguousarray(self.fir_taps.weights[::-1])
        self._buf = np.zeros((n + n * n, 2 * L))
        self._filt = np.zeros(n + n * n)
        self._zlast = np.zeros(n)
        self._istate = np.array([0, L], dtype=np.int64)
        self._fstate = np.array([np.inf])
        self._t_last = None

    @property
    def tap_count(self) -> int:
        return len(self.fir_taps)

    @property
    def warmup_remaining(self) -> int:
        return int(self._istate[1])

    @property
    def samples_seen(self) -> int:
        return int(self._istate[0])

    @property
    def y_channels(self) -> np.ndarray:
        """Ring buffers of ``y r_j`` (one row per channel, duplicated halves)."""
        return self._buf[: self.n, : self.tap_count]

    @property
    def sr_channels(self) -> np.ndarray:
        return self._buf[self.n:, : self.tap_count].reshape(self.n, self.n, self.tap_count)

    def _check_times(self, t: np.ndarray):
        if len(t) == 0:
            return
        d = self.sample_period
        steps = np.diff(t)
        if len(steps) and np.any(np.abs(steps - d) > 1e-6 * d):
            raise ValueError("sample times must advance by exactly one sample period")
        if self._t_last is not None and abs(t[0] - self._t_last - d) > 1e-6 * d:
            raise ValueError(f"sample at t={t[0]!r} does not follow t={self._t_last!r}")

    def _channels(self, t: np.ndarray, y: np.ndarray) -> np.ndarray:
        sigma = t / self.epsilon
        Sv = self.S(t, sigma)
        Rv = self.R(t, sigma)
        n = self.n
        chan = np.empty((len(t), n + n * n))
        chan[:, :n] = (y * Rv).T
        chan[:, n:] = (Sv[:, None, :] * Rv[None, :, :]).reshape(n * n, len(t)).T
        return chan

    def process(self, t, y) -> DemodSeries:
        """Push a block of consecutive samples."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if t.shape != y.shape:
            raise ValueError("t and y must have the same length")
        self._check_times(t)
        m = len(t)
        out_z = np.empty((m, self.n))
        out_kappa = np.empty(m)
        out_valid = np.empty(m, dtype=np.bool_)
        for a in range(0, m, _CHUNK):
            b = min(a + _CHUNK, m)
            chan = np.ascontiguousarray(self._channels(t[a:b], y[a:b]))
            _run_bank(self._rtaps, chan, self._buf, self._filt, self._zlast, self._istate, self._fstate,
                      self.n, self.kappa_every, self.kappa_threshold, out_z[a:b], out_kappa[a:b], out_valid[a:b])
        if m:
            self._t_last = float(t[-1])
        return DemodSeries(t, out_z, out_kappa, out_valid)

    def push(self, t: float, y: float) -> DemodOutput:
        return self.process([t], [y])[0]

    def mean_product_estimate(self) -> np.ndarray:
        if self.warmup_remaining > 0:
            raise RuntimeError(f"filter still warming up ({self.warmup_remaining} samples left)")
        return self._filt[self.n:].reshape(self.n, self.n).copy()


def new_demodulator(S: CarrierBasis, R: CarrierBasis, k: int, epsilon: float, delta: float,
                    kappa_threshold: float = DEFAULT_KAPPA_THRESHOLD,
                    kappa_every: int = DEFAULT_KAPPA_EVERY) -> DemodulatorState:
    return DemodulatorState(S, R, k, epsilon, delta, kappa_threshold, kappa_every)


def push_sample(state: DemodulatorState, t: float, y: float) -> DemodOutput:
    return state.push(t, y)


def estimate_mean_product(state: DemodulatorState) -> np.ndarray:
    """Current filtered ``S R^T``; approximates the sigma-mean to ``O(eps^k)``."""
    return state.mean_product_estimate()


def demodulate_batch(S: CarrierBasis, R: CarrierBasis, k: int, epsilon: float, delta: float, samples,
                     kappa_threshold: float = DEFAULT_KAPPA_THRESHOLD,
                     kappa_every: int = DEFAULT_KAPPA_EVERY) -> DemodSeries:
    """Demodulate a whole uniformly sampled record.

    ``samples`` is a :class:`SampledSignal` or a ``(t, y)`` pair of arrays.
    """
    if isinstance(samples, SampledSignal):
        t, y = samples.times, samples.values
        if abs(samples.delta - delta) > 1e-9 * delta:
            raise ValueError(f"signal sample period {samples.delta!r} differs from delta={delta!r}")
    else:
        t, y = samples
    state = new_demodulator(S, R, k, epsilon, delta, kappa_threshold, kappa_every)
    return state.process(t, y)
