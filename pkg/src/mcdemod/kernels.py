"""Iterated moving-average kernels and their compensated combinations.

The order-``k`` kernel ``K_k`` is the ``k``-fold convolution of the box
``K_1 = (1/eps) * 1_[0, eps]`` with itself, i.e. a scaled Irwin-Hall density
(cardinal B-spline). The recursion ``K_k = K_{k-1} * K`` is read with
``K = K_1``; that is the only reading under which ``K_k`` is the k-times
iterated moving average.

A compensated kernel is ``sum_i c_i K_k(t - i*eps)``, ``i = 0..k-1``, with the
``c_i`` chosen so that the combination has unit mass and vanishing moments of
orders ``1..k-1``. Convolution with it leaves polynomials of degree ``< k``
unchanged.

Kernel construction is exact: pieces are built with rational arithmetic in the
normalized variable ``x = t / eps`` and only converted to floats at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "PiecewisePolyKernel",
    "CompensatedKernel",
    "FirTaps",
    "uniform_kernel",
    "iterated_kernel",
    "kernel_moment",
    "compensation_coefficients",
    "compensated_kernel",
    "discretize",
    "polynomial_reproduction_check",
    "kernel_to_dict",
]

#: Smallest number of samples per carrier period accepted by :func:`discretize`.
MIN_OVERSAMPLING = 16


# -- exact rational polynomial helpers (ascending coefficients) -------------

def _padd(p, q):
    n = max(len(p), len(q))
    p = list(p) + [Fraction(0)] * (n - len(p))
    q = list(q) + [Fraction(0)] * (n - len(q))
    return [a + b for a, b in zip(p, q)]


def _pscale(p, s):
    return [a * s for a in p]


def _pint(p):
    """Antiderivative vanishing at 0."""
    return [Fraction(0)] + [a / (i + 1) for i, a in enumerate(p)]


def _peval(p, x):
    acc = Fraction(0)
    for a in reversed(p):
        acc = acc * x + a
    return acc


@lru_cache(maxsize=None)
def _bspline_pieces(k: int) -> tuple[tuple[Fraction, ...], ...]:
    """Pieces of the unit-width order-``k`` B-spline on ``[j, j+1)``.

    Piece ``j`` is a polynomial in the local variable ``v = x - j``.
    """
    if k == 1:
        return ((Fraction(1),),)
    prev = _bspline_pieces(k - 1)
    prims = [_pint(list(p)) for p in prev]
    # cumulative mass of the previous kernel at integer nodes
    mass = [Fraction(0)]
    for pr in prims:
        mass.append(mass[-1] + _peval(pr, Fraction(1)))

    def cumulative(j):
        # F(j + v) as a polynomial in v
        if j < 0:
            return [Fraction(0)]
        if j >= len(prev):
            return [mass[-1]]
        return _padd([mass[j]], prims[j])

    pieces = []
    for j in range(k):
        pieces.append(tuple(_padd(cumulative(j), _pscale(cumulative(j - 1), -1))))
    return tuple(pieces)


@lru_cache(maxsize=None)
def _bspline_moment(k: int, j: int) -> Fraction:
    """Exact ``int x^j B_k(x) dx`` for the unit-width B-spline."""
    total = Fraction(0)
    for idx, piece in enumerate(_bspline_pieces(k)):
        # int_0^1 (idx + v)^j p(v) dv
        for l in range(j + 1):
            binom = math.comb(j, l) * Fraction(idx) ** (j - l)
            for p_exp, coef in enumerate(piece):
                total += binom * coef / (l + p_exp + 1)
    return total


def _validate_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise ValueError(f"epsilon must be a positive finite number, got {epsilon!r}")
    return epsilon


def _validate_order(k: int) -> int:
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ValueError(f"kernel order k must be a positive integer, got {k!r}")
    return int(k)


@dataclass(frozen=True, eq=False)
class PiecewisePolyKernel:
    """Exact piecewise-polynomial representation of ``K_k``.

    ``piece_coeffs[j]`` holds ascending coefficients of the polynomial in
    ``(t - breakpoints[j])`` (seconds) valid on ``[breakpoints[j], breakpoints[j+1])``.
    """

    epsilon: float
    order_k: int
    breakpoints: np.ndarray
    piece_coeffs: tuple[np.ndarray, ...]
    _normalized: tuple[np.ndarray, ...]

    @property
    def support(self) -> tuple[float, float]:
        return 0.0, self.order_k * self.epsilon

    @property
    def pieces(self) -> list[tuple[tuple[float, float], np.ndarray]]:
        b = self.breakpoints
        return [((b[j], b[j + 1]), c) for j, c in enumerate(self.piece_coeffs)]

    def _locate(self, t):
        x = np.asarray(t, dtype=float) / self.epsilon
        j = np.floor(x)
        inside = (j >= 0) & (j < self.order_k)
        jj = np.where(inside, j, 0).astype(int)
        return x - j, jj, inside

    def __call__(self, t):
        v, jj, inside = self._locate(t)
        out = np.zeros(np.shape(v))
        for j, coef in enumerate(self._normalized):
            sel = inside & (jj == j)
            if np.any(sel):
                out[sel] = np.polynomial.polynomial.polyval(v[sel], coef)
        out = out / self.epsilon
        return out if out.ndim else float(out)

    def cumulative(self, t):
        """``int_{-inf}^t K(s) ds``; exact up to float evaluation of the antiderivatives."""
        x = np.asarray(t, dtype=float) / self.epsilon
        j = np.floor(x)
        out = np.where(x >= self.order_k, 1.0, 0.0)
        inside = (j >= 0) & (j < self.order_k)
        v = x - j
        for idx, (prim, base) in enumerate(_antiderivatives(self.order_k)):
            sel = inside & (j == idx)
            if np.any(sel):
                out[sel] = base + np.polynomial.polynomial.polyval(v[sel], prim)
        return out if out.ndim else float(out)

    def integrate(self, a, b):
        return self.cumulative(b) - self.cumulative(a)

    def moment(self, j: int) -> float:
        return float(_bspline_moment(self.order_k, j)) * self.epsilon**j


@lru_cache(maxsize=None)
def _antiderivatives(k: int) -> tuple[tuple[np.ndarray, float], ...]:
    out = []
    mass = Fraction(0)
    for piece in _bspline_pieces(k):
        prim = _pint(list(piece))
        out.append((np.array([float(c) for c in prim]), float(mass)))
        mass += _peval(prim, Fraction(1))
    return tuple(out)


def uniform_kernel(epsilon: float) -> PiecewisePolyKernel:
    """The box kernel ``K_1``: value ``1/eps`` on ``[0, eps)``."""
    return iterated_kernel(1, epsilon)


def iterated_kernel(k: int, epsilon: float) -> PiecewisePolyKernel:
    """``K_k``: ``k`` pieces of degree ``k - 1`` supported on ``[0, k*eps]``."""
    k = _validate_order(k)
    epsilon = _validate_epsilon(epsilon)
    normalized = tuple(np.array([float(c) for c in p]) for p in _bspline_pieces(k))
    seconds = tuple(
        np.array([float(c) / epsilon ** (p + 1) for p, c in enumerate(piece)])
        for piece in _bspline_pieces(k)
    )
    breakpoints = np.arange(k + 1) * epsilon
    return PiecewisePolyKernel(epsilon, k, breakpoints, seconds, normalized)


@dataclass(frozen=True, eq=False)
class CompensatedKernel:
    """``sum_i coefficients[i] * base(t - i*eps)``."""

    base: PiecewisePolyKernel
    coefficients: np.ndarray

    @property
    def epsilon(self) -> float:
        return self.base.epsilon

    @property
    def order_k(self) -> int:
        return self.base.order_k

    @property
    def shifts(self) -> np.ndarray:
        return np.arange(self.order_k) * self.epsilon

    @property
    def support(self) -> tuple[float, float]:
        return 0.0, (2 * self.order_k - 1) * self.epsilon

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = sum(c * np.asarray(self.base(t - s)) for c, s in zip(self.coefficients, self.shifts))
        return out if np.ndim(out) else float(out)

    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        out = sum(c * np.asarray(self.base.cumulative(t - s)) for c, s in zip(self.coefficients, self.shifts))
        return out if np.ndim(out) else float(out)

    def integrate(self, a, b):
        return self.cumulative(b) - self.cumulative(a)

    def moment(self, j: int) -> float:
        # int t^j K(t - s) dt = sum_l C(j,l) s^(j-l) mu_l
        base = [self.base.moment(l) for l in range(j + 1)]
        total = 0.0
        for c, s in zip(self.coefficients, self.shifts):
            total += c * sum(math.comb(j, l) * s ** (j - l) * base[l] for l in range(j + 1))
        return total


def kernel_moment(K, j: int) -> float:
    """Exact ``int t^j K(t) dt`` for either kernel type."""
    if int(j) != j or j < 0:
        raise ValueError(f"moment order must be a nonnegative integer, got {j!r}")
    return K.moment(int(j))


@lru_cache(maxsize=None)
def _moment_matrix_exact(k: int) -> tuple:
    """Moments of the shifted kernels in units of eps, as exact rationals."""
    mu = [_bspline_moment(k, l) for l in range(k)]
    return tuple(
        tuple(sum(math.comb(j, l) * Fraction(i) ** (j - l) * mu[l] for l in range(j + 1)) for i in range(k))
        for j in range(k)
    )


def _moment_matrix(k: int) -> np.ndarray:
    return np.array([[float(a) for a in row] for row in _moment_matrix_exact(k)])


@lru_cache(maxsize=None)
def _coefficients_exact(k: int) -> tuple:
    # Gauss-Jordan over the rationals; the matrix is Vandermonde-like and nonsingular
    A = [list(row) + [Fraction(int(j == 0))] for j, row in enumerate(_moment_matrix_exact(k))]
    for c in range(k):
        p = next(r for r in range(c, k) if A[r][c] != 0)
        A[c], A[p] = A[p], A[c]
        A[c] = [v / A[c][c] for v in A[c]]
        for r in range(k):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return tuple(row[k] for row in A)


def compensation_coefficients(k: int, epsilon: float = 1.0) -> np.ndarray:
    """Shift weights ``c_0..c_{k-1}`` giving unit mass and zero moments ``1..k-1``.

    Moment ``j`` scales as ``eps**j`` on every row, so the system is solved in
    units of ``eps`` and the weights do not depend on ``epsilon``. The solve is
    exact in rationals and rounded once; :func:`compensated_kernel` re-checks
    the moments in seconds.
    """
    k = _validate_order(k)
    _validate_epsilon(epsilon)
    return np.array([float(c) for c in _coefficients_exact(k)])


def compensated_kernel(k: int, epsilon: float) -> CompensatedKernel:
    K = CompensatedKernel(iterated_kernel(k, epsilon), compensation_coefficients(k, epsilon))
    A = _moment_matrix(K.order_k)
    for j in range(K.order_k):
        target = 1.0 if j == 0 else 0.0
        # tolerance follows the size of the cancelling terms
        scale = max(1.0, float(np.abs(K.coefficients) @ np.abs(A[j])))
        if abs(K.moment(j) - target) > 1e-10 * scale * epsilon**j:
            raise ArithmeticError(f"moment {j} of compensated kernel k={k} is {K.moment(j)!r}")
    return K


@dataclass(frozen=True, eq=False)
class FirTaps:
    """Causal FIR realization: ``out[m] = sum_l weights[l] * x[m - l]``."""

    sample_period: float
    weights: np.ndarray

    def __len__(self):
        return len(self.weights)

    def apply(self, x):
        """Causal filtering of a sample sequence (zero initial state)."""
        x = np.asarray(x, dtype=float)
        return np.convolve(x, self.weights)[: len(x)]


def discretize(K, delta: float, match_moments: bool = True) -> FirTaps:
    """Area-sampled FIR taps of a kernel on the grid ``m * delta``.

    Tap ``m`` integrates the kernel over ``[m*delta, (m+1)*delta]``. Plain area
    sampling behaves like the continuous convolution evaluated half a sample
    later, which biases low-order moments by ``O(delta)``. With
    ``match_moments`` (compensated kernels, ``k >= 2``) the shift weights are
    re-solved against the discrete moments ``sum_m w_m (m*delta)^j`` so that
    sampled polynomials of degree ``< k`` are reproduced exactly. Each shifted
    copy stays area-sampled, so the taps still sum to one and still average
    out any sequence that is periodic over ``eps/delta`` samples with zero mean.
    """
    delta = float(delta)
    eps = K.epsilon
    if not np.isfinite(delta) or delta <= 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    if delta > eps / MIN_OVERSAMPLING * (1 + 1e-12):
        raise ValueError(
            f"delta={delta!r} gives fewer than {MIN_OVERSAMPLING} samples per period eps={eps!r}"
        )
    lo, hi = K.support
    n_taps = int(math.ceil((hi - lo) / delta - 1e-9))
    edges = np.arange(n_taps + 1) * delta
    if isinstance(K, PiecewisePolyKernel):
        return FirTaps(delta, np.diff(K.cumulative(edges)))
    if not match_moments or K.order_k == 1:
        return FirTaps(delta, np.diff(K.cumulative(edges)))
    k = K.order_k
    cols = np.array([np.diff(K.base.cumulative(edges - s)) for s in K.shifts])
    m = np.arange(n_taps) * (delta / eps)
    A = np.array([(cols * m**j).sum(axis=1) for j in range(k)])
    rhs = np.zeros(k)
    rhs[0] = 1.0
    c = np.linalg.solve(A, rhs)
    return FirTaps(delta, c @ cols)


def polynomial_reproduction_check(K: CompensatedKernel, degree: int) -> float:
    """Largest coefficient of ``(K * p) - p`` over monomials ``p = t^d``, ``d <= degree``.

    Coefficients are expressed with ``t`` measured in units of ``eps`` so the
    value is scale free. Zero up to round-off whenever ``degree < k``.
    """
    if int(degree) != degree or degree < 0:
        raise ValueError(f"degree must be a nonnegative integer, got {degree!r}")
    if degree >= K.order_k:
        raise ValueError(
            f"a compensated kernel of order {K.order_k} only reproduces degrees <= {K.order_k - 1}; "
            f"degree {degree} picks up an O(eps^{K.order_k}) term"
        )
    eps = K.epsilon
    mu = [K.moment(l) / eps**l for l in range(degree + 1)]
    worst = 0.0
    for d in range(degree + 1):
        # (K * t^d)(t) = sum_l C(d,l) (-1)^l mu_l t^(d-l)
        worst = max(worst, abs(mu[0] - 1.0))
        for l in range(1, d + 1):
            worst = max(worst, abs(math.comb(d, l) * mu[l]))
    return worst


def kernel_to_dict(K: CompensatedKernel, taps: FirTaps | None = None) -> dict:
    out = {
        "k": K.order_k,
        "epsilon": K.epsilon,
        "coefficients": [float(c) for c in K.coefficients],
        "breakpoints": [float(b) for b in K.base.breakpoints],
        "piece_coeffs": [[float(c) for c in p] for p in K.base.piece_coeffs],
    }
    if taps is not None:
        out["delta"] = taps.sample_period
        out["taps"] = [float(w) for w in taps.weights]
    return out
