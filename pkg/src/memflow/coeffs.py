"""Expansion coefficients ``h_l`` and ``p_l`` of the memory flow.

``h_l`` is a finite combination of derivatives of iterated convolutions and
is read from a ``ConvTable``; ``p_l`` is a polynomial in ``t`` whose
coefficients come from Taylor data of the iterated convolutions at 0.  For
exponential kernels ``alpha * e^{lam t}`` closed forms are available and serve
as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from memflow.conv import ConvTable, Grid, conv_taylor_table, iterated_conv_table
from memflow.errors import CapError, EnvelopeError, MemflowError
from memflow.kernel import MemoryKernel

TAYLOR_EXTRA = 6

Coeff = Callable[[np.ndarray], np.ndarray]


# -- index sets ---------------------------------------------------------------


def h_index_set(l: int) -> list[tuple[int, int]]:
    """Pairs ``(j, k)`` with ``h_l = (-1)^l sum C(l, k) (M^{*j})^(k)``, ``k = l - j``."""
    return [(j, l - j) for j in range(1, l + 1)]


def p_index_set(l: int) -> list[tuple[int, int]]:
    """Pairs ``(j, m)`` with ``j >= 1``, ``max(0, 2j - l - 1) <= m <= j``."""
    return [(j, m) for j in range(1, l + 2) for m in range(max(0, 2 * j - l - 1), j + 1)]


def exp_h_index_set(l: int) -> list[tuple[int, int, int]]:
    """Triples ``(j, k, m)`` with ``k - m + 2j = l + 1``, ``m + k <= l - 1``."""
    out = []
    for j in range(1, l + 1):
        for m in range(0, l):
            k = l + 1 - 2 * j + m
            if k >= 0 and m + k <= l - 1:
                out.append((j, k, m))
    return out


def exp_p_index_set(l: int) -> list[tuple[int, int, int]]:
    """Triples ``(j, k, m)`` with ``k - m + 2j = l + 1``, ``m + k <= l + 1``."""
    out = []
    for j in range(1, l + 2):
        for m in range(0, l + 2):
            k = l + 1 - 2 * j + m
            if k >= 0 and m + k <= l + 1:
                out.append((j, k, m))
    return out


def exp_f_index_set(N: int, j: int) -> list[tuple[int, int, int]]:
    """``(b1, b2, b3)`` with ``b1 + b2 + b3 = N``, ``b1 <= j``, ``b2 <= j - 1``."""
    return [
        (b1, b2, N - b1 - b2)
        for b1 in range(min(N, j) + 1)
        for b2 in range(min(N - b1, j - 1) + 1)
    ]


# -- evaluable coefficients ----------------------------------------------------


@dataclass(frozen=True)
class TableCoeff:
    """``h_l`` evaluated from tabulated iterated-convolution derivatives."""

    table: ConvTable = field(repr=False)
    l: int

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.table.grid.T * (1 + 1e-12)):
            raise EnvelopeError(f"h_{self.l} needs 0 <= t <= {self.table.grid.T}")
        out = np.zeros(t.shape)
        for j, k in h_index_set(self.l):
            out = out + math.comb(self.l, k) * self.table.at(k, t)[j]
        out = (-1) ** self.l * out
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ZeroCoeff:
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return 0.0 if t.ndim == 0 else np.zeros(t.shape)


@dataclass(frozen=True)
class ExpPolyCoeff:
    """``e^{lam t} * poly(t)``."""

    poly: Polynomial
    lam: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.exp(self.lam * t) * self.poly(t)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CoeffSeries:
    """``h_0..h_{N-1}`` and ``p_0..p_{N-1}`` as callables of ``t``."""

    kernel: MemoryKernel
    N: int
    h: tuple[Coeff, ...] = field(repr=False)
    p: tuple[Coeff, ...] = field(repr=False)

    def __post_init__(self):
        if self.N < 1:
            raise MemflowError("N must be positive")
        if len(self.h) != self.N or len(self.p) != self.N:
            raise MemflowError("need exactly N coefficient functions of each kind")

    def h_values(self, t) -> np.ndarray:
        """Array of shape ``(N,) + t.shape``."""
        return np.array([np.asarray(f(t), dtype=float) for f in self.h])

    def p_values(self, t) -> np.ndarray:
        return np.array([np.asarray(f(t), dtype=float) for f in self.p])


def _table_for(kernel: MemoryKernel, N: int, grid: Grid) -> ConvTable:
    K = int(min(max(N - 2, 0) + TAYLOR_EXTRA, kernel.smoothness_order))
    if K < N - 2:
        raise CapError(f"h_{N - 1} needs derivative order {N - 2}")
    return iterated_conv_table(kernel, max(N - 1, 1), K, grid)


def h_series(kernel: MemoryKernel, N: int, grid: Grid | None = None, table: ConvTable | None = None) -> tuple[Coeff, ...]:
    """``h_0..h_{N-1}``; reuses ``table`` when it is large enough."""
    if N < 1:
        raise MemflowError("N must be positive")
    if N > 1:
        kernel.check_order(N - 2)
    if table is None or table.J < N - 1 or table.K < N - 2:
        table = _table_for(kernel, N, grid or Grid(2.0, 2000))
    return (ZeroCoeff(),) + tuple(TableCoeff(table, l) for l in range(1, N))


def p_polynomials(kernel: MemoryKernel, N: int) -> tuple[Polynomial, ...]:
    """Exact monomial coefficients of ``p_0..p_{N-1}``."""
    if N < 1:
        raise MemflowError("N must be positive")
    kernel.check_order(N - 1)
    D = conv_taylor_table(kernel, N, N - 1)
    polys = []
    for l in range(N):
        c = np.zeros(l + 2)
        for j, m in p_index_set(l):
            c[m] += math.comb(l, l - j + m) * D[j, l - j + m] * (-1) ** m / math.factorial(m)
        polys.append(Polynomial((-1) ** (l + 1) * c))
    return tuple(polys)


def p_series(kernel: MemoryKernel, N: int) -> tuple[Coeff, ...]:
    return tuple(ExpPolyCoeff(poly) for poly in p_polynomials(kernel, N))


def coeff_series(kernel: MemoryKernel, N: int, grid: Grid | None = None, table: ConvTable | None = None) -> CoeffSeries:
    return CoeffSeries(kernel, N, h_series(kernel, N, grid, table), p_series(kernel, N))


# -- exponential kernels ------------------------------------------------------


def exp_h_poly(alpha: float, lam: float, l: int) -> Polynomial:
    """``e^{-lam t} h_l(t)`` for ``M = alpha e^{lam t}``.

    The weight ``C(l-j, k)`` is the Leibniz multiplicity of ``lam^k`` in the
    ``(l-j)``-th derivative of ``t^{j-1} e^{lam t}``.
    """
    c = np.zeros(max(l, 1))
    for j, k, m in exp_h_index_set(l):
        c[m] += math.comb(l, l - j) * math.comb(l - j, k) * alpha**j * lam**k / math.factorial(m)
    return Polynomial((-1) ** l * c)


def exp_p_poly(alpha: float, lam: float, l: int) -> Polynomial:
    """``p_l(t)`` for ``M = alpha e^{lam t}``; weight ``C(l-j+m, j-1)`` as above."""
    c = np.zeros(l + 2)
    for j, k, m in exp_p_index_set(l):
        w = math.comb(l, l - j + m) * math.comb(l - j + m, j - 1)
        c[m] += w * alpha**j * lam**k * (-1) ** m / math.factorial(m)
    return Polynomial((-1) ** (l + 1) * c)


def exp_flow_factor(alpha: float, lam: float, N: int, t, s, j_max: int = 60):
    """``F_N(t, s)`` with ``d_s^N K_M = (-1)^N N! e^{lam (t-s)} F_N`` for exponential kernels.

    The multinomial ``1/(b1! b2! b3!)`` splits ``d_s^N`` over the three
    ``s``-dependent factors of each series term.
    """
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    out = np.zeros(s.shape)
    for j in range(1, j_max + 1):
        for b1, b2, b3 in exp_f_index_set(N, j):
            w = lam**b3 * alpha**j / (math.factorial(b1) * math.factorial(b2) * math.factorial(b3))
            out = out + w * (-s) ** (j - b1) / math.factorial(j - b1) * (t - s) ** (j - 1 - b2) / math.factorial(j - 1 - b2)
    return out


def closed_form_exp(alpha: float, lam: float, N: int) -> CoeffSeries:
    """Coefficient series of ``M = alpha e^{lam t}`` from closed forms."""
    if alpha == 0:
        raise MemflowError("alpha must be nonzero")
    kernel = MemoryKernel.exponential(alpha, lam)
    h = (ZeroCoeff(),) + tuple(ExpPolyCoeff(exp_h_poly(alpha, lam, l), lam) for l in range(1, N))
    p = tuple(ExpPolyCoeff(exp_p_poly(alpha, lam, l)) for l in range(N))
    return CoeffSeries(kernel, N, h, p)


# -- diagnostics ----------------------------------------------------------------


def count_near_zero(values: Sequence[float], tol: float = 1e-12) -> int:
    """Sample points that are zeros: exact zeros, sign changes, or ``|v| <= tol``
    local minima (a double root that touches zero)."""
    v = np.asarray(values, dtype=float)
    small = np.abs(v) <= tol * max(1.0, float(np.max(np.abs(v))))
    flips = np.signbit(v[:-1]) != np.signbit(v[1:])
    return int(np.count_nonzero(small) + np.count_nonzero(flips & ~small[:-1] & ~small[1:]))


def initial_h_vanish(cs: CoeffSeries, tol: float = 1e-10) -> bool:
    """True iff ``max_l |h_l(0)| <= tol``."""
    return bool(np.max(np.abs(cs.h_values(0.0))) <= tol)


def taylor_vanish(kernel: MemoryKernel, N: int, tol: float = 1e-10) -> bool:
    """True iff ``M(0) = ... = M^{(N-2)}(0) = 0`` to ``tol``."""
    return all(abs(kernel.taylor(k)) <= tol for k in range(N - 1))


def boundary_crosscheck(fk, cs: CoeffSeries, l: int, t) -> tuple[float, float]:
    """Worst ``|d_s^l K(t,0) - h_l(t)|`` and ``|d_s^l K(t,t) + p_l(t)|`` over ``t``."""
    if not 0 <= l < cs.N:
        raise MemflowError(f"l must lie in [0, {cs.N - 1}]")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    rh = np.abs(fk.partial(0, l, t, np.zeros_like(t)) - cs.h[l](t))
    rp = np.abs(fk.partial(0, l, t, t) + cs.p[l](t))
    return float(np.max(rh)), float(np.max(rp))
