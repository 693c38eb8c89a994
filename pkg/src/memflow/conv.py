"""Grid functions, trapezoidal convolution and tables of iterated convolutions.

``ConvTable`` stores ``d^k/dt^k M^{*j}`` on a uniform grid.  Derivatives are
never obtained by differencing grid data; they come from

    (f*g)^(k) = sum_{i<k} f^(i)(0) g^(k-1-i) + f^(k) * g,

applied with ``f = M`` (exact derivatives) and ``g = M^{*(j-1)}`` (already
tabulated), so only one trapezoidal convolution is needed per entry.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from memflow.errors import CapError, GridMismatchError, MemflowError
from memflow.kernel import MemoryKernel, ck_norm

DEFAULT_J = 40
DEFAULT_K = 12
DEFAULT_N = 2000
MAX_CELLS = 60_000_000


@dataclass(frozen=True)
class Grid:
    T: float
    n: int

    def __post_init__(self):
        if not self.T > 0:
            raise MemflowError("grid length T must be positive")
        if self.n < 1 or int(self.n) != self.n:
            raise MemflowError("grid needs a positive integer number of steps")

    @property
    def h(self) -> float:
        return self.T / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.T, self.n * factor)


@dataclass(frozen=True)
class GridFn:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n + 1,):
            raise MemflowError(f"expected {self.grid.n + 1} values, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def sample(cls, grid: Grid, fn) -> "GridFn":
        return cls(grid, fn(grid.nodes))


def _fft_len(n: int) -> int:
    return 1 << int(math.ceil(math.log2(max(2, 2 * n))))


def trapezoid_conv(f: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    """Trapezoidal ``int_0^{t_i} f(t_i - s) g(s) ds`` at every node of a uniform grid.

    Works on the trailing axis, so ``f`` may hold a stack of functions.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    n1 = g.shape[-1]
    L = _fft_len(n1)
    full = np.fft.irfft(np.fft.rfft(f, L) * np.fft.rfft(g, L), L)[..., :n1]
    out = h * (full - 0.5 * (f * g[..., :1] + f[..., :1] * g))
    out[..., 0] = 0.0
    return out


def convolve(f: GridFn, g: GridFn) -> GridFn:
    if f.grid != g.grid:
        raise GridMismatchError("convolve needs both functions on the same grid")
    return GridFn(f.grid, trapezoid_conv(f.values, g.values, f.grid.h))


def _raw_table(kernel: MemoryKernel, J: int, K: int, grid: Grid) -> np.ndarray:
    nodes = grid.nodes
    derivs = np.stack([np.asarray(kernel.deriv(k, nodes)) for k in range(K + 1)])
    at0 = derivs[:, 0].copy()
    L = _fft_len(grid.n + 1)
    derivs_hat = np.fft.rfft(derivs, L)
    table = np.zeros((J + 1, K + 1, grid.n + 1))
    table[1] = derivs
    for j in range(2, J + 1):
        prev = table[j - 1]
        g0 = prev[0]
        full = np.fft.irfft(derivs_hat * np.fft.rfft(g0, L), L)[:, : grid.n + 1]
        conv = grid.h * (full - 0.5 * (derivs * g0[0] + derivs[:, :1] * g0))
        conv[:, 0] = 0.0
        for k in range(K + 1):
            acc = conv[k]
            for i in range(k):
                acc = acc + at0[i] * prev[k - 1 - i]
            table[j, k] = acc
    return table


@dataclass(frozen=True)
class ConvTable:
    """``data[j, k, i] = (M^{*j})^(k)(t_i)``; row ``j = 0`` is the zero function."""

    kernel: MemoryKernel
    grid: Grid
    J: int
    K: int
    data: np.ndarray = field(repr=False)
    extrapolated: bool = True

    def entry(self, j: int, k: int) -> GridFn:
        self._check(j, k)
        return GridFn(self.grid, self.data[j, k])

    def _check(self, j: int, k: int) -> None:
        if not 0 <= j <= self.J:
            raise CapError(f"convolution order {j} outside table (J={self.J})")
        if not 0 <= k <= self.K:
            raise CapError(f"derivative order {k} outside table (K={self.K})")

    def at(self, k: int, tau, extra: int = 6) -> np.ndarray:
        """All ``(M^{*j})^(k)(tau)``, shape ``(J + 1,) + tau.shape``.

        Off-node values use a Taylor expansion about the nearest node built
        from the tabulated higher derivatives (up to ``extra`` more orders).
        """
        self._check(1, k)
        tau = np.asarray(tau, dtype=float)
        h = self.grid.h
        idx = np.clip(np.rint(tau / h).astype(int), 0, self.grid.n)
        delta = tau - idx * h
        r_max = min(extra, self.K - k)
        out = self.data[:, k, idx]
        if r_max > 0 and np.any(delta != 0.0):
            power = np.ones_like(delta)
            for r in range(1, r_max + 1):
                power = power * delta / r
                out = out + self.data[:, k + r, idx] * power
        return out

    def dump_csv(self, fh: TextIO, every: int = 1) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["j", "k", "t", "value"])
        nodes = self.grid.nodes
        for j in range(1, self.J + 1):
            for k in range(self.K + 1):
                for i in range(0, self.grid.n + 1, every):
                    writer.writerow([j, k, f"{nodes[i]:.17g}", f"{self.data[j, k, i]:.17g}"])


def iterated_conv_table(
    kernel: MemoryKernel,
    J: int = DEFAULT_J,
    K: int = DEFAULT_K,
    grid: Grid | None = None,
    *,
    extrapolate: bool = True,
    max_cells: int = MAX_CELLS,
) -> ConvTable:
    """Tabulate ``(M^{*j})^(k)`` for ``1 <= j <= J``, ``0 <= k <= K``.

    With ``extrapolate`` the table is built on ``grid`` and on its 2x
    refinement and combined by one Richardson step, which removes the
    ``h^2`` term of the trapezoidal error.  ``extrapolate=False`` returns the
    plain second-order trapezoidal table.
    """
    grid = grid or Grid(2.0, DEFAULT_N)
    if J < 1:
        raise MemflowError("J must be at least 1")
    kernel.check_order(K)
    cells = (J + 1) * (K + 1) * (grid.n + 1) * (3 if extrapolate else 1)
    if cells > max_cells:
        raise CapError(f"table needs {cells} cells, cap is {max_cells}")
    coarse = _raw_table(kernel, J, K, grid)
    if extrapolate:
        fine = _raw_table(kernel, J, K, grid.refined(2))[:, :, ::2]
        data = (4.0 * fine - coarse) / 3.0
        data[:2] = coarse[:2]
        data[:, :, 0] = coarse[:, :, 0]
    else:
        data = coarse
    return ConvTable(kernel, grid, J, K, data, extrapolate)


@dataclass(frozen=True)
class TaylorTable:
    """``D[j, k] = (M^{*j})^(k)(0)``; row 0 is zero."""

    J: int
    K: int
    D: np.ndarray = field(repr=False)

    def __getitem__(self, jk: tuple[int, int]) -> float:
        j, k = jk
        if not (0 <= j <= self.J and 0 <= k <= self.K):
            raise CapError(f"Taylor entry ({j}, {k}) outside table")
        return float(self.D[j, k])


def conv_taylor_table(kernel: MemoryKernel, J: int, K: int) -> TaylorTable:
    """Taylor data of iterated convolutions at the origin.

    If ``M(t) = sum a_i t^i / i!`` then ``M^{*j}(t) = sum_r c_r t^(r+j-1)/(r+j-1)!``
    with ``c = a (*) ... (*) a`` (Cauchy power of the coefficient sequence), so
    ``D[j, k] = c_{k-j+1}`` and vanishes for ``k < j - 1``.
    """
    kernel.check_order(K)
    a = np.array([kernel.taylor(i) for i in range(K + 1)])
    D = np.zeros((J + 1, K + 1))
    power = np.array([1.0])
    for j in range(1, J + 1):
        power = np.convolve(power, a)[: K + 1]
        lo = j - 1
        if lo <= K:
            D[j, lo:] = power[: K + 1 - lo]
    return TaylorTable(J, K, D)


def _chi(x: int) -> int:
    return 1 if x >= 0 else 0


def conv_power_exponent(j: int, k: int) -> int:
    """Norm index ``p`` of the iterated-convolution derivative bound."""
    return _chi(k - 1) * ((k - j) * _chi(k - j) + 1)


def conv_power_bound(kernel: MemoryKernel, j: int, k: int, t: float) -> float:
    """Right-hand side ``(sum_l t^l/l!) * ||M||_{C^p([0,t])}^j`` bounding ``|(M^{*j})^(k)(t)|``."""
    if j < 1 or k < 0:
        raise MemflowError("need j >= 1 and k >= 0")
    p = conv_power_exponent(j, k)
    lo = max(0, j - 1 - k)
    series = sum(t**l / math.factorial(l) for l in range(lo, j))
    if series == 0.0:
        return 0.0
    return series * ck_norm(kernel, p, t) ** j
