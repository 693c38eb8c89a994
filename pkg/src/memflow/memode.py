"""The scalar memory ODE ``w' + eta w + (M * w) = 0``, ``w(0) = 1``, solved three ways.

* ``solve_stepping``: time stepping with product-trapezoidal memory.
* ``solve_kernel_repr``: ``w(t) = e^{-eta t} + int_0^t K_M(t, s) e^{-eta s} ds``.
* ``decompose_ode``: heat-like + wave-like + remainder parts of ``w``.

The last two share a graded Gauss-Legendre rule on ``[0, t]`` that resolves
the ``e^{-eta s}`` boundary layer for every ``eta`` in a batch at once.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Literal, Sequence, TypeVar

import numpy as np

from memflow.coeffs import CoeffSeries
from memflow.conv import Grid, GridFn
from memflow.errors import CapError, MemflowError
from memflow.flowkernel import FlowKernelEval
from memflow.kernel import MemoryKernel, ck_norm

GAUSS_ORDER = 16
MAX_PANEL = 0.25

T_ = TypeVar("T_")
R_ = TypeVar("R_")


def thread_count() -> int:
    raw = os.environ.get("MEMFLOW_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise MemflowError(f"MEMFLOW_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T_], R_], items: Iterable[T_]) -> list[R_]:
    """Order-preserving map over independent jobs, capped by ``MEMFLOW_THREADS``."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- quadrature -----------------------------------------------------------------


@lru_cache(maxsize=None)
def _gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1) / 2, w / 2


def graded_rule(t: float, eta_max: float, order: int = GAUSS_ORDER, max_panel: float = MAX_PANEL):
    """Composite Gauss-Legendre nodes and weights on ``[0, t]``.

    The first panel has width ``0.5 / eta_max``; panels then double until
    they reach ``max_panel``.
    """
    if t <= 0:
        return np.zeros(0), np.zeros(0)
    first = min(max_panel, 0.5 / max(eta_max, 1e-300))
    edges = [0.0]
    width = first
    while edges[-1] < t:
        edges.append(min(t, edges[-1] + width))
        width = min(2 * width, max_panel)
    edges = np.asarray(edges)
    x, w = _gauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (a + (b - a) * x).ravel()
    weights = ((b - a) * w).ravel()
    return nodes, weights


# -- time stepping ----------------------------------------------------------------


@dataclass(frozen=True)
class OdeSolution:
    eta: float
    grid: Grid
    w: GridFn = field(repr=False)

    def __call__(self, t):
        """Value at grid nodes (``t`` must be a node up to rounding)."""
        t = np.asarray(t, dtype=float)
        idx = np.rint(t / self.grid.h).astype(int)
        if np.any(np.abs(idx * self.grid.h - t) > 1e-9 * max(1.0, self.grid.T)) or np.any(idx > self.grid.n):
            raise MemflowError("OdeSolution is only defined at grid nodes")
        out = self.w.values[idx]
        return float(out) if out.ndim == 0 else out


def _etd_weights(z: float, h: float) -> tuple[float, float, float]:
    """``(e^{-z}, a, b)`` for the exponential trapezoid step with ``z = eta h``."""
    if z < 0.1:
        # (z - 1 + e^{-z}) / z^2 and (1 - e^{-z}) / z by their Taylor series
        b = h * sum((-z) ** k / math.factorial(k + 2) for k in range(12))
        phi1 = sum((-z) ** k / math.factorial(k + 1) for k in range(12))
    else:
        b = h * (z - 1 + math.exp(-z)) / z**2
        phi1 = -math.expm1(-z) / z
    return math.exp(-z), h * phi1 - b, b


def solve_stepping(
    kernel: MemoryKernel,
    eta: float,
    grid: Grid,
    scheme: Literal["exp", "trapezoid"] = "exp",
) -> OdeSolution:
    """Second-order stepping; memory term by product trapezoid.

    ``scheme="exp"`` integrates ``-eta w`` exactly and interpolates the
    memory term linearly over each step, so it has no step restriction.
    ``scheme="trapezoid"`` is Crank-Nicolson in ``eta`` and requires
    ``eta h <= 1``.
    """
    if eta < 0:
        raise MemflowError("eta must be nonnegative")
    h, n = grid.h, grid.n
    if scheme == "trapezoid" and eta * h > 1:
        raise CapError(f"trapezoid scheme needs eta*h <= 1, got {eta * h:g}")
    if scheme not in ("exp", "trapezoid"):
        raise MemflowError(f"unknown scheme {scheme!r}")
    m = np.asarray(kernel(grid.nodes))
    m0 = m[0]
    w = np.empty(n + 1)
    w[0] = 1.0
    F_prev = 0.0
    if scheme == "exp":
        decay, a, b = _etd_weights(eta * h, h)
    for i in range(n):
        k = i + 1
        # product trapezoid without the w_{k} end term
        S = h * (0.5 * m[k] * w[0] + np.dot(m[k - 1 : 0 : -1], w[1:k]))
        if scheme == "exp":
            w[k] = (decay * w[i] - a * F_prev - b * S) / (1 + b * 0.5 * h * m0)
        else:
            w[k] = ((1 / h - eta / 2) * w[i] - 0.5 * F_prev - 0.5 * S) / (1 / h + eta / 2 + 0.25 * h * m0)
        F_prev = S + 0.5 * h * m0 * w[k]
    return OdeSolution(float(eta), grid, GridFn(grid, w))


# -- flow-kernel routes -------------------------------------------------------------


def kernel_repr_values(fk: FlowKernelEval, etas: Sequence[float], t: float) -> np.ndarray:
    """``w_eta(t)`` for every ``eta`` via the flow-kernel representation."""
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    base = np.exp(-etas * t)
    if t == 0:
        return base
    s, wts = graded_rule(t, float(np.max(etas)))
    Kv = fk(np.full_like(s, t), s)
    return base + np.exp(-np.outer(etas, s)) @ (wts * Kv)


def solve_kernel_repr(fk: FlowKernelEval, eta: float, grid: Grid) -> OdeSolution:
    if grid.T > fk.T * (1 + 1e-12):
        raise CapError(f"grid extends to {grid.T}, flow kernel only to {fk.T}")
    vals = np.array([kernel_repr_values(fk, [eta], float(t))[0] for t in grid.nodes])
    return OdeSolution(float(eta), grid, GridFn(grid, vals))


def remainder_rn(fk: FlowKernelEval, N: int, t: float, tau) -> np.ndarray | float:
    """``R_N(t, tau) = int_0^t tau e^{-tau s} d_s^N K_M(t, s) ds`` (vectorized in ``tau``)."""
    if N < 0:
        raise MemflowError("N must be nonnegative")
    scalar = np.ndim(tau) == 0
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau < 0):
        raise MemflowError("tau must be nonnegative")
    if t == 0:
        out = np.zeros(tau.shape)
    else:
        s, wts = graded_rule(t, float(np.max(tau)))
        dK = fk.partial(0, N, np.full_like(s, t), s)
        out = tau * (np.exp(-np.outer(tau, s)) @ (wts * dK))
    return float(out[0]) if scalar else out


def rn_bound(kernel: MemoryKernel, N: int, t: float) -> float:
    """``e^t [exp(N (1+t) sum_{j<=N} sup_{[0,t]} |M^(j)|) - 1]`` with inflated sups."""
    X = N * (1 + t) * ck_norm(kernel, N, t)
    if X > 700:
        return math.inf
    return math.exp(t) * math.expm1(X)


@dataclass(frozen=True)
class OdeDecomposition:
    N: int
    eta: np.ndarray
    t: float
    heat: np.ndarray
    wave: np.ndarray
    rem: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.heat + self.wave + self.rem


def decompose_ode(cs: CoeffSeries, fk: FlowKernelEval, eta, N: int, t: float) -> OdeDecomposition:
    """Heat, wave and remainder parts of ``w_eta(t)`` for one ``t`` and many ``eta``."""
    if N < 2:
        raise MemflowError("decomposition needs N >= 2")
    if N > cs.N:
        raise CapError(f"coefficient series only has {cs.N} terms")
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if np.any(eta <= 0):
        raise MemflowError("eta must be positive")
    pw = eta[None, :] ** -(np.arange(N)[:, None] + 1.0)
    pv = np.array([cs.p[l](t) for l in range(N)])
    hv = np.array([cs.h[l](t) for l in range(N)])
    heat = np.exp(-eta * t) * (1 + pv @ pw)
    wave = hv @ pw
    rem = np.asarray(remainder_rn(fk, N, t, eta)) * eta ** (-N - 1.0)
    return OdeDecomposition(N, eta, float(t), heat, wave, rem)
