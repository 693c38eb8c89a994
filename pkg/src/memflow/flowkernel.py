"""Flow kernel ``K_M(t, s) = sum_j (-s)^j / j! * M^{*j}(t - s)`` and its derivatives.

Evaluation is restricted to the triangle ``0 <= s <= t <= T``.  The series
is truncated at an order ``J`` chosen when the evaluator is built, such that a
certified tail bound is below ``eps`` over the whole triangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from memflow.conv import ConvTable, Grid, iterated_conv_table, conv_power_exponent
from memflow.errors import CapError, EnvelopeError, MemflowError
from memflow.kernel import MemoryKernel, ck_norm

DEFAULT_EPS = 1e-13
DEFAULT_ORDER = 8
DEFAULT_J_CAP = 128


def _log_term_bounds(kernel: MemoryKernel, alpha: int, beta: int, s: float, tau: float, jmax: int) -> np.ndarray:
    """log of a bound on ``|d_t^alpha d_s^beta M_j(t, s)|`` for ``j = 1..jmax``.

    Each series term is expanded with Leibniz' rule and every iterated
    convolution derivative is bounded by the iterated-convolution estimate
    ``(sum_l tau^l/l!) * ||M||_{C^p}^j``.
    """
    j = np.arange(1, jmax + 1)
    log_s = math.log(s) if s > 0 else -np.inf
    log_tau = math.log(tau) if tau > 0 else -np.inf
    ls = np.arange(jmax)
    if tau > 0:
        l_terms = ls * log_tau - gammaln(ls + 1)
    else:
        l_terms = np.where(ls == 0, 0.0, -np.inf)
    per_m = []
    for m in range(beta + 1):
        k = alpha + beta - m
        # p(j, k) only takes values up to k + 1
        p = np.array([conv_power_exponent(int(jj), k) for jj in range(1, min(jmax, k + 2) + 1)])
        p = np.concatenate([p, np.full(jmax - p.size, conv_power_exponent(k + 2, k))])
        norms = {pp: math.log(ck_norm(kernel, int(pp), tau)) for pp in np.unique(p)}
        log_norm = np.array([norms[pp] for pp in p])
        # log sum_{l = max(0, j-1-k)}^{j-1} tau^l / l!  over a window of width k + 1
        window = np.full((k + 1, jmax), -np.inf)
        for d in range(k + 1):
            l = j - 1 - d
            ok = l >= 0
            window[d, ok] = l_terms[l[ok]]
        cum = logsumexp(window, axis=0)
        # 1/j! * C(j, m) m! (-s)^{j-m} collapses to (-s)^{j-m}/(j-m)!
        e = np.maximum(j - m, 0)
        with np.errstate(invalid="ignore"):
            pw = np.where(e == 0, 0.0, e * log_s)
        lt = math.log(math.comb(beta, m)) + pw - gammaln(e + 1) + cum + j * log_norm
        per_m.append(np.where(j >= m, lt, -np.inf))
    return logsumexp(np.vstack(per_m), axis=0)


def _log_tails(logs: np.ndarray) -> np.ndarray:
    """``out[J] = log sum_{j > J}`` for ``J = 0..len(logs)-1``, with a geometric
    allowance for terms past the probe horizon."""
    last, prev = logs[-1], logs[-2]
    if np.isfinite(last) and np.isfinite(prev):
        ratio = math.exp(min(0.0, last - prev))
        if ratio >= 1.0:
            return np.full(logs.size, np.inf)
        extra = last + math.log(ratio / (1.0 - ratio)) if ratio > 0 else -np.inf
    else:
        extra = -np.inf
    rev = np.logaddexp.accumulate(logs[::-1])[::-1]
    return np.logaddexp(rev, extra)


def sharp_tail_bound(kernel: MemoryKernel, alpha: int, beta: int, t: float, s: float, J: int) -> float:
    """Certified bound on ``sum_{j > J}`` of the derivative series at ``(t, s)``."""
    logs = _log_term_bounds(kernel, alpha, beta, s, t - s, 2 * J + 60)
    return float(math.exp(_log_tails(logs)[J]))


def envelope_tail_bounds(kernel: MemoryKernel, order: int, T: float, j_max: int, n_split: int = 9) -> np.ndarray:
    """Worst tail bound over ``0 <= s <= t <= T`` and ``alpha + beta <= order``,
    for every truncation order ``J = 0..j_max``.

    The per-term bound grows with ``alpha`` and with ``tau = t - s``, so for a
    given ``s`` and ``beta`` the worst case is ``alpha = order - beta`` and
    ``t = T``.  The ``s`` direction is scanned on ``n_split`` points, and the
    scan is made safe by bounding each gap with its right end for ``s`` and
    its left end for ``tau``.
    """
    edges = np.linspace(0.0, T, n_split)
    worst = np.full(j_max + 1, -np.inf)
    for a, b in zip(edges[:-1], edges[1:]):
        for beta in range(order + 1):
            logs = _log_term_bounds(kernel, order - beta, beta, float(b), float(T - a), 2 * j_max + 60)
            worst = np.maximum(worst, _log_tails(logs)[: j_max + 1])
    return np.exp(worst)


def envelope_tail_bound(kernel: MemoryKernel, order: int, T: float, J: int) -> float:
    return float(envelope_tail_bounds(kernel, order, T, J)[J])


def _select_J(kernel: MemoryKernel, order: int, T: float, eps: float, j_cap: int) -> int:
    tails = envelope_tail_bounds(kernel, order, T, j_cap)
    ok = np.nonzero(tails[1:] <= eps)[0]
    if ok.size == 0:
        raise CapError(f"truncation order above cap {j_cap} needed for eps={eps:g} on [0, {T}]")
    return int(ok[0]) + 1


@dataclass(frozen=True)
class FlowKernelEval:
    kernel: MemoryKernel
    conv: ConvTable = field(repr=False)
    J: int
    eps: float
    order: int
    taylor_extra: int = 6

    @property
    def T(self) -> float:
        return self.conv.grid.T

    @property
    def grid(self) -> Grid:
        return self.conv.grid

    def _check(self, alpha: int, beta: int, t, s) -> tuple[np.ndarray, np.ndarray]:
        if alpha < 0 or beta < 0:
            raise MemflowError("derivative orders must be nonnegative")
        if alpha + beta > self.order:
            raise EnvelopeError(f"derivative order {alpha + beta} beyond certified order {self.order}")
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        tol = 1e-12 * max(1.0, self.T)
        if np.any(s < -tol) or np.any(s > t + tol) or np.any(t > self.T + tol):
            raise EnvelopeError(f"point outside 0 <= s <= t <= {self.T}")
        return t, np.clip(s, 0.0, t)

    def partial(self, alpha: int, beta: int, t, s):
        r"""``d_t^alpha d_s^beta K_M(t, s)``.

        Term-wise, ``d_t^a d_s^b [(-s)^j/j! F(t-s)]`` equals
        ``(-1)^b sum_m C(b, m) (-s)^{j-m}/(j-m)! F^{(a+b-m)}(t-s)``.
        """
        t, s = self._check(alpha, beta, t, s)
        tau = t - s
        J = self.J
        j = np.arange(J + 1).reshape((-1,) + (1,) * s.ndim)
        out = np.zeros(s.shape)
        for m in range(min(beta, J) + 1):
            E = self.conv.at(alpha + beta - m, tau, self.taylor_extra)[: J + 1]
            e = np.maximum(j - m, 0)
            coef = np.where((j >= m) & (j >= 1), (-s) ** e / np.exp(gammaln(e + 1)), 0.0)
            out = out + math.comb(beta, m) * np.sum(coef * E, axis=0)
        out = (-1) ** beta * out
        return float(out) if out.ndim == 0 else out

    def __call__(self, t, s):
        return self.partial(0, 0, t, s)


def build_flow_kernel(
    kernel: MemoryKernel,
    T: float = 2.0,
    n: int = 2000,
    *,
    K: int = 12,
    order: int | None = None,
    eps: float = DEFAULT_EPS,
    j_cap: int = DEFAULT_J_CAP,
    extrapolate: bool = True,
) -> FlowKernelEval:
    """Choose a certified truncation order and tabulate what it needs."""
    if order is None:
        order = min(DEFAULT_ORDER, K)
    if order > K:
        raise CapError(f"certified order {order} exceeds table derivative cap {K}")
    J = _select_J(kernel, order, T, eps, j_cap)
    table = iterated_conv_table(kernel, J, K, Grid(T, n), extrapolate=extrapolate)
    return FlowKernelEval(kernel, table, J, eps, order)


def km_eval(fk: FlowKernelEval, t, s):
    return fk.partial(0, 0, t, s)


def km_partial(fk: FlowKernelEval, alpha: int, beta: int, t, s):
    return fk.partial(alpha, beta, t, s)


def km_tail_bound(fk: FlowKernelEval, alpha: int, beta: int, t: float, s: float, J: int | None = None) -> float:
    """Factorial tail ``e^{t-s} X^{J+1}/(J+1)! e^X`` of the derivative series.

    ``X = max(beta, 1) (1 + |s|) ||M||_{C^{alpha+beta}([0, t-s])}``; for
    ``beta = 0`` the factor is raised to 1, which still dominates each term.
    This is the coarse bound; the evaluator picks ``J`` with the sharper
    ``sharp_tail_bound``.
    """
    J = fk.J if J is None else J
    X = max(beta, 1) * (1 + abs(s)) * ck_norm(fk.kernel, alpha + beta, t - s)
    if X == 0.0:
        return 0.0
    log_val = (t - s) + (J + 1) * math.log(X) - math.lgamma(J + 2) + X
    return math.exp(log_val)


def km_global_bound(kernel: MemoryKernel, alpha: int, beta: int, t: float, s: float) -> float:
    """``e^{t-s} [exp(beta (1+|s|) ||M||_{C^{alpha+beta}([0,t-s])}) - 1]``."""
    X = beta * (1 + abs(s)) * ck_norm(kernel, alpha + beta, t - s)
    if X > 700:
        return math.inf
    return math.exp(t - s) * math.expm1(X)


@dataclass(frozen=True)
class WeightedL1:
    value: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.value <= self.bound


def km_weighted_l1(fk: FlowKernelEval, lam: float, t: float, n: int = 4001) -> WeightedL1:
    """``int_0^t e^{-lam (t-s)} |K_M(t, s)| ds`` with its exponential bound.

    Both sides use the trapezoidal rule; the integral inside the bound is
    inflated by 1.01.
    """
    if t <= 0:
        return WeightedL1(0.0, 0.0)
    s = np.linspace(0.0, t, n)
    lhs = np.trapezoid(np.exp(-lam * (t - s)) * np.abs(fk(t, s)), s)
    tau = s
    inner = np.trapezoid(np.exp(-lam * tau) * np.abs(fk.kernel(tau)), tau)
    rhs = math.expm1(t * 1.01 * inner)
    return WeightedL1(float(lhs), float(rhs))
