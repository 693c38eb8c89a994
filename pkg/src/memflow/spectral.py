"""The memory heat flow on ``(0, L)`` with Dirichlet conditions, mode by mode.

On the eigenbasis ``e_j`` of ``-d^2/dx^2`` with ``eta_j = (j pi / L)^2`` the
flow and its three components act diagonally: mode ``j`` is multiplied by
``w_{eta_j}(t)`` and by its heat, wave and remainder parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from memflow.conv import Grid
from memflow.coeffs import CoeffSeries, coeff_series, initial_h_vanish, taylor_vanish
from memflow.errors import ConsistencyError, MemflowError
from memflow.flowkernel import FlowKernelEval, build_flow_kernel
from memflow.kernel import MemoryKernel, ck_norm
from memflow.memode import decompose_ode, graded_rule, kernel_repr_values

DEFAULT_JMAX = 400
ROUTE_SWITCH = 0.1
ZERO_THRESHOLD = 1e-10
# Constant of the L^2 -> H^alpha flow estimate; calibrated in scripts/calibrate_c0.py.
C0 = 1.0


@dataclass(frozen=True)
class SpectralBasis:
    L: float = math.pi
    jmax: int = DEFAULT_JMAX

    def __post_init__(self):
        if self.L <= 0 or self.jmax < 1:
            raise MemflowError("basis needs L > 0 and jmax >= 1")

    @property
    def j(self) -> np.ndarray:
        return np.arange(1, self.jmax + 1)

    @property
    def eta(self) -> np.ndarray:
        return (self.j * math.pi / self.L) ** 2

    def mode(self, j: int, s: float = 0.0) -> "SpectralField":
        if not 1 <= j <= self.jmax:
            raise MemflowError(f"mode {j} outside 1..{self.jmax}")
        a = np.zeros(self.jmax)
        a[j - 1] = 1.0
        return SpectralField(self, a, s)


@dataclass(frozen=True)
class SpectralField:
    basis: SpectralBasis
    coeffs: np.ndarray = field(repr=False)
    s: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.coeffs, dtype=float)
        if a.shape != (self.basis.jmax,):
            raise MemflowError(f"expected {self.basis.jmax} coefficients, got shape {a.shape}")
        object.__setattr__(self, "coeffs", a)

    def scaled(self, multiplier: np.ndarray) -> "SpectralField":
        return replace(self, coeffs=self.coeffs * multiplier)

    def inner(self, other: "SpectralField") -> float:
        """L^2 inner product (the basis is orthonormal)."""
        return float(np.dot(self.coeffs, other.coeffs))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return replace(self, coeffs=self.coeffs + other.coeffs)


def hs_norm(field: SpectralField, s: float | None = None) -> float:
    s = field.s if s is None else s
    return float(np.sqrt(np.sum(field.coeffs**2 * field.basis.eta**s)))


# -- multipliers ------------------------------------------------------------------


@dataclass(frozen=True)
class FlowModel:
    """Flow-kernel evaluator and coefficient series shared by every mode."""

    fk: FlowKernelEval = field(repr=False)
    cs: CoeffSeries = field(repr=False)

    @property
    def kernel(self) -> MemoryKernel:
        return self.fk.kernel


@lru_cache(maxsize=16)
def flow_model(kernel: MemoryKernel, N: int = 5, T: float = 2.0, n: int = 2000) -> FlowModel:
    fk = build_flow_kernel(kernel, T, n)
    return FlowModel(fk, coeff_series(kernel, N, table=fk.conv))


@dataclass(frozen=True)
class FlowReport:
    t: float
    N: int
    eta: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    heat: np.ndarray = field(repr=False)
    wave: np.ndarray = field(repr=False)
    rem: np.ndarray = field(repr=False)

    @property
    def identity_residual(self) -> float:
        return float(np.max(np.abs(self.w - self.heat - self.wave - self.rem)))


def flow_report(model: FlowModel, t: float, eta, N: int = 2) -> FlowReport:
    """Per-mode flow multiplier and its three parts at time ``t``.

    The flow multiplier comes from the flow-kernel representation when
    ``eta h <= 0.1`` (``h`` the table step) and from the decomposition sum
    otherwise.
    """
    if t < 0:
        raise MemflowError("t must be nonnegative")
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    dec = decompose_ode(model.cs, model.fk, eta, N, t)
    w = dec.total.copy()
    small = eta * model.fk.grid.h <= ROUTE_SWITCH
    if np.any(small):
        w[small] = kernel_repr_values(model.fk, eta[small], t)
    return FlowReport(float(t), N, eta, w, dec.heat, dec.wave, dec.rem)


def flow_apply(kernel: MemoryKernel, t: float, field: SpectralField, model: FlowModel | None = None) -> SpectralField:
    model = model or flow_model(kernel)
    if t == 0:
        return field
    rep = flow_report(model, t, field.basis.eta)
    return field.scaled(rep.w)


def components_apply(kernel: MemoryKernel, N: int, t: float, field: SpectralField, model: FlowModel | None = None):
    """``(P_N(t) f, W_N(t) f, R_N(t) f)``."""
    model = model or flow_model(kernel, max(N, 5))
    rep = flow_report(model, t, field.basis.eta, N)
    return field.scaled(rep.heat), field.scaled(rep.wave), field.scaled(rep.rem)


# -- estimates ---------------------------------------------------------------------


@dataclass(frozen=True)
class OpNorm:
    value: float
    bound: float
    argmax_j: int

    @property
    def holds(self) -> bool:
        return self.value <= self.bound


def op_norm_bound(kernel: MemoryKernel, t: float, alpha: float, c0: float = C0) -> float:
    X = 2 * (1 + t) * (1 + ck_norm(kernel, 2, t))
    if X > 700:
        return math.inf
    return c0 * t ** (-alpha / 2) * math.exp(X)


def op_norm(
    kernel: MemoryKernel,
    t: float,
    s: float,
    alpha: float,
    jmax: int = DEFAULT_JMAX,
    L: float = math.pi,
    model: FlowModel | None = None,
) -> OpNorm:
    """Norm of the flow from ``H^s`` to ``H^{s+alpha}`` on the truncated basis.

    For a diagonal multiplier this is ``max_j eta_j^{alpha/2} |w_j(t)|``,
    independent of ``s``.
    """
    if not 0 <= alpha <= 4:
        raise MemflowError("alpha must lie in [0, 4]")
    if t <= 0:
        raise MemflowError("t must be positive")
    model = model or flow_model(kernel)
    basis = SpectralBasis(L, jmax)
    rep = flow_report(model, t, basis.eta)
    vals = basis.eta ** (alpha / 2) * np.abs(rep.w)
    k = int(np.argmax(vals))
    return OpNorm(float(vals[k]), op_norm_bound(kernel, t, alpha), k + 1)


@dataclass(frozen=True)
class HFRow:
    j: int
    eta: float
    phi_h4: float
    wave_h4: float
    heat_hs: float
    rem_hs: float
    phi_l2: float
    wave_l2: float


def hf_limits(
    kernel: MemoryKernel,
    t: float,
    j_list,
    N: int = 2,
    s: float = 4.0,
    L: float = math.pi,
    model: FlowModel | None = None,
) -> list[HFRow]:
    """Per-mode norms of the flow and its parts on single eigenmodes."""
    model = model or flow_model(kernel, max(N, 5))
    j = np.asarray(list(j_list), dtype=int)
    eta = (j * math.pi / L) ** 2
    rep = flow_report(model, t, eta, N)
    rows = []
    for i in range(j.size):
        e = eta[i]
        rows.append(
            HFRow(
                int(j[i]),
                float(e),
                float(e**2 * abs(rep.w[i])),
                float(e**2 * abs(rep.wave[i])),
                float(e ** (s / 2) * abs(rep.heat[i])),
                float(e ** (s / 2) * abs(rep.rem[i])),
                float(abs(rep.w[i])),
                float(abs(rep.wave[i])),
            )
        )
    return rows


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class GapBound:
    lhs: float
    rhs: float
    lam: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def gap_rhs(kernel: MemoryKernel, t: float, lams: np.ndarray) -> np.ndarray:
    """``e^{lam t} [exp(t int_0^t e^{-lam tau} |M(tau)| d tau) - 1]`` per ``lam``."""
    x, w = graded_rule(t, 1.0 / max(t, 1e-300))
    absM = np.abs(kernel(x))
    inner = np.exp(-np.outer(lams, x)) @ (w * absM)
    return np.exp(lams * t) * np.expm1(t * inner)


def gap_bound(
    kernel: MemoryKernel,
    t: float,
    basis: SpectralBasis | None = None,
    eta=None,
    n_lam: int = 401,
    lam_max: float = 20.0,
    model: FlowModel | None = None,
) -> GapBound:
    """``max_j |w_j(t) - e^{-eta_j t}|`` against the inf over a ``lam`` grid on ``[-eta_1, lam_max]``."""
    if t <= 0:
        raise MemflowError("t must be positive")
    basis = basis or SpectralBasis()
    eta = basis.eta if eta is None else np.atleast_1d(np.asarray(eta, dtype=float))
    model = model or flow_model(kernel)
    rep = flow_report(model, t, eta)
    lhs = float(np.max(np.abs(rep.w - np.exp(-eta * t))))
    lams = np.linspace(-float(np.min(eta)), lam_max, n_lam)
    rhs = gap_rhs(kernel, t, lams)
    k = int(np.argmin(rhs))
    return GapBound(lhs, float(rhs[k]), float(lams[k]))


def smoothing_order(kernel: MemoryKernel, N: int, t: float, threshold: float = ZERO_THRESHOLD, model: FlowModel | None = None):
    """Smallest ``l >= 1`` with ``|h_l(t)| > threshold``, or ``"≥N"`` if none below ``N``."""
    if t <= 0:
        raise MemflowError("t must be positive")
    if model is not None and model.cs.N >= N and t <= model.fk.T:
        cs = model.cs
    else:
        T = max(2.0, t)
        cs = coeff_series(kernel, N, Grid(T, int(math.ceil(1000 * T))))
    for l in range(1, N):
        if abs(cs.h[l](t)) > threshold:
            return l
    return f"≥{N}"


def projection_check(kernel: MemoryKernel, N: int, tol: float = 1e-10) -> bool:
    """Whether ``W_N(0)`` vanishes, decided from ``h_l(0)`` and from Taylor data of ``M``.

    The two criteria are computed independently and must agree.
    """
    if N < 2:
        raise MemflowError("N must be at least 2")
    via_h = initial_h_vanish(coeff_series(kernel, N), tol)
    via_taylor = taylor_vanish(kernel, N, tol)
    if via_h != via_taylor:
        raise ConsistencyError(f"h_l(0) criterion gives {via_h}, Taylor criterion gives {via_taylor}")
    return via_h
