"""Acceptance checks: each returns ``Check`` records with observed value, target and verdict."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from memflow.coeffs import boundary_crosscheck, closed_form_exp, coeff_series, exp_flow_factor
from memflow.conv import Grid, conv_power_bound, trapezoid_conv
from memflow.flowkernel import FlowKernelEval, build_flow_kernel, km_global_bound, km_weighted_l1
from memflow.kernel import MemoryKernel
from memflow.memode import (
    decompose_ode,
    graded_rule,
    kernel_repr_values,
    remainder_rn,
    rn_bound,
    solve_stepping,
)
from memflow.spectral import FlowModel, flow_report, hf_limits, loglog_slope, op_norm, projection_check


@dataclass(frozen=True)
class Check:
    criterion_id: str
    observed: float | bool
    bound_or_target: str
    tolerance: float | None
    passed: bool

    def as_json(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        if isinstance(d["observed"], float) and not math.isfinite(d["observed"]):
            d["observed"] = str(d["observed"])
        return d

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        obs = f"{self.observed:.6g}" if isinstance(self.observed, float) else str(self.observed)
        return f"[{tag}] {self.criterion_id}: observed {obs}, target {self.bound_or_target}"


def _le(cid: str, observed: float, tol: float) -> Check:
    return Check(cid, float(observed), f"<= {tol:g}", tol, bool(observed <= tol))


def _in(cid: str, observed: float, lo: float, hi: float) -> Check:
    return Check(cid, float(observed), f"in [{lo:g}, {hi:g}]", None, bool(lo <= observed <= hi))


def _slack(cid: str, slack: float) -> Check:
    return Check(cid, float(slack), "min(bound - value) >= 0", 0.0, bool(slack >= 0))


ONE = MemoryKernel.constant(1.0)
DECAY = MemoryKernel.exponential(2.0, -0.5)
GROW = MemoryKernel.exponential(1.0, 0.8)
UNIT_DECAY = MemoryKernel.exponential(1.0, -1.0)
POLY_EXP = MemoryKernel.from_spec("1*t^2*exp(1)")
TEST_KERNELS = {"e^-t": UNIT_DECAY, "2e^-0.5t": DECAY, "e^0.8t": GROW, "t^2e^t": POLY_EXP, "1": ONE}


@lru_cache(maxsize=None)
def _fk(kernel: MemoryKernel) -> FlowKernelEval:
    return build_flow_kernel(kernel)


@lru_cache(maxsize=None)
def _model(kernel: MemoryKernel, N: int = 6) -> FlowModel:
    # h_l comes from its own table on a different grid, so the boundary
    # identities compare two independent tabulations
    return FlowModel(_fk(kernel), coeff_series(kernel, N, Grid(2.0, 2500)))


def criterion_1() -> list[Check]:
    """Constant kernel, eta = 2: w(t) = (1 - t) e^{-t}."""
    grid = Grid(2.0, 2000)
    ts = np.array([0.5, 1.0, 2.0])
    exact = (1 - ts) * np.exp(-ts)
    step = solve_stepping(ONE, 2.0, grid)(ts)
    repr_ = np.array([kernel_repr_values(_fk(ONE), [2.0], float(t))[0] for t in ts])
    return [
        _le("1.stepping", np.max(np.abs(step - exact)), 1e-6),
        _le("1.kernel_repr", np.max(np.abs(repr_ - exact)), 1e-6),
    ]


def criterion_2() -> list[Check]:
    """w_eta equals heat + wave + remainder."""
    checks = []
    etas = [4.0, 25.0, 100.0, 1e4]
    for name, k in (("2e^-0.5t", DECAY), ("e^0.8t", GROW)):
        m = _model(k)
        worst = 0.0
        for t in (0.25, 1.0, 2.0):
            w = kernel_repr_values(m.fk, etas, t)
            for N in (2, 3, 5):
                worst = max(worst, float(np.max(np.abs(w - decompose_ode(m.cs, m.fk, etas, N, t).total))))
        checks.append(_le(f"2.identity[{name}]", worst, 1e-7))
    return checks


def criterion_3() -> list[Check]:
    """|w - heat - wave| decays like eta^{-N-1} at t = 1."""
    checks = []
    etas = np.array([10.0, 1e2, 1e3, 1e4])
    for name, k in (("2e^-0.5t", DECAY), ("e^0.8t", GROW)):
        m = _model(k)
        w = kernel_repr_values(m.fk, etas, 1.0)
        for N in (2, 3):
            d = decompose_ode(m.cs, m.fk, etas, N, 1.0)
            slope = loglog_slope(etas, np.abs(w - d.heat - d.wave))
            checks.append(_in(f"3.slope[{name},N={N}]", slope, -N - 1.3, -N - 0.7))
    return checks


def criterion_4() -> list[Check]:
    """d_s^l K(t, 0) = h_l(t) and d_s^l K(t, t) = -p_l(t), l <= 4."""
    checks = []
    ts = np.linspace(0.0, 2.0, 50)
    for name, k in TEST_KERNELS.items():
        m = _model(k)
        rh = rp = 0.0
        for l in range(5):
            a, b = boundary_crosscheck(m.fk, m.cs, l, ts)
            rh, rp = max(rh, a), max(rp, b)
        checks.append(_le(f"4.h_identity[{name}]", rh, 1e-8))
        checks.append(_le(f"4.p_identity[{name}]", rp, 1e-8))
    return checks


# FFT convolution leaves absolute noise of a few ulps of the row scale, so
# entries whose exact value is far below that (high j near t = 0) read as noise.
ROUNDOFF_ULPS = 64


def _conv_power_slack(kernel: MemoryKernel, fk: FlowKernelEval, K: int = 8, stride: int = 50) -> float:
    tab = fk.conv
    nodes = tab.grid.nodes[::stride]
    slack = math.inf
    for j in range(1, tab.J + 1):
        for k in range(K + 1):
            row = tab.data[j, k]
            floor = ROUNDOFF_ULPS * np.finfo(float).eps * max(1.0, float(np.max(np.abs(row))))
            vals = np.abs(row[::stride])
            bounds = np.array([conv_power_bound(kernel, j, k, float(t)) for t in nodes])
            slack = min(slack, float(np.min(bounds + floor - vals)))
    return slack


def _flow_bound_slack(kernel: MemoryKernel, fk: FlowKernelEval, step: float = 0.1) -> float:
    pts = [(t, s) for t in np.arange(0.0, 2.0 + 1e-9, step) for s in np.arange(0.0, t + 1e-9, step)]
    t = np.array([p[0] for p in pts])
    s = np.minimum(np.array([p[1] for p in pts]), t)
    slack = math.inf
    for beta in range(1, 5):
        for alpha in range(0, 5 - beta):
            vals = np.abs(fk.partial(alpha, beta, t, s))
            bounds = np.array([km_global_bound(kernel, alpha, beta, a, b) for a, b in zip(t, s)])
            slack = min(slack, float(np.min(bounds + fk.eps - vals)))
    return slack


def _weighted_l1_slack(fk: FlowKernelEval) -> float:
    slack = math.inf
    for lam in (-1.0, 0.0, 1.0, 5.0):
        for t in (0.25, 0.5, 1.0, 2.0):
            r = km_weighted_l1(fk, lam, t)
            slack = min(slack, r.bound - r.value)
    return slack


def _rn_slack(kernel: MemoryKernel, fk: FlowKernelEval) -> float:
    slack = math.inf
    taus = np.array([0.5, 1.0, 4.0, 25.0, 100.0, 1e4])
    for N in (2, 3, 5):
        for t in np.linspace(0.0, 2.0, 9):
            r = np.abs(remainder_rn(fk, N, float(t), taus))
            slack = min(slack, float(np.min(rn_bound(kernel, N, float(t)) - r)))
    return slack


def criterion_5() -> list[Check]:
    """Iterated-convolution, flow-kernel, weighted L^1 and remainder bounds."""
    checks = []
    for name, k in (("e^-t", UNIT_DECAY), ("2e^-0.5t", DECAY), ("t^2e^t", POLY_EXP)):
        fk = _fk(k)
        checks.append(_slack(f"5.conv_bound[{name}]", _conv_power_slack(k, fk)))
        checks.append(_slack(f"5.flow_kernel_bound[{name}]", _flow_bound_slack(k, fk)))
        checks.append(_slack(f"5.weighted_l1[{name}]", _weighted_l1_slack(fk)))
        checks.append(_slack(f"5.remainder_bound[{name}]", _rn_slack(k, fk)))
    return checks


HF_KERNEL = MemoryKernel.exponential(1.0, -0.5)
HF_J = list(range(10, 101, 10))


def criterion_6() -> list[Check]:
    """eta_j^2 |w_{eta_j}(1)| approaches |M(1)|."""
    rows = hf_limits(HF_KERNEL, 1.0, HF_J, model=_model(HF_KERNEL))
    target = math.exp(-0.5)
    gap = [abs(r.phi_h4 - target) for r in rows]
    return [
        _le("6.limit_j100", gap[-1], 1e-3),
        _in("6.rate_slope", loglog_slope([r.eta for r in rows], gap), -1.2, -0.8),
    ]


def criterion_7() -> list[Check]:
    """L^2 -> H^4 norm blows up like t^{-2}."""
    ts = [1e-1, 1e-2, 1e-3, 1e-4]
    norms = [op_norm(DECAY, t, 0.0, 4.0, model=_model(DECAY)) for t in ts]
    scaled = [t * t * r.value for t, r in zip(ts, norms)]
    checks = [_in(f"7.t2_norm[t={t:g}]", v, 0.1, 50.0) for t, v in zip(ts, scaled)]
    checks.append(_in("7.exponent", loglog_slope(ts, [r.value for r in norms]), -2.2, -1.8))
    checks.append(_slack("7.c0_bound", min(r.bound - r.value for r in norms)))
    checks.append(Check("7.argmax_inside", max(r.argmax_j for r in norms), "< jmax/2 = 200", None, max(r.argmax_j for r in norms) < 200))
    return checks


def criterion_8() -> list[Check]:
    """At t = 0: P_N + W_N = Id, R_N = 0, and W_N(0) e_j -> 0."""
    m = _model(DECAY)
    eta = (np.arange(1, 401) * 1.0) ** 2
    worst = 0.0
    rem_max = 0.0
    for N in (2, 3, 5):
        rep = flow_report(m, 0.0, eta, N)
        worst = max(worst, float(np.max(np.abs(rep.heat + rep.wave - 1.0))))
        rem_max = max(rem_max, float(np.max(np.abs(rep.rem))))
    rows = hf_limits(DECAY, 0.0, HF_J, N=3, model=m)
    slope = loglog_slope([r.eta for r in rows], [r.wave_l2 for r in rows])
    return [
        _le("8.partition_of_identity", worst, 1e-12),
        Check("8.remainder_zero", rem_max, "== 0", 0.0, rem_max == 0.0),
        _in("8.wave_decay_slope", slope, -1.2, -0.8),
    ]


def criterion_9() -> list[Check]:
    cases = [("t^2e^t", POLY_EXP, 3, True), ("e^t", MemoryKernel.exponential(1.0, 1.0), 2, False), ("t^2e^t", POLY_EXP, 4, False)]
    checks = []
    for name, k, N, expected in cases:
        try:
            got = projection_check(k, N)
            ok = got == expected
        except ValueError:
            got, ok = "disagree", False
        checks.append(Check(f"9.projection[{name},N={N}]", got, str(expected), None, ok))
    return checks


def criterion_10() -> list[Check]:
    """General pipeline against exponential-kernel closed forms."""
    checks = []
    ts = np.linspace(0.0, 2.0, 41)
    for alpha in (1.0, 2.0):
        for lam in (0.8, -0.5):
            k = MemoryKernel.exponential(alpha, lam)
            m = _model(k, 7)
            cf = closed_form_exp(alpha, lam, 7)
            err = 0.0
            for l in range(7):
                for a, b in ((m.cs.h[l], cf.h[l]), (m.cs.p[l], cf.p[l])):
                    ref = b(ts)
                    err = max(err, float(np.max(np.abs(a(ts) - ref))) / max(1.0, float(np.max(np.abs(ref)))))
            checks.append(_le(f"10.coefficients[a={alpha:g},l={lam:g}]", err, 1e-10))
            rerr = 0.0
            taus = np.array([1.0, 10.0, 100.0, 1e4])
            for N in (2, 3):
                for t in (0.25, 1.0, 2.0):
                    s, w = graded_rule(t, float(taus.max()))
                    integrand = (-1) ** N * math.factorial(N) * np.exp(lam * (t - s)) * exp_flow_factor(alpha, lam, N, t, s)
                    ref = taus * (np.exp(-np.outer(taus, s)) @ (w * integrand))
                    rerr = max(rerr, float(np.max(np.abs(remainder_rn(m.fk, N, t, taus) - ref))))
            checks.append(_le(f"10.remainder[a={alpha:g},l={lam:g}]", rerr, 1e-7))
    return checks


def _cos_conv_error(n: int) -> float:
    g = Grid(2.0, n)
    x = g.nodes
    exact = (x * np.cos(x) + np.sin(x)) / 2
    return float(np.max(np.abs(trapezoid_conv(np.cos(x), np.cos(x), g.h) - exact)))


def criterion_11() -> list[Check]:
    """Second-order convergence of stepping and convolution."""
    def step_err(n: int) -> float:
        g = Grid(2.0, n)
        return float(np.max(np.abs(solve_stepping(ONE, 2.0, g).w.values - (1 - g.nodes) * np.exp(-g.nodes))))

    checks = []
    for label, fn in (("stepping", step_err), ("convolve", _cos_conv_error)):
        errs = [fn(n) for n in (250, 500, 1000)]
        ratios = [errs[i] / errs[i + 1] for i in range(2)]
        checks.append(_in(f"11.{label}_ratio_min", min(ratios), 3.5, 4.5))
        checks.append(_in(f"11.{label}_ratio_max", max(ratios), 3.5, 4.5))
    return checks


CRITERIA: dict[int, Callable[[], list[Check]]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
}


def run_all(which=None, log: Callable[[str], None] | None = None) -> list[Check]:
    out = []
    for cid, fn in CRITERIA.items():
        if which is not None and cid not in which:
            continue
        t0 = time.perf_counter()
        checks = fn()
        if log is not None:
            for c in checks:
                log(c.line())
            log(f"  criterion {cid} took {time.perf_counter() - t0:.2f} s")
        out.extend(checks)
    return out
