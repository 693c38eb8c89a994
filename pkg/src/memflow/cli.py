"""``memflow`` command line: experiment runs that write CSVs and a JSON summary.

Exit status is 0 when every assertion passes, 1 when one fails and 2 on
usage, parse or cap errors.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from memflow import acceptance
from memflow.acceptance import Check
from memflow.coeffs import boundary_crosscheck, closed_form_exp, coeff_series
from memflow.config import RunConfig, load_config
from memflow.conv import Grid, iterated_conv_table
from memflow.errors import MemflowError
from memflow.flowkernel import build_flow_kernel, sharp_tail_bound
from memflow.io import atomic_write_text, read_coefficients, write_csv, write_json
from memflow.kernel import MemoryKernel
from memflow.memode import decompose_ode, kernel_repr_values, parallel_map, remainder_rn, rn_bound, solve_stepping
from memflow.spectral import (
    FlowModel,
    SpectralBasis,
    SpectralField,
    flow_report,
    gap_bound,
    hf_limits,
    hs_norm,
    loglog_slope,
    op_norm,
    smoothing_order,
)

SUBCOMMANDS = ("ode", "kernel-table", "conv-table", "coeffs", "decompose", "spectral", "limits", "smoothing", "verify-all")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memflow", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--kernel", help='kernel terms, e.g. "2*t^0*exp(-0.5)"')
    p.add_argument("--eta", type=_floats, help="comma-separated eta values")
    p.add_argument("--t", type=_floats, help="comma-separated times")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--h", type=float, help="time step (sets n = T/h)")
    p.add_argument("--n", type=int, help="number of grid steps")
    p.add_argument("--N", type=int, help="number of expansion terms")
    p.add_argument("--J", type=int, help="cap on the series truncation order")
    p.add_argument("--K", type=int, help="derivative cap of the convolution table")
    p.add_argument("--eps", type=float, help="series tail target")
    p.add_argument("--s", type=float, help="Sobolev index")
    p.add_argument("--alpha", type=float, help="smoothing index for operator norms")
    p.add_argument("--L", type=float, help="interval length")
    p.add_argument("--jmax", type=int, help="number of spectral modes")
    p.add_argument("--initial", help="CSV of j,a_j initial coefficients (spectral)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--criteria", type=_floats, help="verify-all: subset of criterion numbers")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over = {}
    for key in ("kernel", "eta", "t", "T", "n", "N", "J", "K", "eps", "s", "alpha", "L", "jmax", "out"):
        val = getattr(args, key)
        if val is not None:
            over[key] = val
    T = over.get("T", cfg.T)
    if args.h is not None:
        if args.h <= 0:
            raise MemflowError("--h must be positive")
        over["n"] = int(round(T / args.h))
    cfg = replace(cfg, **over)
    cfg.memory_kernel()
    return cfg


def _model(cfg: RunConfig, N: int | None = None) -> FlowModel:
    k = cfg.memory_kernel()
    fk = build_flow_kernel(k, cfg.T, cfg.n, K=cfg.K, eps=cfg.eps, j_cap=cfg.J)
    return FlowModel(fk, coeff_series(k, max(N or cfg.N, 2), table=fk.conv))


def _out(cfg: RunConfig, name: str) -> Path:
    return Path(cfg.out) / name


def _node_indices(n: int, rows: int = 200) -> np.ndarray:
    return np.arange(0, n + 1, max(1, n // rows))


# -- subcommands ----------------------------------------------------------------


def cmd_ode(cfg: RunConfig) -> list[Check]:
    k = cfg.memory_kernel()
    m = _model(cfg)
    grid = Grid(cfg.T, cfg.n)
    idx = _node_indices(cfg.n)
    rows, checks = [], []

    def one(eta: float):
        step = solve_stepping(k, eta, grid).w.values[idx]
        out = []
        for i, t in enumerate(grid.nodes[idx]):
            rep = kernel_repr_values(m.fk, [eta], float(t))[0]
            d = decompose_ode(m.cs, m.fk, eta, cfg.N, float(t))
            out.append((float(t), eta, step[i], rep, d.heat[0], d.wave[0], d.rem[0], abs(rep - d.total[0])))
        return out

    for eta, out in zip(cfg.eta, parallel_map(one, cfg.eta)):
        rows.extend(out)
        steps = np.array([r[2] for r in out])
        reps = np.array([r[3] for r in out])
        checks.append(acceptance._le(f"ode.stepping_vs_repr[eta={eta:g}]", float(np.max(np.abs(steps - reps))), 2e-6))
        checks.append(acceptance._le(f"ode.decomposition[eta={eta:g}]", max(r[7] for r in out), 1e-7))
    write_csv(_out(cfg, "ode.csv"), ["t", "eta", "w_step", "w_repr", "heat", "wave", "rem", "residual"], rows)
    return checks


def cmd_kernel_table(cfg: RunConfig) -> list[Check]:
    m = _model(cfg)
    fk = m.fk
    pts = np.linspace(0.0, cfg.T, 21)
    rows = []
    worst_tail = 0.0
    for beta in range(cfg.N + 1):
        for t in pts:
            for s in pts[pts <= t + 1e-12]:
                v = fk.partial(0, beta, float(t), float(s))
                tail = sharp_tail_bound(fk.kernel, 0, beta, float(t), float(s), fk.J)
                worst_tail = max(worst_tail, tail)
                rows.append((float(t), float(s), beta, v, tail))
    write_csv(_out(cfg, "kernel_table.csv"), ["t", "s", "beta", "value", "tail_bound"], rows)
    return [acceptance._le("kernel-table.tail", worst_tail, fk.eps)]


def cmd_conv_table(cfg: RunConfig) -> list[Check]:
    k = cfg.memory_kernel()
    J = min(cfg.J, 8)
    tab = iterated_conv_table(k, J, min(cfg.K, 4), Grid(cfg.T, cfg.n))
    buf = io.StringIO()
    tab.dump_csv(buf, every=max(1, cfg.n // 100))
    atomic_write_text(_out(cfg, "conv_table.csv"), buf.getvalue())
    return []


def _single_exponential(k: MemoryKernel):
    if len(k.terms) == 1:
        tm = k.terms[0]
        if tm.power == 0 and tm.oscillation == "none":
            return tm.coeff, tm.rate
    return None


def cmd_coeffs(cfg: RunConfig) -> list[Check]:
    k = cfg.memory_kernel()
    m = _model(cfg)
    closed = _single_exponential(k)
    cf = closed_form_exp(*closed, cfg.N) if closed else None
    ts = np.linspace(0.0, cfg.T, 41)
    rows, worst, worst_bc = [], 0.0, 0.0
    for l in range(cfg.N):
        h, p = m.cs.h[l](ts), m.cs.p[l](ts)
        hc = cf.h[l](ts) if cf else np.full_like(ts, np.nan)
        pc = cf.p[l](ts) if cf else np.full_like(ts, np.nan)
        for i, t in enumerate(ts):
            res = max(abs(h[i] - hc[i]), abs(p[i] - pc[i])) if cf else None
            rows.append((l, float(t), h[i], p[i], hc[i] if cf else None, pc[i] if cf else None, res))
        if cf:
            scale = max(1.0, float(np.max(np.abs(hc))), float(np.max(np.abs(pc))))
            worst = max(worst, float(max(np.max(np.abs(h - hc)), np.max(np.abs(p - pc)))) / scale)
        worst_bc = max(worst_bc, *boundary_crosscheck(m.fk, m.cs, l, ts))
    write_csv(_out(cfg, "coeffs.csv"), ["l", "t", "h", "p", "h_closed", "p_closed", "residual"], rows)
    checks = [acceptance._le("coeffs.boundary_identities", worst_bc, 1e-8)]
    if cf:
        checks.append(acceptance._le("coeffs.closed_form", worst, 1e-10))
    return checks


def cmd_decompose(cfg: RunConfig) -> list[Check]:
    k = cfg.memory_kernel()
    m = _model(cfg)
    rows, worst, slack = [], 0.0, math.inf
    for t in cfg.t:
        w = kernel_repr_values(m.fk, cfg.eta, t)
        d = decompose_ode(m.cs, m.fk, cfg.eta, cfg.N, t)
        rn = remainder_rn(m.fk, cfg.N, t, np.asarray(cfg.eta))
        bound = rn_bound(k, cfg.N, t)
        for i, eta in enumerate(cfg.eta):
            res = abs(w[i] - d.total[i])
            worst = max(worst, res)
            slack = min(slack, bound - abs(rn[i]))
            rows.append((t, eta, cfg.N, d.heat[i], d.wave[i], d.rem[i], d.total[i], w[i], res, rn[i], bound))
    write_csv(
        _out(cfg, "decompose.csv"),
        ["t", "eta", "N", "heat", "wave", "rem", "total", "w_repr", "residual", "R_N", "R_N_bound"],
        rows,
    )
    return [acceptance._le("decompose.identity", worst, 1e-7), acceptance._slack("decompose.remainder_bound", slack)]


def cmd_spectral(cfg: RunConfig, initial: str | None = None) -> list[Check]:
    k = cfg.memory_kernel()
    m = _model(cfg)
    basis = SpectralBasis(cfg.L, cfg.jmax)
    if initial:
        a = read_coefficients(initial, cfg.jmax)
    else:
        a = 1.0 / basis.j.astype(float) ** 2
    y0 = SpectralField(basis, a, cfg.s)
    mode_rows, norm_rows = [], []
    worst, op_slack, gap_slack = 0.0, math.inf, math.inf
    for t in cfg.t:
        rep = flow_report(m, t, basis.eta, cfg.N)
        worst = max(worst, rep.identity_residual)
        for j in range(cfg.jmax):
            mode_rows.append((t, j + 1, basis.eta[j], rep.w[j], rep.heat[j], rep.wave[j], rep.rem[j]))
        parts = [y0.scaled(x) for x in (rep.w, rep.heat, rep.wave, rep.rem)]
        row = [t, cfg.s] + [hs_norm(f, cfg.s) for f in [y0] + parts]
        if t > 0:
            on = op_norm(k, t, cfg.s, cfg.alpha, cfg.jmax, cfg.L, model=m)
            gb = gap_bound(k, t, basis, model=m)
            op_slack = min(op_slack, on.bound - on.value)
            gap_slack = min(gap_slack, gb.rhs - gb.lhs)
            row += [on.value, on.bound, gb.lhs, gb.rhs]
        else:
            row += [None] * 4
        norm_rows.append(row)
    write_csv(_out(cfg, "spectral_modes.csv"), ["t", "j", "eta", "w", "heat", "wave", "rem"], mode_rows)
    write_csv(
        _out(cfg, "spectral_norms.csv"),
        ["t", "s", "y0", "flow", "heat", "wave", "rem", "op_norm", "op_bound", "gap", "gap_bound"],
        norm_rows,
    )
    checks = [acceptance._le("spectral.identity", worst, 1e-7)]
    if math.isfinite(op_slack):
        checks.append(acceptance._slack("spectral.op_norm_bound", op_slack))
        checks.append(acceptance._slack("spectral.gap_bound", gap_slack))
    return checks


def cmd_limits(cfg: RunConfig) -> list[Check]:
    k = cfg.memory_kernel()
    m = _model(cfg)
    js = list(range(10, min(cfg.jmax, 100) + 1, 10))
    rows, checks = [], []
    for t in cfg.t:
        out = hf_limits(k, t, js, cfg.N, cfg.s, cfg.L, model=m)
        for r in out:
            rows.append((t, r.j, r.eta, r.phi_h4, r.wave_h4, r.heat_hs, r.rem_hs, r.phi_l2, r.wave_l2))
        if t == 0:
            # initial time: the flow is the identity and the wave part fades
            checks.append(acceptance._le("limits.flow_l2_initial", max(abs(r.phi_l2 - 1.0) for r in out), 1e-12))
            checks.append(acceptance._in("limits.wave_l2_slope", loglog_slope([r.eta for r in out], [r.wave_l2 for r in out]), -1.2, -0.8))
            continue
        target = abs(k(t))
        gap = [abs(r.phi_h4 - target) for r in out]
        checks.append(acceptance._le(f"limits.flow_h4[t={t:g}]", gap[-1], 1e-3))
        if min(gap) > 0:
            checks.append(acceptance._in(f"limits.rate_slope[t={t:g}]", loglog_slope([r.eta for r in out], gap), -1.2, -0.8))
    write_csv(_out(cfg, "limits.csv"), ["t", "j", "eta", "flow_h4", "wave_h4", "heat_hs", "rem_hs", "flow_l2", "wave_l2"], rows)
    return checks


def cmd_smoothing(cfg: RunConfig) -> list[Check]:
    k = cfg.memory_kernel()
    m = _model(cfg)
    js = np.arange(40, 201, 20)
    eta = (js * math.pi / cfg.L) ** 2
    rows, checks = [], []
    for t in cfg.t:
        if t <= 0:
            continue
        order = smoothing_order(k, cfg.N, t, model=m)
        rep = flow_report(m, t, eta, cfg.N)
        slope = loglog_slope(eta, np.abs(rep.wave)) if np.all(rep.wave != 0) else float("nan")
        rows.append((t, order, slope))
        if isinstance(order, int):
            checks.append(acceptance._in(f"smoothing.wave_exponent[t={t:g}]", slope, -order - 1.3, -order - 0.7))
    write_csv(_out(cfg, "smoothing.csv"), ["t", "k", "wave_decay_exponent"], rows)
    return checks


def cmd_verify_all(cfg: RunConfig, which=None) -> list[Check]:
    # the acceptance suite fixes its own kernels and grids
    return acceptance.run_all(which, log=print)


COMMANDS = {
    "ode": cmd_ode,
    "kernel-table": cmd_kernel_table,
    "conv-table": cmd_conv_table,
    "coeffs": cmd_coeffs,
    "decompose": cmd_decompose,
    "limits": cmd_limits,
    "smoothing": cmd_smoothing,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        if args.command == "verify-all":
            which = {int(c) for c in args.criteria} if args.criteria else None
            checks = cmd_verify_all(cfg, which)
        else:
            if args.command == "spectral":
                checks = cmd_spectral(cfg, args.initial)
            else:
                checks = COMMANDS[args.command](cfg)
            for c in checks:
                print(c.line())
    except (MemflowError, OSError) as exc:
        print(f"memflow: error: {exc}", file=sys.stderr)
        return 2
    write_json(_out(cfg, "summary.json"), [c.as_json() for c in checks])
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} assertions passed")
    return 1 if failed else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
