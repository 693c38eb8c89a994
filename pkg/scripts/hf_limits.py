"""High-frequency behaviour of single-mode flows.

Prints ``eta^2 |w_eta(t)|`` against its limit ``|M(t)|`` and the fitted
rate of the gap. The rate is -1 whenever ``h_2(t) != 0`` and drops to -2
where ``h_2`` vanishes; for ``M = e^{-t/2}`` that happens at ``t = 1``.
Also prints ``|W_N(0) e_j|`` at the initial time, which decays like
``|M(0)| eta^{-2}`` because ``h_0 = 0``.
"""

import argparse

import numpy as np

from memflow.kernel import MemoryKernel
from memflow.spectral import flow_model, flow_report, hf_limits, loglog_slope


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kernel", default="1*t^0*exp(-0.5)")
    ap.add_argument("--t", type=float, nargs="*", default=[0.25, 0.5, 1.0, 1.5])
    ap.add_argument("--N", type=int, default=3)
    args = ap.parse_args()
    kernel = MemoryKernel.from_spec(args.kernel)
    model = flow_model(kernel)
    js = [10, 20, 40, 70, 100]
    for t in args.t:
        rows = hf_limits(kernel, t, js, N=args.N, model=model)
        gap = [abs(r.phi_h4 - abs(kernel(t))) for r in rows]
        h2 = float(model.cs.h[2](t))
        print(f"t={t:g}  |M(t)|={abs(kernel(t)):.6f}  h_2(t)={h2:+.3e}  rate={loglog_slope([r.eta for r in rows], gap):+.3f}")
        for r, g in zip(rows, gap):
            print(f"    j={r.j:4d}  eta^2|w|={r.phi_h4:.9f}  gap={g:.3e}")
    eta = np.array(js, dtype=float) ** 2
    wave0 = np.abs(flow_report(model, 0.0, eta, args.N).wave)
    print(f"t=0  |W_N(0) e_j| rate={loglog_slope(eta, wave0):+.3f}  |M(0)| eta^-2 ratio={wave0[-1] * eta[-1] ** 2:.6f}")


if __name__ == "__main__":
    main()
