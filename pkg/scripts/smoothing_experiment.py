"""Extra smoothing of the wave part at zeros of the kernel.

With ``k(t)`` the first index where ``h_l(t) != 0``, the wave multiplier
decays like ``eta^{-k(t)-1}``. For ``M = sin t`` the order jumps from 1 to 2
at ``t = pi``.
"""

import argparse
import math

import numpy as np

from memflow.coeffs import coeff_series
from memflow.conv import Grid
from memflow.flowkernel import build_flow_kernel
from memflow.kernel import MemoryKernel
from memflow.spectral import FlowModel, flow_report, loglog_slope, smoothing_order


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kernel", default="1*t^0*exp(0)*sin(1)")
    ap.add_argument("--N", type=int, default=4)
    args = ap.parse_args()
    kernel = MemoryKernel.from_spec(args.kernel)
    T = 4.0
    fk = build_flow_kernel(kernel, T, 4000)
    model = FlowModel(fk, coeff_series(kernel, args.N, Grid(T, 4000), table=fk.conv))
    eta = np.logspace(2, 4, 9)
    for t in (1.0, 2.0, math.pi - 0.1, math.pi, math.pi + 0.1):
        k = smoothing_order(kernel, args.N, t, model=model)
        wave = np.abs(flow_report(model, t, eta, args.N).wave)
        print(f"t={t:.4f}  k(t)={k}  wave decay exponent={loglog_slope(eta, wave):+.3f}")


if __name__ == "__main__":
    main()
