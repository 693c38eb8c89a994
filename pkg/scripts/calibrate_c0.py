"""Calibrate the constant in the L^2 -> H^alpha flow bound.

For each test kernel and ``t`` on a log grid, prints the ratio of the
truncated operator norm to ``t^{-alpha/2} exp(2 (1+t) (1 + ||M||_{C^2}))``.
The largest ratio is a lower bound for the constant; the library uses 1.
"""

import argparse

import numpy as np

from memflow.acceptance import TEST_KERNELS
from memflow.spectral import flow_model, op_norm, op_norm_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=4.0)
    ap.add_argument("--jmax", type=int, default=400)
    args = ap.parse_args()
    worst = 0.0
    for name, kernel in TEST_KERNELS.items():
        model = flow_model(kernel)
        for t in np.logspace(-4, np.log10(2.0), 13):
            res = op_norm(kernel, float(t), 0.0, args.alpha, args.jmax, model=model)
            ratio = res.value / op_norm_bound(kernel, float(t), args.alpha, c0=1.0)
            worst = max(worst, ratio)
            print(f"{name:>9}  t={t:9.3g}  norm={res.value:12.5g}  ratio={ratio:.3g}  argmax_j={res.argmax_j}")
    print(f"largest ratio: {worst:.3g}")


if __name__ == "__main__":
    main()
