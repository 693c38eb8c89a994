"""Second-order convergence of the stepping schemes and the trapezoidal convolution.

Oracles: ``w = (1 - t) e^{-t}`` for ``M = 1, eta = 2`` and
``(cos * cos)(t) = (t cos t + sin t) / 2``.
"""

import numpy as np

from memflow.conv import Grid, GridFn, convolve
from memflow.kernel import MemoryKernel
from memflow.memode import solve_stepping


def main():
    one = MemoryKernel.constant(1.0)
    print(f"{'n':>6} {'exp scheme':>12} {'CN scheme':>12} {'cos*cos':>12}")
    prev = None
    for n in (125, 250, 500, 1000, 2000):
        g = Grid(2.0, n)
        exact = (1 - g.nodes) * np.exp(-g.nodes)
        errs = [np.max(np.abs(solve_stepping(one, 2.0, g, scheme=s).w.values - exact)) for s in ("exp", "trapezoid")]
        c = GridFn.sample(g, np.cos)
        errs.append(np.max(np.abs(convolve(c, c).values - (g.nodes * np.cos(g.nodes) + np.sin(g.nodes)) / 2)))
        line = f"{n:6d} " + " ".join(f"{e:12.3e}" for e in errs)
        if prev is not None:
            line += "   ratios " + " ".join(f"{a / b:5.2f}" for a, b in zip(prev, errs))
        print(line)
        prev = errs


if __name__ == "__main__":
    main()
