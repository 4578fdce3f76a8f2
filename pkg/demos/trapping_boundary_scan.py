"""Classify Bloch orbits across the oscillation-to-trapping frontier.

A weakly driven in-phase pair with k = 2 keeps Josephson-like orbits (z
crosses the boundary circle z0 = (1-k^2)/(1+k^2) = -0.6) until the
coupling reaches twice the tunneling scale; past that the orbit stays
trapped in its starting hemisphere.  Anti-phase tunneling has no such
frontier: any nonzero coupling traps.
"""

import numpy as np

from lzsm import (BiorthState, ModelParams, integrate_bloch_nonlinear,
                  project, trapping_metric)


def classify(c: float, omega: float, anti: bool):
    p = ModelParams.from_nonreciprocity(1.0, 2.0, c, 0.05 * omega, omega,
                                        anti_phase=anti)
    init = BiorthState.down()
    tr = integrate_bloch_nonlinear(p, project(init), project(init, "left"),
                                   0.0, 40.0, n_samples=4001)
    return trapping_metric(tr.right)


def main():
    print("in-phase, A/omega = 0.05, eps0 = 0, k = 2")
    for omega in (5.0, 2.5):
        print(f"  Delta/omega = {1.0 / omega:g}")
        for c in np.arange(1.7, 2.31, 0.1):
            rep = classify(float(c), omega, anti=False)
            print(f"    c/Delta = {c:4.1f}  min z = {rep.min_z_over_window:+.3f}"
                  f"  boundary z0 = {rep.boundary_z:+.2f}  "
                  f"{rep.classification.name}")
    print("anti-phase, same drive")
    for c in (0.1, 0.5, 1.0):
        rep = classify(c, 2.5, anti=True)
        print(f"    c/Delta = {c:4.1f}  min z = {rep.min_z_over_window:+.3f}"
              f"  {rep.classification.name}")


if __name__ == "__main__":
    main()
