"""Level traces along the drive, with and without the feedback coupling.

The instantaneous levels are the roots of a monic quartic in E.  With the
coupling off, the anti-phase levels pinch to zero twice per cycle,
wherever gamma(t)^2 = -delta1*delta2; switching the coupling on (c = 3)
keeps every root away from zero for the whole cycle.  Spurious roots (the
identical zero pair the quartic always carries at c = 0) are excluded
from the floor.  Each trace is written as a CSV with branch-continued
columns.
"""

import math
import os

import numpy as np

from lzsm import ModelParams, spectrum_vs_time, write_spectrum_csv

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out")


def time_grid() -> np.ndarray:
    # include the exact bias crossings gamma(t) = +/- 1 where the
    # anti-phase c=0 levels coalesce, so the pinch shows at full depth
    base = np.linspace(0.0, 4.0 * math.pi, 2001)
    s = math.asin(0.1)
    crossings = [m * 2.0 * math.pi + t0
                 for m in (0, 1)
                 for t0 in (s, math.pi - s, math.pi + s, 2.0 * math.pi - s)]
    return np.unique(np.concatenate([base, crossings]))


def trace(c: float, anti: bool):
    p = ModelParams.from_nonreciprocity(1.0, 1.0, c, 10.0, 1.0,
                                        anti_phase=anti)
    return spectrum_vs_time(p, time_grid())


def main():
    os.makedirs(OUT, exist_ok=True)
    for anti in (False, True):
        side = "anti" if anti else "in"
        for c in (0.0, 3.0):
            tr = trace(c, anti)
            genuine = np.where(tr.spurious, np.inf, np.abs(tr.roots))
            floor = float(genuine.min())
            path = os.path.join(OUT, f"levels_{side}_c{c:g}.csv")
            write_spectrum_csv(tr, path)
            print(f"{side}-phase c={c:g}: min |E| over two cycles = "
                  f"{floor:.3e}  -> {os.path.relpath(path)}")
    print("the anti-phase c=0 floor is a genuine coalescence; with c=3 "
          "the levels never touch")


if __name__ == "__main__":
    main()
