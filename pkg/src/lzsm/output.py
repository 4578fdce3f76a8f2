"""Disk writers: grid CSV, JSON metadata sidecars, and pixmap heatmaps.

All text formats use %.17g so doubles survive a round trip.  Heatmaps are
binary P6 pixmaps with equal RGB channels; unmasked data uses grey levels
0..250 and masked cells are pure white (255), mirroring the white singular
regions of the reference heatmaps.  No plotting libraries are involved.
"""

from __future__ import annotations

import csv
import json
from enum import Enum
from typing import Mapping

import numpy as np

from . import __version__ as _pkg_version
from .sweep import Observable, SweepGrid

__all__ = [
    "grid_metadata",
    "write_bloch_csv",
    "write_grid_csv",
    "write_grid_json",
    "write_grid_ppm",
    "write_heatmap_ppm",
    "write_json",
    "write_matrix_csv",
    "write_spectrum_csv",
    "write_table_csv",
    "write_trajectory_csv",
    "write_weak_csv",
]

_FMT = "%.17g"


def _fmt(v) -> str:
    return _FMT % float(v)


def write_matrix_csv(path, xs, ys, values, corner="y\\x") -> None:
    """Matrix CSV: header row of x coordinates, first column y coordinates."""
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([corner] + [_fmt(x) for x in np.asarray(xs)])
        for y, row in zip(np.asarray(ys), values):
            w.writerow([_fmt(y)] + [_fmt(v) for v in row])


def write_table_csv(path, columns: Mapping[str, np.ndarray]) -> None:
    """Column-oriented CSV from an ordered name -> array mapping."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise ValueError("all columns must have equal length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(n):
            w.writerow([_fmt(a[i]) for a in arrays])


def _json_default(obj):
    if isinstance(obj, Enum):
        return obj.name
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default, allow_nan=True)
        fh.write("\n")


def _versions() -> dict:
    import numba
    import scipy

    return {
        "lzsm": _pkg_version,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _spec_echo(spec) -> dict:
    def axis(ax):
        return {"name": ax.name, "min": ax.min, "max": ax.max,
                "count": ax.count, "scale": ax.scale}

    fixed = spec.fixed
    init = spec.initial
    opts = spec.options
    return {
        "axis_x": axis(spec.axis_x),
        "axis_y": axis(spec.axis_y),
        "fixed": {"delta1": fixed.delta1, "delta2": fixed.delta2,
                  "c": fixed.c, "amp": fixed.amp, "omega": fixed.omega,
                  "eps0": fixed.eps0},
        "observable": spec.observable.name,
        "horizon": spec.horizon,
        "horizon_periods": spec.horizon_periods,
        "initial": {"alpha1": complex(init.alpha1), "beta1": complex(init.beta1),
                    "alpha2": complex(init.alpha2), "beta2": complex(init.beta2),
                    "logscale_r": init.logscale_r, "logscale_l": init.logscale_l},
        "tied": dict(spec.tied) if spec.tied else {},
        "stroboscopic": spec.stroboscopic,
        "tie_margin": spec.tie_margin,
        "options": {"rtol": opts.rtol, "atol": opts.atol,
                    "rescale_threshold": opts.rescale_threshold,
                    "singular_cap": opts.singular_cap,
                    "max_step_periods": opts.max_step_periods,
                    "stop_at_singular": opts.stop_at_singular},
    }


def grid_metadata(grid: SweepGrid) -> dict:
    return {
        "spec": _spec_echo(grid.spec),
        "shape": list(grid.values.shape),
        "masked_cells": int(grid.mask.sum()),
        "singular_cells": int(grid.singular_mask.sum()),
        "error_cells": int(((grid.error_codes != 0)
                            & ~grid.singular_mask).sum()),
        "wall_time_seconds": grid.wall_time,
        "workers": grid.workers,
        "versions": _versions(),
    }


def write_grid_csv(grid: SweepGrid, path) -> None:
    write_matrix_csv(path, grid.x_values, grid.y_values, grid.values,
                     corner=f"{grid.spec.axis_y.name}\\{grid.spec.axis_x.name}")


def write_grid_json(grid: SweepGrid, path) -> None:
    write_json(path, grid_metadata(grid))


def write_heatmap_ppm(path, grey, mask=None) -> None:
    """Binary P6 pixmap from grey levels in [0, 1]; masked cells white.

    Row 0 of the input is drawn at the bottom, so an increasing y axis
    points up as in a conventional heatmap.
    """
    grey = np.clip(np.nan_to_num(np.asarray(grey, dtype=float),
                                 nan=0.0, posinf=1.0, neginf=0.0), 0.0, 1.0)
    levels = np.round(grey * 250.0).astype(np.uint8)
    if mask is not None:
        levels = np.where(np.asarray(mask, bool), np.uint8(255), levels)
    img = levels[::-1]
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.repeat(img[..., None], 3, axis=2).tobytes())


def _grid_grey(grid: SweepGrid) -> np.ndarray:
    v = grid.values.astype(float)
    obs = grid.spec.observable
    if obs is Observable.RAW_POP_A1:
        # dynamic range spans many decades on divergent panels
        x = np.log1p(np.maximum(v, 0.0))
        ok = ~grid.mask & np.isfinite(x)
        top = float(x[ok].max()) if ok.any() else 0.0
        return x / top if top > 0.0 else np.zeros_like(x)
    if obs is Observable.PROJ_POP_A:
        return v
    # MIN_Z and TRAPPING_CLASS both live in [-1, 1]
    return (v + 1.0) / 2.0


def write_grid_ppm(grid: SweepGrid, path) -> None:
    write_heatmap_ppm(path, _grid_grey(grid), grid.mask)


def write_trajectory_csv(traj, path) -> None:
    """Biorthogonal trajectory table: amplitudes, angles, z, feedback."""
    w = traj.feedback
    cols = {
        "t": traj.times,
        "re_alpha1": traj.alpha1.real, "im_alpha1": traj.alpha1.imag,
        "re_beta1": traj.beta1.real, "im_beta1": traj.beta1.imag,
        "re_alpha2": traj.alpha2.real, "im_alpha2": traj.alpha2.imag,
        "re_beta2": traj.beta2.real, "im_beta2": traj.beta2.imag,
        "logscale_r": traj.logscale_r, "logscale_l": traj.logscale_l,
        "theta_r": traj.right_theta, "phi_r": traj.right_phi,
        "mu_r": traj.right_mu, "nu_r": traj.right_nu,
        "theta_l": traj.left_theta, "phi_l": traj.left_phi,
        "z": traj.z, "re_w": w.real, "im_w": w.imag,
    }
    write_table_csv(path, cols)


def write_bloch_csv(pair_or_traj, path) -> None:
    """Projective trajectory table; includes the left side when present."""
    right = getattr(pair_or_traj, "right", pair_or_traj)
    cols = {
        "t": right.times,
        "theta": right.theta, "phi": right.phi,
        "mu": right.mu, "nu": right.nu,
        "z": right.z,
    }
    left = getattr(pair_or_traj, "left", None)
    if left is not None:
        cols.update({"theta_l": left.theta, "phi_l": left.phi,
                     "mu_l": left.mu, "nu_l": left.nu})
        w = getattr(pair_or_traj, "feedback", None)
        if w is not None:
            cols.update({"re_w": np.asarray(w).real, "im_w": np.asarray(w).imag})
    write_table_csv(path, cols)


def write_spectrum_csv(trace, path) -> None:
    """Branch-continued level table with classification labels."""
    n = len(trace.times)
    rows = []
    for i in range(n):
        row = [_fmt(trace.times[i]), _fmt(trace.gamma[i])]
        for b in range(4):
            row += [_fmt(trace.roots[i, b].real), _fmt(trace.roots[i, b].imag)]
        row.append(trace.classifications[i].name)
        row.append("".join("1" if s else "0" for s in trace.spurious[i]))
        rows.append(row)
    header = ["t", "gamma"]
    for b in range(4):
        header += [f"re_E{b}", f"im_E{b}"]
    header += ["classification", "spurious"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_weak_csv(times, exact_pop, dirac_pop, path) -> None:
    """Side-by-side upper-level population: exact vs gauge-frame run."""
    write_table_csv(path, {
        "t": times,
        "exact_pop_a1": exact_pop,
        "dirac_pop_a1": dirac_pop,
    })
