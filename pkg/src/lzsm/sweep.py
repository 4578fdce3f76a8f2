"""Cell-parallel 2D parameter sweeps over the driven two-level model.

A sweep runs one trajectory per grid cell with identical integrator options
and reduces by cell index, so the result is bitwise independent of the
worker count.  Cells whose raw population crosses the singular cap, or whose
integration fails outright, are masked rather than aborting the sweep:
divergence is data here.

Axis names may address ModelParams fields directly (eps0, omega, c, amp,
delta) or captioned ratios (eps0_over_delta, omega_over_delta, c_over_delta,
amp_over_delta, delta_over_omega, eps0_over_omega, c_over_omega,
amp_over_omega).  Ratios against delta are resolved with the fixed template's
delta; ratios against omega use the cell's omega after any omega-setting
axis has been applied.  `tied` entries resolve the same way and let a third
quantity track an axis, e.g. amp_over_omega=0.05 while omega sweeps.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np
import numba

from . import _dp45
from .dynamics import IntegratorOptions, _balanced_initial, classify_min_z
from .errors import ConfigError
from .model import BiorthState, ModelParams, biorthogonal_norm

__all__ = [
    "AxisSpec",
    "Observable",
    "SweepGrid",
    "SweepSpec",
    "run_sweep",
    "run_trapping_sweep",
]


class Observable(Enum):
    RAW_POP_A1 = "raw_pop_a1"          # raw |alpha1|^2 at the horizon
    PROJ_POP_A = "proj_pop_a"          # |alpha1|^2 / (|alpha1|^2 + |beta1|^2)
    TRAPPING_CLASS = "trapping_class"  # -1 / 0 / +1 per TrappingClass
    MIN_Z = "min_z"                    # min of z(t) over the window


# axis name -> which ModelParams quantity it ultimately sets
_TARGETS = {
    "eps0": "eps0",
    "omega": "omega",
    "c": "c",
    "amp": "amp",
    "delta": "delta",
    "eps0_over_delta": "eps0",
    "omega_over_delta": "omega",
    "c_over_delta": "c",
    "amp_over_delta": "amp",
    "delta_over_omega": "omega",
    "eps0_over_omega": "eps0",
    "c_over_omega": "c",
    "amp_over_omega": "amp",
}

# names whose values must stay strictly positive to keep params valid
_POSITIVE_ONLY = {"omega", "omega_over_delta", "delta_over_omega", "delta"}

_TRAPPING_DEFAULT_SPAN = 40.0   # in units of 1/delta; see decisions ledger


@dataclass(frozen=True)
class AxisSpec:
    """One linearly spaced sweep axis."""

    name: str
    min: float
    max: float
    count: int
    scale: str = "linear"

    def __post_init__(self):
        if self.name not in _TARGETS:
            raise ConfigError(
                f"unknown axis name {self.name!r}; valid names: "
                + ", ".join(sorted(_TARGETS)))
        if self.scale != "linear":
            raise ConfigError(f"only linear axis scale is supported, got {self.scale!r}")
        if not (isinstance(self.count, int) and self.count >= 2):
            raise ConfigError(f"axis count must be an integer >= 2, got {self.count!r}")
        if not (math.isfinite(self.min) and math.isfinite(self.max)
                and self.min < self.max):
            raise ConfigError(f"axis needs finite min < max, got [{self.min}, {self.max}]")
        if self.name in _POSITIVE_ONLY and self.min <= 0.0:
            raise ConfigError(f"axis {self.name!r} requires strictly positive values")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class SweepSpec:
    """Complete description of a 2D sweep.

    Exactly one of horizon (absolute time) or horizon_periods (multiples of
    the cell's drive period) must be set, except for trapping observables
    where run_trapping_sweep supplies a default window.  With stroboscopic
    True (the default) the RAW_POP_A1 / PROJ_POP_A observables are read out
    at the whole drive period nearest the horizon, at least one period; the
    interference pattern is bias-symmetric only at those times.
    """

    axis_x: AxisSpec
    axis_y: AxisSpec
    fixed: ModelParams
    observable: Observable
    horizon: Optional[float] = None
    horizon_periods: Optional[float] = None
    initial: BiorthState = field(default_factory=BiorthState.down)
    tied: Optional[Mapping[str, float]] = None
    stroboscopic: bool = True
    tie_margin: float = 0.01
    options: IntegratorOptions = field(default_factory=IntegratorOptions)

    def __post_init__(self):
        if not isinstance(self.observable, Observable):
            raise ConfigError(f"observable must be an Observable, got {self.observable!r}")
        if self.axis_x.name == self.axis_y.name:
            raise ConfigError(f"axes must differ, both are {self.axis_x.name!r}")
        targets = {}
        for origin, name in (("axis_x", self.axis_x.name),
                             ("axis_y", self.axis_y.name)):
            targets[_TARGETS[name]] = origin
        if len(targets) != 2:
            raise ConfigError(
                f"axes {self.axis_x.name!r} and {self.axis_y.name!r} set the "
                "same model quantity")
        for name, value in (self.tied or {}).items():
            if name not in _TARGETS:
                raise ConfigError(f"unknown tied name {name!r}")
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ConfigError(f"tied value for {name!r} must be finite, got {value!r}")
            if name in _POSITIVE_ONLY and value <= 0.0:
                raise ConfigError(f"tied {name!r} requires a positive value")
            tgt = _TARGETS[name]
            if tgt in targets:
                raise ConfigError(
                    f"tied {name!r} sets the same quantity as {targets[tgt]}")
            targets[tgt] = f"tied {name!r}"
        if self.horizon is not None and self.horizon_periods is not None:
            raise ConfigError("give horizon or horizon_periods, not both")
        for hname in ("horizon", "horizon_periods"):
            h = getattr(self, hname)
            if h is not None and not (math.isfinite(h) and h > 0.0):
                raise ConfigError(f"{hname} must be positive and finite, got {h}")
        if (self.horizon is None and self.horizon_periods is None
                and self.observable in (Observable.RAW_POP_A1,
                                        Observable.PROJ_POP_A)):
            raise ConfigError(
                f"observable {self.observable.name} needs an explicit horizon")
        if not self.initial.is_finite():
            raise ConfigError("initial state has non-finite components")
        if abs(biorthogonal_norm(self.initial) - 1.0) > 1e-12:
            raise ConfigError("initial state is not biorthogonally normalized")
        if not 0.0 <= self.tie_margin < 1.0:
            raise ConfigError(f"tie_margin must lie in [0, 1), got {self.tie_margin}")

    @property
    def shape(self):
        """(rows, cols) = (count_y, count_x)."""
        return (self.axis_y.count, self.axis_x.count)


@dataclass(frozen=True)
class SweepGrid:
    """Sweep result: values plus the mask and provenance metadata.

    values[i, j] belongs to (axis_y.values[i], axis_x.values[j]).  A cell is
    masked when its trajectory hit the singular cap before its horizon or
    its integration failed (error_codes nonzero).  Masked values are not
    meaningful and are excluded from comparisons.
    """

    spec: SweepSpec
    values: np.ndarray
    singular_mask: np.ndarray
    error_codes: np.ndarray
    singular_times: np.ndarray
    effective_horizons: np.ndarray
    wall_time: float
    workers: int

    @property
    def mask(self) -> np.ndarray:
        """Cells to exclude: singular cap hits plus integrator failures."""
        return self.singular_mask | (self.error_codes != 0)

    @property
    def x_values(self) -> np.ndarray:
        return self.spec.axis_x.values

    @property
    def y_values(self) -> np.ndarray:
        return self.spec.axis_y.values

    def cell_params(self, iy: int, ix: int) -> ModelParams:
        """Model parameters of one grid cell (for standalone re-runs)."""
        fields = _resolve_fields(self.spec)
        nx = self.spec.axis_x.count
        i = iy * nx + ix
        return ModelParams(delta1=fields["delta1"][i], delta2=fields["delta2"][i],
                           c=fields["c"][i], amp=fields["amp"][i],
                           omega=fields["omega"][i], eps0=fields["eps0"][i])


def _resolve_fields(spec: SweepSpec) -> dict:
    """Flatten the grid into per-cell parameter arrays, row-major."""
    ny, nx = spec.shape
    n = ny * nx
    xv = np.tile(spec.axis_x.values, ny)
    yv = np.repeat(spec.axis_y.values, nx)
    tmpl = spec.fixed
    delta_t = tmpl.delta
    k_t = tmpl.k
    d2_sign = math.copysign(1.0, tmpl.delta2)

    out = {
        "delta1": np.full(n, tmpl.delta1),
        "delta2": np.full(n, tmpl.delta2),
        "c": np.full(n, tmpl.c),
        "amp": np.full(n, tmpl.amp),
        "omega": np.full(n, tmpl.omega),
        "eps0": np.full(n, tmpl.eps0),
    }

    entries = [(spec.axis_x.name, xv), (spec.axis_y.name, yv)]
    entries += [(name, np.full(n, float(v))) for name, v in (spec.tied or {}).items()]

    def apply(name, vals):
        if name == "delta":
            out["delta1"] = k_t * vals
            out["delta2"] = d2_sign * vals / k_t
        elif name.endswith("_over_delta"):
            if delta_t == 0.0:
                raise ConfigError(
                    f"axis {name!r} needs a nonzero delta in the fixed template")
            out[name[:-len("_over_delta")]] = vals * delta_t
        elif name == "delta_over_omega":
            out["omega"] = delta_t / vals
        elif name.endswith("_over_omega"):
            out[name[:-len("_over_omega")]] = vals * out["omega"]
        else:
            out[name] = vals

    # omega-setting entries go before omega-relative ones
    def deferred(name):
        return name.endswith("_over_omega") and name != "delta_over_omega"

    for name, vals in entries:
        if not deferred(name):
            apply(name, vals)
    for name, vals in entries:
        if deferred(name):
            apply(name, vals)
    return out


def _cell_horizons(spec: SweepSpec, omegas: np.ndarray) -> np.ndarray:
    periods = 2.0 * np.pi / omegas
    if spec.horizon is not None:
        h = np.full_like(omegas, float(spec.horizon))
    elif spec.horizon_periods is not None:
        h = spec.horizon_periods * periods
    else:
        # trapping default: long enough for the slow mean-field orbit
        delta_t = spec.fixed.delta
        if delta_t == 0.0:
            raise ConfigError("trapping default horizon needs a nonzero template delta")
        h = np.maximum(_TRAPPING_DEFAULT_SPAN / delta_t, periods)
    if spec.stroboscopic and spec.observable in (Observable.RAW_POP_A1,
                                                 Observable.PROJ_POP_A):
        h = np.maximum(1.0, np.round(h / periods)) * periods
    return h


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepGrid:
    """Compute every grid cell; identical output for any worker count.

    workers is clamped to the numba thread pool size.  Cells stop at the
    singular cap (they are masked beyond it) but a cap hit never aborts the
    sweep, and neither does a per-cell integrator failure: those cells get a
    nonzero error code and join the mask.
    """
    if not (isinstance(workers, int) and workers >= 1):
        raise ConfigError(f"workers must be a positive integer, got {workers!r}")
    fields = _resolve_fields(spec)
    omegas = fields["omega"]
    horizons = _cell_horizons(spec, omegas)
    periods = 2.0 * np.pi / omegas

    if spec.observable in (Observable.TRAPPING_CLASS, Observable.MIN_Z):
        obs_dts = periods / 128.0       # >= 100 samples per drive period
    else:
        obs_dts = horizons.copy()       # z minimum not needed; sample coarsely
    windows = np.zeros_like(horizons)

    y0, ls0 = _balanced_initial(spec.initial)
    # the kernel starts from ls = 0: fold the balanced scales into raw values
    y0 = np.concatenate([y0[:4] * math.exp(ls0[0]), y0[4:] * math.exp(ls0[1])])

    opts = spec.options
    max_step_fracs = np.full_like(horizons, opts.max_step_periods)
    obs_code = {
        Observable.RAW_POP_A1: _dp45.OBS_RAW_POP_A1,
        Observable.PROJ_POP_A: _dp45.OBS_PROJ_POP_A,
        Observable.TRAPPING_CLASS: _dp45.OBS_MIN_Z,
        Observable.MIN_Z: _dp45.OBS_MIN_Z,
    }[spec.observable]

    used = min(workers, numba.config.NUMBA_NUM_THREADS)
    prev = numba.get_num_threads()
    start = time.perf_counter()
    try:
        numba.set_num_threads(used)
        values, status, singular_t, minz = _dp45.sweep_kernel(
            fields["delta1"], fields["delta2"], fields["c"], fields["amp"],
            omegas, fields["eps0"], y0, horizons, windows, obs_dts,
            opts.rtol, opts.atol, max_step_fracs,
            opts.rescale_threshold, opts.singular_cap,
            obs_code, True)
    finally:
        numba.set_num_threads(prev)
    wall = time.perf_counter() - start

    ny, nx = spec.shape
    capped = ~np.isnan(singular_t)
    if spec.observable is Observable.TRAPPING_CLASS:
        ks = np.sqrt(np.abs(fields["delta1"] / fields["delta2"]))
        out = np.empty_like(values)
        for i in range(len(out)):
            out[i] = float(classify_min_z(minz[i], ks[i], spec.tie_margin).value)
        values = out

    return SweepGrid(
        spec=spec,
        values=values.reshape(ny, nx),
        singular_mask=capped.reshape(ny, nx),
        error_codes=status.astype(np.int8).reshape(ny, nx),
        singular_times=singular_t.reshape(ny, nx),
        effective_horizons=horizons.reshape(ny, nx),
        wall_time=wall,
        workers=used,
    )


def run_trapping_sweep(spec: SweepSpec, workers: int = 1) -> SweepGrid:
    """run_sweep specialized to the trapping observables.

    Requires observable TRAPPING_CLASS or MIN_Z; when the spec names no
    horizon, each cell gets max(40/delta, one drive period), wide enough for
    the slow Josephson orbit that sets the classification.
    """
    if spec.observable not in (Observable.TRAPPING_CLASS, Observable.MIN_Z):
        raise ConfigError(
            "run_trapping_sweep needs observable TRAPPING_CLASS or MIN_Z, "
            f"got {spec.observable.name}")
    return run_sweep(spec, workers=workers)
