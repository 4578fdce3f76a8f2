"""Config-driven command line front end.

Subcommands cover single runs (spectrum, region, trajectory, bloch,
trapping, weak), 2-d sweeps, and canned figure reproductions driven by the
packaged manifest.  Configs are INI files with one [run] section plus
[model], [integrator], and one subcommand section; unknown sections or keys
are rejected by name.  Exit codes: 0 success, 2 bad config, 3 numerical
failure, 4 sweep finished but with masked cells.  A diverging trajectory is
not a failure; it is reported through singular_time and the mask.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources

import numpy as np

from . import __version__
from .dynamics import (IntegratorOptions, integrate_biorthogonal,
                       integrate_bloch_linear, integrate_bloch_nonlinear,
                       project, trapping_metric)
from .errors import ConfigError, NumericalError
from .model import BiorthState, ModelParams
from .output import (grid_metadata, write_bloch_csv, write_grid_csv,
                     write_grid_json, write_grid_ppm, write_heatmap_ppm,
                     write_json, write_matrix_csv, write_spectrum_csv,
                     write_trajectory_csv, write_weak_csv, _versions)
from .spectrum import region_map, spectrum_vs_time
from .sweep import AxisSpec, Observable, SweepSpec, run_sweep
from .weakcoupling import DiracParams, integrate_dirac, interference_condition

__all__ = [
    "EXIT_CONFIG", "EXIT_NUMERICAL", "EXIT_OK", "EXIT_PARTIAL",
    "RunConfig", "figure_ids", "main", "manifest_entry", "parse_config",
    "run", "serialize_config",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

WORKERS_ENV = "LZSM_WORKERS"
FORMATS = ("csv", "json", "ppm")
SUBCOMMANDS = ("spectrum", "region", "trajectory", "bloch", "trapping",
               "weak", "sweep", "figure")

_MODEL_KEYS = ("delta1", "delta2", "c", "amp", "omega", "eps0")
_INTEGRATOR_KEYS = {
    "rtol": float, "atol": float, "rescale_threshold": float,
    "singular_cap": float, "max_step_periods": float, "stop_at_singular": bool,
}
_RUN_KEYS = {"subcommand": str, "out": str, "formats": str, "workers": int}

_STATE_KEYS = {f"{name}_{part}": float
               for name in ("alpha1", "beta1", "alpha2", "beta2")
               for part in ("re", "im")}

_SECTION_KEYS: dict[str, dict[str, type]] = {
    "spectrum": {"t_max": float, "n_samples": int},
    "region": {"x_min": float, "x_max": float, "y_min": float,
               "y_max": float, "count": int},
    "trajectory": {"t_max": float, "n_samples": int, **_STATE_KEYS},
    "bloch": {"t_max": float, "n_samples": int, **_STATE_KEYS},
    "trapping": {"t_max": float, "n_samples": int, "tie_margin": float,
                 **_STATE_KEYS},
    "weak": {"periods": float, "n_samples": int},
    "sweep": {"observable": str,
              "x_name": str, "x_min": float, "x_max": float, "x_count": int,
              "y_name": str, "y_min": float, "y_max": float, "y_count": int,
              "horizon": float, "horizon_periods": float,
              "stroboscopic": bool, "tie_margin": float,
              "tied_name": str, "tied_value": float, **_STATE_KEYS},
    "figure": {"id": str},
}

# model section is meaningless for these; figure forbids it outright
_MODEL_FREE = ("region", "figure")


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    out_dir: str = "."
    formats: tuple[str, ...] = FORMATS
    workers: int = 1
    model: ModelParams | None = None
    options: IntegratorOptions = field(default_factory=IntegratorOptions)
    settings: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"unknown output format {bad[0]!r}")
        if not self.formats:
            raise ConfigError("at least one output format is required")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ConfigError(f"workers must be a positive integer, "
                              f"got {self.workers!r}")
        if self.model is None and self.subcommand not in _MODEL_FREE:
            raise ConfigError(f"subcommand {self.subcommand!r} needs a "
                              f"[model] section")
        known = _SECTION_KEYS[self.subcommand]
        for key, _ in self.settings:
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section "
                                  f"[{self.subcommand}]")
        object.__setattr__(self, "settings",
                           tuple(sorted(self.settings, key=lambda kv: kv[0])))

    def setting(self, key, default=None):
        for k, v in self.settings:
            if k == key:
                return v
        return default


def _convert(section: str, key: str, raw: str, target: type):
    raw = raw.strip()
    if target is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"key {key!r} in [{section}] must be a boolean, "
                          f"got {raw!r}")
    try:
        return target(raw)
    except ValueError:
        raise ConfigError(f"key {key!r} in [{section}] must be "
                          f"{target.__name__}, got {raw!r}") from None


def _section_items(cp, section: str, known: dict) -> dict:
    out = {}
    for key, raw in cp.items(section):
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        out[key] = _convert(section, key, raw, known[key])
    return out


def parse_config(path) -> RunConfig:
    """Load and fully validate an INI run config."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                   interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path!r}: {exc}") from None

    if not cp.has_section("run"):
        raise ConfigError("missing section [run]")
    run_items = _section_items(cp, "run", _RUN_KEYS)
    if "subcommand" not in run_items:
        raise ConfigError("missing required key 'subcommand' in section [run]")
    sub = run_items["subcommand"]
    if sub not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {sub!r}")

    allowed = {"run", "model", "integrator", sub}
    if sub == "figure":
        allowed -= {"model", "integrator"}
    for section in cp.sections():
        if section not in allowed:
            if sub == "figure" and section in ("model", "integrator"):
                raise ConfigError(
                    f"section [{section}] may not be combined with the "
                    f"figure subcommand; the manifest fixes everything "
                    f"except the output directory")
            raise ConfigError(f"unknown section [{section}]")

    model = None
    if cp.has_section("model"):
        items = _section_items(cp, "model",
                               {k: float for k in _MODEL_KEYS})
        for key in ("delta1", "delta2", "amp", "omega"):
            if key not in items:
                raise ConfigError(f"missing required key {key!r} in "
                                  f"section [model]")
        model = ModelParams(**items)

    options = IntegratorOptions()
    if cp.has_section("integrator"):
        items = _section_items(cp, "integrator", _INTEGRATOR_KEYS)
        options = replace(options, **items)

    settings = ()
    if cp.has_section(sub):
        settings = tuple(_section_items(cp, sub, _SECTION_KEYS[sub]).items())

    formats = FORMATS
    if "formats" in run_items:
        formats = tuple(f.strip() for f in run_items["formats"].split(",")
                        if f.strip())
    workers = run_items.get("workers")
    if workers is None:
        workers = _env_workers()

    config = RunConfig(subcommand=sub,
                       out_dir=run_items.get("out", "."),
                       formats=formats, workers=workers,
                       model=model, options=options, settings=settings)
    _check_required(config)
    return config


def _check_required(config: RunConfig) -> None:
    need = {"trajectory": ("t_max",), "bloch": ("t_max",),
            "sweep": ("observable", "x_name", "x_min", "x_max", "x_count",
                      "y_name", "y_min", "y_max", "y_count")}
    for key in need.get(config.subcommand, ()):
        if config.setting(key) is None:
            raise ConfigError(f"missing required key {key!r} in section "
                              f"[{config.subcommand}]")
    obs = config.setting("observable")
    if obs is not None and obs not in Observable.__members__:
        raise ConfigError(f"unknown observable {obs!r}; choose from "
                          f"{', '.join(Observable.__members__)}")


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(config: RunConfig) -> str:
    """INI text that parse_config maps back to an equal RunConfig."""
    lines = ["[run]",
             f"subcommand = {config.subcommand}",
             f"out = {config.out_dir}",
             f"formats = {','.join(config.formats)}",
             f"workers = {config.workers}",
             ""]
    if config.model is not None:
        m = config.model
        lines.append("[model]")
        lines += [f"{k} = {_fmt_value(getattr(m, k))}" for k in _MODEL_KEYS]
        lines.append("")
    o = config.options
    lines.append("[integrator]")
    lines += [f"{k} = {_fmt_value(getattr(o, k))}" for k in _INTEGRATOR_KEYS]
    lines.append("")
    if config.settings:
        lines.append(f"[{config.subcommand}]")
        lines += [f"{k} = {_fmt_value(v)}" for k, v in config.settings]
        lines.append("")
    return "\n".join(lines)


def _env_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, "
                          f"got {raw!r}") from None
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {workers}")
    return workers


# ---------------------------------------------------------------- manifest

@lru_cache(maxsize=1)
def _manifest() -> dict:
    text = (resources.files("lzsm") / "data" / "figure_manifest.json"
            ).read_text("utf-8")
    data = json.loads(text)
    if data.get("manifest_version") != 1:
        raise ConfigError("unsupported figure manifest version")
    return data["figures"]


def figure_ids() -> tuple[str, ...]:
    return tuple(_manifest())


def manifest_entry(fig_id: str) -> dict:
    try:
        return _manifest()[fig_id]
    except KeyError:
        raise ConfigError(f"unknown figure id {fig_id!r}; known ids run "
                          f"fig1a through fig10d") from None


# --------------------------------------------------------------- handlers

def _initial_state(config: RunConfig) -> BiorthState:
    if not any(k in _STATE_KEYS for k, _ in config.settings):
        return BiorthState.down()
    def amp(name, default):
        return complex(config.setting(f"{name}_re", default.real),
                       config.setting(f"{name}_im", default.imag))
    return BiorthState(alpha1=amp("alpha1", 0j), beta1=amp("beta1", 1 + 0j),
                       alpha2=amp("alpha2", 0j), beta2=amp("beta2", 1 + 0j))


def _out(config: RunConfig, name: str) -> str:
    return os.path.join(config.out_dir, name)


def _meta(config: RunConfig, extra: dict) -> dict:
    payload = {"subcommand": config.subcommand, "versions": _versions()}
    if config.model is not None:
        m = config.model
        payload["model"] = {k: getattr(m, k) for k in _MODEL_KEYS}
    payload.update(extra)
    return payload


def _emit_meta(config: RunConfig, name: str, extra: dict) -> None:
    if "json" in config.formats:
        write_json(_out(config, name), _meta(config, extra))


def _run_spectrum(config: RunConfig) -> int:
    params = config.model
    t_max = config.setting("t_max", 2.0 * params.drive_period)
    n = config.setting("n_samples", 1001)
    trace = spectrum_vs_time(params, np.linspace(0.0, t_max, n))
    if "csv" in config.formats:
        write_spectrum_csv(trace, _out(config, "spectrum.csv"))
    _emit_meta(config, "spectrum.json",
               {"t_max": t_max, "n_samples": n,
                "spurious_points": int(trace.spurious.any(axis=1).sum())})
    return EXIT_OK


def _run_region(config: RunConfig) -> int:
    xs = np.linspace(config.setting("x_min", -4.0),
                     config.setting("x_max", 4.0),
                     config.setting("count", 201))
    ys = np.linspace(config.setting("y_min", -4.0),
                     config.setting("y_max", 4.0),
                     config.setting("count", 201))
    ids = region_map(xs, ys)
    if "csv" in config.formats:
        write_matrix_csv(_out(config, "region.csv"), xs, ys, ids,
                         corner="gamma_over_delta\\c_over_delta")
    if "ppm" in config.formats:
        write_heatmap_ppm(_out(config, "region.ppm"), (ids - 1) / 2.0)
    _emit_meta(config, "region.json",
               {"x_axis": "c_over_delta", "y_axis": "gamma_over_delta",
                "cells_per_region": {int(r): int((ids == r).sum())
                                     for r in (1, 2, 3)}})
    return EXIT_OK


def _run_trajectory(config: RunConfig) -> int:
    t_max = config.setting("t_max")
    n = config.setting("n_samples", 2001)
    traj = integrate_biorthogonal(config.model, _initial_state(config),
                                  0.0, t_max, n_samples=n,
                                  options=config.options)
    if "csv" in config.formats:
        write_trajectory_csv(traj, _out(config, "trajectory.csv"))
    _emit_meta(config, "trajectory.json",
               {"t_max": t_max, "n_samples": n,
                "singular_time": traj.singular_time,
                "steps": traj.stats.steps, "rescales": traj.stats.rescales,
                "max_norm_drift": traj.stats.max_norm_drift})
    return EXIT_OK


def _bloch_pair(params, t_max, n, rtol, atol):
    init = BiorthState.down()
    if params.c == 0.0:
        return integrate_bloch_linear(params, project(init), 0.0, t_max,
                                      n_samples=n, rtol=rtol, atol=atol)
    return integrate_bloch_nonlinear(params, project(init),
                                     project(init, "left"), 0.0, t_max,
                                     n_samples=n, rtol=rtol, atol=atol)


def _run_bloch(config: RunConfig) -> int:
    t_max = config.setting("t_max")
    n = config.setting("n_samples", 2001)
    traj = _bloch_pair(config.model, t_max, n,
                       config.options.rtol, config.options.atol)
    if "csv" in config.formats:
        write_bloch_csv(traj, _out(config, "bloch.csv"))
    _emit_meta(config, "bloch.json",
               {"t_max": t_max, "n_samples": n,
                "linear": config.model.c == 0.0})
    return EXIT_OK


def _trapping_samples(t_max: float, period: float, requested) -> int:
    if requested is not None:
        return requested
    # keep >= 100 samples per drive period for the window check
    return max(2001, int(math.ceil(120.0 * t_max / period)) + 1)


def _run_trapping(config: RunConfig) -> int:
    params = config.model
    default_window = max(40.0 / params.delta, params.drive_period)
    t_max = config.setting("t_max", default_window)
    n = _trapping_samples(t_max, params.drive_period,
                          config.setting("n_samples"))
    traj = _bloch_pair(params, t_max, n,
                       config.options.rtol, config.options.atol)
    report = trapping_metric(getattr(traj, "right", traj),
                             tie_margin=config.setting("tie_margin", 0.01))
    if "csv" in config.formats:
        write_bloch_csv(traj, _out(config, "trapping.csv"))
    _emit_meta(config, "trapping.json",
               {"classification": report.classification.name,
                "min_z_over_window": report.min_z_over_window,
                "boundary_z": report.boundary_z,
                "window": list(report.window)})
    return EXIT_OK


def _weak_artifacts(params, periods, n, rtol, atol):
    t1 = periods * params.drive_period
    exact = integrate_biorthogonal(params, BiorthState.down(), 0.0, t1,
                                   n_samples=n)
    dp = DiracParams.from_params(params)
    dirac = integrate_dirac(dp, (0.0, 1.0), 0.0, t1, n_samples=n,
                            rtol=rtol, atol=atol)
    condition = interference_condition(params)
    return exact, dirac, condition


def _run_weak(config: RunConfig) -> int:
    params = config.model
    periods = config.setting("periods", 10.0)
    n = config.setting("n_samples", 2001)
    exact, dirac, condition = _weak_artifacts(
        params, periods, n, config.options.rtol, config.options.atol)
    if "csv" in config.formats:
        write_weak_csv(dirac.times, exact.raw_pop_a1, dirac.pop_a1,
                       _out(config, "weak.csv"))
    _emit_meta(config, "weak.json",
               {"periods": periods, "n_samples": n,
                "verdict": condition.verdict.name,
                "nearest_d": condition.nearest_d,
                "residue": condition.residue,
                "max_exact_pop_a1": float(np.max(exact.raw_pop_a1)),
                "max_dirac_pop_a1": float(np.max(dirac.pop_a1)),
                "sup_difference": float(np.max(np.abs(exact.raw_pop_a1
                                                      - dirac.pop_a1))),
                "feedback_drift": float(dirac.feedback_drift)})
    return EXIT_OK


def _sweep_spec_from(config: RunConfig) -> SweepSpec:
    def axis(prefix):
        return AxisSpec(name=config.setting(f"{prefix}_name"),
                        min=config.setting(f"{prefix}_min"),
                        max=config.setting(f"{prefix}_max"),
                        count=config.setting(f"{prefix}_count"))
    tied = None
    if config.setting("tied_name") is not None:
        if config.setting("tied_value") is None:
            raise ConfigError("tied_name requires tied_value")
        tied = {config.setting("tied_name"): config.setting("tied_value")}
    return SweepSpec(axis_x=axis("x"), axis_y=axis("y"), fixed=config.model,
                     observable=Observable[config.setting("observable")],
                     horizon=config.setting("horizon"),
                     horizon_periods=config.setting("horizon_periods"),
                     initial=_initial_state(config), tied=tied,
                     stroboscopic=config.setting("stroboscopic", True),
                     tie_margin=config.setting("tie_margin", 0.01),
                     options=config.options)


def _emit_grid(config: RunConfig, grid, stem: str) -> int:
    if "csv" in config.formats:
        write_grid_csv(grid, _out(config, stem + ".csv"))
    if "json" in config.formats:
        write_grid_json(grid, _out(config, stem + ".json"))
    if "ppm" in config.formats:
        write_grid_ppm(grid, _out(config, stem + ".ppm"))
    return EXIT_PARTIAL if bool(grid.mask.any()) else EXIT_OK


def _run_sweep(config: RunConfig) -> int:
    grid = run_sweep(_sweep_spec_from(config), workers=config.workers)
    return _emit_grid(config, grid, "sweep")


# ---------------------------------------------------------- figure runner

def _figure_params(entry: dict) -> ModelParams:
    return ModelParams(delta1=entry["delta1"], delta2=entry["delta2"],
                       c=entry["c"], amp=entry["amp"], omega=entry["omega"],
                       eps0=entry["eps0"])


def _figure_levels(config, fig_id, entry) -> int:
    times = np.linspace(0.0, entry["t_max"], entry["n_samples"])
    written = []
    for c in entry["c_values"]:
        params = _figure_params({**entry, "c": c})
        trace = spectrum_vs_time(params, times)
        name = f"{fig_id}_c{c:g}.csv"
        write_spectrum_csv(trace, _out(config, name))
        written.append(name)
    write_json(_out(config, f"{fig_id}.json"),
               {"figure": fig_id, "entry": entry, "files": written,
                "versions": _versions()})
    return EXIT_OK


def _figure_region(config, fig_id, entry) -> int:
    xs = np.linspace(entry["x_min"], entry["x_max"], entry["count"])
    ys = np.linspace(entry["y_min"], entry["y_max"], entry["count"])
    ids = region_map(xs, ys)
    write_matrix_csv(_out(config, f"{fig_id}.csv"), xs, ys, ids,
                     corner="gamma_over_delta\\c_over_delta")
    write_heatmap_ppm(_out(config, f"{fig_id}.ppm"), (ids - 1) / 2.0)
    write_json(_out(config, f"{fig_id}.json"),
               {"figure": fig_id, "entry": entry, "versions": _versions()})
    return EXIT_OK


def _figure_sweep(config, fig_id, entry) -> int:
    def axis(d):
        return AxisSpec(name=d["name"], min=d["min"], max=d["max"],
                        count=d["count"])
    spec = SweepSpec(axis_x=axis(entry["axis_x"]), axis_y=axis(entry["axis_y"]),
                     fixed=ModelParams(**entry["fixed"]),
                     observable=Observable[entry["observable"]],
                     horizon=entry.get("horizon"),
                     horizon_periods=entry.get("horizon_periods"),
                     tied=entry.get("tied"))
    grid = run_sweep(spec, workers=config.workers)
    write_grid_csv(grid, _out(config, f"{fig_id}.csv"))
    meta = grid_metadata(grid)
    meta["figure"] = fig_id
    write_json(_out(config, f"{fig_id}.json"), meta)
    write_grid_ppm(grid, _out(config, f"{fig_id}.ppm"))
    return EXIT_PARTIAL if bool(grid.mask.any()) else EXIT_OK


def _figure_bloch(config, fig_id, entry) -> int:
    params = _figure_params(entry)
    traj = _bloch_pair(params, entry["t_max"], entry["n_samples"],
                       1e-10, 1e-13)
    write_bloch_csv(traj, _out(config, f"{fig_id}.csv"))
    meta = {"figure": fig_id, "entry": entry, "versions": _versions()}
    if entry["kind"] == "bloch_nonlinear":
        report = trapping_metric(getattr(traj, "right", traj))
        meta["classification"] = report.classification.name
        meta["min_z_over_window"] = report.min_z_over_window
        meta["boundary_z"] = report.boundary_z
    write_json(_out(config, f"{fig_id}.json"), meta)
    return EXIT_OK


def _figure_weak(config, fig_id, entry) -> int:
    params = _figure_params(entry)
    exact, dirac, condition = _weak_artifacts(
        params, entry["periods"], entry["n_samples"], 1e-10, 1e-12)
    write_weak_csv(dirac.times, exact.raw_pop_a1, dirac.pop_a1,
                   _out(config, f"{fig_id}.csv"))
    write_json(_out(config, f"{fig_id}.json"),
               {"figure": fig_id, "entry": entry,
                "verdict": condition.verdict.name,
                "nearest_d": condition.nearest_d,
                "residue": condition.residue,
                "max_exact_pop_a1": float(np.max(exact.raw_pop_a1)),
                "max_dirac_pop_a1": float(np.max(dirac.pop_a1)),
                "versions": _versions()})
    return EXIT_OK


_FIGURE_KINDS = {"levels": _figure_levels, "region": _figure_region,
                 "sweep": _figure_sweep, "bloch_linear": _figure_bloch,
                 "bloch_nonlinear": _figure_bloch, "weak": _figure_weak}


def _run_figure(config: RunConfig) -> int:
    fig_id = config.setting("id")
    if fig_id is None:
        raise ConfigError("figure needs an id (positional or [figure] id)")
    entry = manifest_entry(fig_id)
    return _FIGURE_KINDS[entry["kind"]](config, fig_id, entry)


_HANDLERS = {"spectrum": _run_spectrum, "region": _run_region,
             "trajectory": _run_trajectory, "bloch": _run_bloch,
             "trapping": _run_trapping, "weak": _run_weak,
             "sweep": _run_sweep, "figure": _run_figure}


def run(config: RunConfig) -> int:
    """Execute a validated config; returns the process exit code."""
    try:
        os.makedirs(config.out_dir, exist_ok=True)
        return _HANDLERS[config.subcommand](config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


# -------------------------------------------------------------------- cli

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lzsm",
        description="Driven nonreciprocal two-level model: spectra, "
                    "biorthogonal dynamics, trapping, and interference sweeps.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "spectrum": "level quartic along the drive",
        "region": "root-reality region map for reversed tunneling",
        "trajectory": "raw biorthogonal amplitude evolution",
        "bloch": "projective (angle-space) evolution",
        "trapping": "projective run plus trapping classification",
        "weak": "slow-tunneling gauge-frame run plus resonance verdict",
        "sweep": "2-d parameter sweep of a scalar observable",
        "figure": "reproduce a canned panel from the packaged manifest",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", metavar="PATH",
                        help="INI run configuration")
        sp.add_argument("--out", metavar="DIR",
                        help="output directory (default from config or '.')")
        sp.add_argument("--workers", type=int, metavar="N",
                        help=f"parallel sweep workers (default "
                             f"${WORKERS_ENV} or 1)")
        sp.add_argument("--format", dest="formats", metavar="LIST",
                        help="comma-separated subset of csv,json,ppm")
        if name == "figure":
            sp.add_argument("figure_id", nargs="?", metavar="ID",
                            help="figure id, fig1a through fig10d")
    return parser


def _config_from_args(ns) -> RunConfig:
    if ns.config is not None:
        config = parse_config(ns.config)
        if config.subcommand != ns.subcommand:
            raise ConfigError(
                f"config file runs {config.subcommand!r} but the command "
                f"line says {ns.subcommand!r}")
    elif ns.subcommand == "figure":
        config = RunConfig(subcommand="figure", workers=_env_workers())
    elif ns.subcommand == "region":
        config = RunConfig(subcommand="region", workers=_env_workers())
    else:
        raise ConfigError(f"subcommand {ns.subcommand!r} needs --config")

    if ns.subcommand == "figure":
        if ns.formats is not None:
            raise ConfigError("figure outputs are fixed by the manifest; "
                              "only the output directory may be overridden")
        fig_id = getattr(ns, "figure_id", None) or config.setting("id")
        if fig_id is None:
            raise ConfigError("figure needs an id (positional or [figure] id)")
        manifest_entry(fig_id)
        config = replace(config, settings=(("id", fig_id),))

    if ns.out is not None:
        config = replace(config, out_dir=ns.out)
    if ns.workers is not None:
        if ns.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {ns.workers}")
        config = replace(config, workers=ns.workers)
    if ns.formats is not None:
        formats = tuple(f.strip() for f in ns.formats.split(",") if f.strip())
        config = replace(config, formats=formats)
    return config


def main(argv=None) -> int:
    ns = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(ns)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
