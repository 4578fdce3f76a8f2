import math

import numpy as np
import pytest
import scipy.linalg

from lzsm import (AxisSpec, BiorthState, ConfigError, ModelParams, Observable,
                  SweepSpec, integrate_biorthogonal, run_sweep,
                  run_trapping_sweep)

LINEAR_STATIC = ModelParams(delta1=1.0, delta2=1.0, c=0.0, amp=0.0, omega=1.0)


def mini_spec(count=3, observable=Observable.RAW_POP_A1, **kw):
    kw.setdefault("horizon", 7.0)
    kw.setdefault("stroboscopic", False)
    return SweepSpec(
        axis_x=AxisSpec("eps0", -1.0, 1.0, count),
        axis_y=AxisSpec("delta", 0.5, 1.5, count),
        fixed=LINEAR_STATIC, observable=observable, **kw)


# anti-phase linear band whose growth crosses the cap before t=50
CAP_BAND = SweepSpec(
    axis_x=AxisSpec("eps0", -1.3, -0.9, 11),
    axis_y=AxisSpec("omega", 0.93, 0.99, 7),
    fixed=ModelParams.from_nonreciprocity(1.0, 2.0, 0.0, 2.5, 1.0,
                                          anti_phase=True),
    observable=Observable.RAW_POP_A1, horizon=50.0, stroboscopic=False)


class TestAxisSpec:
    def test_values(self):
        ax = AxisSpec("eps0", -4.0, 4.0, 41)
        assert ax.values[0] == -4.0 and ax.values[-1] == 4.0
        assert len(ax.values) == 41

    def test_unknown_name(self):
        with pytest.raises(ConfigError, match="axis name"):
            AxisSpec("epsilon_zero", 0.0, 1.0, 5)

    def test_count_and_range_validation(self):
        with pytest.raises(ConfigError, match="count"):
            AxisSpec("eps0", 0.0, 1.0, 1)
        with pytest.raises(ConfigError, match="min"):
            AxisSpec("eps0", 1.0, 0.0, 5)

    def test_positive_only_names(self):
        with pytest.raises(ConfigError, match="positive"):
            AxisSpec("omega", -0.5, 1.0, 5)
        with pytest.raises(ConfigError, match="positive"):
            AxisSpec("delta_over_omega", 0.0, 0.5, 5)

    def test_only_linear_scale(self):
        with pytest.raises(ConfigError, match="linear"):
            AxisSpec("eps0", 0.0, 1.0, 5, scale="log")


class TestSweepSpecValidation:
    def test_duplicate_axes(self):
        with pytest.raises(ConfigError, match="differ"):
            SweepSpec(axis_x=AxisSpec("eps0", 0.0, 1.0, 3),
                      axis_y=AxisSpec("eps0", 0.0, 2.0, 3),
                      fixed=LINEAR_STATIC,
                      observable=Observable.MIN_Z)

    def test_conflicting_targets(self):
        with pytest.raises(ConfigError, match="same model quantity"):
            SweepSpec(axis_x=AxisSpec("c", 0.0, 1.0, 3),
                      axis_y=AxisSpec("c_over_delta", 0.0, 2.0, 3),
                      fixed=LINEAR_STATIC,
                      observable=Observable.MIN_Z)

    def test_tied_conflict(self):
        with pytest.raises(ConfigError, match="tied"):
            SweepSpec(axis_x=AxisSpec("eps0", 0.0, 1.0, 3),
                      axis_y=AxisSpec("omega", 0.5, 2.0, 3),
                      fixed=LINEAR_STATIC, observable=Observable.MIN_Z,
                      tied={"amp_over_omega": 0.05, "amp": 1.0})

    def test_two_horizons(self):
        with pytest.raises(ConfigError, match="not both"):
            mini_spec(horizon=5.0, horizon_periods=3.0)

    def test_population_observable_needs_horizon(self):
        with pytest.raises(ConfigError, match="horizon"):
            SweepSpec(axis_x=AxisSpec("eps0", 0.0, 1.0, 3),
                      axis_y=AxisSpec("omega", 0.5, 2.0, 3),
                      fixed=LINEAR_STATIC, observable=Observable.RAW_POP_A1)

    def test_unnormalized_initial(self):
        with pytest.raises(ConfigError, match="normalized"):
            mini_spec(initial=BiorthState(0.5, 0.5, 0.5, 0.5))

    def test_bad_workers(self):
        with pytest.raises(ConfigError, match="workers"):
            run_sweep(mini_spec(), workers=0)


class TestResolution:
    def test_cell_params_direct_axes(self):
        g = run_sweep(mini_spec())
        p = g.cell_params(2, 0)
        assert p.eps0 == -1.0
        assert p.delta1 == pytest.approx(1.5)
        assert p.delta2 == pytest.approx(1.5)

    def test_ratio_axes_use_template_delta(self):
        spec = SweepSpec(
            axis_x=AxisSpec("eps0_over_delta", -4.0, 4.0, 3),
            axis_y=AxisSpec("omega_over_delta", 0.5, 2.0, 4),
            fixed=ModelParams.from_nonreciprocity(2.0, 2.0, 0.0, 5.0, 1.0),
            observable=Observable.RAW_POP_A1, horizon=25.0)
        g = run_sweep(spec)
        p = g.cell_params(0, 2)
        assert p.eps0 == pytest.approx(8.0)       # 4 * delta
        assert p.omega == pytest.approx(1.0)      # 0.5 * delta
        assert p.delta == pytest.approx(2.0)

    def test_omega_relative_axes(self):
        spec = SweepSpec(
            axis_x=AxisSpec("delta_over_omega", 0.2, 0.4, 3),
            axis_y=AxisSpec("c_over_omega", 0.5, 1.0, 2),
            fixed=ModelParams.from_nonreciprocity(1.0, 2.0, 0.0, 1.0, 1.0),
            observable=Observable.MIN_Z, tied={"amp_over_omega": 0.05})
        g = run_trapping_sweep(spec)
        p = g.cell_params(1, 0)               # delta/omega=0.2, c/omega=1.0
        assert p.omega == pytest.approx(5.0)  # omega = delta / 0.2
        assert p.c == pytest.approx(5.0)
        assert p.amp == pytest.approx(0.25)
        assert p.delta == pytest.approx(1.0)

    def test_effective_horizon_snapping(self):
        spec = SweepSpec(
            axis_x=AxisSpec("eps0", -1.0, 1.0, 2),
            axis_y=AxisSpec("omega", 0.7, 1.4, 2),
            fixed=LINEAR_STATIC, observable=Observable.RAW_POP_A1,
            horizon=50.0)
        g = run_sweep(spec)
        for iy, om in enumerate(spec.axis_y.values):
            T = 2 * math.pi / om
            expect = max(1.0, round(50.0 / T)) * T
            assert g.effective_horizons[iy, 0] == pytest.approx(expect)

    def test_no_snapping_when_disabled(self):
        g = run_sweep(mini_spec())
        assert np.all(g.effective_horizons == 7.0)


class TestSweepValues:
    def test_static_cells_match_matrix_exponential(self):
        spec = mini_spec()
        g = run_sweep(spec)
        assert not g.mask.any()
        for iy, dv in enumerate(spec.axis_y.values):
            for ix, e0 in enumerate(spec.axis_x.values):
                h = np.array([[e0 / 2, dv / 2], [dv / 2, -e0 / 2]],
                             dtype=complex)
                psi = scipy.linalg.expm(-1j * h * 7.0) @ np.array([0.0, 1.0])
                assert abs(g.values[iy, ix] - abs(psi[0]) ** 2) < 1e-8

    def test_projected_population_observable(self):
        spec = mini_spec(observable=Observable.PROJ_POP_A)
        g = run_sweep(spec)
        assert np.all((g.values >= 0.0) & (g.values <= 1.0))
        # linear reciprocal cells conserve the norm, so raw == projected
        raw = run_sweep(mini_spec()).values
        assert np.max(np.abs(g.values - raw)) < 1e-8

    def test_interference_grid_bias_symmetric(self):
        spec = SweepSpec(
            axis_x=AxisSpec("eps0_over_delta", -4.0, 4.0, 21),
            axis_y=AxisSpec("omega_over_delta", 0.1, 2.0, 21),
            fixed=ModelParams.from_nonreciprocity(1.0, 2.0, 0.0, 2.5, 1.0),
            observable=Observable.RAW_POP_A1, horizon=50.0)
        g = run_sweep(spec)
        assert not g.mask.any()
        assert np.max(np.abs(g.values - g.values[:, ::-1])) < 1e-6

    def test_anti_phase_band_has_singular_cells(self):
        g = run_sweep(CAP_BAND)
        assert g.mask.any()
        assert np.isnan(g.singular_times[~g.singular_mask]).all()
        assert np.all(g.singular_times[g.singular_mask] < 50.0)

    def test_mask_matches_standalone_runs(self):
        g = run_sweep(CAP_BAND)
        for iy in range(CAP_BAND.axis_y.count):
            for ix in range(CAP_BAND.axis_x.count):
                p = g.cell_params(iy, ix)
                tr = integrate_biorthogonal(p, BiorthState.down(), 0.0, 50.0,
                                            n_samples=3)
                assert (tr.singular_time is not None) == bool(
                    g.singular_mask[iy, ix])

    def test_worker_count_invisible(self):
        base = run_sweep(CAP_BAND, workers=1)
        for w in (4, 8):
            other = run_sweep(CAP_BAND, workers=w)
            assert np.array_equal(base.values, other.values, equal_nan=True)
            assert np.array_equal(base.singular_mask, other.singular_mask)
            assert np.array_equal(base.error_codes, other.error_codes)

    def test_refinement_keeps_shared_cells(self):
        v3 = run_sweep(mini_spec(count=3)).values
        v5 = run_sweep(mini_spec(count=5)).values
        assert np.array_equal(v3, v5[::2, ::2])


class TestTrappingSweep:
    @staticmethod
    def _frontier_spec(k):
        return SweepSpec(
            axis_x=AxisSpec("delta_over_omega", 0.1, 0.5, 5),
            axis_y=AxisSpec("c_over_omega", 0.2, 1.2, 11),
            fixed=ModelParams.from_nonreciprocity(1.0, k, 0.0, 1.0, 1.0),
            observable=Observable.TRAPPING_CLASS,
            tied={"amp_over_omega": 0.05})

    def test_frontier_follows_c_equals_2delta(self):
        g = run_trapping_sweep(self._frontier_spec(2.0))
        cw = g.y_values
        dy = cw[1] - cw[0]
        for ix, dw in enumerate(g.x_values):
            col = g.values[:, ix]
            trapped = np.where(col > 0)[0]
            assert len(trapped) > 0
            first = trapped[0]
            assert np.all(col[first:] > 0)          # single frontier
            assert abs(cw[first] - 2.0 * dw) <= dy + 1e-12

    def test_frontier_independent_of_k(self):
        g2 = run_trapping_sweep(self._frontier_spec(2.0))
        gh = run_trapping_sweep(self._frontier_spec(0.5))
        assert np.array_equal(g2.values, gh.values)

    def test_anti_phase_has_no_josephson_cells(self):
        spec = SweepSpec(
            axis_x=AxisSpec("delta_over_omega", 0.1, 0.5, 4),
            axis_y=AxisSpec("c_over_omega", 0.05, 0.8, 6),
            fixed=ModelParams.from_nonreciprocity(1.0, 2.0, 0.0, 1.0, 1.0,
                                                  anti_phase=True),
            observable=Observable.TRAPPING_CLASS,
            tied={"amp_over_omega": 0.05})
        g = run_trapping_sweep(spec)
        assert not g.mask.any()
        assert np.all(g.values > -1.0)

    def test_default_window_covers_slow_orbit(self):
        g = run_trapping_sweep(self._frontier_spec(2.0))
        periods = 2 * math.pi / g.cell_params(0, 0).omega
        assert np.all(g.effective_horizons >= 40.0 - 1e-9)
        assert g.effective_horizons[0, 0] >= periods

    def test_min_z_observable(self):
        spec = SweepSpec(
            axis_x=AxisSpec("delta_over_omega", 0.2, 0.4, 2),
            axis_y=AxisSpec("c_over_omega", 0.3, 0.9, 3),
            fixed=ModelParams.from_nonreciprocity(1.0, 2.0, 0.0, 1.0, 1.0),
            observable=Observable.MIN_Z, tied={"amp_over_omega": 0.05})
        g = run_trapping_sweep(spec)
        assert np.all(g.values >= -1.0) and np.all(g.values <= 1.0)

    def test_wrapper_rejects_population_observables(self):
        with pytest.raises(ConfigError, match="TRAPPING_CLASS or MIN_Z"):
            run_trapping_sweep(mini_spec())
