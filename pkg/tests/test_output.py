"""Writer round trips: matrix/table CSV, JSON encoding, and P6 pixmaps."""

import csv
import json
import math

import numpy as np
import pytest

from lzsm.model import BiorthState, ModelParams
from lzsm.dynamics import integrate_biorthogonal
from lzsm.output import (write_heatmap_ppm, write_grid_csv, write_grid_json,
                         write_grid_ppm, write_json, write_matrix_csv,
                         write_spectrum_csv, write_table_csv,
                         write_trajectory_csv)
from lzsm.spectrum import spectrum_vs_time
from lzsm.sweep import AxisSpec, Observable, SweepSpec, run_sweep


def read_ppm(path):
    raw = path.read_bytes()
    assert raw[:3] == b"P6\n"
    header, rest = raw.split(b"255\n", 1)
    dims = header.split(b"\n")[1].split()
    w, h = int(dims[0]), int(dims[1])
    img = np.frombuffer(rest, dtype=np.uint8).reshape(h, w, 3)
    return img


class TestMatrixCsv:
    def test_round_trip_full_precision(self, tmp_path):
        xs = np.array([-1.0, 0.0, 1.0 / 3.0])
        ys = np.array([0.1, 0.2])
        vals = np.array([[1.0, math.pi, 1e-17], [-2.5, np.nan, np.inf]])
        path = tmp_path / "m.csv"
        write_matrix_csv(path, xs, ys, vals, corner="y\\x")
        rows = list(csv.reader(path.read_text().splitlines()))
        assert rows[0][0] == "y\\x"
        assert [float(v) for v in rows[0][1:]] == pytest.approx(list(xs),
                                                               abs=0.0)
        back = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        assert back[0, 1] == math.pi
        assert back[0, 2] == 1e-17
        assert math.isnan(back[1, 1])
        assert math.isinf(back[1, 2])

    def test_table_rejects_ragged_columns(self, tmp_path):
        with pytest.raises(ValueError, match="equal length"):
            write_table_csv(tmp_path / "t.csv",
                            {"a": np.arange(3), "b": np.arange(4)})

    def test_table_header_order(self, tmp_path):
        path = tmp_path / "t.csv"
        write_table_csv(path, {"t": np.arange(2.0), "z": np.ones(2)})
        assert path.read_text().splitlines()[0] == "t,z"


class TestJson:
    def test_encodes_domain_values(self, tmp_path):
        path = tmp_path / "p.json"
        write_json(path, {"c": 1 + 2j, "obs": Observable.MIN_Z,
                          "arr": np.arange(3), "n": np.float64(0.5)})
        back = json.loads(path.read_text())
        assert back["c"] == {"re": 1.0, "im": 2.0}
        assert back["obs"] == "MIN_Z"
        assert back["arr"] == [0, 1, 2]
        assert back["n"] == 0.5

    def test_unencodable_type_raises(self, tmp_path):
        with pytest.raises(TypeError, match="serializable"):
            write_json(tmp_path / "p.json", {"bad": object()})


class TestHeatmap:
    def test_header_and_flip(self, tmp_path):
        grey = np.array([[0.0, 0.5], [1.0, 0.25]])
        path = tmp_path / "h.ppm"
        write_heatmap_ppm(path, grey)
        img = read_ppm(path)
        assert img.shape == (2, 2, 3)
        # row 1 of the input (the larger y) is the top pixmap row
        assert img[0, 0, 0] == 250 and img[0, 1, 0] == round(0.25 * 250)
        assert img[1, 0, 0] == 0 and img[1, 1, 0] == 125
        # grey means equal channels
        assert np.all(img[..., 0] == img[..., 1])
        assert np.all(img[..., 0] == img[..., 2])

    def test_masked_cells_are_white(self, tmp_path):
        grey = np.zeros((2, 2))
        mask = np.array([[True, False], [False, False]])
        path = tmp_path / "h.ppm"
        write_heatmap_ppm(path, grey, mask)
        img = read_ppm(path)
        assert tuple(img[1, 0]) == (255, 255, 255)
        assert tuple(img[1, 1]) == (0, 0, 0)

    def test_unmasked_never_reaches_white(self, tmp_path):
        path = tmp_path / "h.ppm"
        write_heatmap_ppm(path, np.ones((1, 3)))
        assert read_ppm(path).max() == 250


@pytest.fixture(scope="module")
def small_grid():
    spec = SweepSpec(
        axis_x=AxisSpec("eps0", -1.0, 1.0, 3),
        axis_y=AxisSpec("delta", 0.5, 1.5, 3),
        fixed=ModelParams(delta1=2.0, delta2=1.0, c=0.5, amp=2.0, omega=1.0),
        observable=Observable.RAW_POP_A1, horizon=5.0, stroboscopic=False)
    return run_sweep(spec)


@pytest.fixture(scope="module")
def masked_grid():
    # anti-phase linear band where some cells hit the singular cap
    spec = SweepSpec(
        axis_x=AxisSpec("eps0", -1.3, -0.9, 4),
        axis_y=AxisSpec("omega", 0.93, 0.99, 3),
        fixed=ModelParams(delta1=2.0, delta2=-0.5, c=0.0, amp=2.5, omega=1.0),
        observable=Observable.RAW_POP_A1, horizon=50.0)
    return run_sweep(spec)


class TestGridWriters:
    def test_csv_layout(self, small_grid, tmp_path):
        path = tmp_path / "g.csv"
        write_grid_csv(small_grid, path)
        rows = list(csv.reader(path.read_text().splitlines()))
        assert rows[0][0] == "delta\\eps0"
        assert len(rows) == 4 and len(rows[0]) == 4
        assert [float(x) for x in rows[0][1:]] == [-1.0, 0.0, 1.0]
        assert float(rows[1][0]) == 0.5
        back = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        np.testing.assert_array_equal(back, small_grid.values)

    def test_json_sidecar_echoes_spec(self, small_grid, tmp_path):
        path = tmp_path / "g.json"
        write_grid_json(small_grid, path)
        meta = json.loads(path.read_text())
        echo = meta["spec"]
        assert echo["observable"] == "RAW_POP_A1"
        assert echo["axis_x"] == {"name": "eps0", "min": -1.0, "max": 1.0,
                                  "count": 3, "scale": "linear"}
        assert echo["fixed"]["delta2"] == 1.0
        assert echo["horizon"] == 5.0
        assert echo["options"]["stop_at_singular"] is False
        assert echo["initial"]["beta1"] == {"re": 1.0, "im": 0.0}
        assert meta["shape"] == [3, 3]
        assert meta["masked_cells"] == 0
        assert meta["wall_time_seconds"] > 0
        assert set(meta["versions"]) == {"lzsm", "numpy", "scipy", "numba"}

    def test_masked_ppm_white_and_counts(self, masked_grid, tmp_path):
        assert masked_grid.mask.any() and not masked_grid.mask.all()
        path = tmp_path / "g.ppm"
        write_grid_ppm(masked_grid, path)
        img = read_ppm(path)
        white = np.all(img == 255, axis=2)
        assert white.sum() == masked_grid.mask.sum()
        # pixmap rows run from max y down to min y
        np.testing.assert_array_equal(white, masked_grid.mask[::-1])

    def test_masked_json_counts(self, masked_grid, tmp_path):
        path = tmp_path / "g.json"
        write_grid_json(masked_grid, path)
        meta = json.loads(path.read_text())
        assert meta["masked_cells"] == int(masked_grid.mask.sum())
        assert meta["singular_cells"] == int(masked_grid.singular_mask.sum())
        assert meta["error_cells"] == 0

    def test_raw_scaling_is_log_compressed(self, small_grid, tmp_path):
        path = tmp_path / "g.ppm"
        write_grid_ppm(small_grid, path)
        img = read_ppm(path)
        top = np.log1p(small_grid.values.max())
        expected = np.round(np.log1p(small_grid.values) / top * 250)
        np.testing.assert_array_equal(img[..., 0], expected[::-1])


class TestSeriesWriters:
    def test_trajectory_columns(self, tmp_path):
        params = ModelParams(delta1=2.0, delta2=0.5, c=1.0, amp=2.0,
                             omega=1.0, eps0=0.3)
        traj = integrate_biorthogonal(params, BiorthState.down(), 0.0, 3.0,
                                      n_samples=21)
        path = tmp_path / "t.csv"
        write_trajectory_csv(traj, path)
        rows = path.read_text().splitlines()
        header = rows[0].split(",")
        assert header[:5] == ["t", "re_alpha1", "im_alpha1", "re_beta1",
                              "im_beta1"]
        assert header[-3:] == ["z", "re_w", "im_w"]
        assert len(rows) == 22
        first = dict(zip(header, map(float, rows[1].split(","))))
        assert first["re_beta1"] == 1.0 and first["re_alpha1"] == 0.0
        assert first["z"] == 1.0

    def test_spectrum_rows(self, tmp_path):
        params = ModelParams(delta1=1.0, delta2=1.0, c=3.0, amp=10.0,
                             omega=1.0)
        trace = spectrum_vs_time(params, np.linspace(0.0, 2.0, 65))
        path = tmp_path / "s.csv"
        write_spectrum_csv(trace, path)
        rows = list(csv.reader(path.read_text().splitlines()))
        assert len(rows) == 66
        assert rows[0][-2:] == ["classification", "spurious"]
        assert set(rows[1][-1]) <= {"0", "1"} and len(rows[1][-1]) == 4
        roots = [complex(float(rows[1][2 + 2 * b]), float(rows[1][3 + 2 * b]))
                 for b in range(4)]
        np.testing.assert_allclose(sorted(r.real for r in roots),
                                   sorted(trace.roots[0].real), atol=0)
