"""CSV and PGM writers."""

import math
import os
from types import SimpleNamespace

import numpy as np

import results_store
from radio import AssociationMap, GridSpec
from results_store import format_value, height_tag, load_csv, write_csv, write_pgm


def test_format_value():
    assert format_value(3) == "3"
    assert format_value(np.int64(7)) == "7"
    assert format_value(1.5) == "1.500000"
    assert format_value(-0.0000001) == "0.000000"
    assert format_value(math.inf) == "inf"
    assert format_value(float("nan")) == "nan"
    assert format_value(True) == "1"
    assert format_value("HandoverComplete") == "HandoverComplete"


def test_height_tag():
    assert height_tag(1.5) == "h1.5m"
    assert height_tag(300) == "h300m"


def test_csv_round_trip_with_seed_line(tmp_path):
    path = write_csv(str(tmp_path / "x.csv"), ("a", "b"), [(1, 2.0), (3, math.inf)], seed=17)
    with open(path) as f:
        assert f.readline() == "# seed=17\n"
        assert f.readline() == "a,b\n"
    seed, rows = load_csv(path)
    assert seed == 17
    assert rows == [{"a": "1", "b": "2.000000"}, {"a": "3", "b": "inf"}]


def test_plain_pgm(tmp_path):
    raster = np.array([[0, 1, 2], [3, 4, 5]])
    path = write_pgm(str(tmp_path / "m.pgm"), raster, maxval=5)
    lines = open(path).read().splitlines()
    assert lines[:3] == ["P2", "3 2", "5"]
    # top image row is the last raster row
    assert lines[3] == "3 4 5"
    assert lines[4] == "0 1 2"


def test_save_ecdf(tmp_path):
    path = results_store.save_ecdf(str(tmp_path / "e.csv"), [2.0, 1.0, 1.0, 4.0], seed=1)
    _, rows = load_csv(path)
    assert [r["cdf"] for r in rows] == ["0.500000", "0.750000", "1.000000"]


def test_assoc_pgm_spreads_sites(tmp_path):
    grid = GridSpec(origin_x_m=0.0, origin_y_m=0.0, spacing_m=10.0, nx=2, ny=1)
    sites = np.array([[0, 2]])
    amap = AssociationMap(grid=grid, height_m=150.0, serving_cell=sites * 3, serving_site=sites,
                          rsrp_dbm=np.zeros((1, 2)), rs_sinr_db=np.zeros((1, 2)))
    path = results_store.save_assoc_pgm(str(tmp_path), amap, n_sites=3)
    assert path.endswith("assoc_map_h150m.pgm")
    assert open(path).read().splitlines()[3] == "0 254"


def test_latency_result_files(tmp_path):
    result = SimpleNamespace(height_m=50.0, packet_ue=np.array([0, 1]), packet_cell=np.array([0, 0]),
                             arrival_ms=np.array([0, 100]), latency_ms=np.array([12, 3]),
                             sinr_db=np.array([1.25, -3.5]))
    folder = results_store.save_latency_result(str(tmp_path), result, seed=4)
    assert folder.endswith("h50m")
    _, samples = load_csv(os.path.join(folder, "latency_samples.csv"))
    assert [r["latency_ms"] for r in samples] == ["12", "3"]
    _, ecdf = load_csv(os.path.join(folder, "latency_ecdf.csv"))
    assert [r["value"] for r in ecdf] == ["3.000000", "12.000000"]
    assert os.path.exists(os.path.join(folder, "sinr_ecdf.csv"))


def test_trace_keeps_serving_and_strongest_cells():
    filtered = np.array([[-70.0, -80.0, -120.0, -90.0],
                         [-72.0, -79.0, -121.0, -91.0]])
    trace = SimpleNamespace(t_ms=np.array([0.0, 40.0]), cell_ids=(10, 11, 12, 13), rsrp_filtered_dbm=filtered,
                            serving=np.array([12, -1]), serving_sinr_db=np.array([0.0, np.nan]))
    assert results_store.trace_cells(trace, top=2) == [0, 1, 2]
