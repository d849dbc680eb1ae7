# results_store.py file
"""CSV and PGM persistence for every experiment's outputs.

Each CSV starts with a ``# seed=<n>`` comment line followed by the header.
Floats are written with a fixed number of decimals so that two runs with
the same seed produce byte-identical files.
"""

import csv
import logging
import math
import os

import numpy as np

from antenna import pattern_grid
from stats_rng import ecdf_export, percentiles

logger = logging.getLogger(__name__)

FLOAT_DECIMALS = 6
TRACE_TOP_CELLS = 6

LAYOUT_COLUMNS = ("site_id", "x_m", "y_m", "z_m")
CELL_COLUMNS = ("cell_id", "site_id", "bearing_deg")
PATTERN_COLUMNS = ("el_deg", "az_deg", "gain_dbi")
ASSOC_MAP_COLUMNS = ("ix", "iy", "x_m", "y_m", "height_m", "serving_cell", "serving_site", "rsrp_dbm", "rs_sinr_db")
MAP_STATS_COLUMNS = ("height_m", "non_nearest_fraction", "mean_serving_distance_m", "component_count",
                     "median_rs_sinr_db")
LATENCY_SAMPLE_COLUMNS = ("ue_id", "cell_id", "arrival_ms", "latency_ms")
SINR_SAMPLE_COLUMNS = ("sinr_db",)
SUMMARY_COLUMNS = ("height_m", "prbs", "utilization", "frac_within_50ms", "p50_ms", "p95_ms")
ECDF_COLUMNS = ("value", "cdf")
TRACE_COLUMNS = ("t_ms", "cell_id", "rsrp_filtered_dbm", "serving", "serving_sinr_db")
EVENT_COLUMNS = ("t_ms", "route_id", "event", "cell_from", "cell_to")
MOBILITY_SUMMARY_COLUMNS = ("height_m", "routes", "handovers", "handover_failures", "rlfs", "rlf_per_km")
SURVEY_COLUMNS = ("height_m", "metric", "p10", "p50", "p90")


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        text = f"{value:.{FLOAT_DECIMALS}f}"
        # no "-0.000000"
        return text[1:] if text.startswith("-") and float(text) == 0 else text
    return str(value)


def height_tag(height_m):
    return f"h{float(height_m):g}m"


def height_dir(out_dir, height_m):
    """Per-height subdirectory, created on demand"""
    path = os.path.join(out_dir, height_tag(height_m))
    os.makedirs(path, exist_ok=True)
    return path


def write_csv(path, columns, rows, seed):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# seed={seed}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        count = 0
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.debug("wrote %s (%d rows)", path, count)
    return path


def load_csv(path):
    """(seed, rows as dicts of strings) from a file written by write_csv"""
    with open(path, newline="") as f:
        first = f.readline().strip()
        seed = None
        if first.startswith("# seed="):
            seed = int(first.split("=", 1)[1])
        else:
            f.seek(0)
        return seed, list(csv.DictReader(f))


def save_layout(out_dir, layout, seed):
    rows = ((i, x, y, layout.bs_height_m) for i, (x, y) in enumerate(layout.site_positions))
    return write_csv(os.path.join(out_dir, "layout.csv"), LAYOUT_COLUMNS, rows, seed)


def save_cells(out_dir, cells, seed):
    rows = ((c.cell_id, c.site_id, c.bearing_deg) for c in cells)
    return write_csv(os.path.join(out_dir, "cells.csv"), CELL_COLUMNS, rows, seed)


def save_pattern(out_dir, pattern, seed, step_deg=1.0):
    el, az, gain = pattern_grid(pattern, step_deg)
    return write_csv(os.path.join(out_dir, "pattern.csv"), PATTERN_COLUMNS, zip(el, az, gain), seed)


def _assoc_rows(amap):
    gx, gy = amap.grid.xy()
    for iy in range(amap.grid.ny):
        for ix in range(amap.grid.nx):
            yield (ix, iy, gx[iy, ix], gy[iy, ix], amap.height_m, amap.serving_cell[iy, ix],
                   amap.serving_site[iy, ix], amap.rsrp_dbm[iy, ix], amap.rs_sinr_db[iy, ix])


def save_assoc_maps(out_dir, amaps, seed):
    """All heights in one file, height-major"""
    rows = (row for amap in amaps for row in _assoc_rows(amap))
    return write_csv(os.path.join(out_dir, "assoc_map.csv"), ASSOC_MAP_COLUMNS, rows, seed)


def save_map_stats(out_dir, stats_by_height, seed):
    rows = ((h,) + tuple(stats[c] for c in MAP_STATS_COLUMNS[1:]) for h, stats in stats_by_height)
    return write_csv(os.path.join(out_dir, "map_stats.csv"), MAP_STATS_COLUMNS, rows, seed)


def write_pgm(path, raster, maxval=255):
    """Plain (P2) PGM; row 0 of the raster is written last so +y points up"""
    values = np.asarray(raster, dtype=np.int64)
    if values.ndim != 2:
        raise ValueError("PGM raster must be 2-D")
    with open(path, "w", newline="\n") as f:
        f.write(f"P2\n{values.shape[1]} {values.shape[0]}\n{maxval}\n")
        for row in values[::-1]:
            f.write(" ".join(str(int(v)) for v in row) + "\n")
    return path


def save_assoc_pgm(out_dir, amap, n_sites):
    # spread site ids over the grey range
    levels = (amap.serving_site * (255 // max(1, n_sites - 1))).clip(0, 255)
    return write_pgm(os.path.join(out_dir, f"assoc_map_{height_tag(amap.height_m)}.pgm"), levels)


def save_ecdf(path, samples, seed):
    return write_csv(path, ECDF_COLUMNS, ecdf_export(samples), seed)


def save_latency_result(out_dir, result, seed):
    """Raw samples and ECDFs for one height under h<height>m/"""
    folder = height_dir(out_dir, result.height_m)
    rows = zip(result.packet_ue, result.packet_cell, result.arrival_ms, result.latency_ms)
    write_csv(os.path.join(folder, "latency_samples.csv"), LATENCY_SAMPLE_COLUMNS, rows, seed)
    write_csv(os.path.join(folder, "sinr_samples.csv"), SINR_SAMPLE_COLUMNS, ((v,) for v in result.sinr_db), seed)
    if result.latency_ms.size:
        save_ecdf(os.path.join(folder, "latency_ecdf.csv"), result.latency_ms, seed)
    if result.sinr_db.size:
        save_ecdf(os.path.join(folder, "sinr_ecdf.csv"), result.sinr_db, seed)
    return folder


def save_latency_summary(out_dir, rows, seed):
    return write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_COLUMNS, rows, seed)


def trace_cells(trace, top=TRACE_TOP_CELLS):
    """Column indices worth plotting: every serving cell plus any cell ever among the strongest few"""
    filtered = trace.rsrp_filtered_dbm
    keep = set()
    order = np.argsort(-filtered, axis=1, kind="stable")[:, :top]
    keep.update(int(i) for i in np.unique(order))
    for cell_id in np.unique(trace.serving):
        if cell_id >= 0:
            keep.add(trace.cell_ids.index(int(cell_id)))
    return sorted(keep)


def save_trace(path, trace, seed):
    columns = trace_cells(trace)

    def rows():
        for n, t in enumerate(trace.t_ms):
            for j in columns:
                yield (t, trace.cell_ids[j], trace.rsrp_filtered_dbm[n, j], trace.serving[n],
                       trace.serving_sinr_db[n])

    return write_csv(path, TRACE_COLUMNS, rows(), seed)


def save_events(path, events, seed):
    rows = ((e.t_ms, e.route_id, e.event, e.cell_from, e.cell_to) for e in events)
    return write_csv(path, EVENT_COLUMNS, rows, seed)


def save_mobility_summary(out_dir, results, seed):
    rows = ((r.height_m, r.routes, r.handovers, r.handover_failures, r.rlfs, r.rlf_per_km) for r in results)
    return write_csv(os.path.join(out_dir, "mobility_summary.csv"), MOBILITY_SUMMARY_COLUMNS, rows, seed)


def save_mobility_result(out_dir, result, seed):
    folder = height_dir(out_dir, result.height_m)
    save_events(os.path.join(folder, "events.csv"), result.events, seed)
    for route_id, trace in sorted(result.traces.items()):
        name = "trace.csv" if len(result.traces) == 1 else f"trace_route{route_id}.csv"
        save_trace(os.path.join(folder, name), trace, seed)
    return folder


def save_survey(out_dir, survey, seed):
    """survey.csv with one row per (height, metric) plus per-height ECDF files"""
    rows = []
    for height, metrics in survey.items():
        folder = height_dir(out_dir, height)
        for name, values in metrics.items():
            q = percentiles(values, (10, 50, 90))
            rows.append((height, name, q[10], q[50], q[90]))
            save_ecdf(os.path.join(folder, f"ecdf_{name}.csv"), values, seed)
    return write_csv(os.path.join(out_dir, "survey.csv"), SURVEY_COLUMNS, rows, seed)
