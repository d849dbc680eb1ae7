#!/usr/bin/env python3
"""
aeronet-sim: drone connectivity experiments over a hexagonal macro network.

Usage:
    aeronet_sim.py map --config presets/paper-map-heights.json
    aeronet_sim.py latency --config presets/paper-latency-6prb.json --height 300
    aeronet_sim.py mobility --config presets/paper-fig7-replica.json
    aeronet_sim.py survey --config presets/paper-survey-heights.json
    aeronet_sim.py pattern-dump --out-dir results/pattern
"""

import argparse
import logging
import os
import sys

import numpy as np

import results_store
from errors import AeronetError, ConfigurationError
from latency_engine import latency_cdf, run_latency_sim
from mobility_engine import find_sidelobe_escape, random_routes, run_mobility_sim
from radio import coverage_map, fragmentation_stats, height_survey
from scenario import (AntennaConfig, apply_overrides, dump_scenario, explicit_route, latency_scenario_for,
                      load_scenario_file, map_grid_for, scene_for)
from stats_rng import DEFAULT_SEED

logger = logging.getLogger("aeronet_sim")

COMMANDS = ("map", "latency", "mobility", "survey", "pattern-dump")


def run_map(scenario, scene):
    exp = scenario.experiment
    out_dir = scenario.out_dir
    grid = map_grid_for(scenario)
    amaps, stats = [], []
    for height in exp.heights_m:
        amap = coverage_map(scene, height, grid, exp.fading_mode, scenario.seed)
        amaps.append(amap)
        stats.append((height, fragmentation_stats(amap, scene.layout, exp.center_only)))
        if exp.write_pgm:
            results_store.save_assoc_pgm(out_dir, amap, scene.layout.n_sites)
    results_store.save_assoc_maps(out_dir, amaps, scenario.seed)
    results_store.save_map_stats(out_dir, stats, scenario.seed)
    parts = [f"{h:g} m: non-nearest {s['non_nearest_fraction']:.3f}, {s['component_count']} patches, "
             f"median RS-SINR {s['median_rs_sinr_db']:.1f} dB" for h, s in stats]
    return [f"map {scenario.name}: " + "; ".join(parts)]


def run_latency(scenario, scene):
    exp = scenario.experiment
    bound = exp.traffic.latency_bound_ms
    rows, lines = [], []
    for height in exp.heights_m:
        result = run_latency_sim(latency_scenario_for(scenario, scene, height))
        results_store.save_latency_result(scenario.out_dir, result, scenario.seed)
        cdf = latency_cdf(result)
        table = cdf["percentiles"]
        rows.append((height, exp.prbs, result.utilization, cdf["fraction_within_bound"], table[50], table[95]))
        lines.append(f"latency {scenario.name} h={height:g} m prbs={exp.prbs}: utilization {result.utilization:.3f}, "
                     f"{cdf['fraction_within_bound']:.3f} within {bound:g} ms, p95 {table[95]:g} ms, "
                     f"{result.discarded} discarded")
    results_store.save_latency_summary(scenario.out_dir, rows, scenario.seed)
    return lines


def _routes_for(scenario, scene, height):
    exp = scenario.experiment
    if exp.routes == "random":
        extent = exp.extent_m if exp.extent_m is not None else scene.layout.isd_m / 2.0
        return random_routes(exp.n_routes, exp.route_length_m, exp.speed_mps, height, exp.sample_dt_ms,
                             scenario.seed, extent)
    if exp.routes == "explicit":
        return [explicit_route(scenario, height)]
    return [find_sidelobe_escape(scene, height, exp.speed_mps, exp.duration_ms, exp.handover, exp.rlf,
                                 exp.sample_dt_ms, exp.activity, scenario.seed)]


def run_mobility(scenario, scene):
    exp = scenario.experiment
    results, lines = [], []
    for height in exp.heights_m:
        routes = _routes_for(scenario, scene, height)
        result = run_mobility_sim(routes, scene, exp.handover, exp.rlf, scenario.seed, exp.fading_mode,
                                  exp.activity, trace_route_ids=(routes[0].route_id,))
        results_store.save_mobility_result(scenario.out_dir, result, scenario.seed)
        results.append(result)
        lines.append(f"mobility {scenario.name} h={height:g} m: {result.routes} routes, {result.km_flown:.1f} km, "
                     f"{result.handovers} handovers, {result.handover_failures} failures, {result.rlfs} RLFs "
                     f"({result.rlf_per_km:.3f}/km)")
    results_store.save_mobility_summary(scenario.out_dir, results, scenario.seed)
    return lines


def run_survey(scenario, scene):
    exp = scenario.experiment
    survey = height_survey(scene, exp.heights_m, exp.n_points, scenario.seed, exp.center_only)
    results_store.save_survey(scenario.out_dir, survey, scenario.seed)
    parts = [f"{h:g} m: RS-SINR p50 {float(np.median(m['serving_rs_sinr_db'])):.1f} dB, "
             f"N1-N4 p50 {float(np.median(m['spread_n1_n4_db'])):.1f} dB" for h, m in survey.items()]
    return [f"survey {scenario.name}: " + "; ".join(parts)]


RUNNERS = {
    "map": run_map,
    "latency": run_latency,
    "mobility": run_mobility,
    "survey": run_survey,
}


def run(scenario):
    """Run the scenario's experiment, write its files, print one summary line per result"""
    os.makedirs(scenario.out_dir, exist_ok=True)
    scene = scene_for(scenario)
    logger.info("running %s experiment %r (seed %d) into %s", scenario.kind, scenario.name, scenario.seed,
                scenario.out_dir)
    with open(os.path.join(scenario.out_dir, "scenario.json"), "w") as f:
        f.write(dump_scenario(scenario) + "\n")
    results_store.save_layout(scenario.out_dir, scene.layout, scenario.seed)
    results_store.save_cells(scenario.out_dir, scene.cells, scenario.seed)
    for line in RUNNERS[scenario.kind](scenario, scene):
        print(line)
    return 0


def pattern_dump(antenna, out_dir, seed):
    pattern = antenna.pattern
    os.makedirs(out_dir, exist_ok=True)
    results_store.save_pattern(out_dir, pattern, seed)
    print(f"pattern-dump: peak {pattern.peak_gain_dbi:.2f} dBi, floor {pattern.floor_dbi:.2f} dBi -> "
          f"{os.path.join(out_dir, 'pattern.csv')}")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file")
    common.add_argument("--seed", type=int, help=f"master seed (default from config, else {DEFAULT_SEED})")
    common.add_argument("--out-dir", help="output directory")
    common.add_argument("--height", type=float, help="run a single UE height (m)")
    common.add_argument("--prbs", type=int, help="PRB pool for latency runs")
    common.add_argument("--duration-ms", type=int, help="simulated duration (ms)")
    common.add_argument("--center-only", action="store_true", help="restrict statistics to the center site")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="aeronet-sim", description="Drone connectivity simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if args.verbose else logging.INFO,
                        format="[%(asctime)s] %(levelname)s %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
    try:
        if args.command == "pattern-dump":
            antenna, seed, out_dir = AntennaConfig(), DEFAULT_SEED, "results"
            if args.config:
                scenario = load_scenario_file(args.config)
                antenna, seed, out_dir = scenario.antenna, scenario.seed, scenario.out_dir
            return pattern_dump(antenna, args.out_dir or out_dir, args.seed if args.seed is not None else seed)
        if not args.config:
            raise ConfigurationError(f"{args.command} needs --config")
        scenario = load_scenario_file(args.config)
        if scenario.kind != args.command:
            raise ConfigurationError(f"{args.config} holds a {scenario.kind} experiment, not {args.command}")
        scenario = apply_overrides(scenario, seed=args.seed, out_dir=args.out_dir, height=args.height,
                                   prbs=args.prbs, duration_ms=args.duration_ms, center_only=args.center_only)
        return run(scenario)
    except AeronetError as e:
        logger.error("%s", e)
        return 1
    except OSError as e:
        logger.error("file error: %s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
