"""Preset-scale trend checks. Deselected by default; run with ``pytest -m slow``."""

import os

import numpy as np
import pytest

from latency_engine import latency_cdf, run_latency_sim
from mobility_engine import (HANDOVER_COMPLETE, REPORT_TRIGGERED, RLF_DECLARED, find_sidelobe_escape, random_routes,
                             run_mobility_sim, serving_drop_db)
from radio import coverage_map, fragmentation_stats, height_survey
from scenario import latency_scenario_for, load_scenario_file, map_grid_for, scene_for

pytestmark = pytest.mark.slow

PRESETS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "presets")


def preset(name):
    return load_scenario_file(os.path.join(PRESETS, name))


@pytest.fixture(scope="module")
def latency_runs():
    runs = {}
    for prbs, name in ((6, "paper-latency-6prb.json"), (15, "paper-latency-15prb.json")):
        scenario = preset(name)
        scene = scene_for(scenario)
        for height in scenario.experiment.heights_m:
            runs[prbs, float(height)] = run_latency_sim(latency_scenario_for(scenario, scene, height))
    return runs


def test_association_fragments_with_height():
    scenario = preset("paper-map-heights.json")
    scene = scene_for(scenario)
    grid = map_grid_for(scenario)
    stats = [fragmentation_stats(coverage_map(scene, h, grid), scene.layout) for h in (1.5, 100.0, 300.0)]
    fractions = [s["non_nearest_fraction"] for s in stats]
    components = [s["component_count"] for s in stats]
    assert fractions[0] < 0.1
    assert fractions[0] < fractions[1] < fractions[2]
    assert components[0] < components[1] < components[2]


def test_map_sinr_drops_aloft():
    scenario = preset("paper-map-heights.json")
    scene = scene_for(scenario)
    grid = map_grid_for(scenario)
    ground = fragmentation_stats(coverage_map(scene, 1.5, grid), scene.layout)["median_rs_sinr_db"]
    aloft = fragmentation_stats(coverage_map(scene, 150.0, grid), scene.layout)["median_rs_sinr_db"]
    assert aloft <= ground - 4.0


def test_utilization_trends(latency_runs):
    aloft = (30.0, 50.0, 100.0, 300.0)
    for prbs in (6, 15):
        util = [latency_runs[prbs, h].utilization for h in aloft]
        assert all(b >= a - 1e-9 for a, b in zip(util, util[1:]))
    for h in (50.0, 100.0, 300.0):
        assert latency_runs[6, h].utilization > latency_runs[15, h].utilization
    assert latency_runs[6, 300.0].utilization >= 0.70
    assert latency_runs[15, 30.0].utilization <= 0.25


def test_latency_bound_trends(latency_runs):
    within = {k: latency_cdf(r)["fraction_within_bound"] for k, r in latency_runs.items()}
    for h in (1.5, 30.0, 50.0, 100.0):
        assert within[15, h] >= 0.90
    assert within[15, 300.0] < within[15, 100.0]
    assert within[6, 300.0] < within[15, 300.0]


def test_sidelobe_escape_replica():
    scenario = preset("paper-fig7-replica.json")
    exp = scenario.experiment
    scene = scene_for(scenario)
    route = find_sidelobe_escape(scene, 300.0, exp.speed_mps, exp.duration_ms, exp.handover, exp.rlf,
                                 exp.sample_dt_ms, exp.activity, scenario.seed)
    result = run_mobility_sim([route], scene, exp.handover, exp.rlf, scenario.seed, "off")
    rlf_times = [e.t_ms for e in result.events if e.event == RLF_DECLARED]
    assert rlf_times and 4000.0 <= rlf_times[0] <= 12000.0
    assert not [e for e in result.events
                if e.t_ms < rlf_times[0] and e.event in (REPORT_TRIGGERED, HANDOVER_COMPLETE)]
    assert serving_drop_db(result.traces[0], 4000.0, rlf_times[0]) >= 7.0


def test_rlf_count_grows_with_height():
    scenario = preset("paper-rlf-heights.json")
    exp = scenario.experiment
    scene = scene_for(scenario)
    counts = {}
    for h in (1.5, 150.0):
        routes = random_routes(exp.n_routes, exp.route_length_m, exp.speed_mps, h, exp.sample_dt_ms,
                               scenario.seed, scene.layout.isd_m / 2.0)
        counts[h] = run_mobility_sim(routes, scene, exp.handover, exp.rlf, scenario.seed, trace_route_ids=()).rlfs
    assert counts[150.0] >= 1.5 * counts[1.5]


def test_survey_neighbour_spread_and_sinr_shrink_aloft():
    scenario = preset("paper-survey-heights.json")
    survey = height_survey(scene_for(scenario), (1.5, 150.0), scenario.experiment.n_points, scenario.seed)
    assert np.median(survey[150.0]["spread_n1_n4_db"]) < np.median(survey[1.5]["spread_n1_n4_db"])
    assert np.median(survey[150.0]["serving_rs_sinr_db"]) < np.median(survey[1.5]["serving_rs_sinr_db"])
