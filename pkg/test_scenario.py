"""Scenario loading, validation, overrides and round-trips."""

import dataclasses
import json
import math
import os

import numpy as np
import pytest

from antenna import composite_gain_db
from errors import ConfigurationError
from latency_engine import HEIGHTS_M
from radio import GridSpec, coverage_map, fragmentation_stats
from scenario import (LatencyExperiment, MobilityExperiment, apply_overrides, dump_scenario, load_scenario,
                      load_scenario_file, scenario_to_dict, parse_scenario, scene_for)

PRESETS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "presets")
PRESET_FILES = sorted(f for f in os.listdir(PRESETS) if f.endswith(".json"))


def preset(name):
    return load_scenario_file(os.path.join(PRESETS, name))


def test_missing_experiment_block_is_named():
    with pytest.raises(ConfigurationError, match="missing experiment block"):
        load_scenario('{"name": "empty"}')


def test_two_experiment_blocks_rejected():
    with pytest.raises(ConfigurationError, match="exactly one"):
        load_scenario('{"map": {}, "latency": {}}')


def test_empty_block_gets_defaults():
    scenario = load_scenario('{"latency": {}}')
    assert scenario.kind == "latency"
    assert scenario.experiment == LatencyExperiment()
    assert scenario.seed == 1


@pytest.mark.parametrize("text, path", [
    ('{"latency": {"prb": 6}}', "latency.prb"),
    ('{"colour": 1, "map": {}}', "colour"),
    ('{"layout": {"isd": 500}, "map": {}}', "layout.isd"),
    ('{"antenna": {"array": {"tilt": 5}}, "map": {}}', "antenna.array.tilt"),
    ('{"mobility": {"handover": {"ttt_ms": 100}}}', "mobility.handover.ttt_ms"),
])
def test_unknown_keys_report_their_path(text, path):
    with pytest.raises(ConfigurationError) as info:
        load_scenario(text)
    assert info.value.key_path == path


@pytest.mark.parametrize("text", [
    '{"latency": {"prbs": "6"}}',
    '{"latency": {"prbs": 0}}',
    '{"latency": {"prbs": 51}}',
    '{"map": {"heights_m": []}}',
    '{"map": {"heights_m": [-1]}}',
    '{"map": {"fading_mode": "rayleigh"}}',
    '{"mobility": {"routes": "spiral"}}',
    '{"mobility": {"routes": "explicit"}}',
    '{"antenna": {"array": {"downtilt_deg": 95}}, "map": {}}',
    '{"seed": -1, "map": {}}',
    '{"seed": true, "map": {}}',
    '{"map": {} ',
])
def test_invalid_values_rejected(text):
    with pytest.raises(ConfigurationError):
        load_scenario(text)


def test_latency_6prb_preset():
    scenario = preset("paper-latency-6prb.json")
    scene = scene_for(scenario)
    assert scene.layout.n_sites == 19
    assert scene.n_cells == 57
    assert scenario.experiment.ues_per_cell == 5
    assert scenario.experiment.prbs == 6
    assert scenario.experiment.heights_m == HEIGHTS_M
    assert 5 * scene.n_cells == 285


def test_fig7_preset_uses_sidelobe_search():
    scenario = preset("paper-fig7-replica.json")
    assert isinstance(scenario.experiment, MobilityExperiment)
    assert scenario.experiment.routes == "sidelobe_escape"
    assert scenario.experiment.fading_mode == "off"
    assert scenario.experiment.heights_m == (300.0,)


@pytest.mark.parametrize("name", PRESET_FILES)
def test_presets_round_trip(name):
    scenario = preset(name)
    assert parse_scenario(scenario_to_dict(scenario)) == scenario
    assert load_scenario(dump_scenario(scenario)) == scenario


def test_round_trip_keeps_nested_settings():
    text = json.dumps({
        "name": "nested",
        "channel": {"pl_los": [30, 20]},
        "mobility": {
            "routes": "explicit",
            "waypoints": [[0, 0], [100, 0], [100, 100]],
            "handover": {"threshold_trigger": {"metric": "rs_sinr", "threshold": -3, "n_cells": 2}},
        },
    })
    scenario = load_scenario(text)
    assert scenario.channel.pl_los == (30, 20)
    assert scenario.experiment.waypoints == ((0, 0), (100, 0), (100, 100))
    assert scenario.experiment.handover.threshold_trigger.n_cells == 2
    assert load_scenario(dump_scenario(scenario)) == scenario


def test_overrides():
    scenario = preset("paper-latency-15prb.json")
    changed = apply_overrides(scenario, seed=9, out_dir="elsewhere", height=300, prbs=6, duration_ms=2000,
                              center_only=True)
    assert changed.seed == 9
    assert changed.out_dir == "elsewhere"
    assert changed.experiment.heights_m == (300.0,)
    assert changed.experiment.prbs == 6
    assert changed.experiment.duration_ms == 2000
    assert changed.experiment.center_only
    assert apply_overrides(scenario) == scenario


def test_overrides_that_do_not_apply():
    scenario = preset("paper-map-heights.json")
    with pytest.raises(ConfigurationError):
        apply_overrides(scenario, prbs=6)
    with pytest.raises(ConfigurationError):
        apply_overrides(scenario, duration_ms=1000)
    with pytest.raises(ConfigurationError):
        apply_overrides(preset("paper-rlf-heights.json"), center_only=True)


def test_presets_share_one_deployment():
    assert len({preset(name).layout for name in PRESET_FILES}) == 1


def test_latency_presets_use_max_power_association():
    for name in ("paper-latency-6prb.json", "paper-latency-15prb.json"):
        assert preset(name).experiment.association == "max_power"


def ground_gain_db(scenario, r):
    el = -np.degrees(np.arctan2(scenario.layout.bs_height_m - 1.5, r))
    return np.asarray(composite_gain_db(0.0, el, scenario.pattern))


def test_preset_hexagon_stays_inside_the_ground_main_lobe():
    scenario = preset("paper-map-heights.json")
    corner = scenario.layout.isd_m / math.sqrt(3.0)
    edge = ground_gain_db(scenario, np.arange(150.0, corner, 1.0))
    assert np.all(np.diff(edge) < 0)
    assert edge[-1] >= scenario.pattern.peak_gain_dbi - 25.0
    r = np.arange(200.0, 300.0, 0.25)
    first_null = r[np.argmin(ground_gain_db(scenario, r))]
    assert corner < first_null < 500.0 / math.sqrt(3.0)


def test_ground_association_follows_nearest_site_with_preset_deployment():
    scenario = preset("paper-map-heights.json")
    scenario = dataclasses.replace(scenario, layout=dataclasses.replace(scenario.layout, rings=1))
    scene = scene_for(scenario)
    amap = coverage_map(scene, 1.5, GridSpec.centered(300.0, 41))
    assert fragmentation_stats(amap, scene.layout)["non_nearest_fraction"] < 0.1
