"""Element pattern, array factor and composite gain."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from antenna import (AF_FLOOR_DB, ArrayConfig, CompositePattern, ElementPattern, angles_from_displacement,
                     array_factor_db, composite_gain_db, element_gain_db, link_angles, pattern_grid, wrap_angle_deg)
from deployment import Cell
from errors import ConfigurationError, DegenerateGeometryError

PATTERN = CompositePattern()


def test_composite_peak_is_element_plus_array_gain():
    expected = 8.0 + 10.0 * math.log10(16)
    assert composite_gain_db(0.0, -10.0, PATTERN) == pytest.approx(expected, abs=0.01)
    assert PATTERN.peak_gain_dbi == pytest.approx(expected)


def test_element_gain_closed_form():
    p = ElementPattern()
    assert element_gain_db(0.0, 0.0, p) == pytest.approx(8.0)
    # half the beamwidth off boresight costs 3 dB
    assert element_gain_db(32.5, 0.0, p) == pytest.approx(5.0)
    assert element_gain_db(0.0, 32.5, p) == pytest.approx(5.0)
    assert element_gain_db(180.0, 0.0, p) == pytest.approx(8.0 - 30.0)


def test_array_factor_peaks_at_minus_downtilt():
    a = ArrayConfig()
    assert array_factor_db(-10.0, a) == pytest.approx(10.0 * math.log10(16))
    assert array_factor_db(-10.0, ArrayConfig(downtilt_deg=0.0)) < 10.0 * math.log10(16)


def test_array_factor_respects_floor():
    el = np.linspace(-90.0, 90.0, 36001)
    assert np.min(array_factor_db(el, ArrayConfig())) >= AF_FLOOR_DB


def test_single_element_array_is_flat():
    el = np.linspace(-90.0, 90.0, 181)
    assert np.allclose(array_factor_db(el, ArrayConfig(m_elements=1)), 0.0)


def test_vertical_cut_has_sidelobes_and_deep_nulls():
    el = np.arange(-90.0, 90.0, 0.05)
    cut = np.asarray(composite_gain_db(np.zeros_like(el), el, PATTERN))
    interior = cut[1:-1]
    maxima = np.count_nonzero((interior > cut[:-2]) & (interior > cut[2:]))
    assert maxima >= 8  # main lobe plus at least 7 sidelobes
    assert cut.max() - cut.min() >= 25.0


def test_composite_floor():
    assert PATTERN.floor_dbi == pytest.approx(8.0 - 30.0 - 20.0)
    assert composite_gain_db(180.0, 60.0, PATTERN) >= PATTERN.floor_dbi


angle_az = st.floats(min_value=-180.0, max_value=180.0, allow_nan=False)
angle_el = st.floats(min_value=-90.0, max_value=90.0, allow_nan=False)


@settings(derandomize=True, max_examples=200)
@given(az=angle_az, el=angle_el)
def test_composite_gain_bounded_by_peak_and_floor(az, el):
    g = composite_gain_db(az, el, PATTERN)
    assert PATTERN.floor_dbi - 1e-9 <= g <= PATTERN.peak_gain_dbi + 1e-9


@settings(derandomize=True, max_examples=200)
@given(az=angle_az, el=angle_el)
def test_pattern_is_symmetric_in_azimuth(az, el):
    assert composite_gain_db(az, el, PATTERN) == pytest.approx(composite_gain_db(-az, el, PATTERN))


@pytest.mark.parametrize("kwargs", [
    {"m_elements": 0},
    {"spacing_wl": 0.0},
    {"downtilt_deg": 90.0},
    {"downtilt_deg": -1.0},
])
def test_invalid_array_configs(kwargs):
    with pytest.raises(ConfigurationError):
        ArrayConfig(**kwargs)


def test_invalid_element_config():
    with pytest.raises(ConfigurationError):
        ElementPattern(hpbw_az_deg=0.0)


def test_wrap_angle():
    assert np.allclose(wrap_angle_deg([180.0, -180.0, 190.0, 360.0, -190.0]), [-180.0, -180.0, -170.0, 0.0, 170.0])


def test_link_angles_relative_to_bearing():
    cell = Cell(cell_id=1, site_id=0, sector_index=1, bearing_deg=120.0, tx_power_dbm=46.0)
    bs = (0.0, 0.0, 25.0)
    ue = (100.0 * math.cos(math.radians(150.0)), 100.0 * math.sin(math.radians(150.0)), 125.0)
    az, el = link_angles(cell, bs, ue)
    assert az == pytest.approx(30.0)
    assert el == pytest.approx(45.0)


def test_ue_below_antenna_has_negative_elevation():
    _, el = angles_from_displacement(0.0, (100.0, 0.0, -100.0))
    assert el == pytest.approx(-45.0)


def test_coincident_positions_raise():
    with pytest.raises(DegenerateGeometryError):
        angles_from_displacement(0.0, (0.0, 0.0, 0.0))


def test_pattern_grid_shape():
    el, az, gain = pattern_grid(PATTERN, 1.0)
    assert el.size == az.size == gain.size == 181 * 361
    assert gain.max() == pytest.approx(PATTERN.peak_gain_dbi, abs=0.01)


@settings(derandomize=True, max_examples=200)
@given(delta=st.floats(min_value=0.0, max_value=0.8))
def test_array_factor_symmetric_about_steering_direction(delta):
    steer = -math.sin(math.radians(PATTERN.array.downtilt_deg))
    above = math.degrees(math.asin(steer + delta))
    below = math.degrees(math.asin(steer - delta))
    assert array_factor_db(above, PATTERN.array) == pytest.approx(array_factor_db(below, PATTERN.array), abs=1e-6)
