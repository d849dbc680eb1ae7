"""Base-station antenna: parabolic element pattern times a vertical array factor.

All gain functions accept scalars or numpy arrays and broadcast.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from deployment import wrap_displacement
from errors import ConfigurationError, DegenerateGeometryError

# Array factor floor; exact nulls would otherwise be -inf
AF_FLOOR_DB = -50.0
# Composite floor sits this far below the element's back-lobe level
COMPOSITE_FLOOR_MARGIN_DB = 20.0


@dataclass(frozen=True)
class ElementPattern:
    gmax_dbi: float = 8.0
    hpbw_az_deg: float = 65.0
    hpbw_el_deg: float = 65.0
    front_back_db: float = 30.0
    sla_db: float = 30.0

    def __post_init__(self):
        if not math.isfinite(self.gmax_dbi):
            raise ConfigurationError("gmax_dbi must be finite", "antenna.element.gmax_dbi")
        for name in ("hpbw_az_deg", "hpbw_el_deg", "front_back_db", "sla_db"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"must be > 0, got {getattr(self, name)}", f"antenna.element.{name}")


@dataclass(frozen=True)
class ArrayConfig:
    m_elements: int = 16
    spacing_wl: float = 0.8
    downtilt_deg: float = 10.0

    def __post_init__(self):
        if int(self.m_elements) != self.m_elements or self.m_elements < 1:
            raise ConfigurationError(f"must be an integer >= 1, got {self.m_elements}", "antenna.array.m_elements")
        if not self.spacing_wl > 0:
            raise ConfigurationError(f"must be > 0, got {self.spacing_wl}", "antenna.array.spacing_wl")
        if not 0 <= self.downtilt_deg < 90:
            raise ConfigurationError(f"must be in [0, 90), got {self.downtilt_deg}", "antenna.array.downtilt_deg")


@dataclass(frozen=True)
class CompositePattern:
    element: ElementPattern = field(default_factory=ElementPattern)
    array: ArrayConfig = field(default_factory=ArrayConfig)

    @property
    def peak_gain_dbi(self):
        return self.element.gmax_dbi + 10.0 * math.log10(self.array.m_elements)

    @property
    def floor_dbi(self):
        return self.element.gmax_dbi - self.element.front_back_db - COMPOSITE_FLOOR_MARGIN_DB


def _scalar_or_array(value):
    return float(value) if np.ndim(value) == 0 else value


def element_gain_db(az_rel_deg, el_rel_deg, p):
    """Element gain for azimuth/elevation offsets from the element boresight"""
    az = np.asarray(az_rel_deg, dtype=float)
    el = np.asarray(el_rel_deg, dtype=float)
    horizontal = np.minimum(12.0 * (az / p.hpbw_az_deg) ** 2, p.front_back_db)
    vertical = np.minimum(12.0 * (el / p.hpbw_el_deg) ** 2, p.sla_db)
    return _scalar_or_array(p.gmax_dbi - np.minimum(horizontal + vertical, p.front_back_db))


def array_factor_db(el_rel_deg, a):
    """Normalised array factor of the uniform column, peak 10*log10(M) at el = -downtilt"""
    el = np.radians(np.asarray(el_rel_deg, dtype=float))
    m = a.m_elements
    psi = 2.0 * np.pi * a.spacing_wl * (np.sin(el) - np.sin(-np.radians(a.downtilt_deg)))
    half = np.sin(psi / 2.0)
    full = np.sin(m * psi / 2.0)
    aligned = np.abs(half) < 1e-12
    safe_half = np.where(aligned, 1.0, half)
    # |sum_m exp(j m psi)|^2 / M in closed form
    power = np.where(aligned, float(m), full ** 2 / (m * safe_half ** 2))
    with np.errstate(divide="ignore"):
        af_db = 10.0 * np.log10(power)
    return _scalar_or_array(np.maximum(af_db, AF_FLOOR_DB))


def composite_gain_db(az_rel_deg, el_rel_deg, c):
    """Element gain plus array factor, floored at gmax - front_back - 20 dBi.

    The element's vertical boresight is the steered direction, so the
    composite peak (gmax + 10*log10(M)) sits exactly at (0, -downtilt).
    """
    el = np.asarray(el_rel_deg, dtype=float)
    gain = (np.asarray(element_gain_db(az_rel_deg, el + c.array.downtilt_deg, c.element))
            + np.asarray(array_factor_db(el, c.array)))
    return _scalar_or_array(np.maximum(gain, c.floor_dbi))


def wrap_angle_deg(angle_deg):
    """Wrap to [-180, 180)"""
    return (np.asarray(angle_deg, dtype=float) + 180.0) % 360.0 - 180.0


def angles_from_displacement(bearing_deg, displacement):
    """(az_rel, el_rel) in degrees for BS-to-UE displacement vectors (..., 3)"""
    d = np.asarray(displacement, dtype=float)
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    horizontal = np.hypot(dx, dy)
    if np.any((horizontal == 0) & (dz == 0)):
        raise DegenerateGeometryError("UE position coincides with the BS antenna")
    az = wrap_angle_deg(np.degrees(np.arctan2(dy, dx)) - bearing_deg)
    el = np.degrees(np.arctan2(dz, horizontal))
    return _scalar_or_array(az), _scalar_or_array(el)


def link_angles(cell, bs_pos, ue_pos, layout=None):
    """Angles of the UE as seen from the cell's antenna; el > 0 above the horizon"""
    bs = np.asarray(bs_pos, dtype=float)
    ue = np.asarray(ue_pos, dtype=float)
    if layout is not None:
        displacement = wrap_displacement(bs, ue, layout)
    else:
        displacement = ue - bs
    return angles_from_displacement(cell.bearing_deg, displacement)


def pattern_grid(c, step_deg=1.0):
    """Rows (el, az, gain) on a regular grid for the pattern dump"""
    els = np.arange(-90.0, 90.0 + step_deg / 2, step_deg)
    azs = np.arange(-180.0, 180.0 + step_deg / 2, step_deg)
    el_grid, az_grid = np.meshgrid(els, azs, indexing="ij")
    gains = composite_gain_db(az_grid, el_grid, c)
    return el_grid.ravel(), az_grid.ravel(), np.asarray(gains).ravel()
