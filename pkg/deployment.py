"""Hexagonal multi-site, tri-sector network geometry."""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import ConfigurationError

logger = logging.getLogger(__name__)

# Defaults
DEFAULT_ISD_M = 500.0
DEFAULT_RINGS = 2
DEFAULT_BS_HEIGHT_M = 25.0
DEFAULT_BEARINGS_DEG = (0.0, 120.0, 240.0)
DEFAULT_TX_POWER_DBM = 46.0

# Neighbour directions of the lattice: 30 deg + k*60 deg
_DIRECTIONS_DEG = tuple(30.0 + 60.0 * k for k in range(6))


@dataclass(frozen=True)
class SiteLayout:
    isd_m: float
    rings: int
    site_positions: tuple
    bs_height_m: float
    wraparound: bool = False

    @property
    def n_sites(self):
        return len(self.site_positions)


@dataclass(frozen=True)
class Cell:
    cell_id: int
    site_id: int
    sector_index: int
    bearing_deg: float
    tx_power_dbm: float
    pattern: Optional[object] = None


def site_count(rings):
    return 1 + 3 * rings * (rings + 1)


def _unit(angle_deg):
    rad = math.radians(angle_deg)
    return math.cos(rad), math.sin(rad)


def _ccw_angle(x, y):
    angle = math.degrees(math.atan2(y, x)) % 360.0
    angle = round(angle, 9)
    return 0.0 if angle >= 360.0 else angle


def build_hex_layout(isd_m=DEFAULT_ISD_M, rings=DEFAULT_RINGS, bs_height_m=DEFAULT_BS_HEIGHT_M,
                     wraparound=False):
    """Center site first, then ring by ring counterclockwise from the +x axis"""
    if not isd_m > 0:
        raise ConfigurationError(f"isd_m must be > 0, got {isd_m}", "layout.isd_m")
    if int(rings) != rings or rings < 0:
        raise ConfigurationError(f"rings must be a non-negative integer, got {rings}", "layout.rings")
    rings = int(rings)
    if wraparound and rings == 0:
        raise ConfigurationError("wraparound needs at least one ring", "layout.wraparound")

    e1 = _unit(_DIRECTIONS_DEG[0])
    e2 = _unit(_DIRECTIONS_DEG[1])
    by_ring = {r: [] for r in range(rings + 1)}
    # axial coordinates on the 60-degree basis (e1, e2); ring = hex distance
    for q in range(-rings, rings + 1):
        for s in range(-rings, rings + 1):
            ring = max(abs(q), abs(s), abs(q + s))
            if ring > rings:
                continue
            x = isd_m * (q * e1[0] + s * e2[0])
            y = isd_m * (q * e1[1] + s * e2[1])
            by_ring[ring].append((_ccw_angle(x, y), x, y))

    positions = []
    for ring in range(rings + 1):
        for _, x, y in sorted(by_ring[ring]):
            positions.append((0.0 if abs(x) < 1e-9 else x, 0.0 if abs(y) < 1e-9 else y))

    layout = SiteLayout(isd_m=float(isd_m), rings=rings, site_positions=tuple(positions),
                        bs_height_m=float(bs_height_m), wraparound=bool(wraparound))
    logger.debug("built hex layout: %d sites, isd %.1f m", layout.n_sites, isd_m)
    return layout


def sectorize(layout, base_bearings=DEFAULT_BEARINGS_DEG, tx_power_dbm=DEFAULT_TX_POWER_DBM, pattern=None):
    """Three cells per site, cell_id = 3*site_id + sector_index"""
    bearings = tuple(float(b) % 360.0 for b in base_bearings)
    if len(bearings) != 3:
        raise ConfigurationError(f"expected 3 bearings, got {len(bearings)}", "layout.bearings_deg")
    if len(set(bearings)) != 3:
        raise ConfigurationError(f"bearings must be distinct, got {base_bearings}", "layout.bearings_deg")
    cells = []
    for site_id in range(layout.n_sites):
        for sector_index, bearing in enumerate(bearings):
            cells.append(Cell(cell_id=3 * site_id + sector_index, site_id=site_id,
                              sector_index=sector_index, bearing_deg=bearing,
                              tx_power_dbm=float(tx_power_dbm), pattern=pattern))
    return cells


def wrap_shifts(layout):
    """The 7 translation vectors (zero first) tiling the plane with the cluster"""
    shifts = [(0.0, 0.0)]
    r = layout.rings
    for k in range(6):
        a = _unit(_DIRECTIONS_DEG[k])
        b = _unit(_DIRECTIONS_DEG[(k + 1) % 6])
        shifts.append((layout.isd_m * ((r + 1) * a[0] + r * b[0]),
                       layout.isd_m * ((r + 1) * a[1] + r * b[1])))
    return np.asarray(shifts)


def wrap_displacement(p, q, layout):
    """Displacement from p to q, through the nearest mirror image when wrapping.

    q may be a single (x, y, z) or an (N, 3) array; the result has q's shape.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    direct = q - p
    if not layout.wraparound:
        return direct
    flat = direct.reshape(-1, 3)
    shifts = wrap_shifts(layout)
    # (7, N, 2) candidate horizontal displacements
    candidates = flat[None, :, :2] + shifts[:, None, :]
    norms = np.hypot(candidates[..., 0], candidates[..., 1])
    best = np.argmin(norms, axis=0)
    out = flat.copy()
    out[:, :2] = candidates[best, np.arange(flat.shape[0])]
    return out.reshape(direct.shape)


def nearest_site(layout, xy):
    """Index of the geometrically nearest site for each (N, 2) point"""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    sites = np.asarray(layout.site_positions, dtype=float).reshape(-1, 2)
    points = np.hstack([xy, np.zeros((xy.shape[0], 1))])
    best = np.zeros(xy.shape[0], dtype=int)
    best_d = np.full(xy.shape[0], np.inf)
    for site_id, (sx, sy) in enumerate(sites):
        d = wrap_displacement((sx, sy, 0.0), points, layout)
        dist = np.hypot(d[:, 0], d[:, 1])
        closer = dist < best_d
        best[closer] = site_id
        best_d[closer] = dist[closer]
    return best, best_d
