"""Measurement sets, max-power association, coverage maps and height surveys."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from antenna import CompositePattern
from channel import (ChannelParams, LinkBudget, expected_pathloss_db, link_geometry, los_probability,
                     pathloss_db, received_power_dbm, sample_link_field)
from deployment import build_hex_layout, nearest_site, sectorize
from errors import ConfigurationError
from stats_rng import height_label, stream
from workers import parallel_map

logger = logging.getLogger(__name__)

FADING_MODES = ("off", "median", "sampled")
NEIGHBOR_DEPTH = 4


@dataclass(frozen=True)
class Scene:
    """Everything a link computation needs, immutable and shareable across workers"""
    layout: object
    cells: tuple
    pattern: CompositePattern = field(default_factory=CompositePattern)
    channel: ChannelParams = field(default_factory=ChannelParams)
    budget: LinkBudget = field(default_factory=LinkBudget)

    @property
    def n_cells(self):
        return len(self.cells)

    def bs_position(self, cell):
        x, y = self.layout.site_positions[cell.site_id]
        return np.array([x, y, self.layout.bs_height_m])

    def noise_per_re_mw(self):
        return 10.0 ** (self.budget.noise_per_re_dbm / 10.0)


def build_scene(layout=None, pattern=None, channel=None, budget=None, bearings=None, tx_power_dbm=None):
    """Scene with defaults for every omitted piece"""
    layout = layout or build_hex_layout()
    pattern = pattern or CompositePattern()
    kwargs = {}
    if bearings is not None:
        kwargs["base_bearings"] = bearings
    if tx_power_dbm is not None:
        kwargs["tx_power_dbm"] = tx_power_dbm
    cells = tuple(sectorize(layout, pattern=pattern, **kwargs))
    return Scene(layout=layout, cells=cells, pattern=pattern,
                 channel=channel or ChannelParams(), budget=budget or LinkBudget())


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    cell_ids: tuple
    rsrp_dbm: np.ndarray
    serving_cell_id: int

    @property
    def order(self):
        """Cell ids strongest first; equal powers keep the lower id first"""
        idx = np.lexsort((np.asarray(self.cell_ids), -self.rsrp_dbm))
        return tuple(self.cell_ids[i] for i in idx)

    @property
    def neighbors(self):
        """N_1, N_2, ... relative to the serving cell"""
        return tuple(c for c in self.order if c != self.serving_cell_id)

    def _serving_index(self):
        try:
            return self.cell_ids.index(self.serving_cell_id)
        except ValueError:
            raise ConfigurationError(f"serving cell {self.serving_cell_id} is not in the measurement set")


def _dbm_to_mw(dbm):
    return np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)


def measure_all(ue_pos, cells, link_states, scene, serving_cell_id=None):
    """RSRP of every cell at one UE; serving defaults to the strongest"""
    if not cells:
        raise ConfigurationError("measurement needs at least one cell")
    rsrp = []
    for cell, link in zip(cells, link_states):
        displacement, _, d3d = link_geometry(scene.bs_position(cell), ue_pos, scene.layout)
        loss = pathloss_db(d3d, link.los, scene.channel) + link.shadow_db
        rsrp.append(received_power_dbm(cell, displacement, cell.pattern, loss, scene.budget))
    mset = MeasurementSet(cell_ids=tuple(c.cell_id for c in cells), rsrp_dbm=np.asarray(rsrp, dtype=float),
                          serving_cell_id=-1)
    serving = associate_max_power(mset) if serving_cell_id is None else serving_cell_id
    return MeasurementSet(cell_ids=mset.cell_ids, rsrp_dbm=mset.rsrp_dbm, serving_cell_id=serving)


def _activity_vector(activity, mset):
    n = len(mset.cell_ids)
    if isinstance(activity, dict):
        values = np.array([float(activity.get(c, 1.0)) for c in mset.cell_ids])
    elif np.ndim(activity) == 0:
        values = np.full(n, float(activity))
    else:
        values = np.array(activity, dtype=float)
        if values.shape != (n,):
            raise ConfigurationError(f"activity needs {n} entries, got {values.shape}")
    if np.any(values < 0) or np.any(values > 1):
        raise ConfigurationError("activity fractions must lie in [0, 1]")
    return values


def rsrq_db(mset, activity, n_prb_meas=50, noise_per_re_dbm=None):
    """N*RSRP/RSSI; RSSI counts the serving cell at full activity"""
    if noise_per_re_dbm is None:
        noise_per_re_dbm = LinkBudget().noise_per_re_dbm
    a = _activity_vector(activity, mset)
    s = mset._serving_index()
    a[s] = 1.0
    power = _dbm_to_mw(mset.rsrp_dbm)
    rssi = 12.0 * n_prb_meas * (np.sum(power * a) + float(_dbm_to_mw(noise_per_re_dbm)))
    return 10.0 * math.log10(n_prb_meas * power[s] / rssi)


def rs_sinr_db(mset, activity, noise_per_re_dbm=None):
    """Serving power over activity-weighted co-channel interference plus noise"""
    if noise_per_re_dbm is None:
        noise_per_re_dbm = LinkBudget().noise_per_re_dbm
    a = _activity_vector(activity, mset)
    s = mset._serving_index()
    power = _dbm_to_mw(mset.rsrp_dbm)
    a[s] = 0.0
    interference = np.sum(power * a)
    return 10.0 * math.log10(power[s] / (interference + float(_dbm_to_mw(noise_per_re_dbm))))


def associate_max_power(mset):
    """Strongest cell; ties go to the lowest cell_id"""
    if len(mset.cell_ids) == 0:
        raise ConfigurationError("cannot associate with an empty measurement set")
    return mset.order[0]


def cell_powers_dbm(scene, points, fading_mode="off", seed=1, purpose="field", label=0):
    """(n_cells, n_points) per-RE received power of every cell at every point"""
    if fading_mode not in FADING_MODES:
        raise ConfigurationError(f"fading_mode must be one of {FADING_MODES}, got {fading_mode!r}")
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    heights = points[:, 2]

    def one_cell(cell):
        bs = scene.bs_position(cell)
        displacement, d2d, d3d = link_geometry(bs, points, scene.layout)
        if fading_mode == "off":
            loss = expected_pathloss_db(d3d, d2d, heights, scene.channel)
        elif fading_mode == "median":
            los = np.asarray(los_probability(d2d, heights, scene.channel)) >= 0.5
            loss = pathloss_db(d3d, los, scene.channel)
        else:
            link = sample_link_field(seed, cell.cell_id, bs, points, scene.channel, scene.layout,
                                     purpose=purpose, extra_label=label)
            loss = np.asarray(pathloss_db(d3d, link.los, scene.channel)) + link.shadow_db
        return np.asarray(received_power_dbm(cell, displacement, cell.pattern, loss, scene.budget))

    return np.vstack(parallel_map(one_cell, scene.cells))


def sinr_matrix_db(powers_dbm, serving_idx, activity, noise_per_re_dbm):
    """Vectorised RS-SINR for (C, N) powers with per-point serving cell index"""
    power = _dbm_to_mw(powers_dbm)
    cols = np.arange(power.shape[1])
    a = np.broadcast_to(np.asarray(activity, dtype=float), (power.shape[0],))
    signal = power[serving_idx, cols]
    interference = np.sum(power * a[:, None], axis=0) - signal * a[serving_idx]
    return 10.0 * np.log10(signal / (interference + float(_dbm_to_mw(noise_per_re_dbm))))


def rsrq_matrix_db(powers_dbm, serving_idx, activity, noise_per_re_dbm):
    """Vectorised RSRQ (measurement bandwidth cancels out)"""
    power = _dbm_to_mw(powers_dbm)
    cols = np.arange(power.shape[1])
    a = np.broadcast_to(np.asarray(activity, dtype=float), (power.shape[0],))
    signal = power[serving_idx, cols]
    others = np.sum(power * a[:, None], axis=0) - signal * a[serving_idx]
    rssi_per_prb = 12.0 * (others + signal + float(_dbm_to_mw(noise_per_re_dbm)))
    return 10.0 * np.log10(signal / rssi_per_prb)


@dataclass(frozen=True)
class GridSpec:
    origin_x_m: float
    origin_y_m: float
    spacing_m: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ConfigurationError("grid must have at least one point", "map.grid")
        if not self.spacing_m > 0:
            raise ConfigurationError("grid spacing must be > 0", "map.grid.spacing_m")

    @classmethod
    def centered(cls, half_width_m, n):
        spacing = 2.0 * half_width_m / (n - 1) if n > 1 else 1.0
        return cls(origin_x_m=-half_width_m, origin_y_m=-half_width_m, spacing_m=spacing, nx=n, ny=n)

    def xy(self):
        """(ny, nx) coordinate rasters"""
        xs = self.origin_x_m + self.spacing_m * np.arange(self.nx)
        ys = self.origin_y_m + self.spacing_m * np.arange(self.ny)
        return np.meshgrid(xs, ys)


@dataclass(frozen=True, eq=False)
class AssociationMap:
    grid: GridSpec
    height_m: float
    serving_cell: np.ndarray
    serving_site: np.ndarray
    rsrp_dbm: np.ndarray
    rs_sinr_db: np.ndarray


def coverage_map(scene, height_m, grid, fading_mode="off", seed=1):
    """Max-power association and full-load RS-SINR over a raster at one height"""
    gx, gy = grid.xy()
    points = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(height_m))])
    powers = cell_powers_dbm(scene, points, fading_mode, seed, purpose="map", label=height_label(height_m))
    # argmax takes the first maximum, i.e. the lowest cell id on ties
    serving_idx = np.argmax(powers, axis=0)
    cell_ids = np.array([c.cell_id for c in scene.cells])
    site_ids = np.array([c.site_id for c in scene.cells])
    sinr = sinr_matrix_db(powers, serving_idx, 1.0, scene.budget.noise_per_re_dbm)
    shape = (grid.ny, grid.nx)
    logger.debug("coverage map at %.1f m: %d points", height_m, points.shape[0])
    return AssociationMap(grid=grid, height_m=float(height_m),
                          serving_cell=cell_ids[serving_idx].reshape(shape),
                          serving_site=site_ids[serving_idx].reshape(shape),
                          rsrp_dbm=powers[serving_idx, np.arange(points.shape[0])].reshape(shape),
                          rs_sinr_db=sinr.reshape(shape))


def fragmentation_stats(amap, layout, center_only=False):
    """How far max-power association departs from nearest-site association"""
    gx, gy = amap.grid.xy()
    xy = np.column_stack([gx.ravel(), gy.ravel()])
    nearest, _ = nearest_site(layout, xy)
    serving = amap.serving_site.ravel()
    sites = np.asarray(layout.site_positions, dtype=float).reshape(-1, 2)
    serving_xyz = np.column_stack([sites[serving], np.zeros(serving.size)])
    points_xyz = np.column_stack([xy, np.zeros(serving.size)])
    _, serving_d2d, _ = link_geometry(serving_xyz, points_xyz, layout)

    mask = nearest == 0 if center_only else np.ones(serving.size, dtype=bool)
    components = 0
    for site_id in np.unique(amap.serving_site):
        # default structuring element is the 4-connected cross
        _, count = ndimage.label(amap.serving_site == site_id)
        components += count
    return {
        "non_nearest_fraction": float(np.mean(serving[mask] != nearest[mask])),
        "mean_serving_distance_m": float(np.mean(serving_d2d[mask])),
        "component_count": int(components),
        "median_rs_sinr_db": float(np.median(amap.rs_sinr_db.ravel()[mask])),
    }


def drop_area_points(scene, n_points, rng, center_only=False, height_m=1.5, half_width_m=None):
    """Uniform UE positions over the analysis square, or over the center site's hexagon"""
    isd = scene.layout.isd_m
    half = half_width_m if half_width_m is not None else 1.5 * isd
    if center_only:
        half = isd / math.sqrt(3.0)
    points = []
    while len(points) < n_points:
        xy = rng.uniform(-half, half, size=(2 * n_points, 2))
        if center_only:
            nearest, _ = nearest_site(scene.layout, xy)
            xy = xy[nearest == 0]
        points.extend(xy.tolist())
    xy = np.asarray(points[:n_points])
    return np.column_stack([xy, np.full(n_points, float(height_m))])


SURVEY_METRICS = ("serving_rsrp_dbm", "serving_rsrq_db", "serving_rs_sinr_db",
                  "n1_rsrp_dbm", "n2_rsrp_dbm", "n3_rsrp_dbm", "n4_rsrp_dbm",
                  "gap_serving_n1_db", "spread_n1_n4_db")


def height_survey(scene, heights_m, n_points, seed=1, center_only=False):
    """Distributions of serving and neighbour metrics at each height (full load)"""
    if n_points < 1:
        raise ConfigurationError("survey needs at least one point", "survey.n_points")
    if scene.n_cells < NEIGHBOR_DEPTH + 1:
        raise ConfigurationError(f"survey needs at least {NEIGHBOR_DEPTH + 1} cells")
    results = {}
    noise = scene.budget.noise_per_re_dbm
    for height in heights_m:
        label = height_label(height)
        points = drop_area_points(scene, n_points, stream(seed, "survey-drop", label), center_only, height)
        powers = cell_powers_dbm(scene, points, "sampled", seed, purpose="survey", label=label)
        ranked = -np.sort(-powers, axis=0)
        serving_idx = np.argmax(powers, axis=0)
        metrics = {
            "serving_rsrp_dbm": ranked[0],
            "serving_rsrq_db": rsrq_matrix_db(powers, serving_idx, 1.0, noise),
            "serving_rs_sinr_db": sinr_matrix_db(powers, serving_idx, 1.0, noise),
        }
        for k in range(1, NEIGHBOR_DEPTH + 1):
            metrics[f"n{k}_rsrp_dbm"] = ranked[k]
        metrics["gap_serving_n1_db"] = ranked[0] - ranked[1]
        metrics["spread_n1_n4_db"] = ranked[1] - ranked[NEIGHBOR_DEPTH]
        results[float(height)] = metrics
        logger.info("survey at %.1f m: median RS-SINR %.2f dB", height,
                    float(np.median(metrics["serving_rs_sinr_db"])))
    return results
