"""Height-dependent propagation: LOS probability, pathloss, shadowing, received power.

Two-regime log-distance model. Every constant lives in ChannelParams so a
different set (for example a full 3GPP aerial parameter set) can be dropped in
through the scenario file's ``channel`` section.
"""

import math
from dataclasses import dataclass

import numpy as np

from antenna import angles_from_displacement, composite_gain_db
from deployment import wrap_displacement
from errors import ConfigurationError
from stats_rng import stream

MIN_DISTANCE_M = 1.0
NLOS_SIGMA_FACTOR = 1.5


@dataclass(frozen=True)
class ChannelParams:
    fc_ghz: float = 2.0
    los_always_height_m: float = 100.0
    losprob_scale_m: float = 50.0
    pl_los: tuple = (28.0, 22.0)
    pl_nlos: tuple = (22.4, 36.0)
    sf_sigma0_db: float = 6.0
    sf_decay_per_m: float = 0.01
    sf_sigma_min_db: float = 2.0
    sf_decorrelation_m: float = 50.0

    def __post_init__(self):
        if not self.fc_ghz > 0:
            raise ConfigurationError(f"must be > 0, got {self.fc_ghz}", "channel.fc_ghz")
        if not self.los_always_height_m > 0:
            raise ConfigurationError("must be > 0", "channel.los_always_height_m")
        if not self.losprob_scale_m > 0:
            raise ConfigurationError("must be > 0", "channel.losprob_scale_m")
        for name in ("pl_los", "pl_nlos"):
            pair = getattr(self, name)
            if len(pair) != 2:
                raise ConfigurationError("expected [alpha_db, beta]", f"channel.{name}")
            if not pair[1] > 0:
                raise ConfigurationError(f"beta must be > 0, got {pair[1]}", f"channel.{name}")
        if self.sf_sigma_min_db < 0 or self.sf_sigma0_db < 0:
            raise ConfigurationError("shadowing sigmas must be >= 0", "channel.sf_sigma0_db")
        if self.sf_sigma_min_db > self.sf_sigma0_db:
            raise ConfigurationError("sf_sigma_min_db must not exceed sf_sigma0_db", "channel.sf_sigma_min_db")
        if self.sf_decay_per_m < 0:
            raise ConfigurationError("must be >= 0", "channel.sf_decay_per_m")
        if not self.sf_decorrelation_m > 0:
            raise ConfigurationError("must be > 0", "channel.sf_decorrelation_m")


@dataclass(frozen=True)
class LinkBudget:
    n_prb_system: int = 50
    subcarrier_spacing_hz: float = 15000.0
    thermal_noise_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    ue_gain_dbi: float = 0.0

    def __post_init__(self):
        if int(self.n_prb_system) != self.n_prb_system or self.n_prb_system < 1:
            raise ConfigurationError("must be an integer >= 1", "link_budget.n_prb_system")
        if not self.subcarrier_spacing_hz > 0:
            raise ConfigurationError("must be > 0", "link_budget.subcarrier_spacing_hz")

    @property
    def n_re_total(self):
        return 12 * self.n_prb_system

    @property
    def noise_per_re_dbm(self):
        return (self.thermal_noise_dbm_hz + self.noise_figure_db
                + 10.0 * math.log10(self.subcarrier_spacing_hz))

    def tx_power_per_re_dbm(self, tx_power_dbm):
        return tx_power_dbm - 10.0 * math.log10(self.n_re_total)


@dataclass(frozen=True)
class LinkState:
    los: object
    shadow_db: object


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def los_probability(d2d_m, h_ut_m, p):
    d2d = np.asarray(d2d_m, dtype=float)
    h = np.asarray(h_ut_m, dtype=float)
    scale = p.losprob_scale_m * (1.0 + h / p.los_always_height_m)
    prob = np.minimum(1.0, np.exp(-np.maximum(0.0, d2d - scale) / scale))
    prob = np.where(h >= p.los_always_height_m, 1.0, prob)
    return _out(prob)


def pathloss_db(d3d_m, los, p):
    """alpha + beta*log10(d) + 20*log10(fc); distances below 1 m count as 1 m"""
    d = np.maximum(np.asarray(d3d_m, dtype=float), MIN_DISTANCE_M)
    los = np.asarray(los, dtype=bool)
    alpha = np.where(los, p.pl_los[0], p.pl_nlos[0])
    beta = np.where(los, p.pl_los[1], p.pl_nlos[1])
    return _out(alpha + beta * np.log10(d) + 20.0 * math.log10(p.fc_ghz))


def expected_pathloss_db(d3d_m, d2d_m, h_ut_m, p):
    """LOS-probability-weighted pathloss (dB mix) used when fading is off"""
    prob = np.asarray(los_probability(d2d_m, h_ut_m, p))
    los_pl = np.asarray(pathloss_db(d3d_m, True, p))
    nlos_pl = np.asarray(pathloss_db(d3d_m, False, p))
    return _out(prob * los_pl + (1.0 - prob) * nlos_pl)


def shadow_sigma_db(h_ut_m, los, p):
    h = np.asarray(h_ut_m, dtype=float)
    sigma = np.maximum(p.sf_sigma_min_db, p.sf_sigma0_db * np.exp(-p.sf_decay_per_m * h))
    return _out(np.where(np.asarray(los, dtype=bool), sigma, NLOS_SIGMA_FACTOR * sigma))


def link_geometry(bs_pos, ue_pos, layout=None):
    """Displacement, 2D and 3D distance from the BS antenna to the UE"""
    bs = np.asarray(bs_pos, dtype=float)
    ue = np.asarray(ue_pos, dtype=float)
    if layout is not None:
        displacement = wrap_displacement(bs, ue, layout)
    else:
        displacement = ue - bs
    d2d = np.hypot(displacement[..., 0], displacement[..., 1])
    d3d = np.sqrt(d2d ** 2 + displacement[..., 2] ** 2)
    return displacement, d2d, d3d


def sample_link_state(seed, cell_id, ue_id, bs_pos, ue_pos, p, layout=None, purpose="link"):
    """LOS and shadowing for one link, a pure function of (seed, purpose, cell_id, ue_id)"""
    _, d2d, _ = link_geometry(bs_pos, ue_pos, layout)
    h = float(np.asarray(ue_pos, dtype=float)[2])
    rng = stream(seed, purpose, cell_id, ue_id)
    los = bool(rng.random() < los_probability(float(d2d), h, p))
    shadow = float(rng.standard_normal() * shadow_sigma_db(h, los, p))
    return LinkState(los=los, shadow_db=shadow)


def sample_link_field(seed, cell_id, bs_pos, ue_positions, p, layout=None, purpose="field", extra_label=0):
    """Link states from one BS to many points, one stream per cell.

    Point i always takes the i-th draws of the cell's stream, so a given
    (seed, purpose, cell_id, extra_label) and point order reproduce exactly.
    """
    ue = np.asarray(ue_positions, dtype=float).reshape(-1, 3)
    _, d2d, _ = link_geometry(bs_pos, ue, layout)
    rng = stream(seed, purpose, cell_id, extra_label)
    uniforms = rng.random(ue.shape[0])
    normals = rng.standard_normal(ue.shape[0])
    los = uniforms < np.asarray(los_probability(d2d, ue[:, 2], p))
    shadow = normals * np.asarray(shadow_sigma_db(ue[:, 2], los, p))
    return LinkState(los=los, shadow_db=shadow)


def received_power_dbm(cell, displacement, pattern, loss_db, budget):
    """Per-RE received power for a given total loss (pathloss + shadowing)"""
    az, el = angles_from_displacement(cell.bearing_deg, displacement)
    gain = np.asarray(composite_gain_db(az, el, pattern))
    return _out(budget.tx_power_per_re_dbm(cell.tx_power_dbm) + gain + budget.ue_gain_dbi
                - np.asarray(loss_db))


def rx_power_per_re_dbm(cell, bs_pos, ue_pos, link, pattern, p, budget=None, layout=None):
    """RSRP of one cell at the UE: per-RE tx power + antenna gain - pathloss - shadow"""
    budget = budget or LinkBudget()
    displacement, _, d3d = link_geometry(bs_pos, ue_pos, layout)
    loss = np.asarray(pathloss_db(d3d, link.los, p)) + np.asarray(link.shadow_db)
    return received_power_dbm(cell, displacement, pattern, loss, budget)
