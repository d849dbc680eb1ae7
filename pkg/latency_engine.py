"""TTI-level downlink simulation of drone command-and-control traffic.

Each cell serves its drone UEs on a dedicated pool of PRBs that is orthogonal
to terrestrial traffic. Per 1 ms TTI every cell grants the whole pool to the
UE owning its oldest queued packet; the set of cells transmitting in that TTI
sets the interference each granted UE sees, so load and SINR are coupled.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from channel import (expected_pathloss_db, link_geometry, los_probability, pathloss_db, received_power_dbm,
                     sample_link_state)
from errors import ConfigurationError, EmptySampleError
from radio import FADING_MODES
from stats_rng import percentiles, stream

logger = logging.getLogger(__name__)

TTI_MS = 1
BITS_PER_PRB_PER_BPS_HZ = 180000 * 0.001  # 180 kHz over one 1 ms TTI
HEIGHTS_M = (1.5, 30.0, 50.0, 100.0, 300.0)
PERCENTILE_TABLE = (5, 10, 50, 90, 95, 99)
ASSOCIATIONS = ("drop", "max_power")


@dataclass(frozen=True)
class TrafficConfig:
    period_ms: float = 100.0
    packet_bytes: int = 1250
    latency_bound_ms: float = 50.0
    randomize_phase: bool = True
    discard_timer_ms: Optional[float] = None

    def __post_init__(self):
        if not self.period_ms > 0:
            raise ConfigurationError(f"must be > 0, got {self.period_ms}", "latency.traffic.period_ms")
        if self.packet_bytes < 1:
            raise ConfigurationError("must be >= 1", "latency.traffic.packet_bytes")
        if not self.latency_bound_ms > 0:
            raise ConfigurationError("must be > 0", "latency.traffic.latency_bound_ms")
        if self.discard_timer_ms is not None and not self.discard_timer_ms > 0:
            raise ConfigurationError("must be > 0", "latency.traffic.discard_timer_ms")

    @property
    def packet_bits(self):
        return 8 * self.packet_bytes

    @property
    def rate_kbps(self):
        return self.packet_bits / self.period_ms

    @property
    def discard_after_ms(self):
        """Queueing age at which a packet is dropped; the latency bound unless set"""
        return self.latency_bound_ms if self.discard_timer_ms is None else self.discard_timer_ms


@dataclass(frozen=True)
class LinkAdaptation:
    efficiency_scale: float = 0.75
    efficiency_cap_bps_hz: float = 4.8
    min_sinr_db: float = -10.0

    def __post_init__(self):
        if not self.efficiency_scale > 0:
            raise ConfigurationError("must be > 0", "latency.link_adaptation.efficiency_scale")
        if not self.efficiency_cap_bps_hz > 0:
            raise ConfigurationError("must be > 0", "latency.link_adaptation.efficiency_cap_bps_hz")


@dataclass(frozen=True)
class LatencyScenario:
    scene: object
    ue_height_m: float = 1.5
    ues_per_cell: int = 5
    prb_pool: int = 6
    sim_duration_ms: int = 60000
    seed: int = 1
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    link: LinkAdaptation = field(default_factory=LinkAdaptation)
    association: str = "drop"
    fading_mode: str = "sampled"
    center_only: bool = False
    min_ue_distance_m: float = 35.0

    def __post_init__(self):
        system_prbs = self.scene.budget.n_prb_system
        if self.prb_pool < 1 or self.prb_pool > system_prbs:
            raise ConfigurationError(f"must be in [1, {system_prbs}], got {self.prb_pool}", "latency.prbs")
        if self.ues_per_cell < 1:
            raise ConfigurationError("must be >= 1", "latency.ues_per_cell")
        if not self.ue_height_m > 0:
            raise ConfigurationError("must be > 0", "latency.heights_m")
        if math.isfinite(self.traffic.period_ms) and self.sim_duration_ms < 10 * self.traffic.period_ms:
            raise ConfigurationError(
                f"duration {self.sim_duration_ms} ms covers fewer than 10 traffic periods",
                "latency.duration_ms")
        if self.association not in ASSOCIATIONS:
            raise ConfigurationError(f"must be one of {ASSOCIATIONS}", "latency.association")
        if self.fading_mode not in FADING_MODES:
            raise ConfigurationError(f"must be one of {FADING_MODES}", "latency.fading_mode")


@dataclass(frozen=True)
class UePlacement:
    ue_id: int
    cell_id: int
    position: tuple


@dataclass(frozen=True)
class Packet:
    packet_id: int
    ue_id: int
    cell_id: int
    arrival_ms: int


@dataclass(frozen=True)
class Grant:
    packet: Packet
    n_prbs: int


@dataclass(frozen=True, eq=False)
class LatencyResult:
    height_m: float
    prb_pool: int
    arrival_ms: np.ndarray
    latency_ms: np.ndarray
    packet_ue: np.ndarray
    packet_cell: np.ndarray
    utilization_per_cell: np.ndarray
    utilization: float
    sinr_db: np.ndarray
    offered: int
    delivered: int
    delivered_bits: float
    granted_capacity_bits: float
    latency_bound_ms: float
    discarded: int


def _in_sector(rel_xy, bearing_deg, isd_m, min_distance_m):
    x, y = rel_xy[:, 0], rel_xy[:, 1]
    off = (np.degrees(np.arctan2(y, x)) - bearing_deg + 180.0) % 360.0 - 180.0
    inside = np.abs(off) <= 60.0
    for k in range(6):
        angle = math.radians(30.0 + 60.0 * k)
        inside &= x * math.cos(angle) + y * math.sin(angle) <= isd_m / 2.0
    return inside & (np.hypot(x, y) >= min_distance_m)


def drop_ues(scenario, seed=None):
    """ues_per_cell UEs uniformly over each cell's sector of its site hexagon"""
    seed = scenario.seed if seed is None else seed
    scene = scenario.scene
    reach = scene.layout.isd_m / math.sqrt(3.0)
    placements = []
    for cell in scene.cells:
        rng = stream(seed, "drop", cell.cell_id)
        site_x, site_y = scene.layout.site_positions[cell.site_id]
        accepted = []
        while len(accepted) < scenario.ues_per_cell:
            candidates = rng.uniform(-reach, reach, size=(16, 2))
            keep = _in_sector(candidates, cell.bearing_deg, scene.layout.isd_m, scenario.min_ue_distance_m)
            accepted.extend(candidates[keep].tolist())
        for k, (dx, dy) in enumerate(accepted[:scenario.ues_per_cell]):
            placements.append(UePlacement(ue_id=cell.cell_id * scenario.ues_per_cell + k, cell_id=cell.cell_id,
                                          position=(site_x + dx, site_y + dy, float(scenario.ue_height_m))))
    return placements


def link_adaptation_eff(sinr_db, params):
    """Attenuated Shannon spectral efficiency in bit/s/Hz, zero below the cutoff"""
    sinr = np.asarray(sinr_db, dtype=float)
    eff = np.minimum(params.efficiency_scale * np.log2(1.0 + np.power(10.0, sinr / 10.0)),
                     params.efficiency_cap_bps_hz)
    eff = np.where(sinr < params.min_sinr_db, 0.0, eff)
    return float(eff) if eff.ndim == 0 else eff


def schedule_tti(queue, prb_pool):
    """Full-pool grant to the oldest queued packet, or None when the cell is idle"""
    if not queue:
        return None
    return Grant(packet=queue[0], n_prbs=prb_pool)


def _rx_matrix_mw(scenario, ues):
    """(n_ues, n_cells) per-RE received power in mW"""
    scene = scenario.scene
    n_ues, n_cells = len(ues), scene.n_cells
    rx_dbm = np.empty((n_ues, n_cells))
    for j, cell in enumerate(scene.cells):
        bs = scene.bs_position(cell)
        positions = np.array([u.position for u in ues])
        displacement, d2d, d3d = link_geometry(bs, positions, scene.layout)
        if scenario.fading_mode == "sampled":
            states = [sample_link_state(scenario.seed, cell.cell_id, u.ue_id, bs, u.position, scene.channel,
                                        scene.layout, purpose="latency-link") for u in ues]
            los = np.array([s.los for s in states])
            loss = np.asarray(pathloss_db(d3d, los, scene.channel)) + np.array([s.shadow_db for s in states])
        elif scenario.fading_mode == "median":
            los = np.asarray(los_probability(d2d, positions[:, 2], scene.channel)) >= 0.5
            loss = pathloss_db(d3d, los, scene.channel)
        else:
            loss = expected_pathloss_db(d3d, d2d, positions[:, 2], scene.channel)
        rx_dbm[:, j] = received_power_dbm(cell, displacement, cell.pattern, loss, scene.budget)
    return np.power(10.0, rx_dbm / 10.0)


def _packet_arrivals(scenario, ues):
    traffic = scenario.traffic
    packets = []
    if not math.isfinite(traffic.period_ms):
        return packets
    period = int(round(traffic.period_ms))
    for ue in ues:
        phase = int(stream(scenario.seed, "phase", ue.ue_id).integers(0, period)) if traffic.randomize_phase else 0
        for t in range(phase, scenario.sim_duration_ms, period):
            packets.append((t, ue.ue_id))
    packets.sort()
    return packets


def run_latency_sim(scenario):
    """Simulate every TTI of the scenario and collect per-packet latencies"""
    scene = scenario.scene
    ues = drop_ues(scenario)
    rx_mw = _rx_matrix_mw(scenario, ues)
    cell_index = {c.cell_id: j for j, c in enumerate(scene.cells)}
    if scenario.association == "max_power":
        serving = np.argmax(rx_mw, axis=1)
    else:
        serving = np.array([cell_index[u.cell_id] for u in ues])
    ue_row = {u.ue_id: i for i, u in enumerate(ues)}
    noise_mw = scene.noise_per_re_mw()
    bits_per_eff = scenario.prb_pool * BITS_PER_PRB_PER_BPS_HZ
    packet_bits = scenario.traffic.packet_bits
    logger.info("latency run: height %.1f m, %d PRBs, %d UEs in %d cells, %d ms",
                scenario.ue_height_m, scenario.prb_pool, len(ues), scene.n_cells, scenario.sim_duration_ms)

    arrivals = _packet_arrivals(scenario, ues)
    n_packets = len(arrivals)
    arrival_ms = np.array([t for t, _ in arrivals], dtype=np.int64)
    packet_row = np.array([ue_row[u] for _, u in arrivals], dtype=np.int64)
    packet_cell_idx = serving[packet_row] if n_packets else np.array([], dtype=np.int64)
    remaining = np.full(n_packets, float(packet_bits))
    completion = np.full(n_packets, np.inf)
    dropped = np.zeros(n_packets, dtype=bool)
    discard_ms = scenario.traffic.discard_after_ms

    queues = [deque() for _ in range(scene.n_cells)]
    busy = set()
    granted_ttis = np.zeros(scene.n_cells, dtype=np.int64)
    active = np.zeros(scene.n_cells)
    sinr_chunks = []
    delivered_bits = 0.0
    granted_capacity = 0.0
    next_arrival = 0

    for t in range(scenario.sim_duration_ms):
        while next_arrival < n_packets and arrival_ms[next_arrival] == t:
            j = int(packet_cell_idx[next_arrival])
            queues[j].append(Packet(next_arrival, int(packet_row[next_arrival]), j, t))
            busy.add(j)
            next_arrival += 1
        for j in sorted(busy):
            queue = queues[j]
            # a packet this old can no longer complete within the timer
            while queue and t - queue[0].arrival_ms >= discard_ms:
                dropped[queue.popleft().packet_id] = True
            if not queue:
                busy.discard(j)
        if not busy:
            continue

        # (a) independent per-cell grants
        grants = [schedule_tti(queues[j], scenario.prb_pool) for j in sorted(busy)]
        cells = np.array([g.packet.cell_id for g in grants])
        rows = np.array([g.packet.ue_id for g in grants])
        heads = np.array([g.packet.packet_id for g in grants])

        # (b) SINR against the frozen set of transmitting cells
        active[:] = 0.0
        active[cells] = 1.0
        signal = rx_mw[rows, cells]
        interference = rx_mw[rows] @ active - signal
        sinr_db = 10.0 * np.log10(signal / (interference + noise_mw))
        capacity = link_adaptation_eff(sinr_db, scenario.link) * bits_per_eff
        capacity = np.atleast_1d(capacity)

        delivered_bits += float(np.minimum(capacity, remaining[heads]).sum())
        granted_capacity += float(capacity.sum())
        remaining[heads] -= capacity
        granted_ttis[cells] += 1
        sinr_chunks.append(sinr_db)

        for j, packet_id in zip(cells.tolist(), heads.tolist()):
            if remaining[packet_id] <= 1e-9:
                completion[packet_id] = t + TTI_MS
                queues[j].popleft()
                if not queues[j]:
                    busy.discard(j)

    latency = completion - arrival_ms
    cell_ids = np.array([c.cell_id for c in scene.cells])
    utilization_per_cell = granted_ttis / float(scenario.sim_duration_ms)
    stats_cells = np.arange(scene.n_cells)
    if scenario.center_only:
        stats_cells = np.array([j for j, c in enumerate(scene.cells) if c.site_id == 0])
    keep = np.isin(packet_cell_idx, stats_cells) if n_packets else np.array([], dtype=bool)
    result = LatencyResult(
        height_m=float(scenario.ue_height_m),
        prb_pool=scenario.prb_pool,
        arrival_ms=arrival_ms[keep],
        latency_ms=latency[keep],
        packet_ue=np.array([ues[r].ue_id for r in packet_row[keep]], dtype=np.int64),
        packet_cell=cell_ids[packet_cell_idx[keep]] if n_packets else np.array([], dtype=np.int64),
        utilization_per_cell=utilization_per_cell,
        utilization=float(np.mean(utilization_per_cell[stats_cells])),
        sinr_db=np.concatenate(sinr_chunks) if sinr_chunks else np.array([]),
        offered=int(np.count_nonzero(keep)),
        delivered=int(np.count_nonzero(np.isfinite(latency[keep]))),
        delivered_bits=delivered_bits,
        granted_capacity_bits=granted_capacity,
        latency_bound_ms=float(scenario.traffic.latency_bound_ms),
        discarded=int(np.count_nonzero(dropped[keep])) if n_packets else 0,
    )
    logger.info("latency run done: utilization %.3f, delivered %d/%d, discarded %d",
                result.utilization, result.delivered, result.offered, result.discarded)
    return result


def latency_cdf(result, bound_ms=None):
    """Share of packets within the bound plus a nearest-rank percentile table"""
    own = isinstance(result, LatencyResult)
    samples = result.latency_ms if own else np.asarray(result, dtype=float)
    if samples.size == 0:
        raise EmptySampleError("no latency samples")
    bound = bound_ms
    if bound is None:
        if not own:
            raise ConfigurationError("a bound is required for raw samples", "latency.traffic.latency_bound_ms")
        bound = result.latency_bound_ms
    return {
        "fraction_within_bound": float(np.count_nonzero(samples <= bound)) / samples.size,
        "percentiles": percentiles(samples, PERCENTILE_TABLE),
    }
