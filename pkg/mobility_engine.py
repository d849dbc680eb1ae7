"""Drone mobility: measurements along routes, report triggers, handover and RLF.

A route is sampled every ``sample_dt_ms``. At each sample the engine
recomputes every cell's RSRP from geometry plus spatially correlated
shadowing, applies layer-3 filtering, evaluates the A3 (and optional
threshold) trigger, and steps two state machines: the handover procedure and
the radio-link monitor. The FSM steps are pure functions over frozen state so
they can be tested sample by sample.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr

from channel import expected_pathloss_db, link_geometry, los_probability, pathloss_db, received_power_dbm, shadow_sigma_db
from deployment import nearest_site
from errors import ConfigurationError, SimulationError
from radio import FADING_MODES, GridSpec, coverage_map
from stats_rng import stream
from workers import parallel_map

logger = logging.getLogger(__name__)

KMH = 1000.0 / 3600.0
THRESHOLD_METRICS = ("rsrp", "rsrq", "rs_sinr")

# Event names as written to events.csv
CELL_SELECTED = "CellSelected"
REPORT_TRIGGERED = "ReportTriggered"
THRESHOLD_REPORT = "ThresholdReport"
HANDOVER_COMMAND = "HandoverCommand"
HANDOVER_COMPLETE = "HandoverComplete"
HANDOVER_FAILURE = "HandoverFailure"
RLF_DECLARED = "RlfDeclared"


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple
    speed_mps: float
    height_m: float
    sample_dt_ms: float = 40.0
    route_id: int = 0

    def __post_init__(self):
        if not self.speed_mps > 0:
            raise ConfigurationError(f"speed must be > 0, got {self.speed_mps}", "mobility.speed_kmh")
        if len(self.waypoints) < 2:
            raise ConfigurationError("a trajectory needs at least 2 waypoints", "mobility.waypoints")
        if not self.sample_dt_ms > 0:
            raise ConfigurationError("must be > 0", "mobility.sample_dt_ms")
        if not self.height_m > 0:
            raise ConfigurationError("must be > 0", "mobility.heights_m")

    @property
    def path_length_m(self):
        pts = np.asarray(self.waypoints, dtype=float)
        return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


@dataclass(frozen=True)
class ThresholdTrigger:
    metric: str = "rsrp"
    threshold: float = -90.0
    n_cells: int = 4

    def __post_init__(self):
        if self.metric not in THRESHOLD_METRICS:
            raise ConfigurationError(f"must be one of {THRESHOLD_METRICS}", "mobility.handover.threshold_trigger.metric")
        if self.n_cells < 1:
            raise ConfigurationError("must be >= 1", "mobility.handover.threshold_trigger.n_cells")


@dataclass(frozen=True)
class HandoverConfig:
    a3_offset_db: float = 3.0
    time_to_trigger_ms: float = 160.0
    l3_filter_k: int = 4
    report_delay_ms: float = 50.0
    ho_command_delay_ms: float = 50.0
    ho_execution_ms: float = 40.0
    report_prohibit_ms: float = 1000.0
    threshold_trigger: Optional[ThresholdTrigger] = None

    def __post_init__(self):
        if self.a3_offset_db < 0:
            raise ConfigurationError("must be >= 0", "mobility.handover.a3_offset_db")
        for name in ("time_to_trigger_ms", "report_delay_ms", "ho_command_delay_ms", "ho_execution_ms",
                     "report_prohibit_ms"):
            if getattr(self, name) < 0:
                raise ConfigurationError("must be >= 0", f"mobility.handover.{name}")
        if self.l3_filter_k < 0:
            raise ConfigurationError("must be >= 0", "mobility.handover.l3_filter_k")


@dataclass(frozen=True)
class RlfConfig:
    qout_db: float = -8.0
    qin_db: float = -6.0
    t310_ms: float = 1000.0
    reestablishment_delay_ms: float = 200.0

    def __post_init__(self):
        if not self.qout_db < self.qin_db:
            raise ConfigurationError("qout_db must be below qin_db", "mobility.rlf.qout_db")
        if self.t310_ms < 0 or self.reestablishment_delay_ms < 0:
            raise ConfigurationError("timers must be >= 0", "mobility.rlf")


@dataclass(frozen=True)
class RouteSamples:
    t_ms: np.ndarray
    positions: np.ndarray
    step_m: np.ndarray


@dataclass(frozen=True)
class MobilityEvent:
    t_ms: float
    route_id: int
    event: str
    cell_from: int
    cell_to: int


@dataclass(frozen=True)
class MeasurementReport:
    t_ms: float
    serving: int
    target: int


@dataclass(frozen=True, eq=False)
class RouteTrace:
    t_ms: np.ndarray
    cell_ids: tuple
    rsrp_filtered_dbm: np.ndarray
    serving: np.ndarray
    serving_sinr_db: np.ndarray


@dataclass(frozen=True, eq=False)
class RouteOutcome:
    route_id: int
    events: tuple
    trace: Optional[RouteTrace]
    handovers: int
    handover_failures: int
    rlfs: int
    reports: int
    threshold_reports: int
    km_flown: float


@dataclass(frozen=True, eq=False)
class MobilityResult:
    height_m: float
    routes: int
    events: tuple
    traces: dict
    handovers: int
    handover_failures: int
    rlfs: int
    reports: int
    threshold_reports: int
    km_flown: float

    @property
    def rlf_per_km(self):
        return self.rlfs / self.km_flown if self.km_flown > 0 else 0.0


def build_route(trajectory):
    """Constant-speed samples along the polyline, ceil(L/(v*dt)) + 1 of them"""
    pts = np.asarray(trajectory.waypoints, dtype=float)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    length = float(seg.sum())
    if length <= 0:
        raise ConfigurationError("route has zero length", "mobility.waypoints")
    step = trajectory.speed_mps * trajectory.sample_dt_ms / 1000.0
    n = math.ceil(round(length / step, 9)) + 1
    travelled = np.minimum(np.arange(n) * step, length)
    cumulative = np.concatenate([[0.0], np.cumsum(seg)])
    x = np.interp(travelled, cumulative, pts[:, 0])
    y = np.interp(travelled, cumulative, pts[:, 1])
    # interp can land a hair off the final waypoint
    x[-1], y[-1] = pts[-1]
    positions = np.column_stack([x, y, np.full(n, float(trajectory.height_m))])
    return RouteSamples(t_ms=np.arange(n) * float(trajectory.sample_dt_ms), positions=positions,
                        step_m=np.diff(travelled))


def _gauss_markov(w, rho):
    """s_0 = w_0, s_n = rho_{n-1} s_{n-1} + sqrt(1 - rho_{n-1}^2) w_n"""
    s = np.empty_like(w)
    s[0] = w[0]
    if w.size == 1:
        return s
    # constant-speed routes share one rho except possibly the final, shorter step
    differs = ~np.isclose(rho, rho[0], rtol=0.0, atol=1e-12)
    run = int(np.argmax(differs)) if differs.any() else rho.size
    r = float(rho[0])
    s[1:run + 1], _ = lfilter([math.sqrt(max(0.0, 1.0 - r * r))], [1.0, -r], w[1:run + 1], zi=[r * w[0]])
    for n in range(run + 1, w.size):
        r = float(rho[n - 1])
        s[n] = r * s[n - 1] + math.sqrt(max(0.0, 1.0 - r * r)) * w[n]
    return s


def correlated_shadow_track(seed, cell_id, route, sigma_db, decorrelation_m, route_id=0, purpose="shadow-track"):
    """Gauss-Markov shadowing along a route, stationary std sigma_db (scalar or per sample)"""
    if not decorrelation_m > 0:
        raise ConfigurationError("decorrelation distance must be > 0", "channel.sf_decorrelation_m")
    n = route.t_ms.size
    w = stream(seed, purpose, cell_id, route_id).standard_normal(n)
    rho = np.exp(-np.asarray(route.step_m, dtype=float) / decorrelation_m)
    return _gauss_markov(w, rho) * np.asarray(sigma_db, dtype=float)


def l3_filter(raw_dbm, k):
    """Layer-3 filter in the dB domain, a = 1/2^(k/4), first output equals first input"""
    if k < 0:
        raise ConfigurationError("filter coefficient k must be >= 0", "mobility.handover.l3_filter_k")
    raw = np.asarray(raw_dbm, dtype=float)
    a = 1.0 / 2.0 ** (k / 4.0)
    out = np.empty_like(raw)
    out[0] = raw[0]
    if raw.shape[0] > 1:
        zi = ((1.0 - a) * raw[0])[None, ...] if raw.ndim > 1 else [(1.0 - a) * raw[0]]
        out[1:], _ = lfilter([a], [1.0, -(1.0 - a)], raw[1:], axis=0, zi=zi)
    return out


@dataclass(frozen=True)
class TriggerState:
    entering_since_ms: Optional[float] = None
    last_fire_ms: Optional[float] = None
    armed: bool = True


def _rearm_if_prohibit_over(state, cfg, t_ms):
    if not state.armed and state.last_fire_ms is not None and t_ms - state.last_fire_ms >= cfg.report_prohibit_ms:
        return TriggerState(last_fire_ms=state.last_fire_ms)
    return state


def evaluate_a3(filtered_dbm, serving, cfg, t_ms, state=TriggerState()):
    """A3: some neighbour above serving + X for time-to-trigger; returns (state, report or None)"""
    state = _rearm_if_prohibit_over(state, cfg, t_ms)
    if not state.armed:
        return state, None
    row = np.asarray(filtered_dbm, dtype=float)
    better = row > row[serving] + cfg.a3_offset_db
    better[serving] = False
    if not better.any():
        return replace(state, entering_since_ms=None), None
    since = t_ms if state.entering_since_ms is None else state.entering_since_ms
    if t_ms - since < cfg.time_to_trigger_ms:
        return replace(state, entering_since_ms=since), None
    target = int(np.argmax(np.where(better, row, -np.inf)))
    return (TriggerState(entering_since_ms=None, last_fire_ms=t_ms, armed=False),
            MeasurementReport(t_ms=t_ms, serving=serving, target=target))


def evaluate_threshold_report(metric_row, cfg, t_ms, state=TriggerState()):
    """Informational report when at least n_cells cells exceed the configured threshold"""
    trigger = cfg.threshold_trigger
    if trigger is None:
        return state, None
    state = _rearm_if_prohibit_over(state, cfg, t_ms)
    if not state.armed:
        return state, None
    count = int(np.count_nonzero(np.asarray(metric_row, dtype=float) > trigger.threshold))
    if count < trigger.n_cells:
        return state, None
    return TriggerState(last_fire_ms=t_ms, armed=False), count


class HandoverPhase(Enum):
    CONNECTED = "connected"
    REPORTING = "reporting"
    COMMAND_PENDING = "command_pending"
    EXECUTING = "executing"


@dataclass(frozen=True)
class HandoverState:
    phase: HandoverPhase = HandoverPhase.CONNECTED
    target: Optional[int] = None
    elapsed_ms: float = 0.0


def _phase_duration(phase, cfg):
    if phase is HandoverPhase.REPORTING:
        return cfg.report_delay_ms
    if phase is HandoverPhase.COMMAND_PENDING:
        return cfg.ho_command_delay_ms
    if phase is HandoverPhase.EXECUTING:
        return cfg.ho_execution_ms
    raise SimulationError(f"phase {phase} has no duration")


def step_handover_fsm(state, report, sinr_db, dt_ms, cfg, rlf_cfg):
    """Advance the handover procedure by dt_ms; returns (state, [(event, target), ...]).

    Connected -> Reporting -> CommandPending -> Executing -> Connected(target).
    The report is lost if serving SINR is below Qout when it is due at the
    network; the command is lost if SINR is below Qout when it is due at the UE.
    """
    if not isinstance(state.phase, HandoverPhase):
        raise SimulationError(f"malformed handover state {state!r}")
    if state.phase is not HandoverPhase.CONNECTED and state.target is None:
        raise SimulationError(f"handover in {state.phase.value} without a target")

    events = []
    if state.phase is HandoverPhase.CONNECTED:
        if report is None:
            return state, events
        phase, target, elapsed = HandoverPhase.REPORTING, report.target, 0.0
    else:
        phase, target, elapsed = state.phase, state.target, state.elapsed_ms + dt_ms

    while phase is not HandoverPhase.CONNECTED and elapsed >= _phase_duration(phase, cfg):
        elapsed -= _phase_duration(phase, cfg)
        if phase is HandoverPhase.REPORTING:
            if sinr_db < rlf_cfg.qout_db:
                events.append((HANDOVER_FAILURE, target))
                return HandoverState(), events
            events.append((HANDOVER_COMMAND, target))
            phase = HandoverPhase.COMMAND_PENDING
        elif phase is HandoverPhase.COMMAND_PENDING:
            if sinr_db < rlf_cfg.qout_db:
                events.append((HANDOVER_FAILURE, target))
                return HandoverState(), events
            phase = HandoverPhase.EXECUTING
        else:
            events.append((HANDOVER_COMPLETE, target))
            return HandoverState(), events
    return HandoverState(phase=phase, target=target, elapsed_ms=elapsed), events


@dataclass(frozen=True)
class RlfState:
    t310_running: bool = False
    t310_elapsed_ms: float = 0.0


def step_rlf_monitor(state, sinr_db, dt_ms, cfg):
    """T310 supervision; returns (state, rlf_declared)

    T310 starts on the first out-of-sync sample (SINR below Qout) and any
    sample at or above Qout stops and clears it.
    """
    if not sinr_db < cfg.qout_db:
        return RlfState(), False
    elapsed = state.t310_elapsed_ms + dt_ms if state.t310_running else 0.0
    if elapsed >= cfg.t310_ms:
        return RlfState(), True
    return RlfState(t310_running=True, t310_elapsed_ms=elapsed), False


def route_powers_dbm(scene, route, seed, route_id=0, fading_mode="sampled"):
    """(T, C) raw RSRP of every cell along the route"""
    if fading_mode not in FADING_MODES:
        raise ConfigurationError(f"must be one of {FADING_MODES}", "mobility.fading_mode")
    heights = route.positions[:, 2]
    ch = scene.channel
    columns = []
    for cell in scene.cells:
        displacement, d2d, d3d = link_geometry(scene.bs_position(cell), route.positions, scene.layout)
        if fading_mode == "sampled":
            u = correlated_shadow_track(seed, cell.cell_id, route, 1.0, ch.sf_decorrelation_m, route_id,
                                        purpose="los-track")
            los = ndtr(u) < np.asarray(los_probability(d2d, heights, ch))
            sigma = np.asarray(shadow_sigma_db(heights, los, ch))
            shadow = correlated_shadow_track(seed, cell.cell_id, route, sigma, ch.sf_decorrelation_m, route_id)
            loss = np.asarray(pathloss_db(d3d, los, ch)) + shadow
        elif fading_mode == "median":
            loss = pathloss_db(d3d, np.asarray(los_probability(d2d, heights, ch)) >= 0.5, ch)
        else:
            loss = expected_pathloss_db(d3d, d2d, heights, ch)
        columns.append(np.asarray(received_power_dbm(cell, displacement, cell.pattern, loss, scene.budget)))
    return np.column_stack(columns)


def _threshold_metric(raw_dbm, filtered_dbm, metric, activity, noise_mw):
    if metric == "rsrp":
        return filtered_dbm
    power = np.power(10.0, raw_dbm / 10.0)
    others = activity * (power.sum(axis=1, keepdims=True) - power)
    if metric == "rs_sinr":
        return 10.0 * np.log10(power / (others + noise_mw))
    return 10.0 * np.log10(power / (12.0 * (others + power + noise_mw)))


def simulate_route(scene, trajectory, ho_cfg, rlf_cfg, seed=1, fading_mode="sampled", activity=1.0,
                   keep_trace=True):
    """Run both state machines along one trajectory"""
    route = build_route(trajectory)
    route_id = trajectory.route_id
    raw = route_powers_dbm(scene, route, seed, route_id, fading_mode)
    filtered = l3_filter(raw, ho_cfg.l3_filter_k)
    power = np.power(10.0, raw / 10.0)
    total = power.sum(axis=1)
    noise_mw = scene.noise_per_re_mw()
    threshold_rows = None
    if ho_cfg.threshold_trigger is not None:
        threshold_rows = _threshold_metric(raw, filtered, ho_cfg.threshold_trigger.metric, activity, noise_mw)
    cell_ids = tuple(c.cell_id for c in scene.cells)

    def sinr_of(n, s):
        signal = power[n, s]
        return 10.0 * math.log10(signal / (activity * (total[n] - signal) + noise_mw))

    t_ms = route.t_ms
    n_samples = t_ms.size
    serving_trace = np.full(n_samples, -1, dtype=np.int64)
    sinr_trace = np.full(n_samples, np.nan)
    events = []
    counts = {"handovers": 0, "failures": 0, "rlfs": 0, "reports": 0, "threshold": 0}

    def log(t, name, cell_from, cell_to):
        events.append(MobilityEvent(float(t), route_id, name, cell_from, cell_to))

    serving = int(np.argmax(raw[0]))
    log(t_ms[0], CELL_SELECTED, -1, cell_ids[serving])
    a3_state, thr_state = TriggerState(), TriggerState()
    ho_state, rlf_state = HandoverState(), RlfState()
    outage_until = None
    last_serving = serving
    prev_t = t_ms[0]

    for n in range(n_samples):
        t = float(t_ms[n])
        dt = t - prev_t
        prev_t = t
        if outage_until is not None:
            if t < outage_until:
                continue
            serving = int(np.argmax(raw[n]))
            log(t, CELL_SELECTED, cell_ids[last_serving], cell_ids[serving])
            outage_until = None
            a3_state = TriggerState()
            ho_state, rlf_state = HandoverState(), RlfState()
            dt = 0.0

        sinr = sinr_of(n, serving)
        report = None
        if ho_state.phase is HandoverPhase.CONNECTED:
            a3_state, report = evaluate_a3(filtered[n], serving, ho_cfg, t, a3_state)
            if report is not None:
                counts["reports"] += 1
                log(t, REPORT_TRIGGERED, cell_ids[serving], cell_ids[report.target])
        if threshold_rows is not None:
            thr_state, fired = evaluate_threshold_report(threshold_rows[n], ho_cfg, t, thr_state)
            if fired is not None:
                counts["threshold"] += 1
                log(t, THRESHOLD_REPORT, cell_ids[serving], -1)

        ho_state, ho_events = step_handover_fsm(ho_state, report, sinr, dt, ho_cfg, rlf_cfg)
        for name, target in ho_events:
            log(t, name, cell_ids[serving], cell_ids[target])
            if name == HANDOVER_COMPLETE:
                counts["handovers"] += 1
                serving = target
                rlf_state = RlfState()
                a3_state = TriggerState()
                sinr = sinr_of(n, serving)
            elif name == HANDOVER_FAILURE:
                counts["failures"] += 1
                a3_state = TriggerState()

        rlf_state, declared = step_rlf_monitor(rlf_state, sinr, dt, rlf_cfg)
        serving_trace[n] = cell_ids[serving]
        sinr_trace[n] = sinr
        if declared:
            counts["rlfs"] += 1
            log(t, RLF_DECLARED, cell_ids[serving], -1)
            last_serving = serving
            ho_state = HandoverState()
            outage_until = t + rlf_cfg.reestablishment_delay_ms

    trace = None
    if keep_trace:
        trace = RouteTrace(t_ms=t_ms, cell_ids=cell_ids, rsrp_filtered_dbm=filtered,
                           serving=serving_trace, serving_sinr_db=sinr_trace)
    return RouteOutcome(route_id=route_id, events=tuple(events), trace=trace, handovers=counts["handovers"],
                        handover_failures=counts["failures"], rlfs=counts["rlfs"], reports=counts["reports"],
                        threshold_reports=counts["threshold"], km_flown=trajectory.path_length_m / 1000.0)


def run_mobility_sim(routes, scene, ho_cfg, rlf_cfg, seed=1, fading_mode="sampled", activity=1.0,
                     trace_route_ids=None):
    """Simulate independent routes in parallel and merge their event logs"""
    routes = list(routes)
    if not routes:
        raise ConfigurationError("mobility needs at least one route", "mobility.routes")
    if not 0 <= activity <= 1:
        raise ConfigurationError("must be in [0, 1]", "mobility.activity")
    keep = None if trace_route_ids is None else set(trace_route_ids)
    height = routes[0].height_m
    logger.info("mobility run: %d routes at %.1f m, fading %s", len(routes), height, fading_mode)

    def one(trajectory):
        return simulate_route(scene, trajectory, ho_cfg, rlf_cfg, seed, fading_mode, activity,
                              keep_trace=keep is None or trajectory.route_id in keep)

    outcomes = parallel_map(one, routes)
    events = sorted((e for o in outcomes for e in o.events), key=lambda e: (e.t_ms, e.route_id))
    result = MobilityResult(
        height_m=float(height),
        routes=len(routes),
        events=tuple(events),
        traces={o.route_id: o.trace for o in outcomes if o.trace is not None},
        handovers=sum(o.handovers for o in outcomes),
        handover_failures=sum(o.handover_failures for o in outcomes),
        rlfs=sum(o.rlfs for o in outcomes),
        reports=sum(o.reports for o in outcomes),
        threshold_reports=sum(o.threshold_reports for o in outcomes),
        km_flown=sum(o.km_flown for o in outcomes),
    )
    logger.info("mobility run done: %d handovers, %d failures, %d RLFs over %.1f km",
                result.handovers, result.handover_failures, result.rlfs, result.km_flown)
    return result


def random_routes(n_routes, length_m, speed_mps, height_m, sample_dt_ms, seed, extent_m):
    """Straight routes centred uniformly in a disc; route k's ground track ignores height"""
    routes = []
    for k in range(n_routes):
        rng = stream(seed, "route", k)
        radius = extent_m * math.sqrt(rng.random())
        angle = 2.0 * math.pi * rng.random()
        heading = 2.0 * math.pi * rng.random()
        cx, cy = radius * math.cos(angle), radius * math.sin(angle)
        hx, hy = 0.5 * length_m * math.cos(heading), 0.5 * length_m * math.sin(heading)
        routes.append(Trajectory(waypoints=((cx - hx, cy - hy), (cx + hx, cy + hy)), speed_mps=speed_mps,
                                 height_m=height_m, sample_dt_ms=sample_dt_ms, route_id=k))
    return routes


def serving_drop_db(trace, window_ms, until_ms=None):
    """Largest fall of the serving cell's filtered RSRP inside any window of window_ms"""
    t = trace.t_ms
    stop = t.size if until_ms is None else int(np.searchsorted(t, until_ms, side="right"))
    if stop < 2:
        return 0.0
    column = trace.cell_ids.index(int(trace.serving[0]))
    values = trace.rsrp_filtered_dbm[:stop, column]
    dt = float(t[1] - t[0])
    width = max(1, int(round(window_ms / dt)))
    best = 0.0
    for n in range(stop - 1):
        best = max(best, float(values[n] - values[n:n + width + 1].min()))
    return best


def _escape_score(outcome, min_rlf_ms, max_rlf_ms, drop_db, window_ms):
    """(score, drop); score is the drop when the outcome is a sidelobe escape ending in RLF, else None"""
    rlf_times = [e.t_ms for e in outcome.events if e.event == RLF_DECLARED]
    if not rlf_times:
        return None, 0.0
    t_rlf = rlf_times[0]
    drop = serving_drop_db(outcome.trace, window_ms, t_rlf)
    if not min_rlf_ms <= t_rlf <= max_rlf_ms:
        return None, drop
    early = [e for e in outcome.events if e.t_ms < t_rlf and e.event in (REPORT_TRIGGERED, HANDOVER_COMPLETE)]
    if early or drop < drop_db:
        return None, drop
    return drop, drop


def find_sidelobe_escape(scene, height_m, speed_mps, duration_ms, ho_cfg, rlf_cfg, sample_dt_ms=40.0,
                         activity=1.0, seed=1, spacing_m=50.0, headings=8, min_rlf_ms=4000.0,
                         max_rlf_ms=12000.0, drop_db=7.0, window_ms=4000.0):
    """Straight route that starts in a sidelobe patch and loses it before any A3 report.

    Candidates start at grid points of the fading-off association map where
    the serving site is not the nearest site and the link starts in sync;
    they are tried in grid order, headings counterclockwise from +x.
    """
    isd = scene.layout.isd_m
    n = int(round(2 * isd / spacing_m)) + 1
    grid = GridSpec.centered(isd, n)
    amap = coverage_map(scene, height_m, grid, fading_mode="off", seed=seed)
    gx, gy = grid.xy()
    xy = np.column_stack([gx.ravel(), gy.ravel()])
    nearest, _ = nearest_site(scene.layout, xy)
    patch = (amap.serving_site.ravel() != nearest) & (amap.rs_sinr_db.ravel() > rlf_cfg.qin_db)
    length = speed_mps * duration_ms / 1000.0
    best, best_drop = None, -1.0
    tried = 0
    for x, y in xy[patch]:
        for k in range(headings):
            heading = 2.0 * math.pi * k / headings
            candidate = Trajectory(waypoints=((x, y), (x + length * math.cos(heading), y + length * math.sin(heading))),
                                   speed_mps=speed_mps, height_m=height_m, sample_dt_ms=sample_dt_ms)
            outcome = simulate_route(scene, candidate, ho_cfg, rlf_cfg, seed, "off", activity)
            tried += 1
            score, drop = _escape_score(outcome, min_rlf_ms, max_rlf_ms, drop_db, window_ms)
            if score is not None:
                logger.info("sidelobe escape found after %d candidates: start (%.0f, %.0f), heading %d deg",
                            tried, x, y, round(math.degrees(heading)))
                return candidate
            if drop > best_drop:
                best, best_drop = candidate, drop
    if best is None:
        raise SimulationError("no candidate start point inside a sidelobe patch")
    logger.warning("no candidate met every escape criterion after %d tries; using largest drop %.1f dB",
                   tried, best_drop)
    return best
