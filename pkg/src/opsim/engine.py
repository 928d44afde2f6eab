"""Simulation engine: single runs, mode-paired runs, and seed sweeps.

One run is a deterministic function of (config, matrix set, seed): the
wall clock starts at the beginning of a uniformly drawn period, every
patient creates its messages at step 0, and each subsequent step advances
the clock, moves every mobile node, recomputes contacts, performs the
mode's exchanges, checks deliveries, and expires stale messages.

``run_paired_modes`` executes several routing modes over one shared
mobility/contact trace and internet-flag assignment, which makes the
delivered set of the d2d-only mode a subset of the hybrid one on every
seed. Sweeps fan runs out over axis values and seeds (optionally across
processes) and reduce to cross-seed reports in a fixed order.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import backend as backend_mod
from .backend import MODE_DTN, MODE_HYBRID, MODE_UPN, SimBackend
from .contact import ContactEvent
from .core import (
    ConfigError,
    MessageRecord,
    MobilityState,
    NodeClass,
    NodeRecord,
    RngStreams,
    RoutingMode,
    ScenarioConfig,
    build_population,
    require_valid,
)
from .metrics import RunMetrics, SweepRow, aggregate_seeds, run_metrics
from .mobility import (
    GROUP_NONWORKING,
    GROUP_WORKING,
    GROUPS,
    TransitionMatrixSet,
    default_matrix_set,
    group_for_class,
)

_MODE_CODES = {
    RoutingMode.DTN: MODE_DTN,
    RoutingMode.HYBRID: MODE_HYBRID,
    RoutingMode.UPN: MODE_UPN,
}

#: Default axis values for the two supported sweeps.
SWEEP_AXES = {
    "patients": [2, 4, 6, 8, 10],
    "participation": [round(i / 10, 1) for i in range(1, 11)],
}


@dataclass
class EngineOptions:
    """Model switches left open by the scenario schema.

    pois_relay promotes POI locations to store-and-forward relay nodes;
    caregivers_relay_all=False restricts each caregiver to carrying only
    its own patient's messages. Defaults match the evaluated model.
    """

    pois_relay: bool = False
    caregivers_relay_all: bool = True
    record_contacts: bool = False


@dataclass
class RunResult:
    """Everything observable from one run.

    ``wall_clock_seconds`` is measurement metadata and excluded from
    determinism comparisons and exports.
    """

    config_digest: str
    seed: int
    mode: RoutingMode
    outcomes: list[MessageRecord]
    contact_counts: list[int]
    wall_clock_seconds: float
    backend: str
    contact_trace: Optional[list[ContactEvent]] = None

    def metrics(self, step_minutes: int) -> RunMetrics:
        return run_metrics(self.outcomes, step_minutes)


@dataclass
class SweepResult:
    """Aggregated sweep output plus its provenance manifest."""

    axis_name: str
    values: list
    modes: list[RoutingMode]
    seeds: list[int]
    reports: dict  # (axis_value, RoutingMode) -> MetricsReport
    manifest: dict

    def rows(self) -> list[SweepRow]:
        return [
            SweepRow(mode, self.axis_name, value, self.reports[(value, mode)])
            for value in self.values
            for mode in self.modes
        ]


# ---------------------------------------------------------------------------
# Array mirror of the population
# ---------------------------------------------------------------------------


@dataclass
class _World:
    n: int
    home_x: np.ndarray
    home_y: np.ndarray
    work_x: np.ndarray  # -1 where absent
    work_y: np.ndarray
    ranges: np.ndarray
    state: np.ndarray  # int8; stationary nodes stay HOME over their fixed cell
    poi_of: np.ndarray  # int32 POI index while in POI state, else -1
    mobile_idx: np.ndarray
    group_code: np.ndarray  # per mobile node: 0 nonworking, 1 working
    radio_idx: np.ndarray
    poi_x: np.ndarray
    poi_y: np.ndarray
    dest_ids: np.ndarray
    capable_ids: np.ndarray
    is_dest: np.ndarray  # uint8 over all nodes
    upn_target: np.ndarray  # uint8: destination or internet-capable

    @classmethod
    def from_records(cls, records: Sequence[NodeRecord], pois_relay: bool) -> "_World":
        n = len(records)
        home = np.array([r.home_cell for r in records], dtype=np.int32)
        work = np.array(
            [r.work_cell if r.work_cell is not None else (-1, -1) for r in records],
            dtype=np.int32,
        )
        ranges = np.array([r.radio_range_cells for r in records], dtype=np.float64)
        mobile_idx = np.array([r.id for r in records if r.mobile], dtype=np.int64)
        group_code = np.array(
            [
                0 if group_for_class(records[i].node_class) == GROUP_NONWORKING else 1
                for i in mobile_idx
            ],
            dtype=np.int64,
        )
        radio_idx = np.array(
            [
                r.id
                for r in records
                if pois_relay or r.node_class is not NodeClass.POI
            ],
            dtype=np.int64,
        )
        pois = [r for r in records if r.node_class is NodeClass.POI]
        dest_ids = np.array(
            [r.id for r in records if r.node_class is NodeClass.DESTINATION],
            dtype=np.int32,
        )
        capable_ids = np.array(
            [r.id for r in records if r.internet_capable], dtype=np.int32
        )
        is_dest = np.zeros(n, dtype=np.uint8)
        is_dest[dest_ids] = 1
        upn_target = np.zeros(n, dtype=np.uint8)
        upn_target[capable_ids] = 1
        upn_target[dest_ids] = 1
        return cls(
            n=n,
            home_x=home[:, 0].copy() if n else np.empty(0, np.int32),
            home_y=home[:, 1].copy() if n else np.empty(0, np.int32),
            work_x=work[:, 0].copy() if n else np.empty(0, np.int32),
            work_y=work[:, 1].copy() if n else np.empty(0, np.int32),
            ranges=ranges,
            state=np.zeros(n, dtype=np.int8),
            poi_of=np.full(n, -1, dtype=np.int32),
            mobile_idx=mobile_idx,
            group_code=group_code,
            radio_idx=radio_idx,
            poi_x=np.array([p.home_cell[0] for p in pois], dtype=np.int32),
            poi_y=np.array([p.home_cell[1] for p in pois], dtype=np.int32),
            dest_ids=dest_ids,
            capable_ids=capable_ids,
            is_dest=is_dest,
            upn_target=upn_target,
        )

    def positions(self) -> tuple[np.ndarray, np.ndarray]:
        px = self.home_x.copy()
        py = self.home_y.copy()
        at_work = self.state == int(MobilityState.WORK)
        px[at_work] = self.work_x[at_work]
        py[at_work] = self.work_y[at_work]
        at_poi = self.state == int(MobilityState.POI)
        if at_poi.any():
            px[at_poi] = self.poi_x[self.poi_of[at_poi]]
            py[at_poi] = self.poi_y[self.poi_of[at_poi]]
        return px, py


def _cdf_tables(
    matrices: TransitionMatrixSet,
) -> tuple[np.ndarray, np.ndarray, dict[int, int]]:
    """Cumulative rows indexed [group, period slot, state, next]."""
    slots = {k: s for s, k in enumerate(matrices.schedule.indices)}
    n_slots = len(slots)
    row_cdf = np.zeros((2, n_slots, 3, 3))
    init_cdf = np.zeros((2, n_slots, 3))
    for k, slot in slots.items():
        for g_code, group in enumerate(GROUPS):
            entry = matrices.entry(k, group)
            row_cdf[g_code, slot] = entry.row_cdf
            init_cdf[g_code, slot] = entry.initial_cdf
    return row_cdf, init_cdf, slots


def _check_matrices(
    config: ScenarioConfig,
    records: Sequence[NodeRecord],
    matrices: TransitionMatrixSet,
) -> None:
    if not matrices.normalized:
        raise ConfigError("matrix set must be normalized before simulation")
    gaps = matrices.missing()
    if gaps:
        raise ConfigError(f"matrix set incomplete: missing {gaps}")

    def reachable(group: str, state: MobilityState) -> bool:
        # Closure over every period's matrix from every period's initial
        # support (a run may start in any period).
        seen: set[int] = set()
        for k in matrices.schedule.indices:
            e = matrices.entry(k, group)
            seen.update(int(i) for i in np.nonzero(e.initial > 0)[0])
        frontier = set(seen)
        while frontier:
            nxt: set[int] = set()
            for k in matrices.schedule.indices:
                m = matrices.entry(k, group).matrix
                for s in frontier:
                    nxt.update(int(i) for i in np.nonzero(m[s] > 0)[0])
            frontier = nxt - seen
            seen |= frontier
        return int(state) in seen

    if reachable(GROUP_NONWORKING, MobilityState.WORK):
        raise ConfigError(
            "matrix set allows non-working classes to enter the work state, "
            "but those nodes have no work cell"
        )
    workers_without_cell = any(
        r.mobile and group_for_class(r.node_class) == GROUP_WORKING and r.work_cell is None
        for r in records
    )
    if workers_without_cell and reachable(GROUP_WORKING, MobilityState.WORK):
        raise ConfigError(
            "working-class nodes lack work cells (no POIs or destinations) "
            "but the matrix set can send them to work"
        )
    if config.n_pois == 0 and any(r.mobile for r in records):
        if reachable(GROUP_NONWORKING, MobilityState.POI) or reachable(
            GROUP_WORKING, MobilityState.POI
        ):
            raise ConfigError("matrix set can enter the POI state but n_pois is 0")


# ---------------------------------------------------------------------------
# Single runs
# ---------------------------------------------------------------------------


class _ModeState:
    """Carrier bitmasks and delivery bookkeeping for one routing mode."""

    __slots__ = ("mode", "code", "chunks", "active", "delivered_step", "expired")

    def __init__(self, mode: RoutingMode, n_nodes: int, n_messages: int,
                 origin_of: np.ndarray):
        self.mode = mode
        self.code = _MODE_CODES[mode]
        self.chunks: list[np.ndarray] = []
        self.active: list[int] = []
        for lo in range(0, n_messages, 64):
            width = min(64, n_messages - lo)
            chunk = np.zeros(n_nodes, dtype=np.uint64)
            for m in range(lo, lo + width):
                chunk[origin_of[m]] |= np.uint64(1 << (m - lo))
            self.chunks.append(chunk)
            self.active.append((1 << width) - 1)
        self.delivered_step = np.full(n_messages, -1, dtype=np.int64)
        self.expired = np.zeros(n_messages, dtype=bool)


def run_paired_modes(
    config: ScenarioConfig,
    modes: Sequence[RoutingMode],
    matrices: Optional[TransitionMatrixSet] = None,
    options: Optional[EngineOptions] = None,
    backend: Optional[SimBackend] = None,
) -> list[RunResult]:
    """Run several routing modes over one shared trace and flag assignment."""
    t_start = time.perf_counter()
    require_valid(config)
    if matrices is None:
        matrices = default_matrix_set()
    options = options or EngineOptions()
    sim = backend or backend_mod.active()
    modes = [m if isinstance(m, RoutingMode) else RoutingMode(m) for m in modes]

    streams = RngStreams.from_seed(config.seed)
    start_slot = int(streams.period_start.integers(len(matrices.schedule.periods)))
    records = build_population(config, streams)
    _check_matrices(config, records, matrices)

    world = _World.from_records(records, options.pois_relay)
    row_cdf, init_cdf, slots = _cdf_tables(matrices)
    schedule = matrices.schedule
    clock0 = schedule.periods[start_slot].start_minute

    n_mobile = len(world.mobile_idx)
    n_msg = config.n_messages
    origin_of = np.array(
        [m // config.messages_per_patient for m in range(n_msg)], dtype=np.int64
    )

    # Initial states from the starting period's vectors, then initial placement.
    if n_mobile:
        start_idx = schedule.periods[start_slot].index
        u = streams.mobility.random(n_mobile)
        cum = init_cdf[world.group_code, slots[start_idx]]
        nxt = np.minimum((cum <= u[:, None]).sum(axis=1), 2).astype(np.int8)
        world.state[world.mobile_idx] = nxt
        entering = world.mobile_idx[nxt == int(MobilityState.POI)]
        _assign_pois(world, entering, streams.poi_choice, config.n_pois)

    eligible = _eligibility_chunks(records, origin_of, n_msg, world.n,
                                   options.caregivers_relay_all)
    origin_bits = _origin_chunks(origin_of, n_msg, world.n)
    states = [_ModeState(mode, world.n, n_msg, origin_of) for mode in modes]

    ttl = config.ttl_steps
    contact_counts: list[int] = []
    trace: Optional[list[ContactEvent]] = [] if options.record_contacts else None

    for t in range(1, config.duration_steps + 1):
        minute = (clock0 + t * config.step_minutes) % (24 * 60)
        k = schedule.period_at(minute)
        if n_mobile:
            u = streams.mobility.random(n_mobile)
            prev = world.state[world.mobile_idx]
            cum = row_cdf[world.group_code, slots[k], prev]
            nxt = np.minimum((cum <= u[:, None]).sum(axis=1), 2).astype(np.int8)
            entering = world.mobile_idx[
                (nxt == int(MobilityState.POI)) & (prev != int(MobilityState.POI))
            ]
            _assign_pois(world, entering, streams.poi_choice, config.n_pois)
            world.poi_of[
                world.mobile_idx[
                    (nxt != int(MobilityState.POI)) & (prev == int(MobilityState.POI))
                ]
            ] = -1
            world.state[world.mobile_idx] = nxt

        px, py = world.positions()
        ra, rb = sim.contact_pairs(
            px[world.radio_idx].astype(np.int32),
            py[world.radio_idx].astype(np.int32),
            world.ranges[world.radio_idx],
        )
        pair_a = world.radio_idx[ra].astype(np.int32)
        pair_b = world.radio_idx[rb].astype(np.int32)
        contact_counts.append(len(pair_a))
        if trace is not None:
            trace.extend(
                ContactEvent(t, int(i), int(j)) for i, j in zip(pair_a, pair_b)
            )

        for st in states:
            for ci, chunk in enumerate(st.chunks):
                if st.active[ci] == 0:
                    continue
                delivered = sim.route_step(
                    pair_a, pair_b, chunk, st.active[ci], eligible[ci],
                    world.dest_ids, world.capable_ids, world.is_dest,
                    world.upn_target, origin_bits[ci], st.code,
                )
                while delivered:
                    low = delivered & -delivered
                    st.delivered_step[ci * 64 + low.bit_length() - 1] = t
                    st.active[ci] &= ~low
                    delivered &= ~low
                if t > ttl and st.active[ci]:
                    leftover = st.active[ci]
                    while leftover:
                        low = leftover & -leftover
                        st.expired[ci * 64 + low.bit_length() - 1] = True
                        leftover &= ~low
                    st.active[ci] = 0

    digest = config.digest()
    elapsed = time.perf_counter() - t_start
    results = []
    for st in states:
        outcomes = _collect_outcomes(st, origin_of, ttl)
        results.append(
            RunResult(
                config_digest=digest,
                seed=config.seed,
                mode=st.mode,
                outcomes=outcomes,
                contact_counts=contact_counts,
                wall_clock_seconds=elapsed,
                backend=sim.name,
                contact_trace=trace,
            )
        )
    return results


def run_scenario(
    config: ScenarioConfig,
    matrices: Optional[TransitionMatrixSet] = None,
    options: Optional[EngineOptions] = None,
    backend: Optional[SimBackend] = None,
) -> RunResult:
    """Run the configured mode once."""
    return run_paired_modes(config, [config.mode], matrices, options, backend)[0]


def _assign_pois(world: _World, entering: np.ndarray,
                 poi_rng: np.random.Generator, n_pois: int) -> None:
    if len(entering) == 0:
        return
    u = poi_rng.random(len(entering))
    world.poi_of[entering] = np.minimum(
        (u * n_pois).astype(np.int64), n_pois - 1
    ).astype(np.int32)


def _eligibility_chunks(records, origin_of, n_msg, n_nodes, caregivers_relay_all):
    chunks = []
    for lo in range(0, n_msg, 64):
        width = min(64, n_msg - lo)
        full = (1 << width) - 1
        chunk = np.full(n_nodes, full, dtype=np.uint64)
        if not caregivers_relay_all:
            for rec in records:
                if rec.node_class is NodeClass.CAREGIVER:
                    mask = 0
                    for m in range(lo, lo + width):
                        if origin_of[m] == rec.linked_patient:
                            mask |= 1 << (m - lo)
                    chunk[rec.id] = mask
        chunks.append(chunk)
    return chunks


def _origin_chunks(origin_of, n_msg, n_nodes):
    chunks = []
    for lo in range(0, n_msg, 64):
        width = min(64, n_msg - lo)
        chunk = np.zeros(n_nodes, dtype=np.uint64)
        for m in range(lo, lo + width):
            chunk[origin_of[m]] |= np.uint64(1 << (m - lo))
        chunks.append(chunk)
    return chunks


def _collect_outcomes(st: _ModeState, origin_of, ttl) -> list[MessageRecord]:
    out = []
    for m, origin in enumerate(origin_of):
        ci, bit = divmod(m, 64)
        carriers = set(
            np.nonzero((st.chunks[ci] >> np.uint64(bit)) & np.uint64(1))[0].tolist()
        )
        delivered = st.delivered_step[m] >= 0
        rec = MessageRecord(
            id=m,
            origin_patient=int(origin),
            created_step=0,
            ttl_steps=ttl,
            carriers=carriers or {int(origin)},
            delivered=bool(delivered),
            delivered_step=int(st.delivered_step[m]) if delivered else None,
            expired=bool(st.expired[m]),
        )
        out.append(rec)
    return out


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def config_for_axis(base: ScenarioConfig, axis: str, value, seed: int) -> ScenarioConfig:
    """Scenario for one sweep cell; caregiver count tracks patient count."""
    if axis == "patients":
        return replace(base, n_patients=int(value), n_caregivers=int(value), seed=seed)
    if axis == "participation":
        return replace(base, participation_ratio=float(value), seed=seed)
    raise ConfigError(f"unknown sweep axis {axis!r}; expected patients or participation")


def _sweep_job(args) -> list[tuple[str, RunMetrics]]:
    config, modes, matrices, options = args
    results = run_paired_modes(config, modes, matrices, options)
    return [(r.mode.value, r.metrics(config.step_minutes)) for r in results]


def run_sweep(
    base_config: ScenarioConfig,
    axis: str,
    seeds: Sequence[int],
    modes: Sequence[RoutingMode],
    matrices: Optional[TransitionMatrixSet] = None,
    options: Optional[EngineOptions] = None,
    values: Optional[Sequence] = None,
    threads: int = 1,
) -> SweepResult:
    """Cartesian product of axis values x seeds, modes paired per cell.

    Results are reduced in (axis value, seed, mode) order regardless of
    worker scheduling, so the output is independent of ``threads``.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected patients or participation")
    values = list(SWEEP_AXES[axis]) if values is None else list(values)
    modes = [m if isinstance(m, RoutingMode) else RoutingMode(m) for m in modes]
    seeds = list(seeds)
    if matrices is None:
        matrices = default_matrix_set()

    jobs = [
        (config_for_axis(base_config, axis, value, seed), modes, matrices, options)
        for value in values
        for seed in seeds
    ]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(_sweep_job, jobs, chunksize=8))
    else:
        outputs = [_sweep_job(job) for job in jobs]

    per_cell: dict[tuple, list[RunMetrics]] = {
        (value, mode): [] for value in values for mode in modes
    }
    for (value, seed), result in zip(
        ((v, s) for v in values for s in seeds), outputs
    ):
        for mode_value, rm in result:
            per_cell[(value, RoutingMode(mode_value))].append(rm)

    reports = {
        key: aggregate_seeds(metrics_list) for key, metrics_list in per_cell.items()
    }
    manifest = {
        "axis": axis,
        "axis_values": values,
        "modes": [m.value for m in modes],
        "seeds": {"first": seeds[0], "last": seeds[-1], "count": len(seeds)}
        if seeds
        else {"count": 0},
        "base_config_digest": base_config.digest(),
        "matrix_digest": matrices.digest(),
    }
    return SweepResult(
        axis_name=axis,
        values=values,
        modes=modes,
        seeds=seeds,
        reports=reports,
        manifest=manifest,
    )
