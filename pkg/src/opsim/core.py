"""Domain types, scenario configuration, and population construction.

Everything downstream (mobility, contacts, routing, the engine) works on the
vocabulary defined here: node roles on a square cell grid, per-run random
streams, message records, and the scenario parameter set with its validation
rules.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from enum import Enum, IntEnum
from typing import Optional

import numpy as np

Cell = tuple[int, int]


class ConfigError(ValueError):
    """A scenario configuration (or config file) cannot be used."""


class PopulationError(RuntimeError):
    """A population cannot be placed on the configured grid."""


class NodeClass(Enum):
    """Roles a network participant can take."""

    PATIENT = "patient"
    CAREGIVER = "caregiver"
    CLINICAL_STAFF = "clinical_staff"
    INTERMEDIARY_EMPLOYED = "intermediary_employed"
    INTERMEDIARY_UNEMPLOYED = "intermediary_unemployed"
    POI = "poi"
    DESTINATION = "destination"


#: Classes that move between home/work/POI cells each step.
MOBILE_CLASSES = frozenset(
    {
        NodeClass.PATIENT,
        NodeClass.CAREGIVER,
        NodeClass.CLINICAL_STAFF,
        NodeClass.INTERMEDIARY_EMPLOYED,
        NodeClass.INTERMEDIARY_UNEMPLOYED,
    }
)

#: Classes that never change cell and have no transition matrices.
STATIONARY_CLASSES = frozenset({NodeClass.POI, NodeClass.DESTINATION})

#: Classes eligible for the sampled internet-capability flag.
INTERNET_ELIGIBLE_CLASSES = frozenset(
    {
        NodeClass.CLINICAL_STAFF,
        NodeClass.INTERMEDIARY_EMPLOYED,
        NodeClass.INTERMEDIARY_UNEMPLOYED,
    }
)


class ConnectivityState(Enum):
    """Whether a node can reach the back-end network right now."""

    INTERNET_AVAILABLE = "internet"
    D2D_ONLY = "d2d"


class MobilityState(IntEnum):
    """Where a mobile node currently is; STATIONARY is the fixed pseudo-state
    reported for POI and destination nodes."""

    HOME = 0
    WORK = 1
    POI = 2
    STATIONARY = 3


class RoutingMode(Enum):
    """Network configuration under evaluation.

    DTN:    device-to-device relaying only; no node can reach the internet.
    HYBRID: device-to-device relaying plus instant delivery once any carrier
            is internet-capable.
    UPN:    no relaying; only the originating patient's direct encounters
            with the destination or an internet-capable node deliver.
    """

    DTN = "dtn"
    HYBRID = "hybrid"
    UPN = "upn"


@dataclass
class GridSpec:
    """Square simulation area divided into side_cells x side_cells cells."""

    side_cells: int = 820
    cell_size_ft: float = 10.0

    @property
    def total_cells(self) -> int:
        return self.side_cells * self.side_cells


@dataclass
class NodeRecord:
    """One network participant.

    ``current_state``/``current_cell`` are mutable and owned by a single
    simulation run; everything else is fixed at construction.
    """

    id: int
    node_class: NodeClass
    home_cell: Cell
    work_cell: Optional[Cell] = None
    internet_capable: bool = False
    radio_range_cells: float = 1.0
    current_state: MobilityState = MobilityState.HOME
    current_cell: Cell = (0, 0)
    linked_patient: Optional[int] = None

    @property
    def mobile(self) -> bool:
        return self.node_class in MOBILE_CLASSES

    @property
    def connectivity(self) -> ConnectivityState:
        if self.internet_capable:
            return ConnectivityState.INTERNET_AVAILABLE
        return ConnectivityState.D2D_ONLY


@dataclass
class MessageRecord:
    """One patient message and its carrier set.

    ``carriers`` only ever grows; the originating patient is always a member.
    An expired message is permanently excluded from exchange and counts as
    undelivered in all metrics.
    """

    id: int
    origin_patient: int
    created_step: int
    ttl_steps: int
    carriers: set[int] = field(default_factory=set)
    delivered: bool = False
    delivered_step: Optional[int] = None
    expired: bool = False

    def __post_init__(self) -> None:
        self.carriers.add(self.origin_patient)

    @property
    def active(self) -> bool:
        return not self.delivered and not self.expired

    def latency_minutes(self, step_minutes: int) -> Optional[int]:
        if not self.delivered:
            return None
        return (self.delivered_step - self.created_step) * step_minutes


# Rural-town defaults: ~400 adults on a 2.409 sq mi grid of 10 ft cells,
# 25 gathering places, one clinic with two clinical staff, 93.5% employment,
# 20% of participating adults with intermittent internet access, Bluetooth-5
# class radio ranges (mean 600 ft, sd 200 ft, expressed in cells).
@dataclass
class ScenarioConfig:
    """Full parameter set for one simulation scenario."""

    mode: RoutingMode = RoutingMode.HYBRID
    seed: int = 0
    duration_steps: int = 48
    step_minutes: int = 30
    grid: GridSpec = field(default_factory=GridSpec)
    n_patients: int = 10
    n_caregivers: int = 10
    n_clinical_staff: int = 2
    n_destinations: int = 1
    n_pois: int = 25
    participation_ratio: float = 0.3
    internet_ratio: float = 0.2
    employed_ratio: float = 0.935
    adult_population: int = 400
    range_mean_cells: float = 60.0
    range_sd_cells: float = 20.0
    caregiver_colocated: bool = True
    messages_per_patient: int = 1

    # -- derived counts ----------------------------------------------------

    @property
    def n_intermediaries(self) -> int:
        return round_half_up(self.participation_ratio * self.adult_population)

    @property
    def n_employed(self) -> int:
        return round_half_up(self.employed_ratio * self.n_intermediaries)

    @property
    def n_unemployed(self) -> int:
        return self.n_intermediaries - self.n_employed

    @property
    def internet_flag_count(self) -> int:
        return round_half_up(
            self.internet_ratio * (self.n_intermediaries + self.n_clinical_staff)
        )

    @property
    def ttl_steps(self) -> int:
        # Messages stay valid for 24 hours regardless of simulated horizon.
        return round_half_up(24 * 60 / self.step_minutes)

    @property
    def n_messages(self) -> int:
        return self.n_patients * self.messages_per_patient

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "mode":
                value = value.value
            elif f.name == "grid":
                value = {"side_cells": value.side_cells, "cell_size_ft": value.cell_size_ft}
            out[f.name] = value
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = dict(data)
        if "mode" in kwargs:
            kwargs["mode"] = parse_mode(kwargs["mode"])
        if "grid" in kwargs:
            grid = kwargs["grid"]
            if not isinstance(grid, dict):
                raise ConfigError("grid must be an object")
            bad = sorted(set(grid) - {"side_cells", "cell_size_ft"})
            if bad:
                raise ConfigError(f"unknown grid keys: {', '.join(bad)}")
            kwargs["grid"] = GridSpec(
                side_cells=_typed("grid.side_cells", grid.get("side_cells", 820), int),
                cell_size_ft=_typed("grid.cell_size_ft", grid.get("cell_size_ft", 10.0), float),
            )
        for f in fields(cls):
            if f.name in ("mode", "grid") or f.name not in kwargs:
                continue
            kwargs[f.name] = _typed(f.name, kwargs[f.name], _FIELD_KINDS[f.name])
        return cls(**kwargs)

    def digest(self) -> str:
        """Stable content hash of the configuration."""
        blob = json.dumps(self.to_json_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_FIELD_KINDS = {
    "seed": int,
    "duration_steps": int,
    "step_minutes": int,
    "n_patients": int,
    "n_caregivers": int,
    "n_clinical_staff": int,
    "n_destinations": int,
    "n_pois": int,
    "adult_population": int,
    "messages_per_patient": int,
    "participation_ratio": float,
    "internet_ratio": float,
    "employed_ratio": float,
    "range_mean_cells": float,
    "range_sd_cells": float,
    "caregiver_colocated": bool,
}


def _typed(name: str, value, kind):
    """Check a JSON value's type (ints may stand in for floats, never bools)."""
    if kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    raise ConfigError(f"config field {name} expects {kind.__name__}, got {value!r}")


def parse_mode(value) -> RoutingMode:
    if isinstance(value, RoutingMode):
        return value
    try:
        return RoutingMode(str(value).strip().lower())
    except ValueError:
        raise ConfigError(
            f"unknown mode {value!r}; expected one of dtn, hybrid, upn"
        ) from None


def round_half_up(x: float) -> int:
    """Round with ties away from zero toward +inf (deterministic count rounding)."""
    return int(math.floor(x + 0.5))


# ---------------------------------------------------------------------------
# Named random streams
# ---------------------------------------------------------------------------

#: Fixed ids for the per-run random streams. Draw order within one stream is
#: part of the reproducibility contract; draws in one stream never affect
#: another.
STREAM_IDS = {
    "placement": 0,
    "ranges": 1,
    "flags": 2,
    "mobility": 3,
    "period_start": 4,
    "poi_choice": 5,
}


@dataclass
class RngStreams:
    """Independent named generators derived from one master seed."""

    placement: np.random.Generator
    ranges: np.random.Generator
    flags: np.random.Generator
    mobility: np.random.Generator
    period_start: np.random.Generator
    poi_choice: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        return cls(**{name: stream_rng(seed, name) for name in STREAM_IDS})


def stream_rng(seed: int, name: str) -> np.random.Generator:
    """Generator for one named stream of a master seed."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(STREAM_IDS[name],))
    return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass
class Violation:
    """One validation finding; errors block a run, warnings do not."""

    severity: str  # "error" | "warning"
    message: str

    @property
    def is_error(self) -> bool:
        return self.severity == "error"


def validate_config(config: ScenarioConfig) -> list[Violation]:
    """Check a scenario configuration.

    Returns an empty list iff the configuration is usable with no caveats.
    Violations are returned, never raised.
    """
    out: list[Violation] = []

    def err(msg: str) -> None:
        out.append(Violation("error", msg))

    def warn(msg: str) -> None:
        out.append(Violation("warning", msg))

    if config.grid.side_cells < 1:
        err(f"grid.side_cells must be positive, got {config.grid.side_cells}")
    if config.grid.cell_size_ft <= 0:
        err(f"grid.cell_size_ft must be positive, got {config.grid.cell_size_ft}")
    if config.step_minutes < 1:
        err(f"step_minutes must be a positive integer, got {config.step_minutes}")
    if config.duration_steps < 0:
        err(f"duration_steps must be non-negative, got {config.duration_steps}")
    for name in ("n_patients", "n_caregivers", "n_clinical_staff", "n_destinations",
                 "n_pois", "adult_population", "messages_per_patient"):
        if getattr(config, name) < 0:
            err(f"{name} must be non-negative, got {getattr(config, name)}")
    if not 0.0 < config.participation_ratio <= 1.0:
        err(f"participation_ratio must lie in (0, 1], got {config.participation_ratio}")
    if not 0.0 <= config.internet_ratio <= 1.0:
        err(f"internet_ratio must lie in [0, 1], got {config.internet_ratio}")
    if not 0.0 <= config.employed_ratio <= 1.0:
        err(f"employed_ratio must lie in [0, 1], got {config.employed_ratio}")
    if config.range_mean_cells <= 0:
        err(f"range_mean_cells must be positive, got {config.range_mean_cells}")
    if config.range_sd_cells < 0:
        err(f"range_sd_cells must be non-negative, got {config.range_sd_cells}")

    if out:  # derived counts below are meaningless on malformed input
        return out

    n_i = config.n_intermediaries
    if n_i < 1:
        err(
            "derived intermediary count must be at least 1, got "
            f"{n_i} (participation_ratio x adult_population)"
        )

    # Population ordering: destinations <= staff <= patients <= caregivers
    # <= intermediaries, with intermediaries expected to dominate caregivers.
    chain = [
        ("n_destinations", config.n_destinations),
        ("n_clinical_staff", config.n_clinical_staff),
        ("n_patients", config.n_patients),
        ("n_caregivers", config.n_caregivers),
        ("intermediaries", n_i),
    ]
    for (name_a, a), (name_b, b) in zip(chain, chain[1:]):
        if a > b:
            err(f"population ordering violated: {name_a}={a} exceeds {name_b}={b}")
    if not out and n_i <= 2 * config.n_caregivers:
        warn(
            f"intermediary count |I|={n_i} is not well above caregivers "
            f"(2x|C|={2 * config.n_caregivers}); relay capacity may be unrealistic"
        )

    n_stationary = config.n_pois + config.n_destinations
    if n_stationary > config.grid.total_cells:
        err(
            f"grid too small: {n_stationary} stationary nodes need distinct "
            f"cells but the grid has only {config.grid.total_cells}"
        )

    return out


def require_valid(config: ScenarioConfig) -> None:
    """Raise ConfigError on the first validation error (warnings pass)."""
    errors = [v for v in validate_config(config) if v.is_error]
    if errors:
        raise ConfigError("; ".join(v.message for v in errors))


# ---------------------------------------------------------------------------
# Population construction
# ---------------------------------------------------------------------------


def build_population(config: ScenarioConfig, streams: RngStreams) -> list[NodeRecord]:
    """Build the full node list for one run.

    Record order (= id order): patients, caregivers, clinical staff, employed
    intermediaries, unemployed intermediaries, POIs, destinations. Homes are
    uniform over the grid; POIs and destinations occupy distinct cells; each
    employed intermediary works at a uniformly chosen POI and each staff
    member at a destination. Radio ranges are normal(mean, sd) truncated
    below at one cell. Exactly round(internet_ratio x (intermediaries +
    staff)) of those nodes are flagged internet-capable; destinations always
    are, patients and caregivers never.
    """
    require_valid(config)
    side = config.grid.side_cells
    place = streams.placement

    n_stationary = config.n_pois + config.n_destinations
    if n_stationary > config.grid.total_cells:
        raise PopulationError("grid too small for distinct stationary cells")

    used: set[Cell] = set()

    def draw_cell() -> Cell:
        return (int(place.integers(0, side)), int(place.integers(0, side)))

    def draw_distinct_cell() -> Cell:
        while True:
            cell = draw_cell()
            if cell not in used:
                used.add(cell)
                return cell

    poi_cells = [draw_distinct_cell() for _ in range(config.n_pois)]
    dest_cells = [draw_distinct_cell() for _ in range(config.n_destinations)]

    records: list[NodeRecord] = []

    def add(node_class: NodeClass, home: Cell, work: Optional[Cell] = None,
            linked: Optional[int] = None) -> NodeRecord:
        state = (
            MobilityState.STATIONARY
            if node_class in STATIONARY_CLASSES
            else MobilityState.HOME
        )
        rec = NodeRecord(
            id=len(records),
            node_class=node_class,
            home_cell=home,
            work_cell=work,
            current_state=state,
            current_cell=home,
            linked_patient=linked,
        )
        records.append(rec)
        return rec

    patients = [add(NodeClass.PATIENT, draw_cell()) for _ in range(config.n_patients)]
    for j in range(config.n_caregivers):
        linked = patients[j % len(patients)].id if patients else None
        if config.caregiver_colocated and linked is not None:
            home = records[linked].home_cell
        else:
            home = draw_cell()
        add(NodeClass.CAREGIVER, home, linked=linked)
    for j in range(config.n_clinical_staff):
        work = dest_cells[j % len(dest_cells)] if dest_cells else None
        add(NodeClass.CLINICAL_STAFF, draw_cell(), work=work)
    for _ in range(config.n_employed):
        work = poi_cells[int(place.integers(0, config.n_pois))] if poi_cells else None
        add(NodeClass.INTERMEDIARY_EMPLOYED, draw_cell(), work=work)
    for _ in range(config.n_unemployed):
        add(NodeClass.INTERMEDIARY_UNEMPLOYED, draw_cell())
    for cell in poi_cells:
        add(NodeClass.POI, cell)
    for cell in dest_cells:
        add(NodeClass.DESTINATION, cell)

    ranges = streams.ranges.normal(
        config.range_mean_cells, config.range_sd_cells, size=len(records)
    )
    for rec, r in zip(records, ranges):
        rec.radio_range_cells = float(max(1.0, r))

    eligible = [r.id for r in records if r.node_class in INTERNET_ELIGIBLE_CLASSES]
    n_flagged = config.internet_flag_count
    order = streams.flags.permutation(len(eligible))
    for k in order[:n_flagged]:
        records[eligible[int(k)]].internet_capable = True
    for rec in records:
        if rec.node_class is NodeClass.DESTINATION:
            rec.internet_capable = True

    return records
