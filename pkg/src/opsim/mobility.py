"""Period-switched Markov mobility over the states home / work / POI.

Each mobile node follows a three-state discrete-time chain whose transition
matrix depends on the wall-clock period and on the node's classification
group: employed intermediaries and clinical staff commute ("working"), while
patients, caregivers and unemployed intermediaries never occupy the work
state ("nonworking"). A set of default per-period matrices and initial state
vectors is bundled; estimated sets in the same JSON schema are drop-in
replacements.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    Cell,
    MobilityState,
    NodeClass,
    NodeRecord,
    STATIONARY_CLASSES,
)

GROUP_NONWORKING = "nonworking"  # patients, caregivers, unemployed intermediaries
GROUP_WORKING = "working"  # employed intermediaries, clinical staff
GROUPS = (GROUP_NONWORKING, GROUP_WORKING)

_CLASS_GROUP = {
    NodeClass.PATIENT: GROUP_NONWORKING,
    NodeClass.CAREGIVER: GROUP_NONWORKING,
    NodeClass.INTERMEDIARY_UNEMPLOYED: GROUP_NONWORKING,
    NodeClass.INTERMEDIARY_EMPLOYED: GROUP_WORKING,
    NodeClass.CLINICAL_STAFF: GROUP_WORKING,
}

#: Row/column order of every matrix and vector in this module.
STATE_ORDER = (MobilityState.HOME, MobilityState.WORK, MobilityState.POI)


class MatrixError(ValueError):
    """A transition-matrix set is malformed."""


def group_for_class(node_class: NodeClass) -> str:
    try:
        return _CLASS_GROUP[node_class]
    except KeyError:
        raise MatrixError(f"{node_class} has no mobility group") from None


# ---------------------------------------------------------------------------
# Period schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Period:
    """Wall-clock interval [start, end) with its own matrices; may wrap
    past midnight."""

    index: int
    start_minute: int
    end_minute: int

    def contains(self, minute_of_day: int) -> bool:
        if self.start_minute == self.end_minute:  # full-day period
            return True
        if self.start_minute < self.end_minute:
            return self.start_minute <= minute_of_day < self.end_minute
        return minute_of_day >= self.start_minute or minute_of_day < self.end_minute

    @property
    def length_minutes(self) -> int:
        return (self.end_minute - self.start_minute) % (24 * 60) or 24 * 60


@dataclass(frozen=True)
class PeriodSchedule:
    """Ordered periods that exactly partition the 24-hour day."""

    periods: tuple[Period, ...]

    def __post_init__(self) -> None:
        if not self.periods:
            raise MatrixError("schedule needs at least one period")
        total = sum(p.length_minutes for p in self.periods)
        if total != 24 * 60:
            raise MatrixError(f"periods cover {total} minutes, expected 1440")
        for p, q in zip(self.periods, self.periods[1:]):
            if p.end_minute != q.start_minute:
                raise MatrixError(
                    f"period {p.index} ends at {p.end_minute} but period "
                    f"{q.index} starts at {q.start_minute}"
                )
        if self.periods[-1].end_minute != self.periods[0].start_minute:
            raise MatrixError("schedule does not close the 24-hour cycle")

    def period_at(self, minute_of_day: int) -> int:
        m = minute_of_day % (24 * 60)
        for p in self.periods:
            if p.contains(m):
                return p.index
        raise MatrixError(f"no period covers minute {m}")  # unreachable

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(p.index for p in self.periods)

    def to_json_list(self) -> list[dict]:
        return [
            {
                "period": p.index,
                "start": _fmt_hhmm(p.start_minute),
                "end": _fmt_hhmm(p.end_minute),
            }
            for p in self.periods
        ]

    @classmethod
    def from_json_list(cls, data: Sequence[dict]) -> "PeriodSchedule":
        periods = tuple(
            Period(int(d["period"]), parse_hhmm(d["start"]), parse_hhmm(d["end"]))
            for d in data
        )
        return cls(periods)


def parse_hhmm(text: str) -> int:
    """Clock time 'HH:MM' -> minute of day; '24:00' maps to 0."""
    parts = str(text).split(":")
    if len(parts) != 2:
        raise MatrixError(f"bad clock time {text!r}, expected HH:MM")
    try:
        h, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise MatrixError(f"bad clock time {text!r}, expected HH:MM") from None
    if not (0 <= h <= 24 and 0 <= m < 60) or (h == 24 and m != 0):
        raise MatrixError(f"clock time {text!r} out of range")
    return (h * 60 + m) % (24 * 60)


def _fmt_hhmm(minute: int) -> str:
    return f"{minute // 60:02d}:{minute % 60:02d}"


#: Default day structure: overnight, morning, midday, evening.
DEFAULT_SCHEDULE = PeriodSchedule(
    (
        Period(1, parse_hhmm("19:00"), parse_hhmm("06:30")),
        Period(2, parse_hhmm("06:30"), parse_hhmm("09:30")),
        Period(3, parse_hhmm("09:30"), parse_hhmm("16:30")),
        Period(4, parse_hhmm("16:30"), parse_hhmm("19:00")),
    )
)


# ---------------------------------------------------------------------------
# Transition-matrix sets
# ---------------------------------------------------------------------------


@dataclass
class MatrixEntry:
    """Initial state vector and transition matrix for one (period, group)."""

    initial: np.ndarray  # shape (3,)
    matrix: np.ndarray  # shape (3, 3), rows = current state
    _initial_cdf: Optional[np.ndarray] = field(default=None, repr=False)
    _row_cdf: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def initial_cdf(self) -> np.ndarray:
        if self._initial_cdf is None:
            self._initial_cdf = np.cumsum(self.initial)
        return self._initial_cdf

    @property
    def row_cdf(self) -> np.ndarray:
        if self._row_cdf is None:
            self._row_cdf = np.cumsum(self.matrix, axis=1)
        return self._row_cdf


@dataclass
class TransitionMatrixSet:
    """Per-period, per-group matrices plus the schedule they apply to."""

    schedule: PeriodSchedule
    entries: dict[tuple[int, str], MatrixEntry]
    normalized: bool = False

    def entry(self, period_index: int, group: str) -> MatrixEntry:
        try:
            return self.entries[(period_index, group)]
        except KeyError:
            raise MatrixError(
                f"no matrices for period {period_index}, group {group!r}"
            ) from None

    def missing(self, groups: Sequence[str] = GROUPS) -> list[tuple[int, str]]:
        return [
            (k, g)
            for k in self.schedule.indices
            for g in groups
            if (k, g) not in self.entries
        ]

    def to_json_dict(self) -> dict:
        matrices: dict[str, dict] = {}
        for (k, group), e in sorted(self.entries.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            matrices.setdefault(str(k), {})[group] = {
                "initial": [float(v) for v in e.initial],
                "matrix": [[float(v) for v in row] for row in e.matrix],
            }
        return {"schedule": self.schedule.to_json_list(), "matrices": matrices}

    @classmethod
    def from_json_dict(cls, data: dict) -> "TransitionMatrixSet":
        try:
            schedule = PeriodSchedule.from_json_list(data["schedule"])
            raw = data["matrices"]
        except (KeyError, TypeError) as exc:
            raise MatrixError(f"matrix document missing field: {exc}") from None
        entries = {}
        for k_str, groups in raw.items():
            for group, payload in groups.items():
                if group not in GROUPS:
                    raise MatrixError(f"unknown group {group!r}")
                entries[(int(k_str), group)] = MatrixEntry(
                    initial=np.asarray(payload["initial"], dtype=float),
                    matrix=np.asarray(payload["matrix"], dtype=float),
                )
        return cls(schedule=schedule, entries=entries)

    def digest(self) -> str:
        blob = json.dumps(self.to_json_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


#: Tolerated drift of a row/vector sum from 1 before a warning is emitted.
SUM_WARN_TOLERANCE = 0.05


def normalize_matrix_set(raw: TransitionMatrixSet) -> tuple[TransitionMatrixSet, list[str]]:
    """Row-normalize every matrix and initial vector.

    Each row/vector is divided by its sum; sums off by more than
    SUM_WARN_TOLERANCE produce a warning naming the entry. Negative entries
    or all-zero rows are rejected.
    """
    warnings: list[str] = []
    entries: dict[tuple[int, str], MatrixEntry] = {}
    for (k, group), e in raw.entries.items():
        initial = np.asarray(e.initial, dtype=float)
        matrix = np.asarray(e.matrix, dtype=float)
        if initial.shape != (3,) or matrix.shape != (3, 3):
            raise MatrixError(f"period {k} {group}: expected 3-vector and 3x3 matrix")
        if (initial < 0).any() or (matrix < 0).any():
            raise MatrixError(f"period {k} {group}: negative probability entry")

        def scaled(vec: np.ndarray, label: str) -> np.ndarray:
            total = float(vec.sum())
            if total <= 0.0:
                raise MatrixError(f"period {k} {group}: {label} sums to zero")
            if abs(total - 1.0) > SUM_WARN_TOLERANCE:
                warnings.append(
                    f"period {k} {group} {label}: sum {total:g} normalized to 1"
                )
            return vec / total

        norm_initial = scaled(initial, "initial vector")
        norm_matrix = np.vstack(
            [scaled(matrix[i], f"row {STATE_ORDER[i].name.lower()}") for i in range(3)]
        )
        entries[(k, group)] = MatrixEntry(initial=norm_initial, matrix=norm_matrix)
    return TransitionMatrixSet(raw.schedule, entries, normalized=True), warnings


# Default matrices and initial vectors (home, work, poi). The "printed"
# variant keeps the shipped evening working-group work row whose raw values
# sum to 1.702 and leans heavily toward POI after normalization; "corrected"
# replaces its POI entry 0.78 with 0.078, the likelier intended value.
_DEFAULT_RAW: dict[int, dict[str, tuple[tuple, tuple]]] = {
    1: {
        GROUP_NONWORKING: (
            (0.85, 0.0, 0.015),
            ((0.94, 0.0, 0.064), (0.0, 1.0, 0.0), (0.37, 0.0, 0.63)),
        ),
        GROUP_WORKING: (
            (0.70, 0.079, 0.22),
            ((0.85, 0.019, 0.13), (0.14, 0.81, 0.043), (0.39, 0.32, 0.58)),
        ),
    },
    2: {
        GROUP_NONWORKING: (
            (0.93, 0.0, 0.070),
            ((0.97, 0.0, 0.032), (0.0, 1.0, 0.0), (0.59, 0.0, 0.41)),
        ),
        GROUP_WORKING: (
            (0.71, 0.16, 0.13),
            ((0.86, 0.079, 0.061), (0.17, 0.61, 0.21), (0.51, 0.18, 0.31)),
        ),
    },
    3: {
        GROUP_NONWORKING: (
            (0.76, 0.0, 0.24),
            ((0.89, 0.0, 0.11), (0.0, 1.0, 0.0), (0.36, 0.0, 0.64)),
        ),
        GROUP_WORKING: (
            (0.50, 0.33, 0.13),
            ((0.80, 0.083, 0.12), (0.063, 0.90, 0.037), (0.30, 0.057, 0.64)),
        ),
    },
    4: {
        GROUP_NONWORKING: (
            (0.77, 0.0, 0.23),
            ((0.91, 0.0, 0.086), (0.0, 1.0, 0.0), (0.30, 0.0, 0.70)),
        ),
        GROUP_WORKING: (
            (0.48, 0.20, 0.32),
            ((0.80, 0.027, 0.17), (0.042, 0.88, 0.78), (0.28, 0.058, 0.66)),
        ),
    },
}

MATRIX_VARIANTS = ("printed", "corrected")


def default_matrix_set_raw(variant: str = "printed") -> TransitionMatrixSet:
    """Bundled default matrices exactly as shipped (not normalized)."""
    if variant not in MATRIX_VARIANTS:
        raise MatrixError(f"unknown matrix variant {variant!r}")
    entries = {}
    for k, groups in _DEFAULT_RAW.items():
        for group, (initial, matrix) in groups.items():
            m = np.asarray(matrix, dtype=float).copy()
            if variant == "corrected" and k == 4 and group == GROUP_WORKING:
                m[1, 2] = 0.078
            entries[(k, group)] = MatrixEntry(
                initial=np.asarray(initial, dtype=float), matrix=m
            )
    return TransitionMatrixSet(DEFAULT_SCHEDULE, entries)


def default_matrix_set(variant: str = "printed") -> TransitionMatrixSet:
    """Bundled defaults, normalized and ready for simulation."""
    normalized, _ = normalize_matrix_set(default_matrix_set_raw(variant))
    return normalized


def load_matrix_file(path) -> tuple[TransitionMatrixSet, list[str]]:
    """Read a matrix-set JSON document and normalize it."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MatrixError(f"malformed matrix JSON: {exc}") from None
    return normalize_matrix_set(TransitionMatrixSet.from_json_dict(data))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_from_cdf(cdf: np.ndarray, u: float) -> int:
    """Inverse-CDF draw: the index i with cdf[i-1] <= u < cdf[i].

    u comes from [0, 1), so zero-probability states are never selected.
    """
    for i in range(len(cdf)):
        if u < cdf[i]:
            return i
    return len(cdf) - 1  # guard against cumulative rounding below 1


def initial_state(
    node_class: NodeClass,
    period_index: int,
    matrices: TransitionMatrixSet,
    rng: np.random.Generator,
) -> MobilityState:
    """Draw a node's starting state from its group's initial vector."""
    if node_class in STATIONARY_CLASSES:
        return MobilityState.STATIONARY
    entry = matrices.entry(period_index, group_for_class(node_class))
    u = float(rng.random())
    return MobilityState(sample_from_cdf(entry.initial_cdf, u))


def step_state(
    current_state: MobilityState,
    node_class: NodeClass,
    period_index: int,
    matrices: TransitionMatrixSet,
    rng: np.random.Generator,
) -> MobilityState:
    """Advance one node one step using the period's matrix row."""
    if node_class in STATIONARY_CLASSES:
        return MobilityState.STATIONARY
    if current_state not in (MobilityState.HOME, MobilityState.WORK, MobilityState.POI):
        raise MatrixError(f"cannot step from state {current_state}")
    entry = matrices.entry(period_index, group_for_class(node_class))
    u = float(rng.random())
    return MobilityState(sample_from_cdf(entry.row_cdf[int(current_state)], u))


def place_node(
    node: NodeRecord,
    new_state: MobilityState,
    poi_cells: Sequence[Cell],
    rng: np.random.Generator,
) -> Cell:
    """Cell for a node entering ``new_state``.

    Must be called while ``node.current_state`` still holds the previous
    state: a node re-entering POI draws a fresh uniform POI, while one that
    stays in POI keeps its current cell.
    """
    if new_state is MobilityState.STATIONARY:
        return node.current_cell
    if new_state is MobilityState.HOME:
        return node.home_cell
    if new_state is MobilityState.WORK:
        if node.work_cell is None:
            raise MatrixError(f"node {node.id} sent to work but has no work cell")
        return node.work_cell
    # POI
    if node.current_state is MobilityState.POI:
        return node.current_cell
    if not poi_cells:
        raise MatrixError("POI state requested but the scenario has no POIs")
    u = float(rng.random())
    idx = min(int(u * len(poi_cells)), len(poi_cells) - 1)
    return poi_cells[idx]
