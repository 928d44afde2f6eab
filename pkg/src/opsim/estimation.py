"""Estimate period transition matrices from timestamped activity logs.

Input is a CSV of routine activities (individual_id, group, start_hhmm,
end_hhmm, state). Each individual's day is discretized into fixed intervals
(state sampled at each interval's start), transition counts are pooled per
(period, group) over all individuals, and rows are normalized. The output
uses the same JSON schema the mobility module loads, so estimated sets are
drop-in replacements for the bundled defaults.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import MobilityState
from .mobility import (
    GROUPS,
    MatrixEntry,
    MatrixError,
    PeriodSchedule,
    TransitionMatrixSet,
    parse_hhmm,
)

MINUTES_PER_DAY = 24 * 60

_STATE_NAMES = {
    "home": MobilityState.HOME,
    "work": MobilityState.WORK,
    "poi": MobilityState.POI,
}


class ActivityLogError(ValueError):
    """An activity log is malformed (parse errors carry line numbers)."""


@dataclass
class ActivityRecord:
    """One contiguous activity: [start, end) minutes within the day."""

    start_minute: int
    end_minute: int
    state: MobilityState


@dataclass
class ActivityLog:
    """Ordered, gap-free activity records for one individual."""

    individual_id: str
    group: str
    records: list[ActivityRecord] = field(default_factory=list)

    def validate(self) -> None:
        if self.group not in GROUPS:
            raise ActivityLogError(
                f"individual {self.individual_id}: unknown group {self.group!r}"
            )
        if not self.records:
            raise ActivityLogError(f"individual {self.individual_id}: empty log")
        for rec in self.records:
            if not 0 <= rec.start_minute < rec.end_minute <= MINUTES_PER_DAY:
                raise ActivityLogError(
                    f"individual {self.individual_id}: bad record interval "
                    f"{_fmt(rec.start_minute)}-{_fmt(rec.end_minute)}"
                )
        for a, b in zip(self.records, self.records[1:]):
            if b.start_minute < a.end_minute:
                raise ActivityLogError(
                    f"individual {self.individual_id}: overlapping records at "
                    f"{_fmt(b.start_minute)}"
                )
            if b.start_minute > a.end_minute:
                raise ActivityLogError(
                    f"individual {self.individual_id}: coverage gap "
                    f"{_fmt(a.end_minute)}-{_fmt(b.start_minute)}"
                )


@dataclass
class StateSequence:
    """Discretized day: one state per interval starting at first_interval."""

    individual_id: str
    group: str
    first_interval: int
    states: list[MobilityState]


def _fmt(minute: int) -> str:
    return f"{minute // 60:02d}:{minute % 60:02d}"


def parse_state(text: str) -> MobilityState:
    try:
        return _STATE_NAMES[str(text).strip().lower()]
    except KeyError:
        raise ActivityLogError(
            f"unknown state {text!r}; expected home, work, or poi"
        ) from None


def read_activity_csv(path) -> list[ActivityLog]:
    """Parse and validate an activity-log CSV, keeping row order per individual.

    Overlaps and gaps are reported with the offending line number.
    """
    logs: dict[str, ActivityLog] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"individual_id", "group", "start_hhmm", "end_hhmm", "state"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ActivityLogError(
                f"activity CSV must have columns {sorted(required)}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                start = parse_hhmm(row["start_hhmm"])
                end = parse_hhmm(row["end_hhmm"])
                state = parse_state(row["state"])
            except (MatrixError, ActivityLogError) as exc:
                raise ActivityLogError(f"line {lineno}: {exc}") from None
            if end == 0:
                end = MINUTES_PER_DAY  # 24:00 end-of-day
            log = logs.setdefault(
                row["individual_id"],
                ActivityLog(row["individual_id"], row["group"].strip().lower()),
            )
            if log.records:
                prev_end = log.records[-1].end_minute
                if start < prev_end:
                    raise ActivityLogError(
                        f"line {lineno}: individual {log.individual_id} has "
                        f"overlapping records at {_fmt(start)}"
                    )
                if start > prev_end:
                    raise ActivityLogError(
                        f"line {lineno}: individual {log.individual_id} has a "
                        f"coverage gap {_fmt(prev_end)}-{_fmt(start)}"
                    )
            log.records.append(ActivityRecord(start, end, state))
    result = list(logs.values())
    for log in result:
        log.validate()
    return result


def discretize(log: ActivityLog, interval_minutes: int) -> StateSequence:
    """One state per interval, sampled at the interval's start.

    Intervals are the fixed day grid (00:00, 00:30, ... at 30-minute
    intervals); the sequence covers every interval whose start lies inside
    the log's observation window. Gaps were rejected during validation.
    """
    if interval_minutes <= 0 or MINUTES_PER_DAY % interval_minutes != 0:
        raise ActivityLogError(
            f"interval_minutes must divide 24 h, got {interval_minutes}"
        )
    log.validate()
    window_start = log.records[0].start_minute
    window_end = log.records[-1].end_minute
    first = -(-window_start // interval_minutes)  # ceil division
    states = []
    rec_idx = 0
    for interval in range(first, window_end // interval_minutes + 1):
        t = interval * interval_minutes
        if t >= window_end:
            break
        while log.records[rec_idx].end_minute <= t:
            rec_idx += 1
        states.append(log.records[rec_idx].state)
    if not states:
        raise ActivityLogError(
            f"individual {log.individual_id}: window "
            f"{_fmt(window_start)}-{_fmt(window_end)} covers no interval start"
        )
    return StateSequence(log.individual_id, log.group, first, states)


def estimate_matrices(
    sequences: Sequence[StateSequence],
    schedule: PeriodSchedule,
    interval_minutes: int = 30,
    method: str = "pooled",
) -> tuple[TransitionMatrixSet, list[str]]:
    """Estimate per-(period, group) matrices and initial vectors.

    ``pooled`` (default) sums transition counts over all individuals before
    normalizing, weighting individuals by how much data they contribute;
    ``averaged`` row-normalizes each individual's counts first and averages
    the resulting distributions, weighting individuals equally. The two
    agree on balanced data and diverge when record lengths differ.

    Transitions are attributed to the period containing the source
    interval's start. Initial vectors come from state occupancy at each
    period's first interval. Source states never observed in a period fall
    back to an identity row with a warning; groups with no data at all are
    left absent with a warning.
    """
    if method not in ("pooled", "averaged"):
        raise ActivityLogError(f"unknown estimation method {method!r}")
    warnings: list[str] = []
    keys = [(k, g) for k in schedule.indices for g in GROUPS]
    counts = {key: np.zeros((3, 3)) for key in keys}
    pooled_rows = {key: np.zeros((3, 3)) for key in keys}  # averaged method
    row_weights = {key: np.zeros(3) for key in keys}
    initial_counts = {key: np.zeros(3) for key in keys}
    occupancy = {key: np.zeros(3) for key in keys}

    period_starts = {
        p.index: p.start_minute // interval_minutes for p in schedule.periods
    }

    for seq in sequences:
        if seq.group not in GROUPS:
            raise ActivityLogError(f"unknown group {seq.group!r}")
        per_individual = {key: np.zeros((3, 3)) for key in keys} if method == "averaged" else None
        for offset, state in enumerate(seq.states):
            interval = seq.first_interval + offset
            minute = (interval * interval_minutes) % MINUTES_PER_DAY
            k = schedule.period_at(minute)
            occupancy[(k, seq.group)][int(state)] += 1
            if interval % (MINUTES_PER_DAY // interval_minutes) == period_starts[k]:
                initial_counts[(k, seq.group)][int(state)] += 1
            if offset + 1 < len(seq.states):
                nxt = seq.states[offset + 1]
                counts[(k, seq.group)][int(state), int(nxt)] += 1
                if per_individual is not None:
                    per_individual[(k, seq.group)][int(state), int(nxt)] += 1
        if per_individual is not None:
            for key, mat in per_individual.items():
                sums = mat.sum(axis=1)
                for i in range(3):
                    if sums[i] > 0:
                        pooled_rows[key][i] += mat[i] / sums[i]
                        row_weights[key][i] += 1

    entries: dict[tuple[int, str], MatrixEntry] = {}
    for key in keys:
        k, group = key
        if counts[key].sum() == 0 and occupancy[key].sum() == 0:
            warnings.append(f"period {k} {group}: no observations, entry omitted")
            continue
        matrix = np.zeros((3, 3))
        for i in range(3):
            if method == "pooled":
                row_total = counts[key][i].sum()
                row = counts[key][i] / row_total if row_total > 0 else None
            else:
                weight = row_weights[key][i]
                row = pooled_rows[key][i] / weight if weight > 0 else None
            if row is None:
                matrix[i, i] = 1.0
                warnings.append(
                    f"period {k} {group}: no transitions out of "
                    f"{MobilityState(i).name.lower()}, identity row used"
                )
            else:
                matrix[i] = row
        init_total = initial_counts[key].sum()
        if init_total > 0:
            initial = initial_counts[key] / init_total
        else:
            initial = occupancy[key] / occupancy[key].sum()
            warnings.append(
                f"period {k} {group}: no period-start observations, "
                "overall occupancy used for the initial vector"
            )
        entries[key] = MatrixEntry(initial=initial, matrix=matrix)

    return TransitionMatrixSet(schedule, entries, normalized=True), warnings
