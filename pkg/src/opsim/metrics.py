"""Delivery and latency statistics, per run and aggregated across seeds.

Latencies are stored in minutes and cover delivered messages only; a run
(or seed set) with no deliveries reports absent latency fields rather than
zero. Cross-seed spread is reported as the standard error of the mean.
Scalar statistics use plain Python arithmetic so values recomputed from the
exported CSVs match the in-memory reports exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import MessageRecord, RoutingMode


@dataclass
class RunMetrics:
    """Statistics of a single run."""

    n_generated: int
    n_delivered: int
    delivery_probability: Optional[float]  # absent when nothing was generated
    mean_latency_minutes: Optional[float]  # absent when nothing was delivered
    max_latency_minutes: Optional[float]


@dataclass
class MetricsReport:
    """Cross-seed aggregate with the per-seed vectors it was reduced from.

    Seeds with zero deliveries contribute to the delivery aggregate but are
    excluded from the latency aggregate (their latency is undefined).
    """

    n_seeds: int
    n_generated: int
    n_delivered: int
    delivery_per_seed: list[float]
    delivery_mean: Optional[float]
    delivery_sem: Optional[float]
    latency_mean_per_seed: list[float]
    latency_mean_minutes: Optional[float]
    latency_sem_minutes: Optional[float]
    max_latency_minutes: Optional[float]

    @property
    def latency_mean_hours(self) -> Optional[float]:
        if self.latency_mean_minutes is None:
            return None
        return self.latency_mean_minutes / 60.0

    @property
    def latency_sem_hours(self) -> Optional[float]:
        if self.latency_sem_minutes is None:
            return None
        return self.latency_sem_minutes / 60.0

    @property
    def max_latency_hours(self) -> Optional[float]:
        if self.max_latency_minutes is None:
            return None
        return self.max_latency_minutes / 60.0


def delivery_probability(outcomes: Sequence[MessageRecord]) -> float:
    """Fraction of generated messages delivered within their TTL."""
    if not outcomes:
        raise ValueError("delivery probability is undefined with no messages")
    return sum(1 for m in outcomes if m.delivered) / len(outcomes)


def latency_stats(
    outcomes: Sequence[MessageRecord], step_minutes: int
) -> Optional[tuple[float, float]]:
    """(mean, max) latency in minutes over delivered messages, or None."""
    latencies = [
        (m.delivered_step - m.created_step) * step_minutes
        for m in outcomes
        if m.delivered
    ]
    if not latencies:
        return None
    return sum(latencies) / len(latencies), float(max(latencies))


def run_metrics(outcomes: Sequence[MessageRecord], step_minutes: int) -> RunMetrics:
    n = len(outcomes)
    delivered = sum(1 for m in outcomes if m.delivered)
    stats = latency_stats(outcomes, step_minutes) if delivered else None
    return RunMetrics(
        n_generated=n,
        n_delivered=delivered,
        delivery_probability=(delivered / n) if n else None,
        mean_latency_minutes=stats[0] if stats else None,
        max_latency_minutes=stats[1] if stats else None,
    )


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _sem(values: Sequence[float]) -> Optional[float]:
    """Sample standard deviation over sqrt(n); needs at least two values."""
    n = len(values)
    if n < 2:
        return None
    mu = _mean(values)
    var = sum((v - mu) ** 2 for v in values) / (n - 1)
    return math.sqrt(var) / math.sqrt(n)


def aggregate_seeds(per_seed: Sequence[RunMetrics]) -> MetricsReport:
    """Reduce per-seed run metrics to cross-seed means and SEMs."""
    deliveries = [r.delivery_probability for r in per_seed
                  if r.delivery_probability is not None]
    latencies = [r.mean_latency_minutes for r in per_seed
                 if r.mean_latency_minutes is not None]
    maxima = [r.max_latency_minutes for r in per_seed
              if r.max_latency_minutes is not None]
    return MetricsReport(
        n_seeds=len(per_seed),
        n_generated=sum(r.n_generated for r in per_seed),
        n_delivered=sum(r.n_delivered for r in per_seed),
        delivery_per_seed=deliveries,
        delivery_mean=_mean(deliveries) if deliveries else None,
        delivery_sem=_sem(deliveries),
        latency_mean_per_seed=latencies,
        latency_mean_minutes=_mean(latencies) if latencies else None,
        latency_sem_minutes=_sem(latencies),
        max_latency_minutes=max(maxima) if maxima else None,
    )


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

OUTCOME_COLUMNS = (
    "message_id",
    "origin",
    "created_step",
    "delivered",
    "delivered_step",
    "latency_minutes",
    "mode",
    "seed",
)

SWEEP_COLUMNS = (
    "mode",
    "axis_name",
    "axis_value",
    "n_seeds",
    "delivery_mean",
    "delivery_sem",
    "latency_mean_h",
    "latency_sem_h",
    "latency_max_h",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_outcomes_csv(
    path,
    outcomes: Sequence[MessageRecord],
    mode: RoutingMode,
    seed: int,
    step_minutes: int,
) -> None:
    """Per-message outcome rows for one run."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OUTCOME_COLUMNS)
        for m in outcomes:
            latency = m.latency_minutes(step_minutes)
            writer.writerow(
                [
                    m.id,
                    m.origin_patient,
                    m.created_step,
                    _fmt(m.delivered),
                    "" if m.delivered_step is None else m.delivered_step,
                    "" if latency is None else latency,
                    mode.value,
                    seed,
                ]
            )


def read_outcomes_csv(path) -> list[dict]:
    """Outcome rows parsed back into dicts with typed fields."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                {
                    "message_id": int(row["message_id"]),
                    "origin": int(row["origin"]),
                    "created_step": int(row["created_step"]),
                    "delivered": row["delivered"] == "true",
                    "delivered_step": int(row["delivered_step"]) if row["delivered_step"] else None,
                    "latency_minutes": int(row["latency_minutes"]) if row["latency_minutes"] else None,
                    "mode": row["mode"],
                    "seed": int(row["seed"]),
                }
            )
    return rows


@dataclass
class SweepRow:
    """One (mode, axis value) cell of a sweep summary."""

    mode: RoutingMode
    axis_name: str
    axis_value: float
    report: MetricsReport

    def as_csv_row(self) -> list[str]:
        r = self.report
        return [
            self.mode.value,
            self.axis_name,
            _fmt(self.axis_value),
            _fmt(r.n_seeds),
            _fmt(r.delivery_mean),
            _fmt(r.delivery_sem),
            _fmt(r.latency_mean_hours),
            _fmt(r.latency_sem_hours),
            _fmt(r.max_latency_hours),
        ]


def write_sweep_csv(path, rows: Sequence[SweepRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv_row())


def report_json_dict(report: RunMetrics, mode: RoutingMode, seed: int) -> dict:
    """JSON payload for a single run's metrics file."""
    mean_h = (
        None
        if report.mean_latency_minutes is None
        else report.mean_latency_minutes / 60.0
    )
    max_h = (
        None
        if report.max_latency_minutes is None
        else report.max_latency_minutes / 60.0
    )
    return {
        "mode": mode.value,
        "seed": seed,
        "n_generated": report.n_generated,
        "n_delivered": report.n_delivered,
        "delivery_probability": report.delivery_probability,
        "mean_latency_minutes": report.mean_latency_minutes,
        "max_latency_minutes": report.max_latency_minutes,
        "mean_latency_hours": mean_h,
        "max_latency_hours": max_h,
    }
