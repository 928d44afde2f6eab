"""Device-to-device contact detection under the circular-range model.

Two nodes are in contact when the Euclidean distance between their cell
centers (in cell units) does not exceed the smaller of their two radio
ranges, so every detected contact supports a transfer in both directions.
POI nodes are pure locations and carry no radio unless explicitly promoted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import Cell, NodeClass, NodeRecord


@dataclass(frozen=True)
class ContactEvent:
    """Unordered node pair in mutual radio range at one step (node_a < node_b)."""

    step: int
    node_a: int
    node_b: int


def in_contact(cell_a: Cell, cell_b: Cell, range_a: float, range_b: float) -> bool:
    """True iff the two cells are within both nodes' radio ranges."""
    dx = cell_a[0] - cell_b[0]
    dy = cell_a[1] - cell_b[1]
    r = min(range_a, range_b)
    return dx * dx + dy * dy <= r * r


def pairs_brute_force(
    xs: np.ndarray, ys: np.ndarray, ranges: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs reference search, vectorized over the full distance matrix.

    Returns index pairs (a, b) with a < b, sorted by (a, b). This is the
    oracle the accelerated searches are checked against.
    """
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    ranges = np.asarray(ranges, dtype=np.float64)
    n = len(xs)
    if n < 2:
        empty = np.empty(0, dtype=np.int32)
        return empty, empty.copy()
    dx = xs[:, None] - xs[None, :]
    dy = ys[:, None] - ys[None, :]
    d2 = dx * dx + dy * dy
    rmin = np.minimum(ranges[:, None], ranges[None, :])
    hit = np.triu(d2 <= rmin * rmin, k=1)
    a, b = np.nonzero(hit)  # row-major order == sorted by (a, b)
    return a.astype(np.int32), b.astype(np.int32)


def pairs_grid(
    xs: np.ndarray, ys: np.ndarray, ranges: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Grid-bucketed search; exact same pairs as pairs_brute_force.

    Buckets have the side of the largest range, so any qualifying pair sits
    in the same or an adjacent bucket.
    """
    n = len(xs)
    if n < 2:
        empty = np.empty(0, dtype=np.int32)
        return empty, empty.copy()
    x = [int(v) for v in xs]
    y = [int(v) for v in ys]
    r = [float(v) for v in ranges]
    size = max(1.0, max(r))
    buckets: dict[tuple[int, int], list[int]] = {}
    keys = []
    for i in range(n):
        key = (int(x[i] // size), int(y[i] // size))
        keys.append(key)
        buckets.setdefault(key, []).append(i)
    out_a: list[int] = []
    out_b: list[int] = []
    for i in range(n):
        bx, by = keys[i]
        xi, yi, ri = x[i], y[i], r[i]
        for nx in (bx - 1, bx, bx + 1):
            for ny in (by - 1, by, by + 1):
                for j in buckets.get((nx, ny), ()):
                    if j <= i:
                        continue
                    rm = ri if ri < r[j] else r[j]
                    dx = xi - x[j]
                    dy = yi - y[j]
                    if dx * dx + dy * dy <= rm * rm:
                        out_a.append(i)
                        out_b.append(j)
    a = np.asarray(out_a, dtype=np.int32)
    b = np.asarray(out_b, dtype=np.int32)
    order = np.lexsort((b, a))
    return a[order], b[order]


def radio_nodes(nodes: Sequence[NodeRecord], include_pois: bool = False) -> list[NodeRecord]:
    """Nodes that take part in contact detection (POIs only when promoted)."""
    return [
        n for n in nodes if include_pois or n.node_class is not NodeClass.POI
    ]


def contacts_at_step(
    nodes: Sequence[NodeRecord], step: int, include_pois: bool = False
) -> list[ContactEvent]:
    """All contacts between placed nodes at one step, ordered by node ids."""
    from . import backend  # late import: backend selection happens once

    active = radio_nodes(nodes, include_pois)
    xs = np.array([n.current_cell[0] for n in active], dtype=np.int32)
    ys = np.array([n.current_cell[1] for n in active], dtype=np.int32)
    rs = np.array([n.radio_range_cells for n in active], dtype=np.float64)
    a, b = backend.active().contact_pairs(xs, ys, rs)
    ids = [n.id for n in active]
    return [ContactEvent(step, ids[int(i)], ids[int(j)]) for i, j in zip(a, b)]


def write_contact_trace(path, events: Iterable[ContactEvent]) -> None:
    """Contact trace as CSV (step, node_a, node_b) for external tools."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "node_a", "node_b"])
        for ev in events:
            writer.writerow([ev.step, ev.node_a, ev.node_b])
