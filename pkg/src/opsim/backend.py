"""Kernel backend selection: compiled extension with a pure fallback.

The compiled module (``opsim._kernels``) is preferred when importable; the
pure backend reproduces its results exactly (NumPy brute-force contact
search plus a Python routing pass). Set ``OPSIM_BACKEND=pure`` or
``OPSIM_BACKEND=compiled`` to force a choice.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .contact import pairs_brute_force

try:
    from . import _kernels

    HAVE_COMPILED = True
except ImportError:  # extension not built; fall back to pure Python
    _kernels = None
    HAVE_COMPILED = False

#: Routing-mode codes shared with the kernels.
MODE_DTN = 0
MODE_HYBRID = 1
MODE_UPN = 2


@dataclass(frozen=True)
class SimBackend:
    """One implementation of the per-step hot loops."""

    name: str
    contact_pairs: Callable
    route_step: Callable


def _route_step_py(pa, pb, carriers, active, eligible, dest_ids, capable_ids,
                   is_dest, upn_target, origin_bits, mode):
    """Pure mirror of the compiled routing pass (see _kernels.route_step)."""
    a = pa.tolist()
    b = pb.tolist()
    act = int(active)
    delivered = 0
    if mode != MODE_UPN:
        c = carriers.tolist()
        elig = eligible.tolist()
        for k in range(len(a)):
            i = a[k]
            j = b[k]
            u = (c[i] | c[j]) & act
            if u:
                c[i] |= u & elig[i]
                c[j] |= u & elig[j]
        carriers[:] = c
        dest_flags = is_dest.tolist()
        for d in dest_ids.tolist():
            delivered |= c[d]
        for k in range(len(a)):
            i = a[k]
            j = b[k]
            if dest_flags[j]:
                delivered |= c[i]
            if dest_flags[i]:
                delivered |= c[j]
        if mode == MODE_HYBRID:
            for q in capable_ids.tolist():
                delivered |= c[q]
    else:
        targets = upn_target.tolist()
        origins = origin_bits.tolist()
        for k in range(len(a)):
            i = a[k]
            j = b[k]
            if targets[j]:
                delivered |= origins[i]
            if targets[i]:
                delivered |= origins[j]
    return delivered & act


PURE_BACKEND = SimBackend(
    name="pure",
    contact_pairs=pairs_brute_force,
    route_step=_route_step_py,
)

if HAVE_COMPILED:
    def _route_step_c(pa, pb, carriers, active, eligible, dest_ids, capable_ids,
                      is_dest, upn_target, origin_bits, mode):
        return int(
            _kernels.route_step(
                pa, pb, carriers, np.uint64(active), eligible, dest_ids,
                capable_ids, is_dest, upn_target, origin_bits, mode,
            )
        )

    COMPILED_BACKEND = SimBackend(
        name="compiled",
        contact_pairs=_kernels.grid_pairs,
        route_step=_route_step_c,
    )
else:
    COMPILED_BACKEND = None


def get_backend(name: str) -> SimBackend:
    if name == "pure":
        return PURE_BACKEND
    if name == "compiled":
        if COMPILED_BACKEND is None:
            raise RuntimeError(
                "compiled backend requested but opsim._kernels is not built"
            )
        return COMPILED_BACKEND
    raise ValueError(f"unknown backend {name!r}; expected 'compiled' or 'pure'")


def _select_default() -> SimBackend:
    forced = os.environ.get("OPSIM_BACKEND", "").strip().lower()
    if forced:
        return get_backend(forced)
    return COMPILED_BACKEND if COMPILED_BACKEND is not None else PURE_BACKEND


_ACTIVE = _select_default()


def active() -> SimBackend:
    """The backend selected at import time."""
    return _ACTIVE
