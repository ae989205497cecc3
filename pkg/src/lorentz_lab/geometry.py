"""Periodic scatterer configurations and the finite-horizon decision.

The unit cell is [0,1)^2; every disk is repeated over all integer translates.
Horizon finiteness is decided exactly: a table has an infinite free flight
iff some coprime lattice direction carries an open corridor, and only
finitely many directions can (see `corridor_check`).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import OverlapError

# Interval endpoints in the coverage sweep are compared with this absolute
# tolerance; any gap wider than it is reported (prefer a false "infinite"
# over a false "finite").
ENDPOINT_TOL = 1e-12


@dataclass(frozen=True)
class Disk:
    """One scatterer: an open disk with center in the unit cell.

    Radius must stay below 1/2 or the disk would overlap its own periodic
    translate.
    """

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        cx, cy = self.center
        if not (math.isfinite(cx) and math.isfinite(cy) and math.isfinite(self.radius)):
            raise ValueError("disk parameters must be finite")
        if not (0.0 < self.radius < 0.5):
            raise ValueError(f"radius must lie in (0, 0.5), got {self.radius}")
        if not (0.0 <= cx < 1.0 and 0.0 <= cy < 1.0):
            raise ValueError(f"center must lie in [0,1)^2, got {self.center}")

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius


@dataclass(frozen=True)
class Corridor:
    """An open strip of positive width avoiding every obstacle."""

    direction: tuple[int, int]
    gap_width: float


@dataclass(frozen=True)
class FiniteHorizonReport:
    finite: bool
    directions_checked: int
    max_free_path_bound: float | None
    open_corridor: Corridor | None

    def __post_init__(self):
        if self.finite == (self.open_corridor is not None):
            raise ValueError("finite must hold exactly when no corridor was found")


def validate_disjoint(disks: Sequence[Disk]) -> float:
    """Minimum surface-to-surface gap over all pairs of periodic translates.

    Only translates with Chebyshev norm <= 1 matter: centers live in the unit
    cell and radii are < 1/2, so the nearest representative of any center
    difference is found among those shifts.

    Raises OverlapError (1-based indices) if any gap is nonpositive.
    """
    if not disks:
        raise ValueError("disk list is empty")
    min_gap = math.inf
    arg = None
    for i, a in enumerate(disks):
        for j, b in enumerate(disks):
            if j < i:
                continue
            for lx in (-1, 0, 1):
                for ly in (-1, 0, 1):
                    if i == j and lx == 0 and ly == 0:
                        continue
                    dx = a.center[0] - b.center[0] - lx
                    dy = a.center[1] - b.center[1] - ly
                    gap = math.hypot(dx, dy) - (a.radius + b.radius)
                    if gap < min_gap:
                        min_gap = gap
                        arg = (i + 1, j + 1, (lx, ly))
    if min_gap <= 0.0:
        raise OverlapError(arg[0], arg[1], arg[2], min_gap)
    return min_gap


def _coprime_directions(r_max: float):
    """Coprime (p,q), one per line direction, with p^2+q^2 < (1/(2 r_max))^2.

    A single periodic disk family of radius r covers every projection period
    T = 1/sqrt(p^2+q^2) <= 2r, so directions at or beyond the bound cannot
    carry a corridor. Ordered by |(p,q)|^2 with (1,0) first.
    """
    bound_sq = (1.0 / (2.0 * r_max)) ** 2
    dirs = []
    p_cap = int(math.isqrt(int(bound_sq))) + 1
    for p in range(0, p_cap + 1):
        q_cap = int(math.sqrt(max(bound_sq - p * p, 0.0))) + 1
        for q in range(-q_cap, q_cap + 1):
            if p * p + q * q >= bound_sq:
                continue
            if p == 0:
                if q != 1:
                    continue  # (0,1) represents the vertical direction
            elif math.gcd(p, abs(q)) != 1:
                continue
            dirs.append((p, q))
    dirs.sort(key=lambda d: (d[0] ** 2 + d[1] ** 2, -d[0], d[1]))
    return dirs


def _direction_gap(disks: Sequence[Disk], p: int, q: int) -> float:
    """Widest uncovered gap of the projection coverage in direction (p,q).

    Projects all centers onto the unit normal of (p,q); each disk contributes
    a periodic interval family of half-width r and period T = 1/|(p,q)|.
    Returns 0.0 when one period is fully covered.
    """
    norm = math.sqrt(p * p + q * q)
    period = 1.0 / norm
    nx, ny = -q / norm, p / norm
    # split every periodic interval at the seam so coverage of [0, period]
    # is represented literally, then sweep linearly
    pieces = []
    for d in disks:
        if 2.0 * d.radius >= period - ENDPOINT_TOL:
            return 0.0
        off = (d.center[0] * nx + d.center[1] * ny) % period
        lo = (off - d.radius) % period
        hi = lo + 2.0 * d.radius
        if hi <= period:
            pieces.append((lo, hi))
        else:
            pieces.append((lo, period))
            pieces.append((0.0, hi - period))
    pieces.sort()
    max_gap = 0.0
    cover_end = pieces[0][1]
    first_start = pieces[0][0]
    for lo, hi in pieces[1:]:
        if lo > cover_end + ENDPOINT_TOL:
            max_gap = max(max_gap, lo - cover_end)
        cover_end = max(cover_end, hi)
    wrap_gap = (period - cover_end) + first_start  # joins across the seam
    if wrap_gap > ENDPOINT_TOL:
        max_gap = max(max_gap, wrap_gap)
    return max_gap


def corridor_check(table: "BilliardTable") -> FiniteHorizonReport:
    """Exact finite-horizon decision by projection coverage.

    Free lines in irrational directions always hit some obstacle (the
    projected translate family is dense), so only the coprime directions
    below the radius-derived bound are examined. When finite, the reported
    free-path bound is the conservative engineering bound
    sqrt(p_max^2+q_max^2) * (1 + 2 r_max) from the largest direction checked.
    """
    disks = table.disks
    r_max = max(d.radius for d in disks)
    dirs = _coprime_directions(r_max)
    largest_sq = 1
    for k, (p, q) in enumerate(dirs):
        gap = _direction_gap(disks, p, q)
        if gap > ENDPOINT_TOL:
            return FiniteHorizonReport(
                finite=False,
                directions_checked=k + 1,
                max_free_path_bound=None,
                open_corridor=Corridor(direction=(p, q), gap_width=gap),
            )
        largest_sq = max(largest_sq, p * p + q * q)
    bound = math.sqrt(largest_sq) * (1.0 + 2.0 * r_max)
    return FiniteHorizonReport(
        finite=True,
        directions_checked=len(dirs),
        max_free_path_bound=bound,
        open_corridor=None,
    )


class BilliardTable:
    """Validated scatterer configuration; immutable after construction.

    Construction runs the disjointness check (raising OverlapError on
    failure); the horizon report is computed on first use and cached. Safe
    to share read-only across trajectory workers.
    """

    def __init__(self, disks: Sequence[Disk]):
        self.disks: tuple[Disk, ...] = tuple(disks)
        self.min_gap: float = validate_disjoint(self.disks)

    @cached_property
    def horizon(self) -> FiniteHorizonReport:
        return corridor_check(self)

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([d.center for d in self.disks], dtype=np.float64)

    @cached_property
    def radii(self) -> np.ndarray:
        return np.array([d.radius for d in self.disks], dtype=np.float64)

    @property
    def total_perimeter(self) -> float:
        return float(sum(d.perimeter for d in self.disks))

    def to_dict(self) -> dict:
        return {
            "disks": [
                {"center": [d.center[0], d.center[1]], "radius": d.radius}
                for d in self.disks
            ]
        }

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    @classmethod
    def from_dict(cls, spec: dict) -> "BilliardTable":
        try:
            raw = spec["disks"]
        except (KeyError, TypeError):
            raise ValueError("table spec must carry a 'disks' list") from None
        disks = []
        for entry in raw:
            cx, cy = (float(v) for v in entry["center"])
            disks.append(Disk(center=(cx, cy), radius=float(entry["radius"])))
        return cls(disks)

    def __repr__(self):
        return f"BilliardTable({list(self.disks)!r})"


def _reject_constant(name):
    raise ValueError(f"non-finite number {name!r} in table spec")


def table_from_json(text: str) -> BilliardTable:
    """Parse a table spec document, rejecting NaN/Infinity literals."""
    spec = json.loads(text, parse_constant=_reject_constant)
    return BilliardTable.from_dict(spec)


def load_table(path) -> BilliardTable:
    with open(path, "r", encoding="utf-8") as fh:
        return table_from_json(fh.read())


def default_table() -> BilliardTable:
    """The canonical two-disk finite-horizon table used throughout the tests."""
    return BilliardTable(
        [Disk(center=(0.0, 0.0), radius=0.4), Disk(center=(0.5, 0.5), radius=0.3)]
    )
