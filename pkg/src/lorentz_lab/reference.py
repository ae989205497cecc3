"""Arbitrary-precision reference simulator for the collision map.

A slow, exhaustive-search twin of the compiled kernel, running on gmpy2
mpfr at any precision. Two jobs:

* independent oracle for the fast kernel (candidate disks are enumerated
  over a window, no grid traversal, so the search strategies differ);
* deep time-reversal checks. The billiard is uniformly hyperbolic, so a
  double-precision reversed run leaves the forward orbit after a few dozen
  collisions; retracing 10^3 collisions needs thousands of bits, which is
  cheap here because candidate disks are prescreened in float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpfr

from .dynamics import CollisionState, sample_stationary
from .errors import GrazingAnomaly, HorizonExceeded
from .geometry import BilliardTable
from .rng import Xoshiro256pp

_EPS_T = 1e-14


@dataclass
class HPState:
    """Collision state with mpfr coordinates; position local to `cell`."""

    obstacle: int  # 0-based here; this is an internal type
    cell: tuple[int, int]
    px: object
    py: object
    vx: object
    vy: object


class ReferenceBilliard:
    """Reference collision map at `bits` of mpfr precision."""

    def __init__(self, table: BilliardTable, bits: int = 53, reach: int | None = None):
        self.table = table
        self.bits = int(bits)
        if reach is None:
            if not table.horizon.finite:
                raise HorizonExceeded(
                    "reference simulator needs a finite-horizon table "
                    "(or an explicit reach)"
                )
            reach = math.ceil(table.horizon.max_free_path_bound) + 2
        self.reach = reach
        self._cx = [d.center[0] for d in table.disks]
        self._cy = [d.center[1] for d in table.disks]
        self._r = [d.radius for d in table.disks]

    def _ctx(self):
        return gmpy2.context(precision=self.bits)

    def lift(self, state: CollisionState) -> HPState:
        """Exact lift of a float64 state; the boundary point is recomputed
        from the angle at full precision and the direction renormalized."""
        j = state.obstacle - 1
        with self._ctx():
            theta = mpfr(state.boundary_angle)
            px = mpfr(self._cx[j]) + mpfr(self._r[j]) * gmpy2.cos(theta)
            py = mpfr(self._cy[j]) + mpfr(self._r[j]) * gmpy2.sin(theta)
            vx = mpfr(state.outgoing_dir[0])
            vy = mpfr(state.outgoing_dir[1])
            nrm = gmpy2.sqrt(vx * vx + vy * vy)
            return HPState(j, state.cell, px, py, vx / nrm, vy / nrm)

    def _first_hit(self, px, py, vx, vy):
        """Exhaustive window search for the first intersection.

        Candidates are prescreened with float arithmetic (wide margins), the
        survivors solved in mpfr. Returns (j, mx, my, t)."""
        fpx, fpy = float(px), float(py)
        fvx, fvy = float(vx), float(vy)
        bx = math.floor(fpx)
        by = math.floor(fpy)
        reach = self.reach
        survivors = []
        best_ft = math.inf
        for j in range(len(self._r)):
            r = self._r[j]
            r2 = r * r
            for mx in range(bx - reach, bx + reach + 1):
                dx = fpx - (self._cx[j] + mx)
                for my in range(by - reach, by + reach + 1):
                    dy = fpy - (self._cy[j] + my)
                    b = dx * fvx + dy * fvy
                    if b > 1e-9:
                        continue
                    disc = b * b - (dx * dx + dy * dy - r2)
                    if disc < -1e-9:
                        continue
                    ft = -b - math.sqrt(max(disc, 0.0))
                    if ft < best_ft:
                        best_ft = ft
                    survivors.append((ft, j, mx, my))
        best = None
        with self._ctx():
            for ft, j, mx, my in survivors:
                if ft > best_ft + 1e-6:
                    continue
                dx = px - (mpfr(self._cx[j]) + mx)
                dy = py - (mpfr(self._cy[j]) + my)
                b = dx * vx + dy * vy
                if b >= 0:
                    continue
                disc = b * b - (dx * dx + dy * dy - mpfr(self._r[j]) ** 2)
                if disc <= 0:
                    continue
                s = gmpy2.sqrt(disc)
                if s < 1e-12 * self._r[j]:
                    raise GrazingAnomaly("tangential hit in reference simulator")
                t = -b - s
                if t > _EPS_T and (best is None or t < best[0]):
                    best = (t, j, mx, my)
        if best is None:
            raise HorizonExceeded(
                f"no obstacle within the reach window ({self.reach} cells)"
            )
        return best

    def step(self, s: HPState):
        """One collision: returns (new HPState, free path as mpfr)."""
        t, j, mx, my = self._first_hit(s.px, s.py, s.vx, s.vy)
        with self._ctx():
            qx = mpfr(self._cx[j]) + mx
            qy = mpfr(self._cy[j]) + my
            hx = s.px + t * s.vx - qx
            hy = s.py + t * s.vy - qy
            scale = mpfr(self._r[j]) / gmpy2.sqrt(hx * hx + hy * hy)
            hx *= scale
            hy *= scale
            nx = hx / self._r[j]
            ny = hy / self._r[j]
            dvn = s.vx * nx + s.vy * ny
            wx = s.vx - 2 * dvn * nx
            wy = s.vy - 2 * dvn * ny
            nrm = gmpy2.sqrt(wx * wx + wy * wy)
            new = HPState(
                j,
                (s.cell[0] + mx, s.cell[1] + my),
                mpfr(self._cx[j]) + hx,
                mpfr(self._cy[j]) + hy,
                wx / nrm,
                wy / nrm,
            )
        return new, t

    def reverse(self, s: HPState) -> HPState:
        """Time reversal at a collision point: the reversed outgoing direction
        is the reflection of the negated outgoing direction."""
        j = s.obstacle
        with self._ctx():
            nx = (s.px - mpfr(self._cx[j])) / self._r[j]
            ny = (s.py - mpfr(self._cy[j])) / self._r[j]
            vx = -s.vx
            vy = -s.vy
            dvn = vx * nx + vy * ny
            wx = vx - 2 * dvn * nx
            wy = vy - 2 * dvn * ny
            return HPState(j, s.cell, s.px, s.py, wx, wy)

    def positions_abs(self, s: HPState):
        with self._ctx():
            return (s.cell[0] + s.px, s.cell[1] + s.py)


@dataclass(frozen=True)
class RetraceReport:
    collisions: int
    bits: int
    max_position_error: float
    sequence_reversed: bool


def retrace(table: BilliardTable, n: int, seed: int, bits: int = 6000) -> RetraceReport:
    """Forward n collisions, reverse the final state, run n collisions back;
    report the worst position mismatch and whether the (obstacle, cell)
    sequence retraced exactly.

    The error grows like exp(2 * lambda * n) from the last mpfr bit, so
    `bits` must comfortably exceed 2 * lambda * n / ln 2 (lambda is the
    Lyapunov exponent per collision, about 1 for tight tables).
    """
    rng = Xoshiro256pp.for_trajectory(seed, 0)
    st0 = sample_stationary(table, rng)
    sim = ReferenceBilliard(table, bits=bits)
    fwd = [sim.lift(st0)]
    for _ in range(n):
        s, _t = sim.step(fwd[-1])
        fwd.append(s)
    rev = sim.reverse(fwd[-1])
    max_err = 0.0
    seq_ok = True
    for k in range(1, n + 1):
        rev, _t = sim.step(rev)
        target = fwd[n - k]
        if rev.obstacle != target.obstacle or rev.cell != target.cell:
            seq_ok = False
        ax, ay = sim.positions_abs(rev)
        tx, ty = sim.positions_abs(target)
        err = float(gmpy2.sqrt((ax - tx) ** 2 + (ay - ty) ** 2))
        if err > max_err:
            max_err = err
    return RetraceReport(
        collisions=n, bits=bits, max_position_error=max_err, sequence_reversed=seq_ok
    )
