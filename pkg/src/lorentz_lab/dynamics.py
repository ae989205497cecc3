"""The billiard collision map on a periodic table.

States live on obstacle boundaries: obstacle index (1-based), lattice cell,
boundary angle, outgoing unit direction. The map advances along straight
rays (integer grid traversal, every visited cell tested with its 8
neighbors) and reflects specularly; hit points are re-projected onto the
exact circle each collision so long runs do not drift off the boundary.

Initial conditions come either from the invariant collision measure
(perimeter-weighted arc position, sin of incidence uniform) or from a
uniform position/direction in the free domain pulled back to its previous
collision ("uniform-q").
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import GrazingAnomaly, HorizonExceeded
from .geometry import BilliardTable
from .rng import Xoshiro256pp, stream_seed

EPS_GRAZE = K.EPS_GRAZE
PERMISSIVE_CELL_CAP = 1_000_000


@dataclass(frozen=True)
class CollisionState:
    """Phase point of the collision map.

    obstacle is 1-based; cell is the lattice label of the obstacle copy;
    boundary_angle parametrizes the circle; outgoing_dir is the unit
    post-collision velocity; incidence is the signed angle between
    outgoing_dir and the outward normal, in (-pi/2, pi/2).
    """

    obstacle: int
    cell: tuple[int, int]
    boundary_angle: float
    outgoing_dir: tuple[float, float]
    incidence: float

    def __post_init__(self):
        vx, vy = self.outgoing_dir
        if abs(math.hypot(vx, vy) - 1.0) > 1e-12:
            raise ValueError("outgoing_dir must be a unit vector")
        if not -0.5 * math.pi < self.incidence < 0.5 * math.pi:
            raise ValueError("incidence must lie in (-pi/2, pi/2)")


@dataclass(frozen=True)
class FlightRecord:
    start: CollisionState
    end: CollisionState
    free_path: float


def _cell_cap(table: BilliardTable, mode: str, cell_cap: int | None) -> int:
    if cell_cap is not None:
        return int(cell_cap)
    if mode == "strict":
        if not table.horizon.finite:
            raise HorizonExceeded(
                "strict mode requires a finite horizon; corridor found in "
                f"direction {table.horizon.open_corridor.direction}"
            )
        return 2 * math.ceil(table.horizon.max_free_path_bound) + 8
    if mode == "permissive":
        return PERMISSIVE_CELL_CAP
    raise ValueError(f"unknown mode {mode!r}")


def _raise_status(status: int):
    if status == K.STATUS_HORIZON:
        raise HorizonExceeded("free flight traversed more cells than the cap")
    if status == K.STATUS_GRAZING:
        raise GrazingAnomaly("tangential hits persisted through retries")
    if status == K.STATUS_CELL_RANGE:
        raise OverflowError("cell coordinates left the packed-site range (2^28)")
    if status != K.STATUS_OK:
        raise RuntimeError(f"unknown kernel status {status}")


def _state_to_scalars(table: BilliardTable, state: CollisionState):
    j = state.obstacle - 1
    d = table.disks[j]
    px = d.center[0] + d.radius * math.cos(state.boundary_angle)
    py = d.center[1] + d.radius * math.sin(state.boundary_angle)
    return j, state.cell[0], state.cell[1], px, py, state.outgoing_dir[0], state.outgoing_dir[1]


def _scalars_to_state(table: BilliardTable, ox, cx, cy, px, py, vx, vy) -> CollisionState:
    d = table.disks[ox]
    hx = px - d.center[0]
    hy = py - d.center[1]
    theta = math.atan2(hy, hx) % (2.0 * math.pi)
    nx, ny = hx / d.radius, hy / d.radius
    incidence = math.atan2(nx * vy - ny * vx, nx * vx + ny * vy)
    return CollisionState(
        obstacle=ox + 1,
        cell=(int(cx), int(cy)),
        boundary_angle=theta,
        outgoing_dir=(vx, vy),
        incidence=incidence,
    )


def sample_stationary(table: BilliardTable, rng: Xoshiro256pp) -> CollisionState:
    """Draw a state from the invariant collision measure, cell (0,0).

    Obstacle with probability proportional to its perimeter, boundary angle
    uniform, sin(incidence) uniform on (-1,1). Mirrors the kernel sampler
    draw for draw.
    """
    radii = table.radii
    cum = np.cumsum(radii) / radii.sum()
    u = rng.next_float()
    j = 0
    while j < len(cum) - 1 and u >= cum[j]:
        j += 1
    theta = 2.0 * math.pi * rng.next_float()
    sphi = 2.0 * rng.next_float() - 1.0
    phi = math.asin(sphi)
    a = theta + phi
    return CollisionState(
        obstacle=j + 1,
        cell=(0, 0),
        boundary_angle=theta % (2.0 * math.pi),
        outgoing_dir=(math.cos(a), math.sin(a)),
        incidence=phi,
    )


def sample_uniform_q(
    table: BilliardTable,
    rng: Xoshiro256pp,
    mode: str = "strict",
    cell_cap: int | None = None,
) -> CollisionState:
    """The position/velocity-uniform initial law: a point uniform in the free
    part of the unit cell with a uniform direction, attributed to the last
    reflection before time 0 (reached by flowing the reversed velocity)."""
    cap = _cell_cap(table, mode, cell_cap)
    state = np.empty(4, np.uint64)
    state[0], state[1], state[2], state[3] = rng.s0, rng.s1, rng.s2, rng.s3
    out = K._sample_uniform_q(
        table.centers[:, 0], table.centers[:, 1], table.radii, state, cap
    )
    rng.s0, rng.s1, rng.s2, rng.s3 = (int(state[i]) for i in range(4))
    _raise_status(out[0])
    _, ox, cx, cy, px, py, vx, vy = out
    return _scalars_to_state(table, int(ox), int(cx), int(cy), px, py, vx, vy)


def next_collision(
    table: BilliardTable,
    state: CollisionState,
    mode: str = "strict",
    cell_cap: int | None = None,
) -> FlightRecord:
    """Advance one collision: grid-traversal search plus specular reflection."""
    cap = _cell_cap(table, mode, cell_cap)
    ox, cx, cy, px, py, vx, vy = _state_to_scalars(table, state)
    out = K._collide(
        table.centers[:, 0], table.centers[:, 1], table.radii,
        ox, cx, cy, px, py, vx, vy, cap,
    )
    _raise_status(out[0])
    end = _scalars_to_state(
        table, int(out[1]), int(out[2]), int(out[3]), out[4], out[5], out[6], out[7]
    )
    return FlightRecord(start=state, end=end, free_path=float(out[8]))


class Trajectory:
    """Materialized trajectory: arrays indexed k = 1..n.

    obstacles are 1-based; cells are absolute lattice labels; positions are
    absolute collision points. Iterating yields (I_k, S_k, free_path_k).
    """

    def __init__(self, initial, obstacles, cells, free_paths, positions, directions,
                 grazing_retries):
        self.initial = initial
        self.obstacles = obstacles
        self.cells = cells
        self.free_paths = free_paths
        self.positions = positions
        self.directions = directions
        self.grazing_retries = grazing_retries

    @property
    def n(self) -> int:
        return len(self.obstacles)

    def __iter__(self):
        for k in range(self.n):
            yield (
                int(self.obstacles[k]),
                (int(self.cells[k, 0]), int(self.cells[k, 1])),
                float(self.free_paths[k]),
            )

    def sites(self):
        """Sites (I_k, S_k) as hashable tuples, k = 1..n."""
        return [
            (int(self.obstacles[k]), (int(self.cells[k, 0]), int(self.cells[k, 1])))
            for k in range(self.n)
        ]

    def state(self, k: int, table: BilliardTable) -> CollisionState:
        """Reconstruct the full CollisionState at collision k (1-based)."""
        i = k - 1
        ox = int(self.obstacles[i]) - 1
        cx, cy = (int(self.cells[i, 0]), int(self.cells[i, 1]))
        px = self.positions[i, 0] - cx
        py = self.positions[i, 1] - cy
        vx, vy = self.directions[i]
        return _scalars_to_state(table, ox, cx, cy, px, py, vx, vy)


def trajectory(
    table: BilliardTable,
    n: int,
    seed: int,
    init: str = "stationary",
    mode: str = "strict",
    cell_cap: int | None = None,
) -> Trajectory:
    """Deterministic n-collision trajectory for the given (table, seed).

    The initial state (k=0) is sampled from the requested law and is
    available as `.initial`; emitted collisions are k = 1..n. The same seed
    with the same table reproduces the stream bit for bit.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cap = _cell_cap(table, mode, cell_cap)
    init_mode = {"stationary": K.INIT_STATIONARY, "uniform-q": K.INIT_UNIFORM_Q}[init]
    obs = np.empty(n, np.int64)
    cells = np.empty((n, 2), np.int64)
    free = np.empty(n, np.float64)
    pos = np.empty((n, 2), np.float64)
    dirs = np.empty((n, 2), np.float64)
    out = K._record_run(
        table.centers[:, 0], table.centers[:, 1], table.radii,
        np.cumsum(table.radii) / table.radii.sum(),
        np.uint64(stream_seed(seed, 0)), n, init_mode, cap,
        obs, cells[:, 0], cells[:, 1], free, pos[:, 0], pos[:, 1],
        dirs[:, 0], dirs[:, 1],
    )
    _raise_status(out[0])
    initial = _scalars_to_state(
        table, int(out[2]), int(out[3]), int(out[4]), out[5], out[6], out[7], out[8]
    )
    obs += 1  # public obstacle indices are 1-based
    return Trajectory(initial, obs, cells, free, pos, dirs, int(out[1]))


@dataclass(frozen=True)
class InvariantAudit:
    max_specular_dev: float
    max_free_path: float
    max_unit_speed_dev: float
    grazing_retries: int
    collisions: int


def audit_invariants(
    table: BilliardTable,
    n: int,
    seed: int,
    init: str = "stationary",
    mode: str = "strict",
    cell_cap: int | None = None,
) -> InvariantAudit:
    """Run n collisions tracking worst-case specular deviation, free path and
    unit-speed deviation (cheap: nothing is materialized)."""
    cap = _cell_cap(table, mode, cell_cap)
    init_mode = {"stationary": K.INIT_STATIONARY, "uniform-q": K.INIT_UNIFORM_Q}[init]
    out = K._audit_run(
        table.centers[:, 0], table.centers[:, 1], table.radii,
        np.cumsum(table.radii) / table.radii.sum(),
        np.uint64(stream_seed(seed, 0)), n, init_mode, cap,
    )
    _raise_status(out[0])
    return InvariantAudit(
        max_specular_dev=float(out[1]),
        max_free_path=float(out[2]),
        max_unit_speed_dev=float(out[3]),
        grazing_retries=int(out[4]),
        collisions=n,
    )


def collision_measure_samples(
    table: BilliardTable,
    m: int,
    seed: int,
    sub_steps: int = 1,
    mode: str = "strict",
    cell_cap: int | None = None,
):
    """(arc fraction, sin incidence) of the state reached after `sub_steps`
    collisions from m independent stationary starts. Under measure
    preservation both coordinates are uniform and independent."""
    cap = _cell_cap(table, mode, cell_cap)
    arcpos = np.empty(m, np.float64)
    sinphi = np.empty(m, np.float64)
    st = K._collision_samples(
        table.centers[:, 0], table.centers[:, 1], table.radii,
        np.cumsum(table.radii) / table.radii.sum(),
        np.uint64(seed), m, sub_steps, cap, arcpos, sinphi,
    )
    _raise_status(st)
    return arcpos, sinphi


def probe_free_flights(table: BilliardTable, xs, ys, angles, cell_cap: int):
    """Free-flight lengths from arbitrary points and directions; entries are
    inf when the ray crossed `cell_cap` cells without hitting anything."""
    xs = np.asarray(xs, np.float64)
    ys = np.asarray(ys, np.float64)
    angles = np.asarray(angles, np.float64)
    out = np.empty(xs.shape[0], np.float64)
    K._probe_rays(
        table.centers[:, 0], table.centers[:, 1], table.radii,
        xs, ys, angles, cell_cap, out,
    )
    return out
