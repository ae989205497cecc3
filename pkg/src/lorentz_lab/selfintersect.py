"""Streaming self-intersection count V_n with an independent brute-force oracle.

V_n counts ordered pairs (k, l) <= n that hit the same obstacle copy; it
equals the sum of squared site occupation counts, so a visit to a site with
m prior visits raises V by 2m+1. Diagonal pairs k = l are included (V_n >= n)
and the initial k = 0 state is not: the sums run over k, l = 1..n.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .dynamics import _cell_cap, _raise_status
from .geometry import BilliardTable
from .rng import stream_seed

CELL_BOUND = int(K.CELL_LIMIT)

Site = tuple[int, tuple[int, int]]


class VisitCounter:
    """Multiset of visited sites with the running V value.

    v_current == sum of squared counts at all times; n_current is the number
    of visits consumed. Owned by a single trajectory worker, never shared.
    """

    __slots__ = ("counts", "v_current", "n_current")

    def __init__(self):
        self.counts: dict[Site, int] = {}
        self.v_current = 0
        self.n_current = 0

    def visit(self, site: Site) -> int:
        """Consume one visit; returns the updated V."""
        obstacle, (cx, cy) = site
        if not (-CELL_BOUND < cx < CELL_BOUND and -CELL_BOUND < cy < CELL_BOUND):
            raise OverflowError(f"cell {site[1]} outside the packed-site range")
        key = (int(obstacle), (int(cx), int(cy)))
        m = self.counts.get(key, 0)
        self.counts[key] = m + 1
        self.v_current += 2 * m + 1
        self.n_current += 1
        return self.v_current


def brute_force_V(sites) -> int:
    """The defining double sum: pairs (k, l) with site_k == site_l, counted
    by direct pairwise comparison (O(n^2), test scale only)."""
    n = len(sites)
    if n > 10_000:
        raise ValueError("brute_force_V is capped at n = 10^4")
    # dense ids keep the pairwise comparison free of any packing arithmetic
    ids: dict[Site, int] = {}
    labels = np.empty(n, dtype=np.int64)
    for i, (obs, (cx, cy)) in enumerate(sites):
        labels[i] = ids.setdefault((int(obs), (int(cx), int(cy))), len(ids))
    total = 0
    block = 1024
    for lo in range(0, n, block):
        total += int((labels[lo : lo + block, None] == labels[None, :]).sum())
    return total


def v_series(
    table: BilliardTable,
    n_max: int,
    checkpoints,
    seed: int,
    init: str = "stationary",
    mode: str = "strict",
) -> list[tuple[int, int]]:
    """Single-trajectory streaming pass emitting V_n at each checkpoint."""
    cps = np.asarray(sorted(checkpoints), dtype=np.int64)
    if len(cps) == 0 or cps[0] < 1 or cps[-1] > n_max or len(set(cps.tolist())) != len(cps):
        raise ValueError("checkpoints must be unique and lie in [1, n_max]")
    cap = _cell_cap(table, mode, None)
    init_mode = {"stationary": K.INIT_STATIONARY, "uniform-q": K.INIT_UNIFORM_Q}[init]
    hcap = K._hash_capacity(n_max)
    keys = np.zeros(hcap, np.uint64)
    counts = np.zeros(hcap, np.int64)
    used = np.empty(n_max + 1, np.int64)
    out_v = np.empty(len(cps), np.int64)
    out_sx = np.empty(len(cps), np.int64)
    out_sy = np.empty(len(cps), np.int64)
    st, _used_n, _gr = K._v_run(
        table.centers[:, 0], table.centers[:, 1], table.radii,
        np.cumsum(table.radii) / table.radii.sum(),
        np.uint64(stream_seed(seed, 0)), n_max, cps, init_mode, cap,
        keys, counts, used, out_v, out_sx, out_sy,
    )
    _raise_status(st)
    return [(int(n), int(v)) for n, v in zip(cps, out_v)]
