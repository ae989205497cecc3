"""Baseline lazy lattice walk: the pipeline oracle with known answers.

Steps are +e1, -e1, +e2, -e2, hold, each with probability 1/5, so the
per-step covariance is (2/5) * Identity exactly and the return probability
obeys p_k ~ 5 / (4 pi k). Swapping this source into the estimators validates
every statistic independently of billiard dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Xoshiro256pp, stream_seed


@dataclass(frozen=True)
class LazyLatticeWalk:
    """Marker for the baseline source; one obstacle type, site = lattice cell."""

    label: str = "lazy-walk"

    def digest(self) -> str:
        return self.label

    @property
    def step_covariance(self) -> np.ndarray:
        return 0.4 * np.eye(2)


def reference_cells(n: int, seed: int, index: int = 0) -> np.ndarray:
    """Pure-Python replay of the walk a compiled trajectory would take.

    Uses the mirrored generator with the same (seed, index) derivation, so it
    reproduces kernel streams exactly; the O(n^2) pipeline oracle compares
    statistics built on these cells against the compiled path.
    """
    rng = Xoshiro256pp(stream_seed(seed, index))
    cells = np.empty((n, 2), dtype=np.int64)
    x = y = 0
    for k in range(n):
        r = int(5.0 * rng.next_float())
        if r == 0:
            x += 1
        elif r == 1:
            x -= 1
        elif r == 2:
            y += 1
        elif r == 3:
            y -= 1
        cells[k, 0] = x
        cells[k, 1] = y
    return cells
