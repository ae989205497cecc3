"""Exception types shared across the package."""


class OverlapError(ValueError):
    """Two scatterer closures intersect (possibly across a lattice translate).

    Obstacle indices are 1-based; ``shift`` is the lattice translate of the
    second disk at which the overlap occurs.
    """

    def __init__(self, i, j, shift, gap):
        self.i = i
        self.j = j
        self.shift = tuple(shift)
        self.gap = gap
        super().__init__(
            f"disks {i} and {j} overlap at translate {self.shift} (gap {gap:.6g})"
        )


class HorizonExceeded(RuntimeError):
    """A free flight traversed more cells than the configured cap."""


class GrazingAnomaly(RuntimeError):
    """A collision search kept producing tangential hits after retries."""


class DegenerateMatrix(ValueError):
    """A diffusion-matrix estimate is not positive definite."""


class InsufficientData(ValueError):
    """Not enough checkpoints (or decade span) to fit asymptotic constants."""


class QuadratureNonConvergence(RuntimeError):
    """Numerical integration failed to reach the requested accuracy."""


class MethodDisagreement(RuntimeError):
    """Two independent numerical methods disagree beyond combined errors."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a special function."""
