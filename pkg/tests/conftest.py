import pytest

from lorentz_lab.geometry import BilliardTable, Disk, default_table


@pytest.fixture(scope="session")
def table() -> BilliardTable:
    return default_table()


@pytest.fixture(scope="session")
def single_disk_table() -> BilliardTable:
    """Infinite horizon: one disk of radius 0.4 leaves axis corridors open."""
    return BilliardTable([Disk(center=(0.5, 0.5), radius=0.4)])


@pytest.fixture(scope="session")
def small_disk_table() -> BilliardTable:
    """One small disk, used for exact single-scatterer hit geometry."""
    return BilliardTable([Disk(center=(0.5, 0.5), radius=0.25)])
