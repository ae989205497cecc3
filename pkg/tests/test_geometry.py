import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentz_lab.dynamics import probe_free_flights
from lorentz_lab.errors import OverlapError
from lorentz_lab.geometry import (
    BilliardTable,
    Corridor,
    Disk,
    FiniteHorizonReport,
    table_from_json,
    validate_disjoint,
)


class TestDisk:
    def test_radius_bounds(self):
        with pytest.raises(ValueError):
            Disk(center=(0.1, 0.1), radius=0.5)
        with pytest.raises(ValueError):
            Disk(center=(0.1, 0.1), radius=0.0)
        with pytest.raises(ValueError):
            Disk(center=(0.1, 0.1), radius=-0.2)

    def test_center_in_unit_cell(self):
        with pytest.raises(ValueError):
            Disk(center=(1.0, 0.0), radius=0.1)
        with pytest.raises(ValueError):
            Disk(center=(0.0, -0.2), radius=0.1)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Disk(center=(math.nan, 0.0), radius=0.1)

    def test_perimeter(self):
        assert Disk(center=(0.0, 0.0), radius=0.25).perimeter == pytest.approx(
            0.5 * math.pi
        )


class TestDisjointness:
    def test_single_disk_gap_to_own_translate(self):
        gap = validate_disjoint([Disk(center=(0.5, 0.5), radius=0.25)])
        assert gap == pytest.approx(0.5, rel=1e-12)

    def test_two_disk_cross_pair(self):
        gap = validate_disjoint(
            [Disk(center=(0.0, 0.0), radius=0.4), Disk(center=(0.5, 0.5), radius=0.3)]
        )
        assert gap == pytest.approx(math.sqrt(2) / 2 - 0.7, rel=1e-12)

    def test_overlap_reports_pair_and_translate(self):
        with pytest.raises(OverlapError) as exc:
            validate_disjoint(
                [
                    Disk(center=(0.0, 0.0), radius=0.3),
                    Disk(center=(0.1, 0.1), radius=0.3),
                ]
            )
        assert (exc.value.i, exc.value.j, exc.value.shift) == (1, 2, (0, 0))

    def test_table_construction_runs_validation(self):
        with pytest.raises(OverlapError):
            BilliardTable(
                [
                    Disk(center=(0.0, 0.0), radius=0.3),
                    Disk(center=(0.1, 0.1), radius=0.3),
                ]
            )


class TestCorridorCheck:
    def test_single_disk_axis_corridor(self, single_disk_table):
        rep = single_disk_table.horizon
        assert not rep.finite
        assert rep.open_corridor.direction == (1, 0)
        assert rep.open_corridor.gap_width == pytest.approx(0.2, abs=1e-12)
        assert rep.max_free_path_bound is None

    def test_default_table_finite(self, table):
        rep = table.horizon
        assert rep.finite
        assert rep.open_corridor is None
        assert rep.directions_checked == 2
        assert rep.max_free_path_bound == pytest.approx(1.8)

    def test_near_critical_radius(self):
        rep = BilliardTable([Disk(center=(0.5, 0.5), radius=0.49)]).horizon
        assert not rep.finite
        assert rep.open_corridor.gap_width == pytest.approx(0.02, abs=1e-9)

    def test_report_consistency_enforced(self):
        with pytest.raises(ValueError):
            FiniteHorizonReport(
                finite=True,
                directions_checked=1,
                max_free_path_bound=1.0,
                open_corridor=Corridor(direction=(1, 0), gap_width=0.1),
            )

    def test_axis_swap_symmetry(self):
        disks = [
            Disk(center=(0.1, 0.3), radius=0.36),
            Disk(center=(0.6, 0.8), radius=0.33),
        ]
        swapped = [Disk(center=(d.center[1], d.center[0]), radius=d.radius) for d in disks]
        rep = BilliardTable(disks).horizon
        rep_sw = BilliardTable(swapped).horizon
        assert rep.finite == rep_sw.finite
        if not rep.finite:
            p, q = rep.open_corridor.direction
            assert rep_sw.open_corridor.gap_width == pytest.approx(
                rep.open_corridor.gap_width, rel=1e-9
            )

    @settings(max_examples=40, deadline=None)
    @given(
        dx=st.floats(0.0, 0.999), dy=st.floats(0.0, 0.999),
        r1=st.floats(0.2, 0.45), r2=st.floats(0.05, 0.3),
    )
    def test_translation_invariance(self, dx, dy, r1, r2):
        base = [Disk(center=(0.0, 0.0), radius=r1), Disk(center=(0.5, 0.5), radius=r2)]
        try:
            rep = BilliardTable(base).horizon
        except OverlapError:
            return
        moved = [
            Disk(center=((cx + dx) % 1.0, (cy + dy) % 1.0), radius=d.radius)
            for d, (cx, cy) in ((d, d.center) for d in base)
        ]
        rep2 = BilliardTable(moved).horizon
        assert rep.finite == rep2.finite
        if not rep.finite:
            assert rep2.open_corridor.gap_width == pytest.approx(
                rep.open_corridor.gap_width, rel=1e-9, abs=1e-12
            )


class TestProbes:
    def test_corridor_found_by_ray_probe(self, single_disk_table):
        # lines along the reported corridor direction, random offsets: a
        # fraction ~ gap/period travels unobstructed for 1e3 cells
        rng = np.random.default_rng(7)
        n = 10_000
        ys = rng.uniform(0.0, 1.0, n)
        xs = rng.uniform(0.0, 1.0, n)
        t = probe_free_flights(
            single_disk_table, xs, ys, np.zeros(n), cell_cap=2_200
        )
        frac = np.mean(~np.isfinite(t) | (t > 1_000.0))
        assert frac > 0.1  # gap width 0.2 minus lines starting inside disks

    def test_finite_table_has_no_long_flight(self, table):
        rng = np.random.default_rng(11)
        n = 100_000
        xs = rng.uniform(0, 1, n)
        ys = rng.uniform(0, 1, n)
        free = np.ones(n, dtype=bool)  # restrict to rays from the free domain
        for d in table.disks:
            for sx in (-1, 0, 1):
                for sy in (-1, 0, 1):
                    free &= (xs - d.center[0] - sx) ** 2 + (
                        ys - d.center[1] - sy
                    ) ** 2 > d.radius**2
        angles = rng.uniform(0, 2 * math.pi, n)
        t = probe_free_flights(table, xs[free], ys[free], angles[free], cell_cap=10_000)
        assert np.isfinite(t).all()
        assert t.max() <= table.horizon.max_free_path_bound


class TestTableIO:
    def test_round_trip(self, table):
        text = '{"disks": [{"center": [0.0, 0.0], "radius": 0.4},' \
               ' {"center": [0.5, 0.5], "radius": 0.3}]}'
        parsed = table_from_json(text)
        assert parsed.digest() == table.digest()

    def test_rejects_non_finite_numbers(self):
        with pytest.raises(ValueError):
            table_from_json('{"disks": [{"center": [NaN, 0.0], "radius": 0.3}]}')
        with pytest.raises(ValueError):
            table_from_json('{"disks": [{"center": [0.0, 0.0], "radius": Infinity}]}')

    def test_digest_changes_with_table(self, table):
        other = BilliardTable(
            [Disk(center=(0.0, 0.0), radius=0.4), Disk(center=(0.5, 0.5), radius=0.29)]
        )
        assert other.digest() != table.digest()
