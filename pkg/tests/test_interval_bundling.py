"""Tests for the unit-capacity interval bundling."""
from __future__ import annotations

import pytest
from conftest import line_instance, tree_instance

from bundle_pricing.allocation import FractionalAllocation, frac_val, frac_wt
from bundle_pricing.exceptions import InstanceError, UnsupportedTopologyError
from bundle_pricing.generators import gen_random_interval
from bundle_pricing.interval_bundling import (
    ScalePartition,
    bucket_jobs,
    build_heavy_unit_allocation,
    build_light_unit_allocation,
    build_unit_allocation,
    candidate_offsets,
    classify_heavy_light,
    compute_beta,
    connected_components,
    filter_low_value,
    interval_cover,
    length_scale,
    light_window,
    max_scale,
    select_light_subset,
)
from bundle_pricing.lp import solve_frac_opt


class TestScales:
    """β, scales and the shifted dyadic partition."""

    def test_beta_is_clamped_for_short_lines(self):
        assert compute_beta(2) == 2.0
        assert compute_beta(4) == 2.0

    def test_beta_solves_fixed_point(self):
        beta = compute_beta(16)
        assert beta == pytest.approx(2.745, abs=1e-3)
        assert light_window(beta) == 1

    def test_beta_needs_two_items(self):
        with pytest.raises(InstanceError):
            compute_beta(1)

    def test_scales(self):
        assert max_scale(8) == 4
        assert max_scale(1) == 1
        inst = line_instance([1] * 6, [[(1.0, [((0, 2), 1.0), ((4, 4), 1.0)])]])
        assert length_scale(inst.job(0)) == 3
        assert length_scale(inst.job(1)) == 1

    def test_offsets(self):
        assert candidate_offsets(2) == [0, 1, 2, 3]
        assert candidate_offsets(8, count=4) == [0, 64, 128, 192]

    def test_partition_blocks(self):
        partition = ScalePartition(1, 3)
        assert partition.block_of(0, 1) == -1
        assert partition.block_bounds(1, 0) == (1, 2)
        with pytest.raises(InstanceError):
            ScalePartition(8, 3)


class TestIntervalCover:
    """Two disjoint sides covering a union of intervals."""

    def test_chain(self):
        assert interval_cover([(1, 4), (3, 6), (5, 8)]) == ([0, 2], [1])

    def test_disjoint(self):
        assert interval_cover([(0, 1), (3, 4)]) == ([0, 1], [])

    def test_nested_interval_is_skipped(self):
        assert interval_cover([(1, 8), (2, 3)]) == ([0], [])

    def test_replaces_latest_when_both_sides_overlap(self):
        first, second = interval_cover([(0, 5), (3, 8), (4, 10)])
        assert first == [0]
        assert second == [2]

    def test_sides_are_disjoint_and_cover(self):
        intervals = [(0, 2), (1, 3), (2, 6), (5, 7), (7, 9), (8, 8), (9, 12)]
        sides = interval_cover(intervals)
        union = {t for s, e in intervals for t in range(s, e + 1)}
        covered = set()
        for side in sides:
            items = [t for i in side for t in range(intervals[i][0], intervals[i][1] + 1)]
            assert len(items) == len(set(items))
            covered.update(items)
        assert covered == union


class TestFilteringAndGrouping:
    """Low-value filter, buckets and the heavy/light split."""

    def test_filter_drops_cheap_job(self):
        inst = line_instance(
            [1, 1], [[(1.0, [((0, 1), 10.0)])], [(1.0, [((0, 0), 1.0)])]]
        )
        x = FractionalAllocation.from_mapping(inst, {0: 0.5, 1: 0.5})
        assert filter_low_value(x) == (0,)

    def test_filter_keeps_at_least_half_the_value(self):
        for seed in range(10):
            inst = gen_random_interval(8, 6, seed=seed)
            x = solve_frac_opt(inst).allocation
            kept = filter_low_value(x)
            assert frac_val(x, kept) >= frac_val(x) / 2 - 1e-9

    def test_filter_needs_a_line(self, binary_tree):
        inst = tree_instance(binary_tree.parents, [1] * 6, [[(1.0, [([0], 1.0)])]])
        x = FractionalAllocation.from_mapping(inst, {0: 1.0})
        with pytest.raises(UnsupportedTopologyError):
            filter_low_value(x)

    def test_connected_components(self):
        inst = line_instance(
            [1] * 6,
            [
                [(1.0, [((0, 1), 1.0)])],
                [(1.0, [((1, 2), 1.0)])],
                [(1.0, [((4, 5), 1.0)])],
            ],
        )
        assert connected_components(inst.jobs) == [(0, 2, (0, 1)), (4, 5, (2,))]

    def test_straddling_job_is_dropped(self):
        inst = line_instance([1] * 4, [[(1.0, [((1, 2), 4.0)])]])
        x = FractionalAllocation.from_mapping(inst, {0: 1.0})
        # length 2 lives at scale 2, blocks of four items
        assert bucket_jobs(x, [0], ScalePartition(0, 3)) != []
        assert bucket_jobs(x, [0], ScalePartition(2, 3)) == []

    def test_heavy_threshold(self):
        inst = line_instance(
            [1] * 4, [[(1.0, [((0, 0), 1.0)])], [(1.0, [((3, 3), 1.0)])]]
        )
        x = FractionalAllocation.from_mapping(inst, {0: 0.5, 1: 0.05})
        groups = bucket_jobs(x, [0, 1], ScalePartition(0, 3))
        heavy, light = classify_heavy_light(x, groups, beta=2.0)
        assert [g.jobs for g in heavy] == [(0,)]
        assert [g.jobs for g in light] == [(1,)]
        heavy_unit = build_heavy_unit_allocation(x, heavy)
        assert heavy_unit.violations() == []
        assert [heavy_unit.members(b.id) for b in heavy_unit.for_sale()] == [(0,)]
        light_unit = build_light_unit_allocation(x, light, 2.0)
        assert light_unit.violations() == []
        assert all(0 not in light_unit.members(b.id) for b in light_unit.for_sale())

    def test_light_subset_keeps_a_sixth(self):
        inst = line_instance(
            [1] * 4,
            [
                [(1.0, [((0, 0), 1.0)])],
                [(1.0, [((1, 1), 3.0)])],
                [(1.0, [((2, 2), 9.0)])],
                [(1.0, [((3, 3), 30.0)])],
            ],
        )
        x = FractionalAllocation.from_mapping(inst, {0: 0.05, 1: 0.05, 2: 0.02, 3: 0.01})
        chosen = select_light_subset(x, [0, 1, 2, 3])
        assert chosen
        assert frac_val(x, chosen) >= frac_val(x) / 6
        assert frac_wt(x, chosen) <= frac_wt(x)


class TestUnitAllocation:
    """End-to-end unit-capacity construction."""

    def test_single_job_keeps_a_quarter(self):
        inst = line_instance([1], [[(1.0, [((0, 0), 5.0)])]])
        x = solve_frac_opt(inst).allocation
        unit = build_unit_allocation(x)
        assert unit.value() == pytest.approx(1.25)
        assert len(unit.for_sale()) == 1
        assert unit.violations() == []

    def test_item_pricing_sells_the_whole_line(self, item_pricing):
        x = solve_frac_opt(item_pricing).allocation
        unit = build_unit_allocation(x)
        sale = unit.for_sale()
        assert [b.descriptor() for b in sale] == ["0-7@1"]
        assert unit.members(sale[0].id) == (8,)
        assert unit.value() == pytest.approx(7.5 * 0.875 / 4)

    def test_bundles_partition_copies(self, small_line):
        x = solve_frac_opt(small_line).allocation
        unit = build_unit_allocation(x)
        copies = [c for b in unit.bundles for c in b.item_copies()]
        assert sorted(copies) == [(t, 1) for t in range(4)]

    def test_random_instances_are_valid(self):
        for seed in range(15):
            inst = gen_random_interval(10, 6, max_len=4, seed=seed)
            x = solve_frac_opt(inst).allocation
            unit = build_unit_allocation(x, offsets=8)
            assert unit.violations() == []
            assert unit.value() > 0
            assert unit.value() <= frac_val(x) + 1e-9
            for bundle in unit.for_sale():
                assert unit.bundle_weight(bundle.id) <= 1 + 1e-9

    def test_empty_allocation(self, small_line):
        unit = build_unit_allocation(FractionalAllocation.zeros(small_line))
        assert unit.for_sale() == ()
        assert unit.value() == 0


@pytest.mark.slow
def test_random_sweep_keeps_bundles_light():
    for seed in range(200):
        inst = gen_random_interval(16, 10, max_len=8, seed=seed)
        x = solve_frac_opt(inst).allocation
        unit = build_unit_allocation(x)
        assert unit.violations() == []
        for bundle in unit.for_sale():
            assert unit.bundle_weight(bundle.id) <= 1 + 1e-9
