import numpy as np
import pytest

import coalition_shap as cs
from conftest import HOUR, make_dataset

CAPS_MARKER = cs.Capabilities(accepts_missing_target=True, accepts_row_drop=False)
CAPS_DROP = cs.Capabilities(accepts_missing_target=False, accepts_row_drop=True)


@pytest.fixture(scope="module")
def big_dataset():
    return make_dataset(n_hours=24 * 45)


def task_for(dataset, context_hours):
    return cs.ForecastTask(dataset.target.start + (context_hours + 48) * HOUR, context_hours)


class TestGroupingSpec:
    def test_default_matches_paper_windows(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        names = [g.name for g in spec.temporal_groups]
        assert names == ["long_term", "intermediate", "short_term", "last_day"]
        windows = {g.name: (g.oldest, g.newest) for g in spec.temporal_groups}
        assert windows["last_day"] == (-24, -1)
        assert windows["short_term"] == (-168, -25)
        assert windows["intermediate"] == (-672, -169)
        assert windows["long_term"] == (-720, -673)

    def test_seven_groups_with_three_covariates(self):
        ds = cs.generate_synthetic_dataset(seed=1, days=45)
        spec = cs.default_grouping(ds, task_for(ds, 900))
        assert spec.n_groups == 7

    def test_clipping_drops_and_shrinks(self, big_dataset):
        spec = cs.default_grouping(big_dataset, task_for(big_dataset, 200))
        windows = {g.name: (g.oldest, g.newest) for g in spec.temporal_groups}
        assert "long_term" not in windows
        assert windows["intermediate"] == (-200, -169)
        # 3 surviving temporal groups + 2 covariates
        assert spec.n_groups == 5

    def test_no_covariates_gives_four_groups(self):
        ds = cs.Dataset(target=make_dataset(24 * 45).target)
        spec = cs.default_grouping(ds, task_for(ds, 900))
        assert spec.n_groups == 4

    def test_context_under_24h_rejected(self, big_dataset):
        with pytest.raises(cs.DataError):
            cs.default_grouping(big_dataset, task_for(big_dataset, 12))

    def test_gapped_windows_rejected(self):
        with pytest.raises(cs.DataError):
            cs.GroupingSpec(
                temporal_groups=(
                    cs.TemporalGroup("old", -48, -30),
                    cs.TemporalGroup("new", -24, -1),
                ),
                covariate_groups=(),
            )

    def test_group_cap(self):
        with pytest.raises(cs.DataError):
            cs.GroupingSpec(
                temporal_groups=(cs.TemporalGroup("t", -1, -1),),
                covariate_groups=tuple(f"c{i}" for i in range(25)),
            )

    def test_roundtrip_dict(self, big_dataset):
        spec = cs.default_grouping(big_dataset, task_for(big_dataset, 720))
        assert cs.GroupingSpec.from_dict(spec.to_dict()) == spec


class TestEnumerate:
    def test_two_groups(self):
        spec = cs.GroupingSpec((cs.TemporalGroup("t", -24, -1),), ("c",))
        assert list(cs.enumerate_coalitions(spec)) == [0, 1, 2, 3]

    def test_seven_groups_count(self):
        ds = cs.generate_synthetic_dataset(seed=1, days=45)
        spec = cs.default_grouping(ds, task_for(ds, 900))
        assert len(cs.enumerate_coalitions(spec)) == 128

    def test_degenerate_empty_grouping(self):
        spec = cs.GroupingSpec((), ())
        assert list(cs.enumerate_coalitions(spec)) == [0]


class TestApplyCoalition:
    def test_full_coalition_is_identity(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        full_mask = cs.apply_coalition(big_dataset, task, spec, (1 << spec.n_groups) - 1, CAPS_MARKER)
        reference = cs.full_input(big_dataset, task)
        assert np.array_equal(full_mask.offsets, reference.offsets)
        assert np.array_equal(full_mask.values, reference.values)
        assert set(full_mask.covariates) == set(reference.covariates)
        for name in reference.covariates:
            assert np.array_equal(full_mask.covariates[name].past, reference.covariates[name].past)

    def test_empty_coalition_is_base_signal(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        assert isinstance(cs.apply_coalition(big_dataset, task, spec, 0, CAPS_MARKER), cs.BaseSignal)

    def test_oldest_absent_prefix_truncates(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        # All groups except long_term (bit 0): context shortened to 672h, no holes.
        coalition = (1 << spec.n_groups) - 1 - 1
        masked = cs.apply_coalition(big_dataset, task, spec, coalition, CAPS_MARKER)
        assert len(masked) == 672
        assert masked.offsets[0] == -672
        assert not masked.has_missing

    def test_interior_absent_marks_missing(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        names = spec.group_names
        coalition = (1 << spec.n_groups) - 1 - (1 << names.index("short_term"))
        masked = cs.apply_coalition(big_dataset, task, spec, coalition, CAPS_MARKER)
        assert len(masked) == 720
        nan_offsets = masked.offsets[np.isnan(masked.values)]
        assert nan_offsets.min() == -168 and nan_offsets.max() == -25
        assert len(nan_offsets) == 144

    def test_interior_absent_drops_rows(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        names = spec.group_names
        coalition = (1 << spec.n_groups) - 1 - (1 << names.index("short_term"))
        masked = cs.apply_coalition(big_dataset, task, spec, coalition, CAPS_DROP)
        assert len(masked) == 720 - 144
        assert not masked.is_contiguous
        assert not masked.has_missing
        assert -100 not in masked.offsets.tolist()

    def test_absent_covariates_omitted_entirely(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        names = spec.group_names
        coalition = (1 << spec.n_groups) - 1 - (1 << names.index("temperature"))
        masked = cs.apply_coalition(big_dataset, task, spec, coalition, CAPS_MARKER)
        assert "temperature" not in masked.covariates
        assert "irradiance" in masked.covariates

    def test_all_temporal_absent_with_covariates_keeps_future(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        names = spec.group_names
        coalition = 1 << names.index("temperature")
        masked = cs.apply_coalition(big_dataset, task, spec, coalition, CAPS_MARKER)
        assert len(masked) == 0
        cov = masked.covariates["temperature"]
        assert len(cov.past) == 0
        assert len(cov.future) == task.horizon_hours

    def test_masking_never_alters_values(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        reference = cs.full_input(big_dataset, task)
        ref_map = dict(zip(reference.offsets.tolist(), reference.values.tolist()))
        for coalition in [5, 21, 37, 44, 63]:
            masked = cs.apply_coalition(big_dataset, task, spec, coalition, CAPS_DROP)
            if isinstance(masked, cs.BaseSignal) or len(masked) == 0:
                continue
            for off, val in zip(masked.offsets.tolist(), masked.values.tolist()):
                assert val == ref_map[off]

    def test_monotone_content(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        rng = np.random.default_rng(5)
        for _ in range(25):
            b = int(rng.integers(1, 1 << spec.n_groups))
            a = b & int(rng.integers(0, 1 << spec.n_groups))
            ma = cs.apply_coalition(big_dataset, task, spec, a, CAPS_MARKER)
            mb = cs.apply_coalition(big_dataset, task, spec, b, CAPS_MARKER)
            if isinstance(ma, cs.BaseSignal):
                continue
            assert ma.observed_pairs() <= mb.observed_pairs()
            assert set(ma.covariates) <= set(mb.covariates)

    def test_coalition_out_of_range(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        with pytest.raises(cs.DataError):
            cs.apply_coalition(big_dataset, task, spec, 1 << spec.n_groups, CAPS_MARKER)

    def test_pure_function(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        a = cs.apply_coalition(big_dataset, task, spec, 37, CAPS_MARKER)
        b = cs.apply_coalition(big_dataset, task, spec, 37, CAPS_MARKER)
        assert np.array_equal(a.offsets, b.offsets)
        assert np.array_equal(a.values, b.values, equal_nan=True)


class TestStrategyEquivalence:
    def test_observed_pairs_identical_for_both_forms(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        for coalition in cs.enumerate_coalitions(spec):
            marker = cs.apply_coalition(big_dataset, task, spec, coalition, CAPS_MARKER)
            dropped = cs.apply_coalition(big_dataset, task, spec, coalition, CAPS_DROP)
            if isinstance(marker, cs.BaseSignal):
                assert isinstance(dropped, cs.BaseSignal)
                continue
            assert marker.observed_pairs() == dropped.observed_pairs()

    def test_truncation_first_canonicalization(self, big_dataset):
        task = task_for(big_dataset, 720)
        spec = cs.default_grouping(big_dataset, task)
        oldest_present_start = {}
        for i, g in enumerate(spec.temporal_groups):
            oldest_present_start[i] = g.oldest
        for coalition in cs.enumerate_coalitions(spec):
            for caps in (CAPS_MARKER, CAPS_DROP):
                masked = cs.apply_coalition(big_dataset, task, spec, coalition, caps)
                if isinstance(masked, cs.BaseSignal) or len(masked) == 0:
                    continue
                assert not np.isnan(masked.values[0])
                first_present = next(
                    i for i in range(spec.n_temporal) if coalition >> i & 1
                )
                assert masked.offsets[0] == spec.temporal_groups[first_present].oldest
