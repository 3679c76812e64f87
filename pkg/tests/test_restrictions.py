"""载荷约束目录与自由参数计数。"""
import numpy as np
import pytest

from core.errors import ConstraintViolation, IncompatibleShape
from core.restrictions import (
    LoadingRestriction,
    MaskCode,
    RestrictionKind,
    build_mask,
    count_free_params,
    groups_from_labels,
)
from core.schemas import TvMode

FULL = LoadingRestriction(RestrictionKind.FULL)
LT = LoadingRestriction(RestrictionKind.LT)


class TestRestrictionKind:
    @pytest.mark.parametrize(
        "alias, kind",
        [("GS-LT", RestrictionKind.GROUP_LT), ("gs", RestrictionKind.GROUP_COMMON),
         ("2F-GS", RestrictionKind.TWO_FACTOR_GROUP), ("LT", RestrictionKind.LT)],
    )
    def test_aliases(self, alias, kind):
        assert RestrictionKind.parse(alias) is kind

    def test_unknown_kind(self):
        with pytest.raises(ConstraintViolation):
            RestrictionKind.parse("upper")

    def test_fixed_c1_follows_kind(self):
        assert FULL.fixed_c1 is True
        assert LT.fixed_c1 is False

    def test_inconsistent_fixed_c1(self):
        with pytest.raises(ConstraintViolation):
            LoadingRestriction(RestrictionKind.LT, fixed_c1=True)

    def test_groups_must_be_contiguous(self):
        with pytest.raises(ConstraintViolation):
            LoadingRestriction(RestrictionKind.GROUP_LT, groups=(1, 3, 3))

    def test_required_r(self):
        gs = LoadingRestriction(RestrictionKind.GROUP_COMMON, groups=(1, 1, 2, 2, 3))
        with pytest.raises(IncompatibleShape):
            gs.validate(5, 3)
        gs.validate(5, 4)


class TestMasks:
    def test_lower_triangular_pattern(self):
        mask = build_mask(LT, 8, 3)
        for i in range(3):
            assert mask.codes[i, i] == MaskCode.ONE
            for j in range(i + 1, 3):
                assert mask.codes[i, j] == MaskCode.ZERO
        assert mask.n_free == 24 - 6

    def test_full_tie_order_is_column_major(self):
        mask = build_mask(FULL, 4, 2)
        np.testing.assert_array_equal(mask.tie_vec(), np.arange(8))

    def test_group_common_ties(self):
        restr = LoadingRestriction(RestrictionKind.GROUP_COMMON, groups=(1, 1, 2, 2))
        mask = build_mask(restr, 4, 3)
        assert len(set(mask.tie[:, 0])) == 1
        assert mask.tie[0, 1] == mask.tie[1, 1] >= 0
        assert mask.codes[2, 1] == MaskCode.ZERO
        assert mask.tie[2, 2] == mask.tie[3, 2] >= 0
        assert mask.n_free == 3

    def test_two_factor_group(self):
        restr = LoadingRestriction(RestrictionKind.TWO_FACTOR_GROUP, groups=(1, 2, 1, 2))
        mask = build_mask(restr, 4, 2)
        assert mask.n_free == 3
        assert mask.tie[0, 1] == mask.tie[2, 1] != mask.tie[1, 1]

    def test_group_lt(self):
        restr = LoadingRestriction(RestrictionKind.GROUP_LT, groups=(1, 1, 2, 2, 2))
        mask = build_mask(restr, 5, 2)
        assert mask.codes[0, 1] == MaskCode.ZERO
        assert mask.tie[2, 0] == mask.tie[4, 0]
        assert mask.n_free == 3

    def test_project_is_idempotent(self):
        restr = LoadingRestriction(RestrictionKind.GROUP_COMMON, groups=(1, 2, 1, 2, 2))
        mask = build_mask(restr, 5, 3)
        lam = np.random.default_rng(0).standard_normal((5, 3))
        once = mask.project(lam)
        np.testing.assert_allclose(mask.project(once), once)

    def test_expand_compress_inverse(self):
        mask = build_mask(LT, 6, 2)
        theta = np.arange(mask.n_free, dtype=float) + 1.0
        np.testing.assert_array_equal(mask.compress(mask.expand(theta)), theta)


_N = 12
_KINDS = [
    (RestrictionKind.FULL, None, 3),
    (RestrictionKind.LT, None, 3),
    (RestrictionKind.GROUP_LT, 3, 3),
    (RestrictionKind.GROUP_COMMON, 3, 4),
    (RestrictionKind.TWO_FACTOR_GROUP, 3, 2),
]


def _random_restriction(kind, p, rng):
    if p is None:
        return LoadingRestriction(kind)
    labels = np.concatenate([np.arange(1, p + 1), rng.integers(1, p + 1, _N - p)])
    return LoadingRestriction(kind, groups=tuple(int(g) for g in rng.permutation(labels)))


def _same_ties(a, b):
    """两个 tie 数组描述同一划分（编号可不同）。"""
    np.testing.assert_array_equal(a < 0, b < 0)
    live = a >= 0
    pairs = set(zip(a[live].tolist(), b[live].tolist()))
    assert len(pairs) == len(set(a[live].tolist())) == len(set(b[live].tolist()))


class TestMaskProperties:
    @pytest.mark.parametrize("seed", range(5))
    def test_full_mask_ignores_series_order(self, seed):
        perm = np.random.default_rng(seed).permutation(_N)
        mask = build_mask(FULL, _N, 3)
        np.testing.assert_array_equal(mask.codes[perm], mask.codes)
        _same_ties(mask.tie[perm], mask.tie)
        assert mask.n_free == _N * 3

    @pytest.mark.parametrize("kind, p, r", [k for k in _KINDS if k[1] is not None])
    @pytest.mark.parametrize("seed", range(5))
    def test_within_group_permutation_keeps_rows_consistent(self, kind, p, r, seed):
        rng = np.random.default_rng(seed)
        restr = _random_restriction(kind, p, rng)
        groups = np.array(restr.groups)
        perm = np.arange(_N)
        for g in range(1, p + 1):
            idx = np.flatnonzero(groups == g)
            perm[idx] = rng.permutation(idx)
        np.testing.assert_array_equal(groups[perm], groups)
        mask = build_mask(restr, _N, r)
        np.testing.assert_array_equal(mask.codes[perm], mask.codes)
        np.testing.assert_array_equal(mask.tie[perm], mask.tie)

    @pytest.mark.parametrize("kind, p, r", [k for k in _KINDS if k[1] is not None])
    @pytest.mark.parametrize("seed", range(5))
    def test_relabelled_series_permute_mask_rows(self, kind, p, r, seed):
        rng = np.random.default_rng(seed)
        restr = _random_restriction(kind, p, rng)
        perm = rng.permutation(_N)
        moved = LoadingRestriction(kind, groups=tuple(np.array(restr.groups)[perm].tolist()))
        mask = build_mask(restr, _N, r)
        other = build_mask(moved, _N, r)
        np.testing.assert_array_equal(other.codes, mask.codes[perm])
        _same_ties(other.tie, mask.tie[perm])

    @pytest.mark.parametrize("kind, p, r", _KINDS)
    @pytest.mark.parametrize("seed", range(3))
    def test_entry_accounting_matches_free_count(self, kind, p, r, seed):
        restr = _random_restriction(kind, p, np.random.default_rng(seed))
        mask = build_mask(restr, _N, r)
        counts = [mask.count(code) for code in MaskCode]
        assert sum(counts) == _N * r
        tied = mask.tie[mask.codes == MaskCode.TIED]
        representatives = mask.count(MaskCode.FREE) + len(set(tied.tolist()))
        assert representatives == mask.n_free
        assert len(set(mask.tie[mask.tie >= 0].tolist())) == mask.n_free
        factor_part = (r - int(restr.fixed_c1)) + r + 1 + _N + 1
        assert count_free_params(restr, _N, r) == representatives + factor_part

    def test_two_factor_group_has_one_shared_and_p_group_values(self):
        restr = LoadingRestriction(RestrictionKind.TWO_FACTOR_GROUP, groups=(1,) * 4 + (2,) * 4 + (3,) * 4)
        mask = build_mask(restr, _N, 2)
        assert mask.n_free == 4
        assert mask.count(MaskCode.TIED) == 2 * _N


class TestCountFreeParams:
    def test_one_factor_full_on_eight_series(self):
        assert count_free_params(FULL, 8, 1) == 19

    def test_three_factor_full(self):
        assert count_free_params(FULL, 8, 3) == 39

    @pytest.mark.parametrize("r, df", [(2, 2), (3, 5), (4, 9)])
    def test_lt_vs_full_degrees_of_freedom(self, r, df):
        assert count_free_params(FULL, 8, r) - count_free_params(LT, 8, r) == df

    def test_diagonal_b_adds_r_minus_one(self):
        assert count_free_params(FULL, 5, 2, shared_b=False) - count_free_params(FULL, 5, 2) == 1

    def test_scalar_targeted_adds_two(self):
        base = count_free_params(FULL, 8, 2)
        assert count_free_params(FULL, 8, 2, tv_mode=TvMode.SCALAR_TARGETED) == base + 2

    def test_diagonal_shared_c(self):
        # 因子块 (1 + 2 + 2 + 5 + 1) + 共享 c_l + A_l, B_l 各 10
        assert count_free_params(FULL, 5, 2, shared_b=False, tv_mode="diagonal_shared_c") == 11 + 1 + 20

    def test_diagonal_shared_c_rejects_restrictions(self):
        with pytest.raises(ConstraintViolation):
            count_free_params(LT, 5, 2, tv_mode="diagonal_shared_c")


def test_groups_from_labels():
    assert groups_from_labels(["real", "real", "fin", "real", "survey"]) == (1, 1, 2, 1, 3)
