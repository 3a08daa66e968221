import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.color import rgb2lab

from hsiband.cube_io import LabeledPatch, PatchSet
from hsiband.errors import ValidationError
from hsiband.evalmetrics import (
    LabColor,
    PairMetricRecord,
    aggregate_report,
    delta_e,
    euclidean_d2,
    evaluate_pairs,
    hotelling_t2,
    patch_stats,
    read_records_csv,
    sam_angle,
    srgb_to_lab,
)

from conftest import DATA


def test_patch_stats_fixture():
    st_ = patch_stats([[0, 0], [2, 0], [0, 2], [2, 2]])
    assert st_.mean.tolist() == [1.0, 1.0]
    # each axis: deviations +-1, four samples, n-1 divisor
    assert st_.covariance == pytest.approx(np.diag([4 / 3, 4 / 3]))
    assert st_.n == 4


def test_patch_stats_needs_two():
    with pytest.raises(ValidationError):
        patch_stats([[1.0, 2.0]])


class TestDistances:
    def test_d2_345(self):
        assert euclidean_d2([0, 0, 0], [3, 4, 0]) == 5.0

    def test_sam_orthogonal(self):
        assert sam_angle([1, 0, 0], [0, 1, 0]) == pytest.approx(math.pi / 2)

    def test_sam_45(self):
        assert sam_angle([1, 0], [1, 1]) == pytest.approx(math.pi / 4)

    def test_sam_zero_vector(self):
        with pytest.raises(ValidationError):
            sam_angle([0, 0, 0], [1, 2, 3])

    @settings(max_examples=60, deadline=None)
    @given(
        a=st.lists(st.floats(0.01, 255), min_size=3, max_size=3),
        b=st.lists(st.floats(0.01, 255), min_size=3, max_size=3),
        k=st.floats(0.01, 100),
    )
    def test_sam_scale_invariant(self, a, b, k):
        assert sam_angle(np.array(a) * k, b) == pytest.approx(sam_angle(a, b), abs=1e-6)

    @settings(max_examples=60, deadline=None)
    @given(
        a=st.lists(st.floats(-100, 100), min_size=3, max_size=3),
        b=st.lists(st.floats(-100, 100), min_size=3, max_size=3),
    )
    def test_d2_symmetric(self, a, b):
        assert euclidean_d2(a, b) == euclidean_d2(b, a) >= 0


def permutation_pvalue(x, y, n_perm, rng):
    """Reference p-value from a label-permutation distribution of T^2."""
    obs = hotelling_t2(patch_stats(x), patch_stats(y))[0]
    z = np.vstack([x, y])
    hits = 0
    for _ in range(n_perm):
        idx = rng.permutation(len(z))
        t = hotelling_t2(patch_stats(z[idx[: len(x)]]), patch_stats(z[idx[len(x) :]]))[0]
        hits += t >= obs
    return (hits + 1) / (n_perm + 1)


class TestHotelling:
    def test_identical_sets(self):
        x = np.random.default_rng(0).normal(size=(20, 3))
        assert hotelling_t2(patch_stats(x), patch_stats(x)) == (0.0, 1.0)

    def test_five_sigma(self):
        rng = np.random.default_rng(1)
        a = rng.normal(0, 1, (100, 3))
        b = rng.normal(5, 1, (100, 3))
        t2, p = hotelling_t2(patch_stats(a), patch_stats(b))
        assert p < 0.001 and t2 > 100

    def test_one_dim_equals_squared_t(self):
        # in one dimension T^2 is the squared pooled two-sample t statistic
        from scipy import stats

        rng = np.random.default_rng(2)
        a, b = rng.normal(0, 1, 15), rng.normal(0.7, 1, 12)
        t, p = stats.ttest_ind(a, b)
        t2, p2 = hotelling_t2(patch_stats(a), patch_stats(b))
        assert t2 == pytest.approx(t**2, rel=1e-6)
        assert p2 == pytest.approx(p, rel=1e-6)

    @pytest.mark.parametrize("d,shift", [(1, 0.45), (3, 0.35)])
    def test_permutation_oracle(self, d, shift):
        rng = np.random.default_rng(10 + d)
        x = rng.normal(0, 1, (30, d))
        y = rng.normal(shift, 1, (30, d))
        p = hotelling_t2(patch_stats(x), patch_stats(y))[1]
        ref = permutation_pvalue(x, y, 3000, rng)
        assert abs(p - ref) <= 0.02

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_affine_invariant(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(0, 1, (25, 3)), rng.normal(0.5, 1, (25, 3))
        m = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        off = rng.normal(size=3)
        t1 = hotelling_t2(patch_stats(a), patch_stats(b))[0]
        t2 = hotelling_t2(patch_stats(a @ m.T + off), patch_stats(b @ m.T + off))[0]
        assert t2 == pytest.approx(t1, rel=1e-6)

    def test_constant_patches_finite(self):
        a = np.full((10, 3), 100.0)
        b = np.full((10, 3), 120.0)
        t2, p = hotelling_t2(patch_stats(a), patch_stats(b))
        assert math.isfinite(t2) and p < 1e-6

    def test_too_few_samples(self):
        with pytest.raises(ValidationError):
            hotelling_t2(patch_stats(np.eye(3)[:2]), patch_stats(np.eye(3)[1:]))


class TestLab:
    def test_white(self):
        lab = srgb_to_lab([255, 255, 255])
        assert lab.L == pytest.approx(100, abs=1e-3) and abs(lab.a) < 0.01 and abs(lab.b) < 0.01

    def test_black(self):
        assert srgb_to_lab([0, 0, 0]).as_array() == pytest.approx([0, 0, 0], abs=1e-9)

    def test_mid_gray_against_reference(self):
        ref = rgb2lab(np.array([[[128, 128, 128]]], dtype=np.uint8))[0, 0]
        assert ref[0] == pytest.approx(53.585, abs=0.01)
        assert srgb_to_lab([128, 128, 128]).L == pytest.approx(ref[0], abs=0.01)

    @settings(max_examples=80, deadline=None)
    @given(st.tuples(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255)))
    def test_matches_reference(self, rgb):
        ref = rgb2lab(np.array([[rgb]], dtype=np.uint8))[0, 0]
        assert srgb_to_lab(rgb).as_array() == pytest.approx(ref, abs=0.05)

    def test_range(self):
        with pytest.raises(ValidationError):
            srgb_to_lab([300, 0, 0])


class TestDeltaE:
    def test_white_black(self):
        assert delta_e(srgb_to_lab([255] * 3), srgb_to_lab([0] * 3)) == pytest.approx(100, abs=0.01)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-100, 100), min_size=3, max_size=3),
        st.lists(st.floats(-100, 100), min_size=3, max_size=3),
        st.lists(st.floats(-100, 100), min_size=3, max_size=3),
    )
    def test_metric(self, x, y, z):
        a, b, c = LabColor(*x), LabColor(*y), LabColor(*z)
        assert delta_e(a, a) == 0
        assert delta_e(a, b) == pytest.approx(delta_e(b, a))
        assert delta_e(a, c) <= delta_e(a, b) + delta_e(b, c) + 1e-9


def nineteen_patch_set():
    patches = [LabeledPatch("asphalt", 0, (0, 0, 8, 8))]
    for i in range(19):
        patches.append(LabeledPatch(f"p{i}", 1, (8 * (i % 5) + 8 * (i >= 15), 8 + 8 * (i // 5), 8, 8)))
    return PatchSet(tuple(patches), {0: "asphalt", 1: "cloth"})


class TestEvaluatePairs:
    def test_nineteen_pairs(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (48, 48, 3), dtype=np.uint8)
        recs = evaluate_pairs(img, nineteen_patch_set())
        assert len(recs) == 19 and [r.pair for r in recs] == [f"p{i}" for i in range(19)]

    def test_identical_patch_zero(self):
        img = np.full((20, 20, 3), 90, dtype=np.uint8)
        img += np.random.default_rng(1).integers(0, 3, img.shape, dtype=np.uint8)
        img[10:15, 10:15] = img[0:5, 0:5]
        ps = PatchSet((LabeledPatch("background", 0, (0, 0, 5, 5)), LabeledPatch("x", 1, (10, 10, 5, 5))), {0: "background", 1: "cloth"})
        r = evaluate_pairs(img, ps)[0]
        assert (r.d2, r.sam, r.t2, r.de, r.p_value) == (0.0, 0.0, 0.0, 0.0, 1.0)

    def test_needs_rgb(self):
        with pytest.raises(ValidationError):
            evaluate_pairs(np.zeros((5, 5, 4), np.uint8), nineteen_patch_set())


def recs(vals, mod="rgb"):
    return [PairMetricRecord(f"p{i}", *v, modality=mod) for i, v in enumerate(vals)]


class TestAggregate:
    def test_hand_fixture(self):
        r = aggregate_report(recs([(1, 0.1, 10, 2), (3, 0.3, 30, 4)]), recs([(4, 0.2, 40, 6), (4, 0.2, 40, 6)], "composite"))
        assert r.averages["rgb"] == {"d2": 2.0, "sam": pytest.approx(0.2), "t2": 20.0, "de": 3.0}
        assert r.improvement_pct["d2"] == pytest.approx(100.0)
        assert r.improvement_pct["de"] == pytest.approx(100.0)
        assert r.winners[0]["d2"] == "composite"

    def test_identical_lists(self):
        a = recs([(1, 0.1, 10, 2), (3, 0.3, 30, 4)])
        r = aggregate_report(a, recs([(1, 0.1, 10, 2), (3, 0.3, 30, 4)], "composite"))
        assert all(v == 0.0 for v in r.improvement_pct.values())
        assert all(w == "tie" for row in r.winners for w in row.values())

    def test_pair_mismatch(self):
        a = recs([(1, 1, 1, 1)])
        b = [PairMetricRecord("other", 1, 1, 1, 1)]
        with pytest.raises(ValidationError, match="mismatch"):
            aggregate_report(a, b)

    def test_csv_round_trip(self, tmp_path):
        a = recs([(1, 0.1, 10, 2), (3, 0.3, 30, 4)])
        b = recs([(2, 0.2, 20, 3), (5, 0.5, 50, 5)], "composite")
        aggregate_report(a, b).to_csv(tmp_path / "r.csv")
        ra, rb = read_records_csv(tmp_path / "r.csv")
        assert [(x.d2, x.de) for x in ra] == [(1, 2), (3, 4)]
        assert [(x.t2, x.sam) for x in rb] == [(20, 0.2), (50, 0.5)]


class TestReferenceRows:
    def test_row_count(self):
        rgb, comp = read_records_csv(DATA / "reference_vru_rows.csv")
        assert len(rgb) == len(comp) == 19

    def test_recovered_delta_e_value(self):
        # Reading the one three-decimal RGB entry as 17.07 makes its column
        # average and improvement agree with the printed summary rows.
        rgb, comp = read_records_csv(DATA / "reference_vru_rows.csv")
        odd = [r for r in rgb if r.de == 17.707]
        assert len(odd) == 1
        odd[0].de = 17.07
        rep = aggregate_report(rgb, comp)
        assert rep.averages["rgb"]["de"] == pytest.approx(12.37, abs=0.01)
        assert rep.improvement_pct["de"] == pytest.approx(246.62, abs=0.5)

    def test_sam_recoverable_from_row_means(self):
        rgb, comp = read_records_csv(DATA / "reference_vru_rows.csv")
        assert aggregate_report(rgb, comp).improvement_pct["sam"] == pytest.approx(528.46, abs=0.01)

    def test_bad_header(self, tmp_path):
        (tmp_path / "x.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ValidationError, match="header"):
            read_records_csv(tmp_path / "x.csv")
