import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsiband.bandstats import (
    CSNR_CAP,
    ContrastSampleSet,
    CsnrTable,
    correlation_matrix,
    csnr,
    csnr_high_probability,
    csnr_table,
    michelson_contrast,
)
from hsiband.cube_io import LabeledPatch, PatchSet
from hsiband.errors import ValidationError

from conftest import make_cube
from oracles import pearson_naive


class TestCorrelation:
    def test_unit_diagonal(self):
        x = np.random.default_rng(0).random((50, 4))
        assert np.all(np.diag(correlation_matrix(x).values) == 1.0)

    def test_exact_anticorrelation(self):
        x = np.random.default_rng(1).random(30)
        assert correlation_matrix(np.column_stack([x, -x])).values[0, 1] == pytest.approx(-1.0, abs=1e-12)

    def test_hand_value(self):
        # cov = 1.5, var_x = 1, var_y = 7/3
        expected = 1.5 / math.sqrt(7.0 / 3.0)
        assert expected == pytest.approx(0.98198050606, abs=1e-10)
        got = correlation_matrix(np.array([[1, 1], [2, 2], [3, 4]], float)).values[0, 1]
        assert got == pytest.approx(expected, abs=1e-12)

    def test_zero_variance_band(self, caplog):
        x = np.random.default_rng(2).random((20, 3))
        x[:, 1] = 0.7
        cm = correlation_matrix(x)
        assert cm.zero_variance.tolist() == [False, True, False]
        assert cm.values[1, 1] == 1.0
        assert cm.values[1, 0] == 0.0 and cm.values[2, 1] == 0.0
        assert "zero-variance" in caplog.text

    def test_needs_two_pixels(self):
        with pytest.raises(ValidationError):
            correlation_matrix(np.ones((1, 3)))

    def test_naive_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.random((200, 10)) @ rng.random((10, 10))
        cm = correlation_matrix(x).values
        cols = [x[:, j].tolist() for j in range(10)]
        naive = np.array([[pearson_naive(cols[i], cols[j]) for j in range(10)] for i in range(10)])
        assert np.max(np.abs(cm - naive)) <= 1e-9

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_affine_invariance(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(60, 5)) @ rng.normal(size=(5, 5))
        slope = rng.uniform(0.1, 10, 5)
        offset = rng.uniform(-5, 5, 5)
        a = correlation_matrix(x).values
        b = correlation_matrix(x * slope + offset).values
        assert np.max(np.abs(a - b)) <= 1e-9
        assert np.allclose(a, a.T, atol=1e-12) and np.all(np.abs(a) <= 1)

    def test_csv(self, tmp_path):
        correlation_matrix(np.random.default_rng(4).random((10, 3))).to_csv(tmp_path / "c.csv")
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "channel,0,1,2" and len(lines) == 4


class TestMichelson:
    def test_substitution(self):
        assert michelson_contrast(0.75, 0.25) == pytest.approx((0.75 - 0.25) / (0.75 + 0.25)) == 0.5

    def test_equal(self):
        assert michelson_contrast(0.4, 0.4) == 0.0

    def test_zero_denominator(self):
        assert michelson_contrast(0.0, 0.0) == 0.0

    def test_sign_follows_order(self):
        assert michelson_contrast(0.25, 0.75) == -0.5


class TestCsnr:
    def test_hand_value(self):
        mean, sd = 0.3, math.sqrt(((0.2 - 0.3) ** 2 + (0.4 - 0.3) ** 2) / 1)
        assert sd == pytest.approx(0.1414213562)
        assert csnr([0.2, 0.4]) == pytest.approx(mean / sd) == pytest.approx(2.1213203436)

    def test_zero_spread_cap(self):
        assert csnr([0.5, 0.5, 0.5]) == CSNR_CAP

    @pytest.mark.parametrize("c", [0.01, 0.3, 1.0])
    def test_symmetric_cancellation(self, c):
        assert csnr([c, -c]) == 0.0

    def test_all_zero(self):
        assert csnr([0.0, 0.0, 0.0]) == 0.0

    def test_sample_set_input(self):
        assert csnr(ContrastSampleSet(("a", "b"), [0.2, 0.4])) == pytest.approx(2.1213203436)

    def test_too_few(self):
        with pytest.raises(ValidationError):
            csnr([0.3])

    @settings(max_examples=60, deadline=None)
    @given(
        vals=st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=20).filter(lambda v: np.std(v) > 1e-6),
        scale=st.floats(0.01, 2.0),
    )
    def test_scale_invariance(self, vals, scale):
        a = csnr(vals)
        b = csnr(np.clip(np.asarray(vals) * scale, -1, 1))
        assert b == pytest.approx(a, rel=1e-12, abs=1e-12)


def two_patch_cube(bands=6, sep_band=None, noise=0.01, seed=0):
    rng = np.random.default_rng(seed)
    data = 0.4 + noise * rng.standard_normal((bands, 20, 20))
    if sep_band is not None:
        data[sep_band, 0:10, 0:10] += 0.3
    ps = PatchSet(
        (LabeledPatch("fg", 0, (0, 0, 10, 10)), LabeledPatch("background", 1, (10, 10, 10, 10))),
        {0: "cloth", 1: "background"},
    )
    return make_cube(np.clip(data, 0, 1)), ps


class TestCsnrTable:
    def test_identical_constant_patches(self):
        cube, ps = two_patch_cube(noise=0.0)
        t = csnr_table(cube, ps, draws=10)
        assert t.values.shape == (6, 1)
        assert np.all(t.values == 0.0)

    def test_separating_band_wins(self):
        cube, ps = two_patch_cube(bands=8, sep_band=5)
        t = csnr_table(cube, ps, draws=50, seed=3)
        # exhaustive comparison across bands
        others = [t.values[k, 0] for k in range(8) if k != 5]
        assert all(t.values[5, 0] > v for v in others)

    def test_shape_30_patches(self):
        rng = np.random.default_rng(0)
        cube = make_cube(rng.uniform(0.1, 0.9, (128, 60, 60)))
        patches = [LabeledPatch("bg", 0, (0, 0, 10, 10))]
        for i in range(29):
            patches.append(LabeledPatch(f"p{i}", 1 + i % 3, ((i % 5) * 10 + 10, (i // 5) * 10, 10, 10)))
        ps = PatchSet(tuple(patches), {0: "asphalt", 1: "cloth", 2: "tire", 3: "vegetation"})
        t = csnr_table(cube, ps, draws=4)
        assert t.values.shape == (128, 29)

    def test_reproducible(self):
        cube, ps = two_patch_cube(sep_band=2)
        a, b = csnr_table(cube, ps, seed=5), csnr_table(cube, ps, seed=5)
        assert a.values.tobytes() == b.values.tobytes()

    def test_no_pairs(self):
        cube, _ = two_patch_cube()
        ps = PatchSet((LabeledPatch("background", 0, (0, 0, 4, 4)),), {0: "background"})
        with pytest.raises(ValidationError, match="no foreground"):
            csnr_table(cube, ps)

    def test_draws_minimum(self):
        cube, ps = two_patch_cube()
        with pytest.raises(ValidationError):
            csnr_table(cube, ps, draws=1)


class TestHighProbability:
    def test_single_band(self):
        prof = csnr_high_probability(np.array([[1.0, 2.0, 3.0, 4.0]]), 75)
        assert prof.p_hi.tolist() == [0.25]

    def test_global_max_band(self):
        prof = csnr_high_probability(np.array([[1.0, 2.0], [9.0, 9.0]]), 75)
        assert prof.p_hi[1] == 1.0

    def test_hand_fixture(self):
        vals = np.array([[1, 2, 3, 4], [5, 6, 7, 8]], float)
        # 75th percentile of 1..8 with linear interpolation: 6 + 0.25 * (7 - 6)
        prof = csnr_high_probability(CsnrTable(vals, tuple((f"p{i}", "bg") for i in range(4))), 75)
        assert prof.threshold == pytest.approx(6.25)
        assert prof.p_hi.tolist() == [0.0, 0.5]
        assert prof.p_hi.sum() <= 2

    def test_bad_percentile(self):
        with pytest.raises(ValidationError):
            csnr_high_probability(np.ones((2, 2)), 100)

    def test_empty(self):
        with pytest.raises(ValidationError):
            csnr_high_probability(np.zeros((0, 0)), 50)
