"""Math kernel tests: frozen examples plus randomized property checks."""

import numpy as np
import pytest

from partcrop.core import (
    avgpool_spatial,
    bilinear_resize,
    cosine_sim,
    kl_energy,
    query_similarities,
    softmax,
    sort_desc,
)
from partcrop.errors import DegenerateInputError, InvalidInputError
from partcrop.rng import Stream


class TestSoftmax:
    def test_constant_input_is_uniform(self):
        np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5], atol=1e-15)
        np.testing.assert_allclose(softmax([3.7] * 4), [0.25] * 4, atol=1e-15)

    def test_two_value_example(self):
        np.testing.assert_allclose(softmax([1.0, 0.0]), [0.731059, 0.268941], atol=1e-6)

    def test_sums_to_one(self):
        for i in range(50):
            v = Stream(i, "softmax-sum").normal(9) * 20.0
            assert abs(float(softmax(v).sum()) - 1.0) < 1e-9

    def test_shift_invariance(self):
        for i in range(50):
            s = Stream(i, "softmax-shift")
            v = s.normal(7) * 5.0
            c = float(s.normal(1)[0]) * 10.0
            np.testing.assert_allclose(softmax(v + c), softmax(v), atol=1e-12)

    def test_large_values_stable(self):
        out = softmax([1000.0, 999.0])
        assert np.all(np.isfinite(out))

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            softmax([1.0, np.nan])
        with pytest.raises(InvalidInputError):
            softmax([np.inf, 0.0])
        with pytest.raises(InvalidInputError):
            softmax([])


class TestKlEnergy:
    def test_identical_distributions_are_zero(self):
        assert kl_energy([0.5, 0.5], [0.5, 0.5]) == 0.0
        for n in (2, 5, 16):
            u = np.full(n, 1.0 / n)
            assert kl_energy(u, u) == 0.0

    def test_hand_evaluated_example(self):
        v = softmax([1.0, 0.0])
        assert kl_energy(v, [0.5, 0.5]) == pytest.approx(0.120115, abs=1e-6)

    def test_self_energy_and_nonnegativity(self):
        for i in range(100):
            s = Stream(i, "kl-props")
            b = softmax(s.normal(8) * 3.0)
            v = softmax(s.normal(8) * 3.0)
            assert abs(kl_energy(b, b)) < 1e-12
            assert kl_energy(v, b) >= -1e-12

    def test_zero_benchmark_entries_contribute_nothing(self):
        assert kl_energy([0.5, 0.5], [1.0, 0.0]) == pytest.approx(np.log(2.0))

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            kl_energy([0.5, 0.5], [1.0 / 3] * 3)


class TestQuerySimilarities:
    def test_identity_map(self):
        np.testing.assert_array_equal(query_similarities(np.eye(2), [1.0, 0.0]), [1.0, 0.0])

    def test_zero_map(self):
        np.testing.assert_array_equal(query_similarities(np.zeros((3, 2)), [5.0, -2.0]), np.zeros(3))

    def test_hand_matmul(self):
        np.testing.assert_array_equal(
            query_similarities([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0]), [3.0, 7.0]
        )

    def test_matches_scalar_loop_oracle(self):
        for i in range(20):
            s = Stream(i, "matmul-oracle")
            chi = s.normal(35).reshape(5, 7)
            p = s.normal(7)
            expected = [sum(chi[r, c] * p[c] for c in range(7)) for r in range(5)]
            np.testing.assert_allclose(query_similarities(chi, p), expected, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            query_similarities(np.eye(2), [1.0, 0.0, 0.0])


class TestCosineSim:
    def test_parallel(self):
        assert cosine_sim([3.0, 4.0], [3.0, 4.0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_sim([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_45_degrees(self):
        assert cosine_sim([1.0, 0.0], [1.0, 1.0]) == pytest.approx(0.707107, abs=1e-6)

    def test_scale_invariance(self):
        for i in range(50):
            s = Stream(i, "cos-scale")
            a = s.normal(6)
            b = s.normal(6)
            alpha, beta = s.uniform_range(0.1, 50.0, 2)
            assert cosine_sim(alpha * a, beta * b) == pytest.approx(cosine_sim(a, b), abs=1e-9)

    def test_zero_norm_is_degenerate(self):
        with pytest.raises(DegenerateInputError):
            cosine_sim([0.0, 0.0], [1.0, 2.0])


class TestAvgpool:
    def test_constant_map(self):
        m = np.tile(np.array([1.0, -2.0, 3.0]), (4, 5, 1))
        np.testing.assert_array_equal(avgpool_spatial(m), [1.0, -2.0, 3.0])

    def test_single_position(self):
        m = np.array([[[7.0, 8.0]]])
        np.testing.assert_array_equal(avgpool_spatial(m), [7.0, 8.0])

    def test_two_position_mean(self):
        m = np.array([[[2.0]], [[4.0]]])  # 2x1x1
        np.testing.assert_array_equal(avgpool_spatial(m), [3.0])


class TestSortDesc:
    def test_basic(self):
        np.testing.assert_array_equal(sort_desc([1.0, 3.0, 2.0]), [3.0, 2.0, 1.0])

    def test_single(self):
        np.testing.assert_array_equal(sort_desc([5.0]), [5.0])

    def test_stable_ties(self):
        # equal keys keep input order: the two 2.0s stay in original order
        v = np.array([2.0, 2.0, 1.0])
        out = v[np.argsort(-v, kind="stable")]
        np.testing.assert_array_equal(sort_desc([2.0, 2.0, 1.0]), out)
        np.testing.assert_array_equal(sort_desc([2.0, 2.0, 1.0]), [2.0, 2.0, 1.0])

    def test_permutation_and_monotone(self):
        for i in range(50):
            v = Stream(i, "sort-prop").normal(20)
            out = sort_desc(v)
            assert sorted(out.tolist()) == sorted(v.tolist())
            assert np.all(np.diff(out) <= 0)


class TestBilinearResize:
    def test_constant_image(self):
        img = np.full((3, 5, 2), 0.7)
        out = bilinear_resize(img, 7, 2)
        np.testing.assert_allclose(out, 0.7, atol=1e-15)

    def test_identity_is_bit_exact(self):
        img = Stream(0, "resize-id").uniform(4 * 6 * 3).reshape(4, 6, 3)
        assert np.array_equal(bilinear_resize(img, 4, 6), img)

    def test_downsample_to_center(self):
        img = np.array([[[0.0], [1.0]], [[2.0], [3.0]]])
        np.testing.assert_array_equal(bilinear_resize(img, 1, 1), [[[1.5]]])

    def test_batch_matches_single(self):
        imgs = Stream(1, "resize-batch").uniform(2 * 5 * 4 * 3).reshape(2, 5, 4, 3)
        batched = bilinear_resize(imgs, 3, 7)
        for k in range(2):
            assert np.array_equal(batched[k], bilinear_resize(imgs[k], 3, 7))

    def test_rejects_bad_dims(self):
        with pytest.raises(InvalidInputError):
            bilinear_resize(np.zeros((2, 2, 1)), 0, 3)
