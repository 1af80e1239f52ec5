import numpy as np
import pytest

from interlink.errors import DataError
from interlink.mmd import (
    KernelMixture,
    base_scale,
    mmd_gradient,
    mmd_unbiased,
)

from synth import central_difference, relative_error


def mmd_oracle(a1, a2, kernel):
    """Independent double-loop evaluation of the unbiased estimator."""
    n1, n2 = len(a1), len(a2)
    total = 0.0
    for mult in kernel.multipliers:
        sigma2 = (mult * kernel.base_scale) ** 2

        def k(x, y):
            return np.exp(-np.sum((x - y) ** 2) / (2 * sigma2))

        t1 = sum(
            k(a1[i], a1[j]) for i in range(n1) for j in range(n1) if i != j
        ) / (n1 * (n1 - 1))
        t2 = sum(
            k(a2[i], a2[j]) for i in range(n2) for j in range(n2) if i != j
        ) / (n2 * (n2 - 1))
        t3 = 2.0 * sum(
            k(a1[i], a2[j]) for i in range(n1) for j in range(n2)
        ) / (n1 * n2)
        total += t1 + t2 - t3
    return total


class TestBaseScale:
    def test_two_points(self):
        assert base_scale(np.array([[0.0]]), np.array([[5.0]])) == pytest.approx(5.0)

    def test_three_collinear(self):
        a1 = np.array([[0.0], [1.0]])
        a2 = np.array([[2.0]])
        assert base_scale(a1, a2) == pytest.approx(4.0 / 3.0)

    def test_matches_double_loop(self, rng):
        pooled1 = rng.normal(size=(12, 4))
        pooled2 = rng.normal(size=(8, 4))
        both = np.vstack([pooled1, pooled2])
        n = len(both)
        expected = np.mean(
            [
                np.linalg.norm(both[i] - both[j])
                for i in range(n)
                for j in range(i + 1, n)
            ]
        )
        assert base_scale(pooled1, pooled2) == pytest.approx(expected, abs=1e-12)

    def test_degenerate_floor_with_warning(self):
        same = np.zeros((3, 2))
        with pytest.warns(RuntimeWarning):
            value = base_scale(same, same)
        assert value == pytest.approx(1e-8)


class TestMmdUnbiased:
    def test_hand_value_two_shared_points(self, rng):
        p = rng.normal(size=3)
        q = rng.normal(size=3)
        a = np.vstack([p, q])
        kernel = KernelMixture(base_scale=1.3, multipliers=(1.0,))
        k_pq = np.exp(-np.sum((p - q) ** 2) / (2 * 1.3 ** 2))
        assert mmd_unbiased(a, a, kernel) == pytest.approx(k_pq - 1.0, abs=1e-12)

    def test_far_translation_limit(self, rng):
        a1 = rng.normal(scale=0.01, size=(5, 2))
        a2 = a1 + 1e6
        kernel = KernelMixture.from_samples(a1, a1)  # scale of the tight cloud
        value = mmd_unbiased(a1, a2, kernel)
        # the cross term vanishes; both within terms equal that of a1
        n = len(a1)
        within = 0.0
        for mult in kernel.multipliers:
            sigma2 = (mult * kernel.base_scale) ** 2
            within += sum(
                np.exp(-np.sum((a1[i] - a1[j]) ** 2) / (2 * sigma2))
                for i in range(n)
                for j in range(n)
                if i != j
            ) / (n * (n - 1))
        assert value > 0
        assert value == pytest.approx(2 * within, rel=1e-6)

    def test_symmetry_exact(self, rng):
        a1 = rng.normal(size=(6, 3))
        a2 = rng.normal(size=(4, 3))
        kernel = KernelMixture.from_samples(a1, a2)
        assert mmd_unbiased(a1, a2, kernel) == mmd_unbiased(a2, a1, kernel)

    def test_matches_double_loop_oracle(self, rng):
        for _ in range(5):
            a1 = rng.normal(size=(5, 3))
            a2 = rng.normal(size=(7, 3))
            kernel = KernelMixture.from_samples(a1, a2)
            assert mmd_unbiased(a1, a2, kernel) == pytest.approx(
                mmd_oracle(a1, a2, kernel), abs=1e-10
            )

    def test_too_few_points_rejected(self, rng):
        kernel = KernelMixture(base_scale=1.0)
        with pytest.raises(DataError):
            mmd_unbiased(rng.normal(size=(1, 2)), rng.normal(size=(3, 2)), kernel)

    def test_bounded_by_kernel_count(self, rng):
        for _ in range(10):
            a1 = rng.normal(scale=rng.uniform(0.1, 10), size=(4, 2))
            a2 = rng.normal(scale=rng.uniform(0.1, 10), size=(6, 2))
            kernel = KernelMixture.from_samples(a1, a2)
            assert abs(mmd_unbiased(a1, a2, kernel)) <= 2 * len(kernel.multipliers)


class TestMmdGradient:
    def test_matches_finite_differences(self, rng):
        a1 = rng.normal(size=(5, 3))
        a2 = rng.normal(size=(6, 3))
        kernel = KernelMixture.from_samples(a1, a2)  # frozen scale
        g1, g2 = mmd_gradient(a1, a2, kernel)

        fd1 = central_difference(lambda x: mmd_unbiased(x, a2, kernel), a1)
        fd2 = central_difference(lambda x: mmd_unbiased(a1, x, kernel), a2)
        assert relative_error(g1, fd1) < 1e-4
        assert relative_error(g2, fd2) < 1e-4

    def test_mirror_symmetric_clouds(self, rng):
        # both clouds symmetric under reflection through the origin and
        # equal as sets: the total gradient still matches finite differences
        base = rng.normal(size=(3, 2))
        cloud = np.vstack([base, -base])
        kernel = KernelMixture(base_scale=1.0, multipliers=(1.0,))
        g1, g2 = mmd_gradient(cloud, cloud.copy(), kernel)
        fd1 = central_difference(lambda x: mmd_unbiased(x, cloud, kernel), cloud)
        assert relative_error(g1, fd1) < 1e-4

    def test_coincident_cross_points(self):
        a1 = np.array([[1.0, 2.0], [3.0, 4.0]])
        a2 = a1.copy()
        kernel = KernelMixture(base_scale=2.0, multipliers=(1.0,))
        g1, g2 = mmd_gradient(a1, a2, kernel)
        # cross-gradient at x == y carries a zero (x - y) factor, so the
        # coincident pairs contribute nothing and nothing blows up
        assert np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))
        fd1 = central_difference(lambda x: mmd_unbiased(x, a2, kernel), a1)
        assert relative_error(g1, fd1) < 1e-4

    def test_row_restriction(self, rng):
        a1 = rng.normal(size=(6, 3))
        a2 = rng.normal(size=(5, 3))
        kernel = KernelMixture.from_samples(a1, a2)
        full1, full2 = mmd_gradient(a1, a2, kernel)
        g1, g2 = mmd_gradient(a1, a2, kernel, rows1=[1, 4], rows2=[0, 2])
        np.testing.assert_allclose(g1, full1[[1, 4]], atol=1e-12)
        np.testing.assert_allclose(g2, full2[[0, 2]], atol=1e-12)


class TestTwoSampleSanity:
    def test_separated_gaussians_score_higher(self):
        hits = 0
        trials = 100
        n = 500
        for trial in range(trials):
            rng = np.random.default_rng(trial)
            same1 = rng.normal(size=(n, 2))
            same2 = rng.normal(size=(n, 2))
            far = rng.normal(size=(n, 2)) + 4.0  # means 4 sigma apart
            kernel_same = KernelMixture.from_samples(same1, same2)
            kernel_far = KernelMixture.from_samples(same1, far)
            if mmd_unbiased(same1, far, kernel_far) > mmd_unbiased(
                same1, same2, kernel_same
            ):
                hits += 1
        assert hits >= 95
