"""Seeded samplers: constraint satisfaction and reproducibility."""

import numpy as np
import pytest

from mcflow.curvature import batch_scalars
from mcflow.sampling import (
    generator,
    pinched_cap,
    pinched_tensors,
    random_rotations,
    sphere_pinched_tensors,
    symmetric_tensors,
)


class TestGenerators:
    def test_same_key_same_stream(self):
        a = generator(42, 3, 2, 1).standard_normal(5)
        b = generator(42, 3, 2, 1).standard_normal(5)
        assert np.array_equal(a, b)

    def test_different_shards_differ(self):
        a = generator(42, 3, 2, 1).standard_normal(5)
        b = generator(42, 3, 2, 2).standard_normal(5)
        assert not np.array_equal(a, b)


class TestSymmetricTensors:
    def test_symmetry_and_shape(self):
        h = symmetric_tensors(generator(1, 0), 10, 4, 3)
        assert h.shape == (10, 4, 4, 3)
        assert np.array_equal(h, h.transpose(0, 2, 1, 3))


class TestPinchedTensors:
    @pytest.mark.parametrize("n,k", [(2, 1), (3, 4), (4, 2)])
    def test_constraint_satisfied(self, n, k):
        bound = 4.0 / (3.0 * n) - 0.01
        h = pinched_tensors(generator(5, n, k), 5000, n, k, bound)
        normH2, normh2, _ = batch_scalars(h)
        assert normH2.min() > 0
        assert (normh2 <= bound * normH2 * (1 + 1e-12)).all()
        # the sampler fills the cap: ratios spread over [1/n, bound]
        ratio = normh2 / normH2
        assert ratio.max() > bound - 0.3 * (bound - 1.0 / n)
        assert ratio.min() < 1.0 / n + 0.1 * (bound - 1.0 / n)

    def test_infeasible_cap_rejected(self):
        assert pinched_cap(4, 1.0 / 3 - 0.1) <= 0
        with pytest.raises(ValueError):
            pinched_tensors(generator(5, 9), 10, 4, 1, 1.0 / 3 - 0.1)


class TestSpherePinched:
    def test_cap_respected_after_rotation(self):
        rng = generator(6, 0)
        n, k, K = 5, 3, 1.0
        cap = lambda H2: H2 / (n * (n - 1)) + 2.0 * K
        h = sphere_pinched_tensors(rng, 4000, n, k, cap)
        normH2, normh2, _ = batch_scalars(h)
        h02 = normh2 - normH2 / n
        assert (h02 <= cap(normH2) * (1 + 1e-10)).all()


class TestRotations:
    def test_orthogonality(self):
        q = random_rotations(generator(8, 0), 50, 4)
        eye = np.einsum("bij,bkj->bik", q, q)
        assert np.abs(eye - np.eye(4)).max() <= 1e-12
