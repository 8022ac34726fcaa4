import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowspace.tensor import (
    DimensionError,
    NumericError,
    contract,
    eigh_hermitian,
    haar_isometry,
    spawn_rng,
    svd_truncate,
)


class TestContract:
    def test_identity_action(self):
        v = np.array([3.0, 4.0])
        out = contract(np.eye(2), v, [(1, 0)])
        np.testing.assert_allclose(out, v)

    def test_outer_product(self):
        out = contract(np.array([1.0, 0.0]), np.array([0.0, 1.0]), [])
        expected = np.zeros((2, 2))
        expected[0, 1] = 1.0
        np.testing.assert_allclose(out, expected)

    def test_matches_naive_matmul(self):
        rng = spawn_rng(7)
        a = rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5))
        b = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        naive = np.zeros((4, 3), dtype=complex)
        for i in range(4):
            for j in range(3):
                for k in range(5):
                    naive[i, j] += a[i, k] * b[k, j]
        np.testing.assert_allclose(contract(a, b, [(1, 0)]), naive, atol=1e-12)

    def test_extent_mismatch(self):
        with pytest.raises(DimensionError):
            contract(np.eye(2), np.zeros(3), [(1, 0)])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
    def test_bilinear(self, seed, re, im):
        rng = spawn_rng(seed)
        shape = (2, 3, 2, 2)
        a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        b = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        c = rng.standard_normal((2, 2, 3)) + 1j * rng.standard_normal((2, 2, 3))
        alpha = re + 1j * im
        pairs = [(0, 1), (2, 0)]
        lhs = contract(alpha * a + b, c, pairs)
        rhs = alpha * contract(a, c, pairs) + contract(b, c, pairs)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(alpha)) * 100)


class TestSvdTruncate:
    def test_identity(self):
        res = svd_truncate(np.eye(2), max_rank=2, cutoff=0.0)
        np.testing.assert_allclose(res.singular_values, [1.0, 1.0])
        assert res.discarded_weight == 0.0

    def test_rank_cap_drops_smaller(self):
        res = svd_truncate(np.diag([3.0, 4.0]), max_rank=1, cutoff=0.0)
        np.testing.assert_allclose(res.singular_values, [4.0])
        assert res.discarded_weight == pytest.approx(9.0)

    def test_full_rank_reconstruction(self):
        rng = spawn_rng(11)
        m = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        res = svd_truncate(m, max_rank=8, cutoff=0.0)
        rec = res.left_isometry @ np.diag(res.singular_values) @ res.right_isometry
        assert np.linalg.norm(m - rec) <= 1e-10

    def test_discarded_weight_is_squared_error(self):
        rng = spawn_rng(23)
        m = rng.standard_normal((6, 9)) + 1j * rng.standard_normal((6, 9))
        res = svd_truncate(m, max_rank=3, cutoff=0.0)
        rec = res.left_isometry @ np.diag(res.singular_values) @ res.right_isometry
        assert np.linalg.norm(m - rec) ** 2 == pytest.approx(res.discarded_weight, rel=1e-9)

    def test_cutoff_after_rank_cap(self):
        res = svd_truncate(np.diag([5.0, 2.0, 0.1]), max_rank=2, cutoff=1.0)
        np.testing.assert_allclose(res.singular_values, [5.0, 2.0])
        res = svd_truncate(np.diag([5.0, 0.5, 0.1]), max_rank=2, cutoff=1.0)
        np.testing.assert_allclose(res.singular_values, [5.0])
        assert res.discarded_weight == pytest.approx(0.25 + 0.01)

    def test_nonfinite_rejected(self):
        with pytest.raises(NumericError):
            svd_truncate(np.array([[np.nan, 0.0], [0.0, 1.0]]), max_rank=2)

    def test_isometry_columns(self):
        rng = spawn_rng(5)
        m = rng.standard_normal((7, 4)) + 1j * rng.standard_normal((7, 4))
        res = svd_truncate(m, max_rank=4, cutoff=0.0)
        u = res.left_isometry
        np.testing.assert_allclose(u.conj().T @ u, np.eye(res.rank), atol=1e-10)
        v = res.right_isometry
        np.testing.assert_allclose(v @ v.conj().T, np.eye(res.rank), atol=1e-10)
        assert np.all(np.diff(res.singular_values) <= 1e-15)


class TestEigh:
    def test_diag(self):
        vals, _ = eigh_hermitian(np.diag([1.0, -1.0]))
        np.testing.assert_allclose(vals, [-1.0, 1.0])

    def test_pauli_x(self):
        vals, _ = eigh_hermitian(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(vals, [-1.0, 1.0])

    def test_random_hermitian_diagonalized(self):
        rng = spawn_rng(3)
        g = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        a = (g + g.conj().T) / 2
        vals, q = eigh_hermitian(a)
        d = q.conj().T @ a @ q
        np.testing.assert_allclose(d, np.diag(vals), atol=1e-10)
        assert np.all(np.diff(vals) >= -1e-12)

    def test_non_hermitian_rejected(self):
        with pytest.raises(NumericError):
            eigh_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_spectrum_invariant_under_haar_conjugation(self):
        rng = spawn_rng(42)
        g = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        a = (g + g.conj().T) / 2
        u = haar_isometry(5, 5, rng)
        vals_a, _ = eigh_hermitian(a)
        vals_b, _ = eigh_hermitian(u @ a @ u.conj().T)
        np.testing.assert_allclose(np.sort(vals_a), np.sort(vals_b), atol=1e-9)


class TestHaarIsometry:
    def test_square_is_unitary(self):
        u = haar_isometry(3, 3, spawn_rng(0))
        np.testing.assert_allclose(u.conj().T @ u, np.eye(3), atol=1e-10)
        assert abs(abs(np.linalg.det(u)) - 1.0) < 1e-10

    def test_single_column_unit_vector(self):
        v = haar_isometry(4, 1, spawn_rng(1))
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-10)

    def test_cols_exceed_rows(self):
        with pytest.raises(DimensionError):
            haar_isometry(2, 3, spawn_rng(0))

    def test_deterministic_given_seed(self):
        a = haar_isometry(6, 2, spawn_rng(99))
        b = haar_isometry(6, 2, spawn_rng(99))
        np.testing.assert_array_equal(a, b)

    def test_mean_overlap_moment(self):
        # mean |<random col, fixed basis vector>|^2 over Haar is 1/rows
        rows, cols, trials = 64, 8, 1000
        samples = []
        for seed in range(trials):
            v = haar_isometry(rows, cols, spawn_rng(seed, 0))
            samples.extend(np.abs(v[0, :]) ** 2)
        samples = np.asarray(samples)
        mean = samples.mean()
        stderr = samples.std() / np.sqrt(len(samples))
        assert abs(mean - 1.0 / rows) <= 3 * stderr


class TestSpawnRng:
    def test_distinct_keys_give_distinct_streams(self):
        a = spawn_rng(7, 0, 1).standard_normal(4)
        b = spawn_rng(7, 0, 2).standard_normal(4)
        assert not np.allclose(a, b)

    def test_reproducible(self):
        a = spawn_rng(7, 3).standard_normal(4)
        b = spawn_rng(7, 3).standard_normal(4)
        np.testing.assert_array_equal(a, b)
