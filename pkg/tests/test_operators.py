"""Operator contracts: adjointness, structure, counting, and interchange."""

import threading

import numpy as np
import pytest

from lsemink import (
    DenseOperator,
    DimensionMismatch,
    KroneckerLeftOperator,
    LinearOperator,
    NonFiniteInput,
    ScaledOperator,
    adjoint_check,
    dense_from_csv,
    identity,
    load_dense,
    save_dense,
)


def kron_expansion(op: KroneckerLeftOperator) -> np.ndarray:
    return np.kron(op.feature[None, :], np.eye(op.block_dim))


class TestApply:
    def test_dense_column_extraction(self):
        op = DenseOperator([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(op.apply([1.0, 0.0]), [1.0, 3.0])

    def test_kronecker_matches_dense_expansion(self):
        op = KroneckerLeftOperator([1.0, 2.0], block_dim=2)
        x = np.array([1.0, 0.0, 0.0, 1.0])  # vec of the 2x2 identity
        expected = kron_expansion(op) @ x
        np.testing.assert_array_equal(expected, [1.0, 2.0])
        np.testing.assert_allclose(op.apply(x), expected, atol=0)

    def test_scaled_identity(self):
        op = ScaledOperator(identity(3), 2.0)
        np.testing.assert_array_equal(op.apply(np.ones(3)), 2.0 * np.ones(3))


class TestApplyTranspose:
    def test_dense_row_extraction(self):
        op = DenseOperator([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(op.apply_transpose([1.0, 0.0]), [1.0, 2.0])

    def test_kronecker_matches_dense_expansion(self):
        op = KroneckerLeftOperator([1.0, 2.0], block_dim=2)
        v = np.array([1.0, 1.0])
        expected = kron_expansion(op).T @ v
        np.testing.assert_array_equal(expected, [1.0, 1.0, 2.0, 2.0])
        np.testing.assert_allclose(op.apply_transpose(v), expected, atol=0)

    def test_zero_maps_to_zero(self):
        rng = np.random.default_rng(1)
        for op in (
            DenseOperator(rng.standard_normal((4, 6))),
            KroneckerLeftOperator(rng.standard_normal(5), 3),
            ScaledOperator(identity(4), -1.5),
        ):
            np.testing.assert_array_equal(op.apply_transpose(np.zeros(op.rows)), np.zeros(op.cols))


class TestAdjointness:
    def test_identity_is_exact(self):
        assert adjoint_check(identity(5), trials=10, rng_seed=0) <= 1e-15

    def test_random_dense(self):
        rng = np.random.default_rng(2)
        op = DenseOperator(rng.standard_normal((20, 10)))
        assert adjoint_check(op, trials=20, rng_seed=3) <= 1e-12

    @pytest.mark.parametrize(
        "make",
        [
            lambda rng: DenseOperator(rng.standard_normal((200, 200))),
            lambda rng: DenseOperator(rng.standard_normal((7, 150))),
            lambda rng: KroneckerLeftOperator(rng.standard_normal(40), 5),
            lambda rng: ScaledOperator(
                DenseOperator(rng.standard_normal((60, 35))), 1e-3
            ),
        ],
    )
    def test_every_concrete_operator(self, make):
        op = make(np.random.default_rng(7))
        assert adjoint_check(op, trials=50, rng_seed=11) <= 1e-12

    def test_broken_operator_is_detected(self):
        class Broken(LinearOperator):
            def __init__(self, entries):
                entries = np.asarray(entries, dtype=float)
                super().__init__(*entries.shape)
                self._m = entries

            def _apply(self, x):
                return self._m @ x

            def _apply_transpose(self, v):
                return self._m.T @ v + 0.05  # deliberate mismatch

        rng = np.random.default_rng(4)
        assert adjoint_check(Broken(rng.standard_normal((8, 6))), 20, 5) > 1e-3


def test_linearity():
    rng = np.random.default_rng(8)
    op = KroneckerLeftOperator(rng.standard_normal(6), 4)
    u1 = rng.standard_normal(op.cols)
    u2 = rng.standard_normal(op.cols)
    a = 1.7
    lhs = op.apply(a * u1 + u2)
    rhs = a * op.apply(u1) + op.apply(u2)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("block_dim", [1, 2, 3, 5])
@pytest.mark.parametrize("feat_dim", [1, 4, 8])
def test_kronecker_equals_dense_expansion(block_dim, feat_dim):
    rng = np.random.default_rng(block_dim * 10 + feat_dim)
    op = KroneckerLeftOperator(rng.standard_normal(feat_dim), block_dim)
    J = kron_expansion(op)
    x = rng.standard_normal(op.cols)
    v = rng.standard_normal(op.rows)
    np.testing.assert_allclose(op.apply(x), J @ x, atol=1e-14)
    np.testing.assert_allclose(op.apply_transpose(v), J.T @ v, atol=1e-14)


class TestCounting:
    def test_counts_every_application(self):
        rng = np.random.default_rng(9)
        op = DenseOperator(rng.standard_normal((5, 3)))
        for _ in range(4):
            op.apply(np.zeros(3))
        for _ in range(7):
            op.apply_transpose(np.zeros(5))
        assert op.matvec_counter == 11

    def test_failed_validation_does_not_count(self):
        op = identity(3)
        with pytest.raises(DimensionMismatch):
            op.apply(np.zeros(4))
        assert op.matvec_counter == 0

    def test_thread_safe_increments(self):
        op = identity(4)
        x = np.zeros(4)

        def worker():
            for _ in range(500):
                op.apply(x)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert op.matvec_counter == 4000


class TestValidation:
    def test_dimension_mismatch(self):
        op = DenseOperator(np.ones((3, 2)))
        with pytest.raises(DimensionMismatch):
            op.apply(np.ones(3))
        with pytest.raises(DimensionMismatch):
            op.apply_transpose(np.ones(2))

    def test_non_finite_input(self):
        op = identity(2)
        with pytest.raises(NonFiniteInput):
            op.apply(np.array([1.0, np.nan]))
        with pytest.raises(NonFiniteInput):
            op.apply_transpose(np.array([np.inf, 0.0]))

    def test_non_finite_entries_rejected(self):
        with pytest.raises(NonFiniteInput):
            DenseOperator([[1.0, np.nan]])

    def test_zero_scale_rejected(self):
        with pytest.raises(ValueError):
            ScaledOperator(identity(2), 0.0)


class TestInterchange:
    def test_binary_roundtrip_is_exact(self, tmp_path):
        rng = np.random.default_rng(12)
        op = DenseOperator(rng.standard_normal((9, 4)))
        path = tmp_path / "op.lsop"
        save_dense(op, path)
        loaded = load_dense(path)
        assert loaded.shape == (9, 4)
        np.testing.assert_array_equal(loaded.entries, op.entries)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.lsop"
        path.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(ValueError, match="LSOP"):
            load_dense(path)

    def test_truncated_rejected(self, tmp_path):
        rng = np.random.default_rng(13)
        path = tmp_path / "trunc.lsop"
        save_dense(DenseOperator(rng.standard_normal((3, 3))), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(ValueError, match="bytes"):
            load_dense(path)

    def test_csv_import(self, tmp_path):
        path = tmp_path / "op.csv"
        path.write_text("1.0,2.5\n-3.0,4.0\n")
        op = dense_from_csv(path)
        np.testing.assert_array_equal(op.entries, [[1.0, 2.5], [-3.0, 4.0]])
