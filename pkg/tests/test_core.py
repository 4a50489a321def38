"""Tests for the linear-algebra kernels and random streams."""

import numpy as np
import pytest

from fbmclab.core import (
    InvalidParameterError,
    NumericError,
    RngStream,
    gram,
    hermitian_solve,
    inv_uu,
    rand_cn,
)


class TestRandCn:
    def test_moments_unit_variance(self):
        """1e6 samples: |mean| <= 3e-3 and variance in [0.997, 1.003] (3-sigma LLN)."""
        x = rand_cn(RngStream(1, 0), 10**6, 1.0)
        assert abs(x.mean()) <= 3e-3
        assert 0.997 <= np.mean(np.abs(x) ** 2) <= 1.003

    def test_scaled_variance(self):
        x = rand_cn(RngStream(1, 0), 10**6, 4.0)
        assert 3.99 <= np.mean(np.abs(x) ** 2) <= 4.01

    def test_circularity(self):
        """Pseudo-variance E[x^2] vanishes within 4/sqrt(n)."""
        n = 10**6
        x = rand_cn(RngStream(3, 7), n, 1.0)
        assert abs(np.mean(x * x)) <= 4.0 / np.sqrt(n)

    def test_deterministic(self):
        a = rand_cn(RngStream(1, 5), 5, 1.0)
        b = rand_cn(RngStream(1, 5), 5, 1.0)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_independent(self):
        n = 10**5
        a = rand_cn(RngStream(1, 0), n)
        b = rand_cn(RngStream(1, 1), n)
        corr = abs(np.mean(a * b.conj()))
        assert corr <= 3.0 / np.sqrt(n)

    def test_empty_and_errors(self):
        assert rand_cn(RngStream(0, 0), 0).size == 0
        with pytest.raises(InvalidParameterError):
            rand_cn(RngStream(0, 0), 4, 0.0)
        with pytest.raises(InvalidParameterError):
            rand_cn(RngStream(0, 0), 4, -1.0)


class TestHermitianSolve:
    def test_identity(self):
        B = np.arange(8, dtype=complex).reshape(4, 2)
        np.testing.assert_allclose(hermitian_solve(np.eye(4), B), B)

    def test_diagonal_scaling(self):
        X = hermitian_solve(2.0 * np.eye(3), np.eye(3))
        np.testing.assert_allclose(X, 0.5 * np.eye(3))

    def test_residual_random_spd(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        A = M @ M.conj().T + np.eye(8)
        B = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
        X = hermitian_solve(A, B)
        resid = np.max(np.abs(A @ X - B))
        assert resid <= 1e-8 * np.max(np.abs(B))

    def test_not_positive_definite(self):
        A = np.diag([1.0, -1.0])
        with pytest.raises(NumericError, match="positive definite"):
            hermitian_solve(A, np.eye(2))

    def test_not_hermitian_rejected_in_debug(self):
        A = np.array([[1.0, 1.0], [0.0, 1.0]])
        with pytest.raises(InvalidParameterError, match="Hermitian"):
            hermitian_solve(A, np.eye(2))


class TestGram:
    def test_identity(self):
        np.testing.assert_array_equal(gram(np.eye(3)), np.eye(3))

    def test_single_column(self):
        G = np.array([[2.0], [0.0]])
        np.testing.assert_array_equal(gram(G), [[4.0]])

    def test_matches_definition(self):
        rng = np.random.default_rng(1)
        G = rng.standard_normal((16, 4)) + 1j * rng.standard_normal((16, 4))
        A = gram(G)
        direct = np.empty((4, 4), dtype=complex)
        for i in range(4):
            for j in range(4):
                direct[i, j] = np.sum(np.conj(G[:, i]) * G[:, j])
        np.testing.assert_allclose(A, direct, atol=1e-12)
        np.testing.assert_array_equal(A, A.conj().T)  # exactly Hermitian


class TestInvUu:
    def test_diagonal(self):
        assert inv_uu(np.diag([2.0, 4.0]), 1) == pytest.approx(0.25)

    def test_identity(self):
        for u in range(5):
            assert inv_uu(np.eye(5), u) == pytest.approx(1.0)

    def test_matches_full_inverse(self):
        rng = np.random.default_rng(2)
        M = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
        A = M @ M.conj().T
        A = 0.5 * (A + A.conj().T)
        inv = np.linalg.inv(A)
        for u in range(4):
            assert inv_uu(A, u) == pytest.approx(inv[u, u].real, abs=1e-10)

    def test_singular(self):
        with pytest.raises(NumericError):
            inv_uu(np.zeros((2, 2)), 0)


def test_solve_multiply_roundtrip():
    """hermitian_solve then multiply recovers the RHS to 1e-8 relative."""
    rng = np.random.default_rng(3)
    M = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    A = M @ M.conj().T + 12 * np.eye(12)
    B = rng.standard_normal((12, 5)) + 1j * rng.standard_normal((12, 5))
    X = hermitian_solve(A, B)
    assert np.max(np.abs(A @ X - B)) <= 1e-8 * np.max(np.abs(B))
