"""Factorization wrappers validated against reconstruction identities."""
import numpy as np
import pytest

from koopmetrics.linalg import (
    DiagonalizabilityError,
    eig,
    pinv,
    svd,
    unitarity_defect,
)

from conftest import random_unitary


class TestSvd:
    def test_identity(self):
        res = svd(np.eye(3))
        np.testing.assert_allclose(res.S, np.ones(3), atol=1e-14)
        np.testing.assert_allclose(res.U @ res.V.conj().T, np.eye(3), atol=1e-14)

    def test_diagonal_complex_sorted(self):
        res = svd(np.diag([3.0, 4.0j]))
        np.testing.assert_allclose(res.S, [4.0, 3.0], atol=1e-14)
        # phases absorbed into the singular vectors: both are diagonal-modulus
        np.testing.assert_allclose(np.abs(res.U), np.eye(2)[:, ::-1], atol=1e-14)
        np.testing.assert_allclose(np.abs(res.V), np.eye(2)[:, ::-1], atol=1e-14)

    def test_random_reconstruction(self, rng):
        m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        res = svd(m)
        rebuilt = (res.U * res.S) @ res.V.conj().T
        assert np.linalg.norm(rebuilt - m) / np.linalg.norm(m) < 1e-10

    def test_orthonormal_factors(self, rng):
        m = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
        res = svd(m)
        assert unitarity_defect(res.U) < 1e-10
        assert unitarity_defect(res.V) < 1e-10
        assert np.all(np.diff(res.S) <= 0)

    def test_unitary_input_unit_singular_values(self, rng):
        q = random_unitary(rng, 7)
        res = svd(q)
        np.testing.assert_allclose(res.S, np.ones(7), atol=1e-10)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="non-finite"):
            svd(np.array([[1.0, np.nan], [0.0, 1.0]]))

    def test_deterministic(self, rng):
        m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        a, b = svd(m), svd(m)
        assert np.array_equal(a.U, b.U) and np.array_equal(a.S, b.S)


class TestEig:
    def test_diagonal(self):
        res = eig(np.diag([2.0, 3.0]))
        assert sorted(res.lambdas.real) == [2.0, 3.0]
        np.testing.assert_allclose(np.abs(res.R), np.eye(2), atol=1e-14)

    def test_rotation_generator_spectrum(self):
        res = eig(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        got = sorted(res.lambdas, key=lambda z: z.imag)
        np.testing.assert_allclose(got, [-1j, 1j], atol=1e-14)

    def test_random_residual(self, rng):
        m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        res = eig(m)
        residual = np.linalg.norm(m @ res.R - res.R * res.lambdas) / np.linalg.norm(m)
        assert residual < 1e-8

    def test_unit_norm_columns(self, rng):
        m = rng.standard_normal((5, 5))
        res = eig(m)
        np.testing.assert_allclose(np.linalg.norm(res.R, axis=0), np.ones(5), atol=1e-12)

    def test_defective_matrix_rejected(self):
        jordan = np.array([[1.0, 1.0], [0.0, 1.0]])
        with pytest.raises(DiagonalizabilityError):
            eig(jordan)

    def test_nonsquare_rejected(self):
        with pytest.raises(ValueError, match="square"):
            eig(np.ones((2, 3)))


class TestPinv:
    def test_matches_inverse(self, rng):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_allclose(pinv(m), np.linalg.inv(m), atol=1e-10)

    def test_zero_matrix(self):
        np.testing.assert_array_equal(pinv(np.zeros((3, 2))), np.zeros((2, 3)))

    def test_rank_one_penrose_identities(self):
        v = np.array([1.0, 2.0 + 1j, -0.5])
        m = np.outer(v, v.conj())
        dag = pinv(m)
        scale = np.linalg.norm(m)
        assert np.linalg.norm(m @ dag @ m - m) / scale < 1e-8
        assert np.linalg.norm(dag @ m @ dag - dag) / np.linalg.norm(dag) < 1e-8
        assert np.linalg.norm((m @ dag).conj().T - m @ dag) / 1.0 < 1e-8
        assert np.linalg.norm((dag @ m).conj().T - dag @ m) / 1.0 < 1e-8

    def test_diagonal_reciprocal_with_cutoff(self):
        m = np.diag([2.0, 1e-14, 0.0])
        dag = pinv(m, rtol=1e-10)
        np.testing.assert_allclose(np.diag(dag), [0.5, 0.0, 0.0], atol=1e-15)

    def test_rejects_nonpositive_rtol(self):
        with pytest.raises(ValueError, match="rtol"):
            pinv(np.eye(2), rtol=0.0)
