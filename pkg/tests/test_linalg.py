"""Symmetric-matrix kernel tests.

The implementation route is hand-rolled (Jacobi rotations, Cholesky); the
oracle route below is reconstruction/multiply-back plus numpy.linalg, so the
two never share code.
"""

import numpy as np
import pytest

from natgrad.linalg import (
    ConvergenceError,
    EigenPair,
    IndefiniteMatrixError,
    SingularMatrixError,
    SymMatrix,
    is_positive_definite,
    solve_spd,
    sym_eig,
    sym_inv_sqrt,
    sym_sqrt,
)

# The 2x2 metric used throughout the library's benchmark model.
FISHER = [[82.0 / 9.0, 1.0], [1.0, 1.0 / 9.0]]


def random_spd(rng, n, spread=1.0):
    a = rng.standard_normal((n, n))
    return SymMatrix(a.T @ a + spread * np.eye(n))


class TestSymMatrix:
    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            SymMatrix(np.zeros((2, 3)))

    def test_rejects_asymmetry_beyond_tolerance(self):
        with pytest.raises(ValueError, match="not symmetric"):
            SymMatrix([[1.0, 0.5], [0.5 + 1e-9, 1.0]])

    def test_accepts_roundoff_asymmetry(self):
        m = SymMatrix([[1.0, 0.5], [0.5 + 1e-13, 1.0]])
        assert m.dim == 2

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            SymMatrix([[np.inf, 0.0], [0.0, 1.0]])

    def test_entries_are_immutable(self):
        m = SymMatrix.identity(2)
        with pytest.raises(ValueError):
            m.mat[0, 0] = 5.0


class TestSymEig:
    def test_identity(self):
        pair = sym_eig(SymMatrix.identity(2))
        np.testing.assert_allclose(pair.eigenvalues, [1.0, 1.0])

    def test_already_diagonal(self):
        pair = sym_eig(SymMatrix.from_diagonal([9.0, 4.0]))
        np.testing.assert_allclose(pair.eigenvalues, [4.0, 9.0])
        np.testing.assert_allclose(np.abs(pair.eigenvectors), np.eye(2)[:, ::-1])

    def test_fisher_reconstruction(self):
        m = SymMatrix(FISHER)
        pair = sym_eig(m)
        rebuilt = pair.eigenvectors @ np.diag(pair.eigenvalues) @ pair.eigenvectors.T
        err = np.linalg.norm(rebuilt - m.mat) / np.linalg.norm(m.mat)
        assert err < 1e-12, f"reconstruction error {err:.3e}"

    def test_random_matrices_reconstruct_and_are_orthonormal(self):
        rng = np.random.default_rng(42)
        for n in [1, 2, 3, 5, 8, 13]:
            a = rng.standard_normal((n, n))
            m = SymMatrix((a + a.T) / 2)
            pair = sym_eig(m)
            v, lam = pair.eigenvectors, pair.eigenvalues
            assert np.all(np.diff(lam) >= 0), "eigenvalues not ascending"
            np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-10)
            rel = np.linalg.norm((v * lam) @ v.T - m.mat) / max(
                np.linalg.norm(m.mat), 1e-300
            )
            assert rel < 1e-10

    def test_agrees_with_numpy_eigenvalues(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = rng.standard_normal((6, 6))
            m = SymMatrix((a + a.T) / 2)
            lam = sym_eig(m).eigenvalues
            np.testing.assert_allclose(lam, np.linalg.eigvalsh(m.mat), atol=1e-10)

    def test_deterministic(self):
        m = SymMatrix(FISHER)
        p1, p2 = sym_eig(m), sym_eig(m)
        np.testing.assert_array_equal(p1.eigenvalues, p2.eigenvalues)
        np.testing.assert_array_equal(p1.eigenvectors, p2.eigenvectors)

    def test_convergence_error_is_reportable(self):
        # No well-formed symmetric matrix should trip this; build the error
        # object directly to pin the message contract instead.
        err = ConvergenceError("Jacobi eigensolver did not converge: dim=3, sweeps=100")
        assert "dim=3" in str(err)


class TestSymSqrt:
    def test_identity(self):
        np.testing.assert_array_equal(sym_sqrt(SymMatrix.identity(3)).mat, np.eye(3))

    def test_diagonal(self):
        s = sym_sqrt(SymMatrix.from_diagonal([4.0, 9.0]))
        np.testing.assert_allclose(s.mat, np.diag([2.0, 3.0]), atol=1e-14)

    def test_fisher_squaring_oracle(self):
        m = SymMatrix(FISHER)
        s = sym_sqrt(m)
        err = np.linalg.norm(s.mat @ s.mat - m.mat) / np.linalg.norm(m.mat)
        assert err < 1e-10

    def test_random_psd_squaring(self):
        rng = np.random.default_rng(3)
        for n in [2, 4, 7]:
            for _ in range(10):
                a = rng.standard_normal((n, n))
                m = SymMatrix(a.T @ a)  # PSD, possibly near-singular
                s = sym_sqrt(m)
                rel = np.linalg.norm(s.mat @ s.mat - m.mat) / np.linalg.norm(m.mat)
                assert rel < 1e-9

    def test_clamps_roundoff_negative_eigenvalue(self):
        m = SymMatrix([[1.0, 0.0], [0.0, -5e-11]])
        s = sym_sqrt(m)
        np.testing.assert_allclose(s.mat, np.diag([1.0, 0.0]), atol=1e-7)

    def test_rejects_genuinely_indefinite(self):
        with pytest.raises(IndefiniteMatrixError):
            sym_sqrt(SymMatrix.from_diagonal([1.0, -1.0]))


class TestSymInvSqrt:
    def test_identity(self):
        np.testing.assert_allclose(
            sym_inv_sqrt(SymMatrix.identity(2)).mat, np.eye(2), atol=1e-14
        )

    def test_diagonal(self):
        r = sym_inv_sqrt(SymMatrix.from_diagonal([4.0, 9.0]))
        np.testing.assert_allclose(r.mat, np.diag([0.5, 1.0 / 3.0]), atol=1e-14)

    def test_sandwich_oracle_random_spd(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            m = random_spd(rng, 5)
            r = sym_inv_sqrt(m)
            np.testing.assert_allclose(r.mat @ m.mat @ r.mat, np.eye(5), atol=1e-8)

    def test_floor_zero_raises_on_singular(self):
        with pytest.raises(SingularMatrixError):
            sym_inv_sqrt(SymMatrix.from_diagonal([1.0, 0.0]), eps_floor=0.0)

    def test_floor_caps_blowup(self):
        r = sym_inv_sqrt(SymMatrix.from_diagonal([1.0, 0.0]), eps_floor=1e-4)
        assert r.mat[1, 1] == pytest.approx(100.0)


class TestSolveSpd:
    def test_identity(self):
        b = np.array([3.0, -2.0])
        np.testing.assert_array_equal(solve_spd(SymMatrix.identity(2), b), b)

    def test_diagonal(self):
        x = solve_spd(SymMatrix.from_diagonal([2.0, 4.0]), np.array([2.0, 4.0]))
        np.testing.assert_allclose(x, [1.0, 1.0])

    def test_fisher_solve_frozen_value(self):
        # G @ [1, -1] = [73/9, 8/9] exactly, so the solve must invert it.
        x = solve_spd(SymMatrix(FISHER), np.array([73.0 / 9.0, 8.0 / 9.0]))
        np.testing.assert_allclose(x, [1.0, -1.0], atol=1e-12)

    def test_multiply_back_random(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            m = random_spd(rng, 6, spread=0.1)
            x = rng.standard_normal(6)
            got = solve_spd(m, m.mat @ x)
            assert np.linalg.norm(got - x) / np.linalg.norm(x) < 1e-8

    def test_matrix_rhs(self):
        rng = np.random.default_rng(6)
        m = random_spd(rng, 4)
        b = rng.standard_normal((4, 3))
        x = solve_spd(m, b)
        np.testing.assert_allclose(m.mat @ x, b, atol=1e-10)

    def test_singular_raises(self):
        with pytest.raises(SingularMatrixError, match="pivot"):
            solve_spd(SymMatrix([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 1.0]))

    def test_indefinite_raises(self):
        with pytest.raises(SingularMatrixError):
            solve_spd(SymMatrix.from_diagonal([1.0, -1.0]), np.array([1.0, 1.0]))


class TestIsPositiveDefinite:
    def test_identity(self):
        assert is_positive_definite(SymMatrix.identity(2))

    def test_indefinite(self):
        assert not is_positive_definite(SymMatrix.from_diagonal([1.0, -1.0]))

    def test_fisher(self):
        assert is_positive_definite(SymMatrix(FISHER))

    def test_zero_matrix(self):
        assert not is_positive_definite(SymMatrix(np.zeros((2, 2))))

    def test_tiny_relative_eigenvalue(self):
        assert not is_positive_definite(SymMatrix.from_diagonal([1.0, 1e-14]))
        assert is_positive_definite(SymMatrix.from_diagonal([1.0, 1e-10]))


def test_eigenpair_is_plain_data():
    pair = EigenPair(eigenvalues=np.array([1.0]), eigenvectors=np.eye(1))
    assert pair.eigenvalues[0] == 1.0
