"""Small dense symmetric-matrix kernels.

Everything downstream (metrics, whitening, regularized solves) runs on the
handful of operations in this module: eigendecomposition, matrix square
root and inverse square root, SPD solve, and a definiteness test.  Matrices
here are small (two-digit dimensions), so the kernels favor clarity and
tight error contracts over speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class LinalgError(Exception):
    """Base class for numerical failures in this module."""


class ConvergenceError(LinalgError):
    """Eigensolver failed to reach its off-diagonal tolerance."""


class SingularMatrixError(LinalgError):
    """Matrix is numerically singular; caller should use a regularized path."""


class IndefiniteMatrixError(LinalgError):
    """Matrix has a genuinely negative eigenvalue where PSD was required."""


JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-14
SOLVE_PIVOT_TOL = 1e-14
SQRT_CLAMP = 1e-10


class SymMatrix:
    """Immutable dense symmetric matrix.

    Parameters
    ----------
    entries : array_like
        Square matrix, symmetric to within 1e-12 absolute per entry.

    Raises
    ------
    ValueError
        If the input is not square, not finite, or not symmetric within
        tolerance.
    """

    __slots__ = ("_a",)

    def __init__(self, entries) -> None:
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValueError("dimension must be >= 1")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        asym = np.abs(a - a.T).max()
        if asym > 1e-12:
            raise ValueError(f"matrix is not symmetric: max |a - a^T| = {asym:.3e}")
        a.setflags(write=False)
        self._a = a

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def mat(self) -> np.ndarray:
        """Read-only ndarray view of the entries."""
        return self._a

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        return cls(np.eye(dim))

    @classmethod
    def from_diagonal(cls, diag) -> "SymMatrix":
        return cls(np.diag(np.asarray(diag, dtype=float)))

    def __repr__(self) -> str:
        return f"SymMatrix({self._a.tolist()!r})"


@dataclass(frozen=True)
class EigenPair:
    """Eigendecomposition result: ascending eigenvalues, orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(m: SymMatrix) -> EigenPair:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps the strict upper triangle, zeroing one off-diagonal entry per
    rotation, until the off-diagonal Frobenius norm falls below 1e-14 times
    the Frobenius norm of the input.  Dimensions in this library are small,
    so the O(n^3)-per-sweep cost is irrelevant and the method is dependency
    free.

    Returns
    -------
    EigenPair
        Eigenvalues ascending; eigenvectors as orthonormal columns, so that
        ``V @ diag(lam) @ V.T`` reconstructs the input.

    Raises
    ------
    ConvergenceError
        If the tolerance is not reached within 100 sweeps.
    """
    a = m.mat.copy()
    n = m.dim
    v = np.eye(n)
    scale = np.linalg.norm(a)
    tol = JACOBI_TOL * scale

    # Norm of the strict off-diagonal, summed directly: subtracting
    # sum-of-squares totals cancels catastrophically near convergence.
    diag_mask = ~np.eye(n, dtype=bool)

    def off_norm() -> float:
        return float(np.linalg.norm(a[diag_mask]))

    sweeps = 0
    while off_norm() > tol:
        if sweeps >= JACOBI_MAX_SWEEPS:
            raise ConvergenceError(
                f"Jacobi eigensolver did not converge: dim={n}, "
                f"sweeps={sweeps}, off-diagonal norm={off_norm():.3e}"
            )
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                phi = 0.5 * math.atan2(2.0 * apq, a[q, q] - a[p, p])
                c, s = math.cos(phi), math.sin(phi)
                # Two-sided rotation in the (p, q) plane.
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        sweeps += 1

    lam = np.diag(a).copy()
    order = np.argsort(lam, kind="stable")
    return EigenPair(eigenvalues=lam[order], eigenvectors=v[:, order])


def sym_sqrt(m: SymMatrix) -> SymMatrix:
    """Symmetric square root: S with S @ S == M.

    Eigenvalues in [-1e-10, 0) are treated as round-off and clamped to zero;
    anything more negative signals a non-PSD metric upstream and raises.
    """
    pair = sym_eig(m)
    lam = pair.eigenvalues.copy()
    if lam[0] < -SQRT_CLAMP:
        raise IndefiniteMatrixError(
            f"matrix has eigenvalue {lam[0]:.3e} < -{SQRT_CLAMP:g}; not PSD"
        )
    lam[lam < 0.0] = 0.0
    v = pair.eigenvectors
    s = (v * np.sqrt(lam)) @ v.T
    return SymMatrix((s + s.T) / 2.0)


def sym_inv_sqrt(m: SymMatrix, eps_floor: float = 1e-12) -> SymMatrix:
    """Symmetric inverse square root: R with R @ M @ R == I.

    Eigenvalues are floored at ``eps_floor`` before inversion.  With
    ``eps_floor == 0`` a non-positive eigenvalue raises instead: the metric
    is singular and the caller should regularize.
    """
    pair = sym_eig(m)
    lam = pair.eigenvalues
    # an exactly singular matrix can surface as a tiny positive eigenvalue
    # after rounding, so judge singularity relative to the largest one
    if eps_floor == 0.0 and lam[0] <= 1e-12 * max(lam[-1], 0.0):
        raise SingularMatrixError(
            f"matrix has eigenvalue {lam[0]:.3e} and no floor was given"
        )
    lam = np.maximum(lam, eps_floor)
    v = pair.eigenvectors
    r = (v / np.sqrt(lam)) @ v.T
    return SymMatrix((r + r.T) / 2.0)


def solve_spd(m: SymMatrix, rhs: np.ndarray) -> np.ndarray:
    """Solve M x = rhs for symmetric positive definite M by Cholesky.

    Parameters
    ----------
    m : SymMatrix
        Positive definite coefficient matrix.
    rhs : array_like
        Right-hand side; a vector of length dim, or a (dim, k) matrix whose
        columns are solved together.

    Raises
    ------
    SingularMatrixError
        If a Cholesky pivot falls below 1e-14 times the largest diagonal
        entry; the matrix is numerically singular (or indefinite) and the
        caller must use a regularized path.
    """
    a = m.mat
    n = m.dim
    b = np.asarray(rhs, dtype=float)
    if b.shape[0] != n:
        raise ValueError(f"rhs length {b.shape[0]} != matrix dim {n}")
    pivot_floor = SOLVE_PIVOT_TOL * max(np.diag(a).max(), 0.0)

    low = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j] - low[i, :j] @ low[j, :j]
            if i == j:
                if s <= pivot_floor:
                    raise SingularMatrixError(
                        f"Cholesky pivot {s:.3e} at index {i} below "
                        f"{SOLVE_PIVOT_TOL:g} * max diagonal; matrix is "
                        "numerically singular"
                    )
                low[i, i] = math.sqrt(s)
            else:
                low[i, j] = s / low[j, j]

    def substitute(b):
        # forward then back substitution against the cached factor
        y = np.zeros_like(b)
        for i in range(n):
            y[i] = (b[i] - low[i, :i] @ y[:i]) / low[i, i]
        x = np.zeros_like(b)
        for i in range(n - 1, -1, -1):
            x[i] = (y[i] - low[i + 1 :, i] @ x[i + 1 :]) / low[i, i]
        return x

    x = substitute(b)
    # one pass of iterative refinement with the residual in extended
    # precision claws back the forward-error digits an ill-conditioned
    # system loses; where long double is plain double this still helps
    r = (
        np.asarray(b, dtype=np.longdouble)
        - np.asarray(a, dtype=np.longdouble) @ np.asarray(x, dtype=np.longdouble)
    )
    return x + substitute(np.asarray(r, dtype=float))


def is_positive_definite(m: SymMatrix) -> bool:
    """True iff the smallest eigenvalue exceeds 1e-12 times the largest."""
    lam = sym_eig(m).eigenvalues
    return bool(lam[0] > 1e-12 * lam[-1])
