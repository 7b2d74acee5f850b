"""Dense complex matrix factorizations with explicit numerical contracts.

Thin wrappers around LAPACK (through numpy) that validate inputs, normalize
conventions (descending singular values, unit-norm eigenvector columns) and
raise typed exceptions instead of leaking library-specific errors. Every
matrix goes through the general complex code path: the operators handled
upstream are generically non-normal, so no structure is exploited.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Eigenvector matrices with condition number at or above this are treated as
# numerically defective.
EIG_CONDITION_LIMIT = 1e12

DEFAULT_PINV_RTOL = 1e-10


class LinalgError(Exception):
    """Base class for factorization failures."""


class FactorizationError(LinalgError):
    """The underlying factorization did not converge."""


class DiagonalizabilityError(LinalgError):
    """Matrix is defective, or close enough that eigenvectors are unusable."""


def as_complex_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and return a dense 2-D complex128 array (no NaN/Inf)."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class SvdResult:
    """Singular value decomposition M = U @ diag(S) @ V.conj().T.

    U and V hold left/right singular vectors in columns; S is real,
    nonnegative and sorted descending.
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


@dataclass(frozen=True)
class EigResult:
    """Eigendecomposition M @ R = R @ diag(lambdas).

    Columns of R are right eigenvectors normalized to unit Euclidean norm.
    ``condition_number`` is the 2-norm condition number of R.
    """

    lambdas: np.ndarray
    R: np.ndarray
    condition_number: float


def svd(m) -> SvdResult:
    """Economy-size SVD of a complex matrix.

    Raises FactorizationError if the underlying solver fails to converge.
    Rank deficiency shows up as (near-)zero singular values, not an error.
    """
    arr = as_complex_matrix(m)
    try:
        u, s, vh = np.linalg.svd(arr, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            f"SVD did not converge for {arr.shape[0]}x{arr.shape[1]} matrix"
        ) from exc
    return SvdResult(U=u, S=s, V=vh.conj().T)


def eig(m) -> EigResult:
    """Eigendecomposition of a square complex matrix.

    Eigenvector columns are normalized to unit norm; the residual phase
    convention is left to the backend, so results are deterministic for a
    fixed input but the order/phase is implementation defined.

    Raises DiagonalizabilityError when the eigenvector matrix condition
    number reaches EIG_CONDITION_LIMIT (defective or nearly so).
    """
    arr = as_complex_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"eig needs a square matrix, got shape {arr.shape}")
    try:
        lambdas, r = np.linalg.eig(arr)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            f"eigendecomposition did not converge for {arr.shape[0]}x{arr.shape[1]} matrix"
        ) from exc
    norms = np.linalg.norm(r, axis=0)
    norms[norms == 0.0] = 1.0
    r = r / norms
    cond = float(np.linalg.cond(r))
    if not np.isfinite(cond) or cond >= EIG_CONDITION_LIMIT:
        raise DiagonalizabilityError(
            f"eigenvector matrix condition number {cond:.3e} exceeds "
            f"{EIG_CONDITION_LIMIT:.0e}; matrix is numerically defective"
        )
    return EigResult(lambdas=lambdas, R=r, condition_number=cond)


def pinv(m, rtol: float = DEFAULT_PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse with relative singular value cutoff.

    Singular values at or below rtol * sigma_max are treated as exactly zero,
    which makes rank decisions reproducible across platforms.
    """
    if rtol <= 0:
        raise ValueError(f"rtol must be positive, got {rtol}")
    res = svd(m)
    if res.S.size == 0 or res.S[0] == 0.0:
        return np.zeros((res.V.shape[0], res.U.shape[0]), dtype=complex)
    cutoff = rtol * res.S[0]
    inv_s = np.where(res.S > cutoff, 1.0 / np.where(res.S > cutoff, res.S, 1.0), 0.0)
    return (res.V * inv_s) @ res.U.conj().T


def unitarity_defect(c) -> float:
    """Frobenius distance of C*C from the identity, scaled by sqrt(n)."""
    arr = as_complex_matrix(c)
    n = arr.shape[1]
    gram = arr.conj().T @ arr
    return float(np.linalg.norm(gram - np.eye(n)) / max(np.sqrt(n), 1.0))
