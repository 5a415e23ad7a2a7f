"""
Dense subspace linear algebra: orthonormal bases, projectors, symmetric
eigendecomposition and principal-angle distances.
"""
import dataclasses
from typing import Tuple

import numpy as np

from ptx.constants import TOL
from ptx.errors import (
    DimensionMismatch,
    InvalidGamma,
    NoComplement,
    RankDeficient,
)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def _fix_column_signs(m: np.ndarray) -> np.ndarray:
    """Make the first nonzero entry of every column nonnegative."""
    m = np.array(m, dtype=np.float64, copy=True)
    for j in range(m.shape[1]):
        col = m[:, j]
        nz = np.flatnonzero(np.abs(col) > TOL.rank * max(np.abs(col).max(), 1.0))
        if len(nz) and col[nz[0]] < 0:
            m[:, j] = -col
    return m


@dataclasses.dataclass(frozen=True)
class OrthonormalBasis:
    """A d x k matrix with orthonormal columns."""

    columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.float64)
        if cols.ndim == 1:
            cols = cols[:, None]
        if cols.ndim != 2 or not 1 <= cols.shape[1] <= cols.shape[0]:
            raise DimensionMismatch(f"bad basis shape {cols.shape}")
        err = np.linalg.norm(cols.T @ cols - np.eye(cols.shape[1]))
        if not err <= TOL.orthonormal:
            raise RankDeficient(f"columns are not orthonormal (error {err:.3e})")
        object.__setattr__(self, "columns", _readonly(cols))

    @property
    def dim_ambient(self) -> int:
        return self.columns.shape[0]

    @property
    def dim_sub(self) -> int:
        return self.columns.shape[1]

    def projector(self) -> "Projector":
        return Projector(self.columns @ self.columns.T)

    def complement_projector(self) -> "Projector":
        return Projector(np.eye(self.dim_ambient) - self.columns @ self.columns.T)


@dataclasses.dataclass(frozen=True)
class Projector:
    """A d x d orthogonal projector P = QQ^T."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(self.matrix))

    @property
    def rank(self) -> int:
        return int(round(float(np.trace(self.matrix))))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


def identity_basis(d: int, k: int) -> OrthonormalBasis:
    return OrthonormalBasis(np.eye(d)[:, :k])


def orthonormalize(m: np.ndarray) -> OrthonormalBasis:
    """Orthonormal basis of the column space of m via Householder QR."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2 or m.shape[1] > m.shape[0] or m.size == 0:
        raise RankDeficient(f"cannot orthonormalize a matrix of shape {m.shape}")
    s = np.linalg.svd(m, compute_uv=False)
    if not s[-1] > TOL.rank * s[0]:
        raise RankDeficient(
            f"matrix is rank deficient (singular values {s[0]:.3e} .. {s[-1]:.3e})"
        )
    q, _ = np.linalg.qr(m, mode="reduced")
    return OrthonormalBasis(_fix_column_signs(q))


def sym_eig(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a symmetric matrix.

    Returns eigenvalues in descending order and the matching eigenvectors as
    columns. LAPACK's tridiagonal reduction plus implicit QL/QR (syevd) does
    the work; ties keep the solver's order because the sort is stable.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {m.shape}")
    w, v = np.linalg.eigh((m + m.T) / 2)
    order = np.argsort(-w, kind="stable")
    return w[order], _fix_column_signs(v[:, order])


def _check_pair(a: OrthonormalBasis, b: OrthonormalBasis):
    if a.dim_ambient != b.dim_ambient or a.dim_sub != b.dim_sub:
        raise DimensionMismatch(
            f"bases differ in shape: {a.columns.shape} vs {b.columns.shape}"
        )


def _residual(a: OrthonormalBasis, b: OrthonormalBasis) -> np.ndarray:
    # (I - b b^T) a without forming the d x d projector
    return a.columns - b.columns @ (b.columns.T @ a.columns)


def principal_angle_sin(a: OrthonormalBasis, b: OrthonormalBasis) -> float:
    """sin of the largest principal angle, ||(I - bb^T) a||_op."""
    _check_pair(a, b)
    s = np.linalg.norm(_residual(a, b), 2)
    return float(min(max(s, 0.0), 1.0))


def subspace_residual_norms(
    a: OrthonormalBasis, b: OrthonormalBasis
) -> Tuple[float, float]:
    """(Frobenius, operator) norms of (I - bb^T) a."""
    _check_pair(a, b)
    r = _residual(a, b)
    return float(np.linalg.norm(r, "fro")), float(np.linalg.norm(r, 2))


def perturbed_basis(
    b: OrthonormalBasis, gamma: float, rng: np.random.Generator
) -> OrthonormalBasis:
    """
    A basis at principal-angle distance exactly gamma from b.

    The first column is rotated by arcsin(gamma) toward a random unit vector in
    the orthogonal complement of span(b); the other columns are kept.
    """
    if not 0.0 <= gamma <= 1.0:
        raise InvalidGamma(f"gamma must lie in [0, 1], got {gamma}")
    if gamma == 0.0:
        return b
    if b.dim_sub == b.dim_ambient:
        raise NoComplement("a full-dimensional subspace has no complement")

    cols = b.columns
    while True:
        z = rng.standard_normal(b.dim_ambient)
        u = z - cols @ (cols.T @ z)
        norm = np.linalg.norm(u)
        if norm > 1e-8:
            break
    u /= norm
    # one re-projection keeps u orthogonal to span(b) to machine precision
    u -= cols @ (cols.T @ u)
    u /= np.linalg.norm(u)

    out = np.array(cols, copy=True)
    out[:, 0] = np.sqrt(1.0 - gamma**2) * cols[:, 0] + gamma * u
    return OrthonormalBasis(out)


def basis_with_leading(b: OrthonormalBasis, direction: np.ndarray) -> OrthonormalBasis:
    """
    Rotate b within its span so the first column points along the component
    of `direction` inside span(b).
    """
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != (b.dim_ambient,):
        raise DimensionMismatch(
            f"direction has shape {direction.shape}, expected ({b.dim_ambient},)"
        )
    c = b.columns.T @ direction
    norm = np.linalg.norm(c)
    if norm == 0.0:
        return b
    c = c / norm
    q, _ = np.linalg.qr(np.column_stack([c, np.eye(b.dim_sub)]), mode="reduced")
    q = q[:, : b.dim_sub]
    if q[:, 0] @ c < 0:
        q[:, 0] = -q[:, 0]
    return OrthonormalBasis(b.columns @ q)
