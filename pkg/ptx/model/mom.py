"""
Method-of-moments estimation of the shared subspace from public data.

For x ~ N(0, I_d) and y = x^T theta + noise,
    E[y^2 x x^T] = (||theta||^2 + sigma^2) I + 2 theta theta^T.
Averaged over tasks, the isotropic part shifts every eigenvalue by the same
amount, so the top-k eigenvectors of (1/n) sum_i y_i^2 x_i x_i^T estimate
span(B) without an explicit centering term.
"""
import dataclasses
import logging

import numpy as np

from ptx.constants import TOL
from ptx.data.dataset import LabeledDataset
from ptx.errors import EmptyData, InvalidGamma, InvalidK
from ptx.linalg.subspace import OrthonormalBasis, sym_eig
from ptx.utils import ceil_count, fsum_arrays

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class MomReport:
    basis: OrthonormalBasis
    moment_eigenvalues: np.ndarray
    spectral_gap: float

    @property
    def k(self) -> int:
        return self.basis.dim_sub


def label_weighted_moment(public: LabeledDataset, shards: int = 1) -> np.ndarray:
    """
    M = (1/n) sum_i y_i^2 x_i x_i^T.

    Rows are split into `shards` contiguous blocks; block partial sums are
    combined with an exactly rounded elementwise sum, so the result does not
    depend on the reduction order.
    """
    n = public.n
    shards = max(1, min(int(shards), n))
    bounds = np.linspace(0, n, shards + 1).astype(int)
    parts = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        x = public.inputs[lo:hi]
        w = public.labels[lo:hi] ** 2
        parts.append((x * w[:, None]).T @ x)
    m = fsum_arrays(parts) / n
    return (m + m.T) / 2


def estimate_subspace_mom(public: LabeledDataset, k: int, shards: int = 1) -> MomReport:
    """Top-k eigenspace of the label-weighted second moment of the public data."""
    if public.n == 0:
        raise EmptyData("public dataset is empty")
    if not 1 <= k <= min(public.dim, public.n):
        raise InvalidK(f"k={k} must lie in [1, min(d={public.dim}, n={public.n})]")

    eigenvalues, vectors = sym_eig(label_weighted_moment(public, shards))
    lam_next = eigenvalues[k] if k < public.dim else 0.0
    gap = float(eigenvalues[k - 1] - lam_next)
    if gap < TOL.degenerate_gap:
        logger.warning(
            f"DegenerateSpectrum: gap between eigenvalues {k} and {k + 1} is {gap:.3e}"
        )
    eigenvalues.setflags(write=False)
    return MomReport(
        basis=OrthonormalBasis(vectors[:, :k]),
        moment_eigenvalues=eigenvalues,
        spectral_gap=gap,
    )


def required_public_samples(d: int, k: int, gamma: float) -> int:
    """Public samples needed for subspace error gamma: ceil(d k^2 / gamma^2)."""
    if not 0.0 < gamma <= 1.0:
        raise InvalidGamma(f"gamma must lie in (0, 1], got {gamma}")
    return ceil_count(d * k * k / (gamma * gamma))
