"""
Two-phase public-to-private transfer.

1. Estimate a k-dimensional subspace from public rows only (or take an
   oracle basis).
2. Project the private inputs onto it.
3. Fit the k-dimensional weights privately and lift them back to R^d.
"""
import dataclasses
import logging
import math
from typing import Optional, Union

import numpy as np

from ptx.data.dataset import LabeledDataset
from ptx.data.synth import RegressionInstance, population_excess_risk
from ptx.errors import DimensionMismatch, EmptyPrivate, InvalidK
from ptx.linalg.subspace import OrthonormalBasis, principal_angle_sin
from ptx.model.dp_linreg import DpSgdConfig, FitResult, dpsgd_fit, ols_fit
from ptx.model.mom import MomReport, estimate_subspace_mom
from ptx.privacy.accountant import PrivacyBudget

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class TwoPhaseResult:
    subspace: OrthonormalBasis
    alpha_hat: np.ndarray
    lifted: np.ndarray
    privacy_spent: Optional[PrivacyBudget]
    fit: FitResult
    # filled only when the ground truth is known
    sin_theta: float = math.nan
    excess_risk: float = math.nan
    l2_param_error: float = math.nan
    mom: Optional[MomReport] = None


def project_dataset(data: LabeledDataset, basis: OrthonormalBasis) -> LabeledDataset:
    """Replace every input x_i by basis^T x_i."""
    if data.dim != basis.dim_ambient:
        raise DimensionMismatch(
            f"data has d={data.dim}, basis lives in R^{basis.dim_ambient}"
        )
    return LabeledDataset(data.inputs @ basis.columns, data.labels, data.task_index)


def two_phase_transfer(
    public: Union[LabeledDataset, OrthonormalBasis],
    private: LabeledDataset,
    k: int,
    dp_cfg: Optional[DpSgdConfig],
    target: Optional[PrivacyBudget] = None,
    inst: Optional[RegressionInstance] = None,
    rng: Optional[np.random.Generator] = None,
) -> TwoPhaseResult:
    """
    Run the pipeline. `public` is either the public dataset, from which the
    subspace is estimated by the method of moments, or an oracle basis.
    With dp_cfg None the k-dimensional fit is nonprivate least squares.

    Only `private` rows reach the noised fit; the subspace never sees them.
    """
    if private.n == 0:
        raise EmptyPrivate("the private dataset is empty")
    if not 1 <= k <= private.dim:
        raise InvalidK(f"k={k} must lie in [1, d={private.dim}]")

    mom = None
    if isinstance(public, OrthonormalBasis):
        basis = public
        if basis.dim_sub != k:
            raise DimensionMismatch(f"oracle basis has k={basis.dim_sub}, expected {k}")
    else:
        mom = estimate_subspace_mom(public, k)
        basis = mom.basis

    projected = project_dataset(private, basis)
    if dp_cfg is None:
        fit = ols_fit(projected)
    else:
        fit = dpsgd_fit(projected, dp_cfg, target=target, rng=rng)
    lifted = basis.columns @ fit.weights

    result = TwoPhaseResult(
        subspace=basis,
        alpha_hat=fit.weights,
        lifted=lifted,
        privacy_spent=fit.privacy_spent,
        fit=fit,
        mom=mom,
    )
    if inst is not None:
        result.sin_theta = principal_angle_sin(basis, inst.basis)
        result.excess_risk = population_excess_risk(lifted, inst)
        result.l2_param_error = float(np.linalg.norm(lifted - inst.w_star))
    return result


def projection_bias(basis: OrthonormalBasis, inst: RegressionInstance) -> float:
    """||basis basis^T B alpha - B alpha||^2, the in-subspace predictor's bias."""
    if basis.dim_ambient != inst.d:
        raise DimensionMismatch(
            f"basis lives in R^{basis.dim_ambient}, instance in R^{inst.d}"
        )
    w = inst.w_star
    diff = basis.columns @ (basis.columns.T @ w) - w
    return float(diff @ diff)
