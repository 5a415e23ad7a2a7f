"""JSON wire models for configs, reports and CLI output."""
import math
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator

from ptx.data.synth import DiversityStats, RegressionInstance
from ptx.linalg.subspace import OrthonormalBasis
from ptx.model.dp_linreg import DpSgdConfig, FitResult
from ptx.model.mom import MomReport
from ptx.model.two_phase import TwoPhaseResult
from ptx.attack.tracing import MembershipReport
from ptx.harness.method_registry import method_info
from ptx.privacy.accountant import PrivacyBudget

METHODS = tuple(method_info)


def _finite_or_none(x: Optional[float]) -> Optional[float]:
    if x is None or not math.isfinite(x):
        return None
    return float(x)


class DpSgdConfigModel(BaseModel):
    clip_norm: float = Field(0.5, gt=0)
    learning_rate: float = Field(0.1, gt=0)
    epochs: int = Field(50, ge=0)
    batch_size: int = Field(32, ge=1)
    noise_multiplier: float = Field(0.0, ge=0)
    neighbouring: Literal["replace_one", "add_remove"] = "replace_one"
    lr_schedule: Literal["constant", "cosine"] = "constant"
    init: Optional[List[float]] = None

    def to_config(self) -> DpSgdConfig:
        return DpSgdConfig(**self.dict())


class PrivacyBudgetModel(BaseModel):
    epsilon: float
    delta: float

    @classmethod
    def from_budget(cls, budget: Optional[PrivacyBudget]):
        if budget is None:
            return "nonprivate"
        return cls(epsilon=budget.epsilon, delta=budget.delta)


class ExperimentConfig(BaseModel):
    """A simulated study: one row per (method, n1, n2, eps, gamma, trial) cell."""

    d: int = Field(25, ge=1)
    k: int = Field(5, ge=1)
    t: int = Field(100, ge=1)
    n1_list: List[int] = [500, 2000]
    n2_list: List[int] = [500]
    noise_std: float = Field(1.0, ge=0)
    task_norm: float = Field(1.0, ge=0)
    eps_list: List[float] = [1.1]
    delta: float = 1e-5
    dp: DpSgdConfigModel = DpSgdConfigModel()
    methods: List[str] = list(METHODS[:4])
    gamma_list: Optional[List[float]] = None
    gamma_align: bool = True
    trials: int = Field(20, ge=1)
    base_seed: int = Field(0, ge=0, lt=2**64)

    @root_validator(pre=True)
    def promote_scalar_n2(cls, values):
        if "n2" in values:
            if "n2_list" in values:
                raise ValueError("give either n2 or n2_list, not both")
            n2 = values.pop("n2")
            values["n2_list"] = n2 if isinstance(n2, list) else [n2]
        return values

    @validator("n1_list", "n2_list", "eps_list", "methods")
    def nonempty(cls, v):
        if not v:
            raise ValueError("list must be nonempty")
        return v

    @validator("n1_list", "n2_list", each_item=True)
    def positive_counts(cls, v):
        if v < 1:
            raise ValueError("sample counts must be positive")
        return v

    @validator("eps_list", each_item=True)
    def positive_eps(cls, v):
        if not v > 0:
            raise ValueError("epsilon must be positive")
        return v

    @validator("delta")
    def delta_range(cls, v):
        if not 0 < v < 1:
            raise ValueError("delta must lie in (0, 1)")
        return v

    @validator("methods", each_item=True)
    def known_method(cls, v):
        if v not in METHODS:
            raise ValueError(f"unknown method {v!r}; choose from {METHODS}")
        return v

    @validator("gamma_list")
    def gamma_range(cls, v):
        if v is not None:
            if not v:
                raise ValueError("gamma_list must be nonempty when given")
            if any(not 0 <= g <= 1 for g in v):
                raise ValueError("gamma must lie in [0, 1]")
        return v

    @root_validator(skip_on_failure=True)
    def shapes(cls, values):
        if values["k"] > values["d"]:
            raise ValueError("k must not exceed d")
        if "two_phase_oracle_gamma" in values["methods"] and not values["gamma_list"]:
            raise ValueError("two_phase_oracle_gamma needs a gamma_list")
        return values


class MomReportModel(BaseModel):
    k: int
    eigenvalues: List[float]
    spectral_gap: float
    basis: List[List[float]]

    @classmethod
    def from_report(cls, report: MomReport):
        return cls(
            k=report.k,
            eigenvalues=report.moment_eigenvalues.tolist(),
            spectral_gap=report.spectral_gap,
            basis=report.basis.columns.tolist(),
        )


class FitResultModel(BaseModel):
    weights: List[float]
    steps_taken: int
    privacy_spent: Union[PrivacyBudgetModel, Literal["nonprivate"]]
    trajectory_summary: List[float]
    noise_multiplier: float
    sampling_rate: float

    @classmethod
    def from_fit(cls, fit: FitResult):
        return cls(
            weights=fit.weights.tolist(),
            steps_taken=fit.steps_taken,
            privacy_spent=PrivacyBudgetModel.from_budget(fit.privacy_spent),
            trajectory_summary=fit.trajectory_summary,
            noise_multiplier=fit.noise_multiplier,
            sampling_rate=fit.sampling_rate,
        )


class TwoPhaseResultModel(BaseModel):
    subspace: List[List[float]]
    alpha_hat: List[float]
    lifted: List[float]
    sin_theta: Optional[float] = None
    excess_risk: Optional[float] = None
    l2_param_error: Optional[float] = None
    privacy_spent: Union[PrivacyBudgetModel, Literal["nonprivate"]]
    mom: Optional[MomReportModel] = None

    @classmethod
    def from_result(cls, result: TwoPhaseResult):
        return cls(
            subspace=result.subspace.columns.tolist(),
            alpha_hat=result.alpha_hat.tolist(),
            lifted=result.lifted.tolist(),
            sin_theta=_finite_or_none(result.sin_theta),
            excess_risk=_finite_or_none(result.excess_risk),
            l2_param_error=_finite_or_none(result.l2_param_error),
            privacy_spent=PrivacyBudgetModel.from_budget(result.privacy_spent),
            mom=MomReportModel.from_report(result.mom) if result.mom else None,
        )


class MembershipReportModel(BaseModel):
    mean_in: float
    mean_out: float
    se_in: float
    se_out: float
    n_trials: int
    sum_in_scores: float
    se_sum_in: float
    mean_abs_out: float

    @classmethod
    def from_report(cls, report: MembershipReport):
        return cls(**vars(report))


class AccountantOutput(BaseModel):
    epsilon: float
    delta: float
    noise_multiplier: float
    steps: int
    q: float


class SampleSizes(BaseModel):
    n1: Optional[int] = None
    n2: Optional[int] = None


class DiversityStatsModel(BaseModel):
    nu: float
    kappa_bar: Optional[float]
    kappa: Optional[float]

    @classmethod
    def from_stats(cls, stats: DiversityStats):
        return cls(
            nu=stats.nu,
            kappa_bar=_finite_or_none(stats.kappa_bar),
            kappa=_finite_or_none(stats.kappa),
        )


class InstanceModel(BaseModel):
    d: int
    k: int
    t: int
    noise_std: float
    basis: List[List[float]]
    tasks: List[List[float]]
    private_task: List[float]
    diversity: Optional[DiversityStatsModel] = None

    @root_validator(skip_on_failure=True)
    def shapes(cls, values):
        basis = np.asarray(values["basis"])
        if basis.shape != (values["d"], values["k"]):
            raise ValueError(f"basis has shape {basis.shape}")
        if np.asarray(values["tasks"]).shape != (values["t"], values["k"]):
            raise ValueError("tasks must be t x k")
        if len(values["private_task"]) != values["k"]:
            raise ValueError("private_task must have k entries")
        return values

    def to_instance(self) -> RegressionInstance:
        return RegressionInstance(
            basis=OrthonormalBasis(np.asarray(self.basis, dtype=np.float64)),
            tasks=np.asarray(self.tasks, dtype=np.float64),
            noise_std=self.noise_std,
            private_task=np.asarray(self.private_task, dtype=np.float64),
        )

    @classmethod
    def from_instance(cls, inst: RegressionInstance, diversity=None):
        return cls(
            **inst.to_dict(),
            diversity=DiversityStatsModel.from_stats(diversity) if diversity else None,
        )


class RunManifest(BaseModel):
    ptx_version: str
    command: str
    config: ExperimentConfig
    base_seed: int
    cells: int
    failed_cells: int
    wall_time_s: float
    results_csv: str
