"""
Ground-truth shared-subspace regression instances and i.i.d. sampling.

Model: x ~ N(0, I_d), y = x^T B alpha_{t(i)} + sigma * z with z ~ N(0, 1).
Public rows come from tasks 1..t, private rows from task t + 1.
"""
import dataclasses
import logging
import math
from typing import Optional, Tuple

import numpy as np

from ptx.constants import TOL
from ptx.data.dataset import LabeledDataset
from ptx.errors import DimensionMismatch, InvalidDims
from ptx.linalg.subspace import OrthonormalBasis, orthonormalize
from ptx.utils import chunk_sizes

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class RegressionInstance:
    basis: OrthonormalBasis
    tasks: np.ndarray
    noise_std: float
    private_task: np.ndarray

    def __post_init__(self):
        tasks = np.array(self.tasks, dtype=np.float64, copy=True)
        private = np.array(self.private_task, dtype=np.float64, copy=True).reshape(-1)
        k = self.basis.dim_sub
        if tasks.ndim != 2 or tasks.shape[1] != k or private.shape != (k,):
            raise InvalidDims(
                f"tasks {tasks.shape} / private task {private.shape} do not match k={k}"
            )
        if not (np.all(np.isfinite(tasks)) and np.all(np.isfinite(private))):
            raise InvalidDims("task vectors must be finite")
        if not self.noise_std >= 0:
            raise InvalidDims(f"noise_std must be nonnegative, got {self.noise_std}")
        tasks.setflags(write=False)
        private.setflags(write=False)
        object.__setattr__(self, "tasks", tasks)
        object.__setattr__(self, "private_task", private)
        object.__setattr__(self, "noise_std", float(self.noise_std))

    @property
    def d(self) -> int:
        return self.basis.dim_ambient

    @property
    def k(self) -> int:
        return self.basis.dim_sub

    @property
    def t(self) -> int:
        return self.tasks.shape[0]

    @property
    def w_star(self) -> np.ndarray:
        """The private task's regression vector B alpha_{t+1}."""
        return self.basis.columns @ self.private_task

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "t": self.t,
            "noise_std": self.noise_std,
            "basis": self.basis.columns.tolist(),
            "tasks": self.tasks.tolist(),
            "private_task": self.private_task.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RegressionInstance":
        return cls(
            basis=OrthonormalBasis(np.asarray(obj["basis"], dtype=np.float64)),
            tasks=np.asarray(obj["tasks"], dtype=np.float64),
            noise_std=float(obj["noise_std"]),
            private_task=np.asarray(obj["private_task"], dtype=np.float64),
        )


@dataclasses.dataclass(frozen=True)
class DiversityStats:
    nu: float
    kappa_bar: float
    kappa: float


def _unit_rows(g: np.ndarray, norm: float) -> np.ndarray:
    lengths = np.linalg.norm(g, axis=-1, keepdims=True)
    return norm * g / lengths


def random_instance(
    d: int,
    k: int,
    t: int,
    noise_std: float = 1.0,
    task_norm: float = 1.0,
    rng: Optional[np.random.Generator] = None,
    private_task: Optional[np.ndarray] = None,
) -> RegressionInstance:
    """
    Draw B by orthonormalizing a d x k Gaussian matrix and every task as a
    Gaussian k-vector rescaled to norm `task_norm`. The private task is an
    independent draw of the same law unless given.
    """
    if not (1 <= k <= d and t >= 1):
        raise InvalidDims(f"need 1 <= k <= d and t >= 1, got d={d}, k={k}, t={t}")
    if not (noise_std >= 0 and task_norm >= 0):
        raise InvalidDims("noise_std and task_norm must be nonnegative")
    rng = rng if rng is not None else np.random.default_rng()

    basis = orthonormalize(rng.standard_normal((d, k)))
    tasks = _unit_rows(rng.standard_normal((t, k)), task_norm)
    if private_task is None:
        private_task = _unit_rows(rng.standard_normal(k), task_norm)
    return RegressionInstance(basis, tasks, noise_std, private_task)


def _sample(
    inst: RegressionInstance, alphas: np.ndarray, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    n = alphas.shape[0]
    x = rng.standard_normal((n, inst.d))
    z = rng.standard_normal(n)
    signal = x @ inst.basis.columns
    y = np.einsum("ij,ij->i", signal, alphas) + inst.noise_std * z
    return x, y


def _equal_allocation(n: int, tasks: int, what: str) -> int:
    per_task = n // tasks
    if per_task * tasks != n:
        logger.warning(
            f"{what}: {n} samples do not split evenly over {tasks} tasks; "
            f"dropping {n - per_task * tasks}"
        )
    return per_task


def sample_public(
    inst: RegressionInstance, n1: int, rng: np.random.Generator
) -> LabeledDataset:
    """n1 public rows, allocated equally over tasks 1..t in round-robin order."""
    per_task = _equal_allocation(n1, inst.t, "sample_public")
    task_index = np.tile(np.arange(1, inst.t + 1), per_task)
    x, y = _sample(inst, inst.tasks[task_index - 1], rng)
    return LabeledDataset(x, y, task_index)


def sample_private(
    inst: RegressionInstance, n2: int, rng: np.random.Generator
) -> LabeledDataset:
    """n2 rows of the private task t + 1."""
    alphas = np.broadcast_to(inst.private_task, (n2, inst.k))
    x, y = _sample(inst, alphas, rng)
    return LabeledDataset(x, y, np.full(n2, inst.t + 1))


def _check_vector(w: np.ndarray, d: int) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (d,):
        raise DimensionMismatch(f"expected a vector of length {d}, got {w.shape}")
    return w


def population_excess_risk(w: np.ndarray, inst: RegressionInstance) -> float:
    """L(w) - L(B alpha_{t+1}) = 0.5 ||w - B alpha_{t+1}||^2 for isotropic x."""
    w = _check_vector(w, inst.d)
    diff = w - inst.w_star
    return 0.5 * float(diff @ diff)


def population_excess_risk_mc(
    w: np.ndarray, inst: RegressionInstance, n: int, rng: np.random.Generator
) -> Tuple[float, float]:
    """
    Monte-Carlo estimate of the excess risk and its standard error.

    Paired estimator: each sample contributes
    0.5 * ((x^T w - y)^2 - (x^T w* - y)^2), so label noise cancels in the mean.
    """
    w = _check_vector(w, inst.d)
    w_star = inst.w_star
    s1, s2 = [], []
    for m in chunk_sizes(n):
        x = rng.standard_normal((m, inst.d))
        y = x @ w_star + inst.noise_std * rng.standard_normal(m)
        v = 0.5 * ((x @ w - y) ** 2 - (x @ w_star - y) ** 2)
        s1.append(math.fsum(v))
        s2.append(math.fsum(v * v))
    mean = math.fsum(s1) / n
    var = max(math.fsum(s2) - n * mean * mean, 0.0) / (n - 1)
    return mean, math.sqrt(var / n)


def diversity_from_tasks(tasks: np.ndarray) -> DiversityStats:
    tasks = np.asarray(tasks, dtype=np.float64)
    t, k = tasks.shape
    s = np.linalg.svd(tasks.T @ tasks / t, compute_uv=False)
    nu = float(s[k - 1])
    if nu <= TOL.rank * max(float(s[0]), 1.0):
        return DiversityStats(nu=0.0, kappa_bar=math.inf, kappa=math.inf)
    return DiversityStats(
        nu=nu,
        kappa_bar=float(np.sum(s)) / (k * nu),
        kappa=float(s[0]) / nu,
    )


def diversity_stats(inst: RegressionInstance) -> DiversityStats:
    """Task diversity nu = sigma_k(A^T A / t) and the two condition numbers."""
    return diversity_from_tasks(inst.tasks)


def residual_noise_variance(inst: RegressionInstance, bhat: OrthonormalBasis) -> float:
    """sigma^2 + ||(I - bhat bhat^T) B alpha_{t+1}||^2."""
    if bhat.dim_ambient != inst.d:
        raise DimensionMismatch(
            f"basis lives in R^{bhat.dim_ambient}, instance in R^{inst.d}"
        )
    w = inst.w_star
    out = w - bhat.columns @ (bhat.columns.T @ w)
    return inst.noise_std**2 + float(out @ out)


def residual_variance_mc(
    inst: RegressionInstance,
    bhat: OrthonormalBasis,
    n: int,
    rng: np.random.Generator,
) -> Tuple[float, float]:
    """
    Empirical variance (and standard error) of the residual
    y - (bhat^T x)^T (bhat^T B alpha_{t+1}) on private-task draws.
    """
    alpha_hat = bhat.columns.T @ inst.w_star
    s1, s2 = [], []
    for m in chunk_sizes(n):
        x = rng.standard_normal((m, inst.d))
        y = x @ inst.w_star + inst.noise_std * rng.standard_normal(m)
        r2 = (y - (x @ bhat.columns) @ alpha_hat) ** 2
        s1.append(math.fsum(r2))
        s2.append(math.fsum(r2 * r2))
    mean = math.fsum(s1) / n
    var = max(math.fsum(s2) - n * mean * mean, 0.0) / (n - 1)
    return mean, math.sqrt(var / n)


def residual_cross_covariance_mc(
    bhat: OrthonormalBasis, n: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Empirical cross-covariance of bhat^T x and (I - bhat bhat^T) x, with
    per-entry standard errors. Both blocks are zero-mean.
    """
    cols = bhat.columns
    k, d = bhat.dim_sub, bhat.dim_ambient
    s1 = np.zeros((k, d))
    s2 = np.zeros((k, d))
    for m in chunk_sizes(n):
        x = rng.standard_normal((m, d))
        u = x @ cols
        r = x - u @ cols.T
        s1 += u.T @ r
        s2 += (u * u).T @ (r * r)
    mean = s1 / n
    var = np.maximum(s2 - n * mean * mean, 0.0) / (n - 1)
    return mean, np.sqrt(var / n)
