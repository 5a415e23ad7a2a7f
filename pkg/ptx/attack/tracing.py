"""
Tracing (fingerprinting) attack audits for k-dimensional private regression.

The attacker knows the in-subspace truth alpha and scores a row (x, y)
against a mechanism output M by
    A = (y - x^T alpha) * sum_{j < k} (M_j - alpha_j) x_j,
leaving out the last coordinate, which the prior uses to fix the norm of
alpha. Rows used by M score positive on average; fresh rows score zero.
"""
import dataclasses
import logging
import math
from typing import Callable, Optional, Tuple

import numpy as np

from ptx.constants import MIN_ATTACK_TRIALS
from ptx.data.dataset import LabeledDataset
from ptx.data.synth import RegressionInstance
from ptx.errors import DimensionMismatch, InvalidArgs, InvalidRho, KTooSmall
from ptx.linalg.subspace import OrthonormalBasis, identity_basis
from ptx.model.dp_linreg import DpSgdConfig, dpsgd_fit, ols_fit
from ptx.privacy.accountant import PrivacyBudget
from ptx.utils import mean_and_se

logger = logging.getLogger(__name__)

# (data, true alpha, rng) -> k-dimensional estimate
Mechanism = Callable[[LabeledDataset, np.ndarray, np.random.Generator], np.ndarray]


@dataclasses.dataclass(frozen=True)
class AttackInstance:
    """
    The attacked model y = x^T alpha_hat_true + noise in k coordinates. The
    noise variance is sigma^2 plus the signal the basis misses,
    sigma^2 + ||B alpha||^2 - rho^2, which is sigma^2 + 1 - rho^2 for
    ||B alpha|| = 1 and never below sigma^2.
    """

    basis: OrthonormalBasis
    alpha_hat_true: np.ndarray
    rho: float
    sigma: float
    effective_noise_var: float

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0 + 1e-12:
            raise InvalidRho(f"rho must lie in (0, 1], got {self.rho}")
        if self.basis.dim_sub < 2:
            raise KTooSmall("the attack needs k >= 2")
        alpha = np.asarray(self.alpha_hat_true, dtype=np.float64)
        if abs(np.linalg.norm(alpha) - self.rho) > 1e-10:
            raise InvalidArgs("||alpha_hat_true|| must equal rho")
        object.__setattr__(self, "alpha_hat_true", alpha)
        var = self.effective_noise_var
        if not math.isfinite(var) or var < self.sigma**2 - 1e-10:
            raise InvalidArgs(
                f"effective_noise_var {var} is below the label noise sigma^2 = {self.sigma**2}"
            )

    @property
    def k(self) -> int:
        return self.basis.dim_sub

    @classmethod
    def synthetic(cls, k: int, rho: float, sigma: float) -> "AttackInstance":
        """The k-dimensional model with ||B alpha|| = 1 and rho = ||alpha_hat||."""
        if k < 2:
            raise KTooSmall(f"the attack needs k >= 2, got {k}")
        if not 0.0 < rho <= 1.0:
            raise InvalidRho(f"rho must lie in (0, 1], got {rho}")
        alpha = np.zeros(k)
        alpha[-1] = rho
        return cls(
            basis=identity_basis(k, k),
            alpha_hat_true=alpha,
            rho=rho,
            sigma=sigma,
            effective_noise_var=sigma**2 + 1.0 - rho**2,
        )

    @classmethod
    def from_regression(
        cls, inst: RegressionInstance, bhat: OrthonormalBasis
    ) -> "AttackInstance":
        """
        The model seen through bhat: alpha_hat = bhat^T B alpha and residual
        variance sigma^2 + ||B alpha||^2 - rho^2.
        """
        if bhat.dim_ambient != inst.d:
            raise DimensionMismatch(
                f"basis lives in R^{bhat.dim_ambient}, instance in R^{inst.d}"
            )
        w = inst.w_star
        alpha = bhat.columns.T @ w
        rho = float(np.linalg.norm(alpha))
        return cls(
            basis=bhat,
            alpha_hat_true=alpha,
            rho=rho,
            sigma=inst.noise_std,
            effective_noise_var=inst.noise_std**2 + float(w @ w) - rho**2,
        )


@dataclasses.dataclass
class MembershipReport:
    mean_in: float
    mean_out: float
    se_in: float
    se_out: float
    n_trials: int
    sum_in_scores: float
    se_sum_in: float = 0.0
    mean_abs_out: float = 0.0


def _check_k(k: int):
    if k < 2:
        raise KTooSmall(f"the attack needs k >= 2, got {k}")


def attack_scores(
    x: np.ndarray, y: np.ndarray, mechanism_output: np.ndarray, alpha_hat: np.ndarray
) -> np.ndarray:
    """Scores of every row of x (n x k) against one mechanism output."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    out = np.asarray(mechanism_output, dtype=np.float64)
    alpha = np.asarray(alpha_hat, dtype=np.float64)
    k = x.shape[1]
    if out.shape != (k,) or alpha.shape != (k,) or y.shape != (x.shape[0],):
        raise DimensionMismatch(
            f"shapes disagree: x {x.shape}, y {y.shape}, "
            f"output {out.shape}, alpha {alpha.shape}"
        )
    _check_k(k)
    residual = y - x @ alpha
    return residual * (x[:, : k - 1] @ (out - alpha)[: k - 1])


def attack_score(
    sample: Tuple[np.ndarray, float],
    mechanism_output: np.ndarray,
    alpha_hat: np.ndarray,
) -> float:
    x_b, y = sample
    return float(attack_scores(np.asarray(x_b)[None, :], [y], mechanism_output, alpha_hat)[0])


def sample_prior(k: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """
    Draw alpha with ||alpha|| = rho: the first k - 1 coordinates are
    N(0, rho^2 / (k - 1)) truncated at one standard deviation, sampled by
    rejection; the last coordinate takes a random sign and the remaining norm.
    """
    _check_k(k)
    if not 0.0 < rho <= 1.0:
        raise InvalidRho(f"rho must lie in (0, 1], got {rho}")
    scale = rho / math.sqrt(k - 1)
    omega = np.empty(k)
    filled = 0
    while filled < k - 1:
        draw = scale * rng.standard_normal(k - 1 - filled)
        keep = draw[np.abs(draw) <= scale]
        omega[filled : filled + len(keep)] = keep
        filled += len(keep)
    head = omega[: k - 1]
    sign = 1.0 if rng.random() < 0.5 else -1.0
    omega[k - 1] = sign * math.sqrt(max(rho * rho - float(head @ head), 0.0))
    return omega


def _draw_rows(
    k: int, alpha: np.ndarray, noise_var: float, n: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    x = rng.standard_normal((n, k))
    y = x @ alpha + math.sqrt(max(noise_var, 0.0)) * rng.standard_normal(n)
    return x, y


def membership_experiment(
    inst: AttackInstance,
    mechanism: Mechanism,
    n2: int,
    n_trials: int,
    rng: np.random.Generator,
) -> MembershipReport:
    """
    Per trial: draw alpha from the prior, draw n2 rows of the k-dimensional
    model, run the mechanism, then score the n2 member rows and n2 fresh rows.
    Means are per-row averages; standard errors are across trials.
    """
    if n2 < 1 or n_trials < 1:
        raise InvalidArgs("n2 and n_trials must be positive")
    if n_trials < MIN_ATTACK_TRIALS:
        logger.warning(
            f"membership_experiment with {n_trials} trials; standard errors "
            f"need at least {MIN_ATTACK_TRIALS}"
        )
    k = inst.k
    mean_in, mean_out, sum_in, abs_out = [], [], [], []
    for _ in range(n_trials):
        alpha = sample_prior(k, inst.rho, rng)
        x, y = _draw_rows(k, alpha, inst.effective_noise_var, n2, rng)
        output = mechanism(LabeledDataset(x, y, np.ones(n2, dtype=np.int64)), alpha, rng)
        scores_in = attack_scores(x, y, output, alpha)
        x_out, y_out = _draw_rows(k, alpha, inst.effective_noise_var, n2, rng)
        scores_out = attack_scores(x_out, y_out, output, alpha)
        mean_in.append(math.fsum(scores_in) / n2)
        mean_out.append(math.fsum(scores_out) / n2)
        sum_in.append(math.fsum(scores_in))
        abs_out.append(math.fsum(np.abs(scores_out)) / n2)

    m_in, se_in = mean_and_se(mean_in)
    m_out, se_out = mean_and_se(mean_out)
    m_sum, se_sum = mean_and_se(sum_in)
    m_abs, _ = mean_and_se(abs_out)
    return MembershipReport(
        mean_in=m_in,
        mean_out=m_out,
        se_in=se_in,
        se_out=se_out,
        n_trials=n_trials,
        sum_in_scores=m_sum,
        se_sum_in=se_sum,
        mean_abs_out=m_abs,
    )


def default_attack_dp_config() -> DpSgdConfig:
    """DP-SGD that reaches the truth from zero on n2 = 100 rows (150 steps)."""
    return DpSgdConfig(clip_norm=0.5, learning_rate=0.1, epochs=30, batch_size=20)


def make_mechanism(
    name: str,
    eps: Optional[float] = None,
    delta: Optional[float] = None,
    cfg: Optional[DpSgdConfig] = None,
) -> Mechanism:
    """oracle: return alpha exactly; ols: least squares; dpsgd: DP-SGD at (eps, delta)."""
    if name == "oracle":
        return lambda data, alpha, rng: np.array(alpha, copy=True)
    if name == "ols":
        return lambda data, alpha, rng: ols_fit(data).weights
    if name == "dpsgd":
        if eps is None or delta is None:
            raise InvalidArgs("the dpsgd mechanism needs eps and delta")
        target = PrivacyBudget(eps, delta)
        cfg = cfg if cfg is not None else default_attack_dp_config()

        def run(data, alpha, rng):
            # the batch cannot exceed the rows an experiment hands us
            fit_cfg = dataclasses.replace(cfg, batch_size=min(cfg.batch_size, data.n))
            return dpsgd_fit(data, fit_cfg, target=target, rng=rng).weights

        return run
    raise InvalidArgs(f"unknown mechanism {name!r}; use oracle, ols or dpsgd")
