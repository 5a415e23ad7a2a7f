"""
Differentially private linear regression by clipped, noised minibatch SGD on
the squared loss, and the nonprivate least-squares baseline.

Sampling: every epoch shuffles the rows and walks n // batch_size fixed
batches. Privacy is accounted as a subsampled Gaussian mechanism with
q = batch_size / n, the usual practice for shuffled DP-SGD. Neighbouring
datasets differ in one replaced row, which moves the clipped gradient sum by
at most 2C, so the noise multiplier is taken relative to 2C. The add_remove
setting scales it to C instead.
"""
import dataclasses
from dataclasses import field
import logging
import math
from typing import Callable, List, Optional

import numpy as np

from ptx.constants import DEFAULT_DELTA
from ptx.data.dataset import LabeledDataset
from ptx.errors import Diverged, EmptyData, InvalidArgs, RankDeficient
from ptx.privacy.accountant import (
    MechanismSchedule,
    PrivacyBudget,
    calibrate_noise,
    epsilon_spent,
)
from ptx.utils import ceil_count

logger = logging.getLogger(__name__)

LR_SCHEDULES = ("constant", "cosine")
# sensitivity of the clipped gradient sum, in units of C
SENSITIVITY = {"replace_one": 2.0, "add_remove": 1.0}


@dataclasses.dataclass
class DpSgdConfig:
    clip_norm: float = field(
        default=0.5, metadata={"help": "Per-example gradient L2 clipping norm C."}
    )
    learning_rate: float = field(default=0.1, metadata={"help": "Step size."})
    epochs: int = field(default=50, metadata={"help": "Passes over the data."})
    batch_size: int = field(default=32, metadata={"help": "Rows per step."})
    noise_multiplier: float = field(
        default=0.0,
        metadata={
            "help": "Noise std over the sensitivity (2C for replace_one, C for add_remove). "
            "Ignored when a target budget is given."
        },
    )
    neighbouring: str = field(
        default="replace_one",
        metadata={"help": "replace_one (noise scaled to 2C) or add_remove (scaled to C)."},
    )
    lr_schedule: str = field(
        default="constant", metadata={"help": "constant or cosine."}
    )
    init: Optional[List[float]] = field(
        default=None, metadata={"help": "Initial weights; zeros when None."}
    )

    def __post_init__(self):
        if not self.clip_norm > 0:
            raise InvalidArgs(f"clip_norm must be positive, got {self.clip_norm}")
        if not self.learning_rate > 0:
            raise InvalidArgs(f"learning_rate must be positive, got {self.learning_rate}")
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise InvalidArgs(f"epochs must be a nonnegative integer, got {self.epochs}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise InvalidArgs(f"batch_size must be a positive integer, got {self.batch_size}")
        if not self.noise_multiplier >= 0:
            raise InvalidArgs(
                f"noise_multiplier must be nonnegative, got {self.noise_multiplier}"
            )
        if self.lr_schedule not in LR_SCHEDULES:
            raise InvalidArgs(f"lr_schedule must be one of {LR_SCHEDULES}")
        if self.neighbouring not in SENSITIVITY:
            raise InvalidArgs(f"neighbouring must be one of {tuple(SENSITIVITY)}")


@dataclasses.dataclass
class FitResult:
    weights: np.ndarray
    steps_taken: int
    # None for a nonprivate fit
    privacy_spent: Optional[PrivacyBudget]
    # training loss after each epoch; a diagnostic, not a private release
    trajectory_summary: List[float] = field(default_factory=list)
    noise_multiplier: float = 0.0
    sampling_rate: float = 0.0


def ols_fit(data: LabeledDataset) -> FitResult:
    """Least squares on one task's rows."""
    n, p = data.inputs.shape
    if n == 0:
        raise EmptyData("cannot fit an empty dataset")
    if n < p:
        raise RankDeficient(f"{n} rows cannot determine {p} weights")
    w, _, rank, _ = np.linalg.lstsq(data.inputs, data.labels, rcond=None)
    if rank < p:
        raise RankDeficient(f"design matrix has rank {rank} < {p}")
    resid = data.inputs @ w - data.labels
    return FitResult(
        weights=w,
        steps_taken=0,
        privacy_spent=None,
        trajectory_summary=[0.5 * float(resid @ resid) / n],
    )


def clip_gradients(grads: np.ndarray, clip_norm: float) -> np.ndarray:
    norms = np.linalg.norm(grads, axis=1)
    return grads * (clip_norm / np.maximum(norms, clip_norm))[:, None]


def _learning_rate(cfg: DpSgdConfig, step: int, total: int) -> float:
    if cfg.lr_schedule == "cosine" and total > 0:
        return cfg.learning_rate * 0.5 * (1 + math.cos(math.pi * step / total))
    return cfg.learning_rate


def dpsgd_fit(
    data: LabeledDataset,
    cfg: DpSgdConfig,
    target: Optional[PrivacyBudget] = None,
    rng: Optional[np.random.Generator] = None,
    grad_hook: Optional[Callable[[np.ndarray], None]] = None,
) -> FitResult:
    """
    DP-SGD on 0.5 * (x^T w - y)^2.

    Each step clips the per-example gradients (x_i^T w - y_i) x_i to norm C,
    averages them over the batch and adds N(0, (s sigma C / batch)^2) noise per
    coordinate, with s = 2 for replace_one neighbours and s = 1 for add_remove.
    With `target` the noise multiplier is calibrated so the accountant
    reports at most target.epsilon for the realized schedule.
    `grad_hook` sees every batch of clipped per-example gradients.
    """
    n, p = data.inputs.shape
    if n == 0:
        raise EmptyData("DP-SGD needs at least one row")
    if cfg.batch_size > n:
        raise InvalidArgs(f"batch_size {cfg.batch_size} exceeds the {n} rows")
    rng = rng if rng is not None else np.random.default_rng()

    steps_per_epoch = n // cfg.batch_size
    total_steps = cfg.epochs * steps_per_epoch
    q = cfg.batch_size / n
    if target is not None:
        sigma = calibrate_noise(target, total_steps, q)
    else:
        sigma = cfg.noise_multiplier
    noise_std = SENSITIVITY[cfg.neighbouring] * sigma * cfg.clip_norm / cfg.batch_size

    if cfg.init is not None:
        w = np.array(cfg.init, dtype=np.float64)
        if w.shape != (p,):
            raise InvalidArgs(f"init has shape {w.shape}, expected ({p},)")
    else:
        w = np.zeros(p)

    x, y = data.inputs, data.labels
    losses = []
    step = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for s in range(steps_per_epoch):
            idx = perm[s * cfg.batch_size : (s + 1) * cfg.batch_size]
            xb = x[idx]
            grads = clip_gradients(xb * (xb @ w - y[idx])[:, None], cfg.clip_norm)
            if grad_hook is not None:
                grad_hook(grads)
            update = grads.sum(axis=0) / cfg.batch_size
            if sigma > 0:
                update = update + noise_std * rng.standard_normal(p)
            w = w - _learning_rate(cfg, step, total_steps) * update
            step += 1
        if not np.all(np.isfinite(w)):
            raise Diverged(f"DP-SGD weights became non-finite in epoch {epoch + 1}")
        resid = x @ w - y
        losses.append(0.5 * float(resid @ resid) / n)

    schedule = MechanismSchedule(total_steps, q, sigma)
    if target is not None:
        spent = PrivacyBudget(epsilon_spent(schedule, target.delta), target.delta)
        if spent.epsilon > target.epsilon:
            raise AssertionError(
                f"accounted epsilon {spent.epsilon} exceeds target {target.epsilon}"
            )
    elif sigma > 0 or total_steps == 0:
        spent = PrivacyBudget(epsilon_spent(schedule, DEFAULT_DELTA), DEFAULT_DELTA)
    else:
        spent = None

    return FitResult(
        weights=w,
        steps_taken=total_steps,
        privacy_spent=spent,
        trajectory_summary=losses,
        noise_multiplier=sigma,
        sampling_rate=q,
    )


def required_private_samples(k: int, err: float, epsilon: float) -> int:
    """Private samples for excess risk err: ceil(k/err + k/(epsilon sqrt(err)))."""
    if not (err > 0 and epsilon > 0 and k >= 1):
        raise InvalidArgs(f"need k >= 1, err > 0, epsilon > 0; got {k}, {err}, {epsilon}")
    value = k / err
    if not math.isinf(epsilon):
        value += k / (epsilon * math.sqrt(err))
    return ceil_count(value)
