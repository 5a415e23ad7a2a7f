"""
Renyi-DP accounting for the subsampled Gaussian mechanism.

The noise multiplier is the ratio of the Gaussian noise std to the L2
sensitivity of the noised sum. RDP at integer orders uses the exact binomial
expansion evaluated in log space; fractional orders use the standard
two-sided series with Gaussian tail integrals.
"""
import dataclasses
import functools
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from ptx.constants import DEFAULT_ORDERS, TOL
from ptx.errors import EmptyCurve, InvalidArgs, InvalidOrder, Unachievable

RdpCurve = List[Tuple[float, float]]


@dataclasses.dataclass(frozen=True)
class MechanismSchedule:
    steps: int
    sampling_rate: float
    noise_multiplier: float

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 0:
            raise InvalidArgs(f"steps must be a nonnegative integer, got {self.steps}")
        if not 0.0 <= self.sampling_rate <= 1.0:
            raise InvalidArgs(f"sampling_rate must lie in [0, 1], got {self.sampling_rate}")
        if not self.noise_multiplier >= 0.0:
            raise InvalidArgs(
                f"noise_multiplier must be nonnegative, got {self.noise_multiplier}"
            )


@dataclasses.dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon >= 0.0:
            raise InvalidArgs(f"epsilon must be nonnegative, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgs(f"delta must lie in (0, 1), got {self.delta}")


########################
# LOG-SPACE ARITHMETIC #
########################


def _log_add(logx, logy):
    """Add two numbers in the log space."""
    a, b = min(logx, logy), max(logx, logy)
    if a == -np.inf:
        return b
    return math.log1p(math.exp(a - b)) + b


def _log_sub(logx, logy):
    """Subtract two numbers in the log space. Answer must be non-negative."""
    if logx < logy:
        raise ValueError("The result of subtraction must be non-negative.")
    if logy == -np.inf:
        return logx
    if logx == logy:
        return -np.inf
    try:
        return math.log(math.expm1(logx - logy)) + logy
    except OverflowError:
        return logx


def _log_erfc(x):
    return math.log(2) + special.log_ndtr(-x * 2**0.5)


def _log_a_int(q: float, sigma: float, alpha: int) -> float:
    i = np.arange(alpha + 1, dtype=np.float64)
    log_comb = (
        special.gammaln(alpha + 1) - special.gammaln(i + 1) - special.gammaln(alpha - i + 1)
    )
    terms = (
        log_comb
        + i * math.log(q)
        + (alpha - i) * math.log1p(-q)
        + (i * i - i) / (2 * sigma**2)
    )
    return float(special.logsumexp(terms))


def _log_a_frac(q: float, sigma: float, alpha: float) -> float:
    # Integrals over (-inf, z0] and [z0, +inf), accumulated in log space.
    log_a0, log_a1 = -np.inf, -np.inf
    i = 0
    z0 = sigma**2 * math.log(1 / q - 1) + 0.5
    while True:
        coef = special.binom(alpha, i)
        log_coef = math.log(abs(coef))
        j = alpha - i

        log_t0 = log_coef + i * math.log(q) + j * math.log1p(-q)
        log_t1 = log_coef + j * math.log(q) + i * math.log1p(-q)

        log_e0 = math.log(0.5) + _log_erfc((i - z0) / (math.sqrt(2) * sigma))
        log_e1 = math.log(0.5) + _log_erfc((z0 - j) / (math.sqrt(2) * sigma))

        log_s0 = log_t0 + (i * i - i) / (2 * sigma**2) + log_e0
        log_s1 = log_t1 + (j * j - j) / (2 * sigma**2) + log_e1

        if coef > 0:
            log_a0 = _log_add(log_a0, log_s0)
            log_a1 = _log_add(log_a1, log_s1)
        else:
            log_a0 = _log_sub(log_a0, log_s0)
            log_a1 = _log_sub(log_a1, log_s1)

        i += 1
        if max(log_s0, log_s1) < -30:
            break
    return _log_add(log_a0, log_a1)


def _rdp_single_step(q: float, sigma: float, alpha: float) -> float:
    if q == 0.0:
        return 0.0
    if sigma == 0.0:
        return math.inf
    if q == 1.0:
        return alpha / (2 * sigma**2)
    if float(alpha).is_integer():
        log_a = _log_a_int(q, sigma, int(alpha))
    else:
        log_a = _log_a_frac(q, sigma, alpha)
    return max(log_a, 0.0) / (alpha - 1)


def rdp_curve(
    sched: MechanismSchedule, orders: Sequence[float] = DEFAULT_ORDERS
) -> RdpCurve:
    """RDP of T composed subsampled Gaussian steps at every order."""
    orders = [float(a) for a in orders]
    bad = [a for a in orders if not a > 1.0 or math.isinf(a)]
    if bad:
        raise InvalidOrder(f"RDP orders must be finite and > 1, got {bad}")
    if sched.steps == 0:
        return [(a, 0.0) for a in orders]
    return [
        (a, sched.steps * _rdp_single_step(sched.sampling_rate, sched.noise_multiplier, a))
        for a in orders
    ]


def to_eps_delta(curve: RdpCurve, delta: float) -> float:
    """min over orders of rdp(alpha) + log(1/delta) / (alpha - 1)."""
    if not curve:
        raise EmptyCurve("cannot convert an empty RDP curve")
    if not 0.0 < delta < 1.0:
        raise InvalidArgs(f"delta must lie in (0, 1), got {delta}")
    log_inv_delta = math.log(1 / delta)
    return min(r + log_inv_delta / (a - 1) for a, r in curve)


def epsilon_spent(
    sched: MechanismSchedule,
    delta: float,
    orders: Sequence[float] = DEFAULT_ORDERS,
) -> float:
    """epsilon of a schedule; 0 when nothing touched the data."""
    if sched.steps == 0 or sched.sampling_rate == 0.0:
        return 0.0
    return _epsilon_spent(sched, float(delta), tuple(float(a) for a in orders))


@functools.lru_cache(maxsize=4096)
def _epsilon_spent(sched: MechanismSchedule, delta: float, orders: Tuple[float, ...]) -> float:
    return to_eps_delta(rdp_curve(sched, orders), delta)


@functools.lru_cache(maxsize=1024)
def _calibrate(epsilon, delta, steps, sampling_rate, orders) -> float:
    def eps_at(sigma):
        try:
            return epsilon_spent(
                MechanismSchedule(steps, sampling_rate, sigma), delta, orders
            )
        except (ValueError, OverflowError):
            # the fractional-order series breaks down at tiny sigma
            return math.inf

    lo = TOL.noise_lo
    if eps_at(lo) <= epsilon:
        return lo
    hi = max(2 * lo, 1.0)
    while eps_at(hi) > epsilon:
        lo = hi
        hi *= 2
        if hi > TOL.noise_hi:
            raise Unachievable(
                f"epsilon={epsilon} at delta={delta} needs a noise multiplier "
                f"above {TOL.noise_hi:g} for {steps} steps at q={sampling_rate}"
            )
    # invariant: eps_at(lo) > epsilon >= eps_at(hi)
    for _ in range(200):
        if eps_at(hi) >= epsilon - TOL.calibration:
            break
        mid = (lo + hi) / 2
        if eps_at(mid) > epsilon:
            lo = mid
        else:
            hi = mid
    return hi


def calibrate_noise(
    target: PrivacyBudget,
    steps: int,
    sampling_rate: float,
    orders: Sequence[float] = DEFAULT_ORDERS,
) -> float:
    """
    Smallest noise multiplier (to bisection tolerance) whose accounted epsilon
    lies in [target.epsilon - 1e-4, target.epsilon].
    """
    if not target.epsilon > 0.0:
        raise InvalidArgs("calibration needs a positive target epsilon")
    MechanismSchedule(steps, sampling_rate, 1.0)
    if steps == 0 or sampling_rate == 0.0:
        return TOL.noise_lo
    return _calibrate(
        float(target.epsilon),
        float(target.delta),
        int(steps),
        float(sampling_rate),
        tuple(float(a) for a in orders),
    )


@dataclasses.dataclass(frozen=True)
class AccountantState:
    """Accumulated RDP over the mechanisms applied so far. A value, never mutated."""

    orders: Tuple[float, ...] = DEFAULT_ORDERS
    rdp: Optional[Tuple[float, ...]] = None
    steps: int = 0

    def compose(self, sched: MechanismSchedule) -> "AccountantState":
        curve = rdp_curve(sched, self.orders)
        prev = self.rdp if self.rdp is not None else (0.0,) * len(self.orders)
        return AccountantState(
            orders=self.orders,
            rdp=tuple(p + r for p, (_, r) in zip(prev, curve)),
            steps=self.steps + sched.steps,
        )

    def curve(self) -> RdpCurve:
        rdp = self.rdp if self.rdp is not None else (0.0,) * len(self.orders)
        return list(zip(self.orders, rdp))

    def spent(self, delta: float) -> PrivacyBudget:
        if self.steps == 0:
            return PrivacyBudget(0.0, delta)
        return PrivacyBudget(to_eps_delta(self.curve(), delta), delta)
