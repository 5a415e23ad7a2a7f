"""
Global constants.
"""

import dataclasses
from enum import IntEnum
import os

REPO_PATH = os.path.dirname(os.path.dirname(__file__))

# The output dir of log files. Unset means console logging only.
LOGDIR = os.getenv("PTX_LOGDIR")


##### Privacy defaults (could be overwritten through ENV variables.)
DEFAULT_DELTA = float(os.getenv("PTX_DEFAULT_DELTA", 1e-5))
# RDP orders: a few fractional orders near 1 plus every integer up to 256
DEFAULT_ORDERS = tuple([1.25, 1.5, 1.75] + [float(a) for a in range(2, 257)])


##### For the experiment harness
DEFAULT_JOBS = int(os.getenv("PTX_DEFAULT_JOBS", os.cpu_count() or 1))
# Rows per chunk in Monte-Carlo helpers
MC_CHUNK = int(os.getenv("PTX_MC_CHUNK", 100000))
# Attack experiments with fewer trials get a warning about their standard errors
MIN_ATTACK_TRIALS = 30


@dataclasses.dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every module."""

    orthonormal: float = 1e-10
    rank: float = 1e-12
    degenerate_gap: float = 1e-12
    calibration: float = 1e-4
    noise_lo: float = 1e-2
    noise_hi: float = 1e6


TOL = Tolerances()


class ErrorCode(IntEnum):
    """
    Process exit codes of the ptx command line.
    """

    OK = 0
    CONFIG_ERROR = 2
    PARTIAL_FAILURE = 3
