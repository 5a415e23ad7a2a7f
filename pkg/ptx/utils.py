"""
Common utilities.
"""
import hashlib
import logging
import logging.handlers
import math
import os
import platform
import struct
import sys
from typing import Iterator, Optional, Sequence, Tuple
import warnings

import numpy as np

from ptx.constants import LOGDIR, MC_CHUNK


handler = None
visited_loggers = set()


def build_logger(logger_name, logger_filename):
    global handler

    formatter = logging.Formatter(
        fmt="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    # Set the format of root handlers
    if not logging.getLogger().handlers:
        if sys.version_info[1] >= 9:
            # This is for windows
            logging.basicConfig(level=logging.INFO, encoding="utf-8")
        else:
            if platform.system() == "Windows":
                warnings.warn(
                    "If you are running on Windows, "
                    "we recommend you use Python >= 3.9 for UTF-8 encoding."
                )
            logging.basicConfig(level=logging.INFO)
    logging.getLogger().handlers[0].setFormatter(formatter)

    # Get logger
    logger = logging.getLogger(logger_name)
    logger.setLevel(logging.INFO)

    # stdout carries CSV/JSON results, so only the log file gets a copy
    if LOGDIR is None:
        return logger

    if handler is None:
        os.makedirs(LOGDIR, exist_ok=True)
        filename = os.path.join(LOGDIR, logger_filename)
        handler = logging.handlers.TimedRotatingFileHandler(
            filename, when="D", utc=True, encoding="utf-8"
        )
        handler.setFormatter(formatter)

    if logger not in visited_loggers:
        visited_loggers.add(logger)
        logger.addHandler(handler)

    return logger


def derive_seed(
    base_seed: int,
    tag: str,
    n1: int = 0,
    n2: int = 0,
    eps: float = math.inf,
    gamma: Optional[float] = None,
    trial: int = 0,
) -> int:
    """
    Derive a 64-bit seed for one experiment stream.

    Byte layout hashed with BLAKE2b (8-byte digest, read as little-endian uint64):
        <Q base_seed> | tag utf-8 | 0x00 | <q n1> | <q n2> | <d eps> | <d gamma> | <q trial>
    with gamma = -1.0 when unused.
    """
    payload = (
        struct.pack("<Q", base_seed & 0xFFFFFFFFFFFFFFFF)
        + tag.encode("utf-8")
        + b"\x00"
        + struct.pack(
            "<qqddq",
            int(n1),
            int(n2),
            float(eps),
            -1.0 if gamma is None else float(gamma),
            int(trial),
        )
    )
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return struct.unpack("<Q", digest)[0]


def make_rng(seed: int) -> np.random.Generator:
    """A PCG64 stream. Gaussians come from numpy's ziggurat sampler."""
    return np.random.Generator(np.random.PCG64(seed))


def fsum_arrays(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise exactly-rounded sum of equally shaped arrays."""
    stacked = np.stack([np.asarray(p, dtype=np.float64) for p in parts])
    flat = stacked.reshape(len(parts), -1)
    out = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])])
    return out.reshape(stacked.shape[1:])


def mean_and_se(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and standard error, with compensated summation."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def chunk_sizes(n: int, chunk: int = MC_CHUNK) -> Iterator[int]:
    """Split n rows into chunks of at most `chunk` rows."""
    while n > 0:
        size = min(n, chunk)
        yield size
        n -= size


def ceil_count(value: float) -> int:
    """ceil() for sample-size formulas, ignoring float noise just above an integer."""
    nearest = round(value)
    if abs(value - nearest) <= 1e-9 * max(1.0, abs(value)):
        return int(nearest)
    return int(math.ceil(value))
