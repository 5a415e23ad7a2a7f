"""
Eigenspectrum of a feature covariance matrix.

Input: a CSV with one sample per row and one feature per column (header
optional). Output: `index,eigenvalue` rows, 1-based, eigenvalues descending.
"""
import logging
import math
import os
from typing import Optional

import numpy as np
import pandas as pd

from ptx.errors import EmptyInput, MalformedCsv
from ptx.linalg.subspace import sym_eig

logger = logging.getLogger(__name__)


def load_features(path: str, header: bool = True) -> np.ndarray:
    try:
        df = pd.read_csv(path, header=0 if header else None, float_precision="round_trip")
    except pd.errors.EmptyDataError as e:
        raise EmptyInput(f"{path} is empty") from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise MalformedCsv(f"cannot parse {path}: {e}") from e
    if df.shape[0] == 0 or df.shape[1] == 0:
        raise EmptyInput(f"{path} has no feature rows")
    try:
        features = df.to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise MalformedCsv(f"{path} has non-numeric entries") from e
    if not np.all(np.isfinite(features)):
        raise MalformedCsv(f"{path} has missing or non-finite entries")
    return features


def covariance_spectrum(features: np.ndarray, center: bool = True) -> np.ndarray:
    """Eigenvalues (descending) of the sample covariance, or of the raw second
    moment when center is False."""
    n = features.shape[0]
    if center:
        if n < 2:
            raise EmptyInput("a centered covariance needs at least two rows")
        centered = features - features.mean(axis=0)
        cov = centered.T @ centered / (n - 1)
    else:
        if n < 1:
            raise EmptyInput("no rows")
        cov = features.T @ features / n
    eigenvalues, _ = sym_eig(cov)
    return eigenvalues


def top_k_mass(eigenvalues: np.ndarray, k: int) -> float:
    """Fraction of the total variance in the k leading eigenvalues."""
    total = float(np.sum(np.clip(eigenvalues, 0, None)))
    if total == 0:
        return math.nan
    return float(np.sum(np.clip(eigenvalues[:k], 0, None))) / total


def run_eigspec(
    features_csv_path: str,
    out_path: str,
    header: bool = True,
    center: bool = True,
    top_k: Optional[int] = None,
) -> np.ndarray:
    features = load_features(features_csv_path, header=header)
    eigenvalues = covariance_spectrum(features, center=center)
    logger.info(
        f"Eigenspectrum of {features.shape[0]} x {features.shape[1]} features "
        f"(center={center}): leading {eigenvalues[: min(5, len(eigenvalues))]}"
    )
    if top_k is not None:
        logger.info(f"Top-{top_k} variance mass: {top_k_mass(eigenvalues, top_k):.4f}")

    dirname = os.path.dirname(out_path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    pd.DataFrame(
        {"index": np.arange(1, len(eigenvalues) + 1), "eigenvalue": eigenvalues}
    ).to_csv(out_path, index=False)
    return eigenvalues
