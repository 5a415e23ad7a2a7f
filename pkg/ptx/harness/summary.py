"""
Group results rows by grid coordinates and summarize the error metrics.

Usage:
python3 -m ptx summarize --in results.csv
"""
import numpy as np
import pandas as pd
from tqdm import tqdm

GROUP_COLUMNS = ["method", "n1", "n2", "eps", "gamma"]


def load_results(path: str) -> pd.DataFrame:
    df = pd.read_csv(path, keep_default_na=True)
    df["error"] = df["error"].fillna("")
    return df


def get_bootstrap_result(values: np.ndarray, num_round=1000, rng=None):
    """Bootstrap means of `values`."""
    rng = rng if rng is not None else np.random.default_rng(0)
    values = np.asarray(values, dtype=np.float64)
    idx = rng.integers(0, len(values), size=(num_round, len(values)))
    return values[idx].mean(axis=1)


def summarize(df: pd.DataFrame, metric="l2_param_error", num_round=1000) -> pd.DataFrame:
    """Mean, standard error and a 95% bootstrap interval per grid cell."""
    ok = df[df["error"] == ""].copy()
    # gamma is empty for methods without an oracle
    ok["gamma"] = ok["gamma"].fillna(-1.0)
    rows = []
    for key, group in tqdm(ok.groupby(GROUP_COLUMNS), desc="summarize"):
        values = group[metric].to_numpy()
        boot = get_bootstrap_result(values, num_round=num_round)
        rows.append(
            dict(
                zip(GROUP_COLUMNS, key),
                trials=len(values),
                mean=values.mean(),
                sem=values.std(ddof=1) / np.sqrt(len(values)) if len(values) > 1 else 0.0,
                lower=np.quantile(boot, 0.025),
                upper=np.quantile(boot, 0.975),
            )
        )
    out = pd.DataFrame(rows)
    if len(out):
        out["gamma"] = out["gamma"].where(out["gamma"] >= 0)
    return out
