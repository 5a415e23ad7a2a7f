"""
Labeled regression samples and their CSV form.

CSV layout: header `task_index,y,x_1,...,x_d`, one row per sample, floats in
shortest round-trip decimal form.
"""
import dataclasses
import logging
import os

import numpy as np
import pandas as pd

from ptx.errors import DimensionMismatch, EmptyInput, MalformedCsv

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray
    task_index: np.ndarray

    def __post_init__(self):
        x = np.array(self.inputs, dtype=np.float64, copy=True)
        y = np.array(self.labels, dtype=np.float64, copy=True).reshape(-1)
        tidx = np.array(self.task_index, dtype=np.int64, copy=True).reshape(-1)
        if x.ndim != 2:
            raise DimensionMismatch(f"inputs must be 2-D, got shape {x.shape}")
        if not x.shape[0] == y.shape[0] == tidx.shape[0]:
            raise DimensionMismatch(
                f"row counts disagree: {x.shape[0]}, {y.shape[0]}, {tidx.shape[0]}"
            )
        if len(tidx) and tidx.min() < 1:
            raise DimensionMismatch("task indices are 1-based")
        for name, arr in (("inputs", x), ("labels", y), ("task_index", tidx)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def __len__(self):
        return self.n

    def for_task(self, task: int) -> "LabeledDataset":
        mask = self.task_index == task
        return LabeledDataset(self.inputs[mask], self.labels[mask], self.task_index[mask])

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(
            self.inputs, columns=[f"x_{j + 1}" for j in range(self.dim)]
        )
        df.insert(0, "y", self.labels)
        df.insert(0, "task_index", self.task_index)
        return df

    def to_csv(self, path: str):
        dirname = os.path.dirname(path)
        if dirname:
            os.makedirs(dirname, exist_ok=True)
        # pandas writes floats with repr(), which round-trips exactly
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path: str) -> "LabeledDataset":
        try:
            df = pd.read_csv(path, float_precision="round_trip")
        except pd.errors.EmptyDataError as e:
            raise EmptyInput(f"{path} is empty") from e
        except (pd.errors.ParserError, UnicodeDecodeError) as e:
            raise MalformedCsv(f"cannot parse {path}: {e}") from e

        x_cols = [c for c in df.columns if c.startswith("x_")]
        expected = ["task_index", "y"] + [f"x_{j + 1}" for j in range(len(x_cols))]
        if list(df.columns) != expected or not x_cols:
            raise MalformedCsv(
                f"{path}: expected columns task_index,y,x_1..x_d, got {list(df.columns)}"
            )
        if len(df) == 0:
            raise EmptyInput(f"{path} has a header but no rows")
        try:
            values = df[x_cols].to_numpy(dtype=np.float64)
            labels = df["y"].to_numpy(dtype=np.float64)
            tidx = df["task_index"].to_numpy(dtype=np.int64)
        except (TypeError, ValueError) as e:
            raise MalformedCsv(f"{path}: non-numeric entries") from e
        logger.info(f"Loaded {len(df)} rows with d={len(x_cols)} from {path}")
        return cls(values, labels, tidx)
