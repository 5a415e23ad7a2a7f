"""
Simulated-study runner.

Every (method, n1, n2, eps, gamma, trial) cell is run on freshly sampled data
and yields one TrialResult. Data streams are keyed by the grid coordinates
they depend on, so all methods of a trial share the same instance and the
same private rows; the mechanism's noise stream uses the cell seed.
"""
from concurrent.futures import ProcessPoolExecutor
import dataclasses
import json
import logging
import math
import os
import time
from typing import Iterable, Iterator, List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from ptx import __version__
from ptx.data.synth import (
    RegressionInstance,
    population_excess_risk,
    random_instance,
    sample_private,
    sample_public,
)
from ptx.errors import ConfigError, PtxError
from ptx.harness.method_registry import get_method_info, method_order
from ptx.linalg.subspace import basis_with_leading, perturbed_basis
from ptx.model.dp_linreg import dpsgd_fit, ols_fit
from ptx.model.two_phase import two_phase_transfer
from ptx.privacy.accountant import PrivacyBudget
from ptx.protocol.api_protocol import ExperimentConfig, RunManifest
from ptx.utils import derive_seed, make_rng

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "method",
    "n1",
    "n2",
    "eps",
    "gamma",
    "trial",
    "seed",
    "l2_param_error",
    "excess_risk",
    "sin_theta",
    "eps_spent",
    "noise_multiplier",
    "steps",
    "sampling_rate",
    "wall_ms",
    "error",
]


@dataclasses.dataclass(frozen=True)
class Cell:
    method: str
    n1: int
    n2: int
    eps: float
    gamma: Optional[float]
    trial: int

    def sort_key(self):
        gamma = -1.0 if self.gamma is None else self.gamma
        return (method_order(self.method), self.n1, self.n2, self.eps, gamma, self.trial)

    def seed(self, base_seed: int) -> int:
        return derive_seed(
            base_seed, self.method, self.n1, self.n2, self.eps, self.gamma, self.trial
        )


@dataclasses.dataclass
class TrialResult:
    method: str
    n1: int
    n2: int
    eps: float
    gamma: Optional[float]
    trial: int
    seed: int
    l2_param_error: float = math.nan
    excess_risk: float = math.nan
    sin_theta: float = math.nan
    eps_spent: float = math.nan
    noise_multiplier: float = math.nan
    steps: int = 0
    sampling_rate: float = math.nan
    wall_ms: float = 0.0
    error: str = ""


def expand_cells(cfg: ExperimentConfig, methods: Iterable[str]) -> List[Cell]:
    """All grid cells in canonical order. Unused coordinates collapse to
    n1 = 0, eps = inf and gamma = None."""
    cells = set()
    for method in methods:
        info = get_method_info(method)
        n1_values = cfg.n1_list if info.uses_public else [0]
        eps_values = cfg.eps_list if info.private else [math.inf]
        gamma_values = cfg.gamma_list if info.uses_gamma else [None]
        for n1 in n1_values:
            for n2 in cfg.n2_list:
                for eps in eps_values:
                    for gamma in gamma_values:
                        for trial in range(cfg.trials):
                            cells.add(Cell(method, n1, n2, eps, gamma, trial))
    return sorted(cells, key=Cell.sort_key)


def cell_instance(cfg: ExperimentConfig, trial: int) -> RegressionInstance:
    rng = make_rng(derive_seed(cfg.base_seed, "instance", trial=trial))
    return random_instance(cfg.d, cfg.k, cfg.t, cfg.noise_std, cfg.task_norm, rng)


def run_cell(cfg: ExperimentConfig, cell: Cell) -> TrialResult:
    """Run one cell; PtxError and numerical failures become an error row."""
    seed = cell.seed(cfg.base_seed)
    row = TrialResult(
        cell.method, cell.n1, cell.n2, cell.eps, cell.gamma, cell.trial, seed
    )
    tic = time.perf_counter()
    try:
        _run_method(cfg, cell, seed, row)
    except (PtxError, FloatingPointError, np.linalg.LinAlgError) as e:
        row.error = f"{type(e).__name__}: {e}"
        logger.warning(f"cell {cell} failed: {row.error}")
    row.wall_ms = 1000 * (time.perf_counter() - tic)
    return row


def _run_method(cfg: ExperimentConfig, cell: Cell, seed: int, row: TrialResult):
    inst = cell_instance(cfg, cell.trial)
    private = sample_private(
        inst,
        cell.n2,
        make_rng(derive_seed(cfg.base_seed, "private", n2=cell.n2, trial=cell.trial)),
    )
    rng = make_rng(seed)
    dp_cfg = cfg.dp.to_config()
    target = (
        PrivacyBudget(cell.eps, cfg.delta) if math.isfinite(cell.eps) else None
    )

    if cell.method in ("nonprivate_ols", "dpsgd_scratch"):
        if cell.method == "nonprivate_ols":
            fit = ols_fit(private)
        else:
            fit = dpsgd_fit(private, dp_cfg, target=target, rng=rng)
        w = fit.weights
        row.l2_param_error = float(np.linalg.norm(w - inst.w_star))
        row.excess_risk = population_excess_risk(w, inst)
    else:
        if cell.method == "two_phase_mom":
            public = sample_public(
                inst,
                cell.n1,
                make_rng(derive_seed(cfg.base_seed, "public", n1=cell.n1, trial=cell.trial)),
            )
        elif cell.method == "dpsgd_true_subspace":
            public = inst.basis
        else:
            anchor = (
                basis_with_leading(inst.basis, inst.w_star)
                if cfg.gamma_align
                else inst.basis
            )
            public = perturbed_basis(
                anchor,
                cell.gamma,
                make_rng(
                    derive_seed(
                        cfg.base_seed, "oracle", gamma=cell.gamma, trial=cell.trial
                    )
                ),
            )
        result = two_phase_transfer(
            public, private, cfg.k, dp_cfg, target=target, inst=inst, rng=rng
        )
        fit = result.fit
        row.l2_param_error = result.l2_param_error
        row.excess_risk = result.excess_risk
        row.sin_theta = result.sin_theta

    row.steps = fit.steps_taken
    if fit.privacy_spent is not None and target is not None:
        row.eps_spent = fit.privacy_spent.epsilon
        row.noise_multiplier = fit.noise_multiplier
        row.sampling_rate = fit.sampling_rate


def _run_cell_star(args):
    return run_cell(*args)


def run_cells(
    cfg: ExperimentConfig, cells: List[Cell], jobs: int = 1
) -> Iterator[TrialResult]:
    """Yield results in the order of `cells`, whatever order workers finish in."""
    args = [(cfg, cell) for cell in cells]
    if jobs <= 1:
        for a in tqdm(args, desc="cells"):
            yield _run_cell_star(a)
        return
    with ProcessPoolExecutor(jobs) as executor:
        for row in tqdm(
            executor.map(_run_cell_star, args, chunksize=4),
            total=len(args),
            desc="cells",
        ):
            yield row


def run_figure4(cfg: ExperimentConfig, jobs: int = 1) -> Iterator[TrialResult]:
    """Baselines and the two-phase pipeline over the configured grid."""
    return run_cells(cfg, expand_cells(cfg, cfg.methods), jobs)


def run_gamma_sweep(cfg: ExperimentConfig, jobs: int = 1) -> Iterator[TrialResult]:
    """Oracle subspaces at each gamma, over the configured n2 and eps grid."""
    if not cfg.gamma_list:
        raise ConfigError("gamma-sweep needs a nonempty gamma_list")
    return run_cells(cfg, expand_cells(cfg, ["two_phase_oracle_gamma"]), jobs)


def results_frame(rows: Iterable[TrialResult], timing: bool = True) -> pd.DataFrame:
    df = pd.DataFrame([dataclasses.asdict(r) for r in rows], columns=RESULT_COLUMNS)
    if not timing:
        df["wall_ms"] = 0.0
    return df


def write_results(
    rows: Iterable[TrialResult],
    out_path: str,
    cfg: ExperimentConfig,
    command: str,
    timing: bool = True,
) -> pd.DataFrame:
    """Write the results CSV and a JSON run manifest next to it."""
    tic = time.time()
    df = results_frame(rows, timing=timing)
    dirname = os.path.dirname(out_path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    df.to_csv(out_path, index=False)

    manifest = RunManifest(
        ptx_version=__version__,
        command=command,
        config=cfg,
        base_seed=cfg.base_seed,
        cells=len(df),
        failed_cells=int((df["error"].fillna("") != "").sum()),
        wall_time_s=(time.time() - tic) if timing else 0.0,
        results_csv=os.path.basename(out_path),
    )
    with open(os.path.splitext(out_path)[0] + ".manifest.json", "w") as fout:
        fout.write(json.dumps(json.loads(manifest.json()), indent=2) + "\n")
    return df
