"""
Sampling from a linear SEM and the replication protocol.

Replicate ``i`` (1-based) always draws its dataset from the seed
``derive_seed(master_seed, i)``, so a run is bit-identical whatever the
number of worker processes: workers only change who computes a replicate,
never what it computes. Estimates are merged back in replicate order and
summarised after sorting.
"""

from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.random import SFC64, Generator, SeedSequence
from pydantic import BaseModel, ConfigDict, Field, model_validator

from analysis.ols import RankDeficientError
from analysis.strategies import run_strategy
from graph.dag_model import NodeKind
from scenarios.spec import ScenarioSpec
from sem.linear_sem import LinearSem, solve_residual_variances
from sem.strategy import Strategy
from simulation.dataset import ColumnFlag, Dataset, Provenance, combine_columns
from utils.errors import EmptySampleError, NumericalError, UsageError
from utils.logger import get_logger
from utils.timer import Timer

logger = get_logger(__name__)

SEED_LIMIT = 2**64
# share of replicates allowed to fail with a singular fit before the run fails
MAX_SKIPPED_SHARE = 0.001
PERCENTILES = (50.0, 2.5, 97.5)
REGRESSORS = {Strategy.ChangeScore: 1, Strategy.FollowUpAdjusted: 2, Strategy.FollowUpUnadjusted: 1}

_FLAGS = {
    NodeKind.Observed: ColumnFlag.Observed,
    NodeKind.Latent: ColumnFlag.Latent,
    NodeKind.Deterministic: ColumnFlag.Derived,
}


class ReplicationFailureError(NumericalError):
    pass


class ReplicationSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario_id: str
    strategy: Strategy
    reps: int = Field(ge=1)
    median: float
    lower: float
    upper: float
    skipped: int = 0
    units: str = "Log[mmol/L]/dm"

    @model_validator(mode="after")
    def _ordered(self) -> "ReplicationSummary":
        if not self.lower <= self.median <= self.upper:
            raise ValueError("simulation limits must bracket the median")
        return self


def summarize(values: Sequence[float]) -> Tuple[float, float, float]:
    """
    Median and 2.5 / 97.5 centiles.

    Linear interpolation between order statistics at h = (k - 1) * p / 100 on
    the sorted sample (numpy's "linear" method).
    """
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        raise EmptySampleError("Cannot summarize an empty sample")
    median, lower, upper = np.percentile(ordered, PERCENTILES, method="linear")
    return float(median), float(lower), float(upper)


def derive_seed(master_seed: int, index: int) -> int:
    if not 0 <= master_seed < SEED_LIMIT:
        raise UsageError(f"Seed must be in [0, 2**64), got {master_seed}", {"seed": master_seed})
    return int(SeedSequence([master_seed, index]).generate_state(1, dtype=np.uint64)[0])


# -- sampling ------------------------------------------------------------


class _Step(NamedTuple):
    name: str
    kind: NodeKind
    terms: Tuple[Tuple[str, float], ...]
    residual_sd: float
    mean: float
    sd: float
    column: int


class SamplingPlan(NamedTuple):
    names: List[str]
    steps: List[_Step]
    draws: int


def sampling_plan(sem: LinearSem) -> SamplingPlan:
    if not sem.solved:
        sem = solve_residual_variances(sem)
    steps, column = [], 0
    for name in sem.dag.topological_order():
        kind = sem.dag.node(name).kind
        terms = tuple((p, sem.coeff[(p, name)]) for p in sem.dag.parents(name))
        if kind is NodeKind.Deterministic:
            steps.append(_Step(name, kind, terms, 0.0, 0.0, 0.0, -1))
            continue
        scale = sem.scale[name]
        steps.append(_Step(name, kind, terms, sem.residual_sd[name], scale.mean, scale.sd, column))
        column += 1
    return SamplingPlan(sem.dag.node_names, steps, column)


def sample_dataset(
    sem: LinearSem,
    n: int,
    seed: int,
    scenario_id: Optional[str] = None,
    plan: Optional[SamplingPlan] = None,
) -> Dataset:
    """
    Structural sampling in topological order: each stochastic node is
    mean + sd * (sum of coefficient x standardized parent + residual_sd x N(0, 1));
    deterministic nodes are computed from their parents' raw values.
    """
    if n < 0:
        raise UsageError(f"n must be non-negative, got {n}", {"n": n})
    if not 0 <= seed < SEED_LIMIT:
        raise UsageError(f"Seed must be in [0, 2**64), got {seed}", {"seed": seed})
    plan = plan or sampling_plan(sem)

    rng = Generator(SFC64(SeedSequence(seed)))
    noise = rng.standard_normal((n, plan.draws))
    standardized, raw, derivations = {}, {}, {}
    for step in plan.steps:
        if step.kind is NodeKind.Deterministic:
            raw[step.name] = combine_columns(raw, step.terms)
            derivations[step.name] = step.terms
            continue
        z = step.residual_sd * noise[:, step.column]
        for parent, beta in step.terms:
            z = z + beta * standardized[parent]
        standardized[step.name] = z
        raw[step.name] = step.mean + step.sd * z

    frame = pd.DataFrame({name: raw[name] for name in plan.names}, columns=plan.names)
    return Dataset(
        frame=frame,
        flags={name: _FLAGS[sem.dag.node(name).kind] for name in plan.names},
        derivations=derivations,
        provenance=Provenance(scenario_id=scenario_id, seed=seed, n=n),
    )


# -- replication ---------------------------------------------------------


class ReplicationRun(BaseModel):
    """Per-replicate estimates for one scenario; NaN marks a skipped (singular) fit."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scenario_id: str
    n: int
    reps: int
    master_seed: int
    seeds: np.ndarray
    estimates: Dict[Strategy, np.ndarray]

    def skipped(self, strategy: Strategy) -> int:
        return int(np.isnan(self.estimates[strategy]).sum())

    def summary(self, strategy: Strategy) -> ReplicationSummary:
        values = self.estimates[strategy]
        kept = values[~np.isnan(values)]
        median, lower, upper = summarize(kept)
        return ReplicationSummary(
            scenario_id=self.scenario_id,
            strategy=strategy,
            reps=int(kept.size),
            median=median,
            lower=lower,
            upper=upper,
            skipped=self.skipped(strategy),
        )

    def to_frame(self) -> pd.DataFrame:
        """Tidy per-replicate estimates for external plotting."""
        parts = []
        for strategy, values in self.estimates.items():
            parts.append(
                pd.DataFrame(
                    {
                        "scenario": self.scenario_id,
                        "replicate": np.arange(1, self.reps + 1),
                        "seed": self.seeds,
                        "strategy": strategy.value,
                        "estimate": values,
                    }
                )
            )
        return pd.concat(parts, ignore_index=True)


def _run_chunk(
    scenario: ScenarioSpec, strategies: Tuple[Strategy, ...], n: int, master_seed: int, start: int, stop: int
) -> Tuple[np.ndarray, np.ndarray]:
    plan = sampling_plan(scenario.sem)
    b = scenario.bindings
    seeds = np.zeros(stop - start, dtype=np.uint64)
    estimates = np.full((stop - start, len(strategies)), np.nan)
    for row, index in enumerate(range(start, stop)):
        seed = derive_seed(master_seed, index)
        seeds[row] = seed
        data = sample_dataset(scenario.sem, n, seed, scenario.id, plan)
        for col, strategy in enumerate(strategies):
            try:
                estimates[row, col] = run_strategy(data, strategy, b.exposure, b.baseline, b.followup).coefficient
            except RankDeficientError:
                pass
    return seeds, estimates


def _chunks(reps: int, workers: int) -> List[Tuple[int, int]]:
    count = min(reps, max(1, workers * 4))
    bounds = np.linspace(1, reps + 1, count + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def replicate_estimates(
    scenario: ScenarioSpec,
    strategies: Sequence[Strategy] = tuple(Strategy),
    n: int = 1000,
    reps: int = 10000,
    master_seed: int = 0,
    workers: int = 1,
) -> ReplicationRun:
    strategies = tuple(strategies)
    if reps < 1:
        raise UsageError(f"reps must be at least 1, got {reps}", {"reps": reps})
    needed = max(REGRESSORS[s] for s in strategies) + 2
    if n < needed:
        raise UsageError(f"n must be at least {needed} for these analyses, got {n}", {"n": n})
    derive_seed(master_seed, 0)

    chunks = _chunks(reps, workers)
    args = [(scenario, strategies, n, master_seed, start, stop) for start, stop in chunks]
    with Timer() as timer:
        if workers <= 1:
            results = [_run_chunk(*a) for a in args]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_chunk, *zip(*args)))
    seeds = np.concatenate([r[0] for r in results])
    table = np.vstack([r[1] for r in results])
    logger.info(
        "Scenario %s: %d replicates of n=%d in %.1fs (%d worker(s))", scenario.id, reps, n, timer.elapsed, workers
    )

    run = ReplicationRun(
        scenario_id=scenario.id,
        n=n,
        reps=reps,
        master_seed=master_seed,
        seeds=seeds,
        estimates={s: table[:, i].copy() for i, s in enumerate(strategies)},
    )
    for strategy in strategies:
        skipped = run.skipped(strategy)
        if skipped:
            logger.warning("Scenario %s, %s: %d singular replicate(s) skipped", scenario.id, strategy.value, skipped)
        if skipped > MAX_SKIPPED_SHARE * reps:
            raise ReplicationFailureError(
                f"Scenario {scenario.id}, {strategy.value}: {skipped} of {reps} replicates had singular fits",
                {"scenario": scenario.id, "strategy": strategy.value, "skipped": skipped, "reps": reps},
            )
    return run


def run_replications(
    scenario: ScenarioSpec,
    strategy: Strategy,
    n: int = 1000,
    reps: int = 10000,
    master_seed: int = 0,
    workers: int = 1,
) -> ReplicationSummary:
    run = replicate_estimates(scenario, [strategy], n=n, reps=reps, master_seed=master_seed, workers=workers)
    return run.summary(strategy)
