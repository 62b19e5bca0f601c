"""
The eight waist-circumference / insulin scenarios and the Table 1 harness.

WC0 is waist circumference at baseline (dm), IC0 and IC1 log insulin
concentration at baseline and follow-up (Log[mmol/L]). Path coefficients are
standardized and derived from the unstandardized targets below, so the
analytic oracle lands on 0.200 / 0.150 / 0.050 exactly rather than on the
rounded decimals.
"""

import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from analysis.strategies import Bindings
from graph.dag_model import Dag, Edge, Node, NodeKind, Role
from scenarios.spec import DEFAULT_N, DEFAULT_REPS, ScenarioSpec
from sem.linear_sem import (
    LinearSem,
    Scale,
    SemSchemaError,
    expected_coefficient,
    sem_from_json,
    sem_to_json,
)
from sem.strategy import Strategy
from simulation.mc_engine import ReplicationRun, ReplicationSummary, replicate_estimates
from utils.errors import UserInputError
from utils.logger import get_logger
from utils.timer import Timer

logger = get_logger(__name__)

EXPOSURE, BASELINE, FOLLOWUP = "WC0", "IC0", "IC1"
BINDINGS = Bindings(exposure=EXPOSURE, baseline=BASELINE, followup=FOLLOWUP)

SCALES = {
    EXPOSURE: Scale(mean=9.5, sd=1.6),
    BASELINE: Scale(mean=4.00, sd=0.74),
    FOLLOWUP: Scale(mean=4.20, sd=0.74),
}

# Log[mmol/L] per dm -> standardized
UNIT_RATIO = SCALES[FOLLOWUP].sd / SCALES[EXPOSURE].sd
TOTAL_EFFECT = 0.200
INDIRECT_EFFECT = 0.150
DIRECT_EFFECT = 0.050

STABILITY = 0.65  # IC0 -> IC1
TOTAL_STD = TOTAL_EFFECT / UNIT_RATIO
DIRECT_STD = DIRECT_EFFECT / UNIT_RATIO
MEDIATOR_STD = (INDIRECT_EFFECT / UNIT_RATIO) / STABILITY  # WC0 -> IC0
CONFOUNDER_STD = 0.5  # IC0 -> WC0
U_STD = math.sqrt(0.08)
U2_STD = math.sqrt(0.08)
# with IC0 -> WC0 the symmetric sqrt(0.08) leaves IC1 no residual variance
U_STD_CONFOUNDER = math.sqrt(0.02)

BUILTIN_IDS = ("1A", "1B", "2A", "2B", "3A", "3B", "3A+", "3B+")

DESCRIPTIONS = {
    "1A": "IC0 is a competing exposure; WC0 and IC0 unrelated (randomised-trial analogue)",
    "1B": "As 1A with an unmeasured U affecting WC0, IC0 and IC1",
    "2A": "IC0 is a confounder: IC0 causes WC0 and IC1",
    "2B": "As 2A with an unmeasured U affecting WC0, IC0 and IC1",
    "3A": "IC0 is a mediator: WC0 -> IC0 -> IC1 plus a direct WC0 -> IC1",
    "3B": "As 3A with an unmeasured U affecting WC0, IC0 and IC1",
    "3A+": "As 3A with mediator-outcome confounding U2 of IC0 and IC1",
    "3B+": "As 3B with mediator-outcome confounding U2 of IC0 and IC1",
}

EXPECTED_ROLES = {"1": Role.CompetingExposure, "2": Role.Confounder, "3": Role.Mediator}

# Published medians and 95% simulation limits: (median, lower, upper)
PUBLISHED_TABLE1: Dict[Tuple[str, Strategy], Tuple[float, float, float]] = {
    ("1A", Strategy.ChangeScore): (0.200, 0.180, 0.221),
    ("1B", Strategy.ChangeScore): (0.191, 0.172, 0.210),
    ("2A", Strategy.ChangeScore): (0.119, 0.106, 0.132),
    ("2B", Strategy.ChangeScore): (0.114, 0.104, 0.123),
    ("3A", Strategy.ChangeScore): (-0.031, -0.053, -0.009),
    ("3B", Strategy.ChangeScore): (-0.040, -0.061, -0.019),
    ("3A+", Strategy.ChangeScore): (-0.031, -0.050, -0.012),
    ("3B+", Strategy.ChangeScore): (-0.040, -0.058, -0.023),
    ("1A", Strategy.FollowUpAdjusted): (0.200, 0.182, 0.218),
    ("1B", Strategy.FollowUpAdjusted): (0.203, 0.187, 0.220),
    ("2A", Strategy.FollowUpAdjusted): (0.200, 0.189, 0.211),
    ("2B", Strategy.FollowUpAdjusted): (0.205, 0.199, 0.211),
    ("3A", Strategy.FollowUpAdjusted): (0.050, 0.026, 0.073),
    ("3B", Strategy.FollowUpAdjusted): (0.047, 0.024, 0.071),
    ("3A+", Strategy.FollowUpAdjusted): (0.025, 0.005, 0.046),
    ("3B+", Strategy.FollowUpAdjusted): (0.015, -0.005, 0.036),
    ("1A", Strategy.FollowUpUnadjusted): (0.200, 0.174, 0.226),
    ("1B", Strategy.FollowUpUnadjusted): (0.228, 0.203, 0.253),
    ("2A", Strategy.FollowUpUnadjusted): (0.351, 0.332, 0.369),
    ("2B", Strategy.FollowUpUnadjusted): (0.382, 0.366, 0.398),
    ("3A", Strategy.FollowUpUnadjusted): (0.200, 0.175, 0.226),
    ("3B", Strategy.FollowUpUnadjusted): (0.228, 0.203, 0.253),
    ("3A+", Strategy.FollowUpUnadjusted): (0.200, 0.174, 0.226),
    ("3B+", Strategy.FollowUpUnadjusted): (0.228, 0.203, 0.253),
}


class UnknownScenarioError(UserInputError):
    pass


class ScenarioSchemaError(SemSchemaError):
    pass


# -- built-ins -----------------------------------------------------------


def _base_sem(family: str) -> LinearSem:
    nodes = [Node(name=EXPOSURE), Node(name=BASELINE), Node(name=FOLLOWUP)]
    if family == "1":
        edges = [(EXPOSURE, FOLLOWUP, TOTAL_STD), (BASELINE, FOLLOWUP, STABILITY)]
    elif family == "2":
        edges = [(BASELINE, EXPOSURE, CONFOUNDER_STD), (EXPOSURE, FOLLOWUP, TOTAL_STD), (BASELINE, FOLLOWUP, STABILITY)]
    else:
        edges = [(EXPOSURE, BASELINE, MEDIATOR_STD), (BASELINE, FOLLOWUP, STABILITY), (EXPOSURE, FOLLOWUP, DIRECT_STD)]
    dag = Dag(nodes=nodes, edges=[Edge(parent=p, child=c, beta=b) for p, c, b in edges])
    return LinearSem.from_dag(dag, SCALES)


def _with_latent(sem: LinearSem, name: str, targets: Sequence[str], beta: float) -> LinearSem:
    return sem.extend(
        [Node(name=name, kind=NodeKind.Latent)],
        [Edge(parent=name, child=t, beta=beta) for t in targets],
    )


def _build(scenario_id: str) -> LinearSem:
    family, variant = scenario_id[0], scenario_id[1:]
    sem = _base_sem(family)
    if variant.startswith("B"):
        beta = U_STD_CONFOUNDER if family == "2" else U_STD
        sem = _with_latent(sem, "U", (EXPOSURE, BASELINE, FOLLOWUP), beta)
    if variant.endswith("+"):
        sem = _with_latent(sem, "U2", (BASELINE, FOLLOWUP), U2_STD)
    return sem


def builtin_ids() -> Tuple[str, ...]:
    return BUILTIN_IDS


def builtin(scenario_id: str) -> ScenarioSpec:
    if scenario_id not in BUILTIN_IDS:
        raise UnknownScenarioError(
            f"Unknown scenario {scenario_id!r}; choose one of {', '.join(BUILTIN_IDS)}", {"scenario": scenario_id}
        )
    return ScenarioSpec(
        id=scenario_id,
        description=DESCRIPTIONS[scenario_id],
        sem=_build(scenario_id),
        bindings=BINDINGS,
        expected_role=EXPECTED_ROLES[scenario_id[0]],
    )


def describe(scenario_id: str) -> str:
    spec = builtin(scenario_id)
    return f"{spec.id}\t{spec.role.value}\t{spec.description}"


# -- scenario files ------------------------------------------------------


class _ScenarioDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = "custom"
    description: str = ""
    nodes: list
    edges: list = Field(default_factory=list)
    bindings: Bindings
    n: int = Field(default=DEFAULT_N, ge=4)
    reps: int = Field(default=DEFAULT_REPS, ge=1)


def dump_scenario(spec: ScenarioSpec) -> dict:
    doc = {"id": spec.id, "description": spec.description}
    doc.update(sem_to_json(spec.sem))
    doc["bindings"] = spec.bindings.model_dump()
    doc["n"] = spec.n
    doc["reps"] = spec.reps
    return doc


def scenario_from_json(doc: dict) -> ScenarioSpec:
    try:
        parsed = _ScenarioDocument.model_validate(doc)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ScenarioSchemaError(f"Invalid scenario document at {where}: {first['msg']}", {"errors": e.errors()}) from e
    sem = sem_from_json({"nodes": parsed.nodes, "edges": parsed.edges})
    return ScenarioSpec(
        id=parsed.id,
        description=parsed.description,
        sem=sem,
        bindings=parsed.bindings,
        n=parsed.n,
        reps=parsed.reps,
    )


def load_scenario_file(path: Union[str, Path]) -> ScenarioSpec:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ScenarioSchemaError(f"Cannot read scenario file {path}: {e}", {"path": str(path)}) from e
    if not isinstance(doc, dict):
        raise ScenarioSchemaError(f"Scenario file {path} must hold a JSON object", {"path": str(path)})
    return scenario_from_json(doc)


def save_scenario_file(spec: ScenarioSpec, path: Union[str, Path]):
    Path(path).write_text(json.dumps(dump_scenario(spec), indent=2) + "\n", encoding="utf-8")


def resolve_scenario(value: str) -> ScenarioSpec:
    """A built-in id, or a path to a scenario JSON file."""
    if value in BUILTIN_IDS:
        return builtin(value)
    if Path(value).is_file():
        return load_scenario_file(value)
    raise UnknownScenarioError(
        f"{value!r} is neither a built-in scenario ({', '.join(BUILTIN_IDS)}) nor a scenario file",
        {"scenario": value},
    )


def oracle(spec: ScenarioSpec) -> Dict[Strategy, float]:
    b = spec.bindings
    return {s: expected_coefficient(spec.sem, s, b.exposure, b.baseline, b.followup) for s in Strategy}


# -- Table 1 -------------------------------------------------------------


class Table1Cell(BaseModel):
    model_config = ConfigDict(frozen=True)

    summary: ReplicationSummary
    oracle: float
    published: Optional[Tuple[float, float, float]] = None

    @property
    def scenario_id(self) -> str:
        return self.summary.scenario_id

    @property
    def strategy(self) -> Strategy:
        return self.summary.strategy

    @property
    def oracle_gap(self) -> float:
        return abs(self.summary.median - self.oracle)


class Table1Metadata(BaseModel):
    model_config = ConfigDict(frozen=True)

    master_seed: int
    reps: int
    n: int
    timestamp: str
    elapsed_seconds: float = 0.0


class Table1Report(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario_ids: Tuple[str, ...]
    cells: Tuple[Table1Cell, ...]
    metadata: Table1Metadata

    def cell(self, scenario_id: str, strategy: Strategy) -> Table1Cell:
        for cell in self.cells:
            if cell.scenario_id == scenario_id and cell.strategy is strategy:
                return cell
        raise KeyError((scenario_id, strategy))

    def max_oracle_gap(self) -> float:
        return max(c.oracle_gap for c in self.cells)


def report_cells(spec: ScenarioSpec, run: ReplicationRun) -> List[Table1Cell]:
    expected = oracle(spec)
    published = PUBLISHED_TABLE1 if spec.id in BUILTIN_IDS else {}
    return [
        Table1Cell(
            summary=run.summary(strategy),
            oracle=expected[strategy],
            published=published.get((spec.id, strategy)),
        )
        for strategy in run.estimates
    ]


def reproduce_table1(
    reps: int = DEFAULT_REPS,
    n: int = DEFAULT_N,
    master_seed: int = 0,
    workers: int = 1,
    scenario_ids: Sequence[str] = BUILTIN_IDS,
) -> Table1Report:
    """Run every scenario x strategy cell; deterministic for fixed (reps, n, master_seed)."""
    cells: List[Table1Cell] = []
    with Timer() as timer:
        for scenario_id in scenario_ids:
            spec = builtin(scenario_id)
            run = replicate_estimates(spec, tuple(Strategy), n=n, reps=reps, master_seed=master_seed, workers=workers)
            cells.extend(report_cells(spec, run))
    logger.info("Table 1: %d cells in %.1fs", len(cells), timer.elapsed)

    return Table1Report(
        scenario_ids=tuple(scenario_ids),
        cells=tuple(cells),
        metadata=Table1Metadata(
            master_seed=master_seed,
            reps=reps,
            n=n,
            timestamp=datetime.now(timezone.utc).isoformat(),
            elapsed_seconds=timer.elapsed,
        ),
    )
