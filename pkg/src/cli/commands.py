"""
One function per subcommand. Each returns the text the command prints (or
writes to ``--out``); files beside the main output are written here.
"""

import json
import sys
from datetime import datetime, timezone
from typing import Dict, Optional, Sequence

from rich.console import Console
from rich.table import Table

from analysis.oldham import oldham_correlation
from analysis.strategies import (
    CHANGE_SCORE_ADJUSTED,
    run_change_score_adjusted,
    run_strategy,
    standardized_coefficient,
)
from graph.dag_model import Dag, Estimand, classify_baseline_role, d_separated, recommend_strategy
from graph.dsl import load_dag_file, print_dag
from scenarios.scenario_library import (
    Table1Metadata,
    Table1Report,
    builtin,
    builtin_ids,
    describe,
    dump_scenario,
    oracle,
    report_cells,
    reproduce_table1,
    resolve_scenario,
)
from sem.linear_sem import effect_decomposition
from sem.strategy import Strategy
from simulation.mc_engine import replicate_estimates, sample_dataset
from storage.dataset_writer import read_dataset, write_dataset, write_estimates
from storage.json_manifest import write_manifest
from storage.report_writer import fmt3, render_table1, write_text
from utils.errors import UsageError
from utils.logger import get_logger
from utils.timer import Timer

logger = get_logger(__name__)

STRATEGY_CHOICES = tuple(s.value for s in Strategy) + (CHANGE_SCORE_ADJUSTED,)


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _dag_for(dag_path: Optional[str], scenario: Optional[str]) -> Dag:
    if dag_path:
        return load_dag_file(dag_path)
    if scenario:
        return resolve_scenario(scenario).sem.dag
    raise UsageError("Give a DAG file with --dag or a scenario with --scenario")


def cmd_list_scenarios(rich_output: Optional[bool] = None) -> str:
    if rich_output is None:
        rich_output = sys.stdout.isatty()
    if not rich_output:
        return "".join(describe(sid) + "\n" for sid in builtin_ids())

    specs = [builtin(sid) for sid in builtin_ids()]
    table = Table("Scenario", "Baseline role", "Description")
    for s in specs:
        table.add_row(s.id, s.role.value, s.description)
    console = Console()
    with console.capture() as capture:
        console.print(table)
    return capture.get()


def cmd_show_dag(scenario: Optional[str] = None, dag_path: Optional[str] = None) -> str:
    if scenario:
        return print_dag(resolve_scenario(scenario).sem.annotated_dag()) + "\n"
    return print_dag(_dag_for(dag_path, None)) + "\n"


def cmd_export_scenario(scenario: str) -> str:
    return _json(dump_scenario(resolve_scenario(scenario)))


def cmd_simulate(scenario: str, n: int, seed: int, include_latent: bool = False) -> str:
    spec = resolve_scenario(scenario)
    data = sample_dataset(spec.sem, n, seed, scenario_id=spec.id)
    return write_dataset(data, include_latent=include_latent)


def cmd_analyze(
    data_path: str, strategy: str, exposure: str, baseline: str, followup: str, standardized: bool = False
) -> str:
    data = read_dataset(data_path)
    if strategy == CHANGE_SCORE_ADJUSTED:
        result = run_change_score_adjusted(data, exposure, baseline, followup)
    else:
        result = run_strategy(data, Strategy.parse(strategy), exposure, baseline, followup)
    logger.info("%s: %s = %.6f", result.model, exposure, result.coefficient)
    doc = result.to_json()
    if standardized:
        doc["standardized_coefficient"] = standardized_coefficient(result, data)
    return _json(doc)


def cmd_oracle(scenario: str, fmt: str = "json") -> str:
    spec = resolve_scenario(scenario)
    expected = oracle(spec)
    b = spec.bindings
    effects = effect_decomposition(spec.sem, b.exposure, b.followup, unstandardized=True)
    if fmt == "json":
        doc = {s.key: value for s, value in expected.items()}
        doc["effects"] = {"total": effects.total, "direct": effects.direct, "indirect": effects.indirect}
        return _json(doc)
    if fmt == "csv":
        return "strategy,expected\n" + "".join(f"{s.value},{v!r}\n" for s, v in expected.items())
    lines = [f"| Analysis | {spec.id} |", "|---|---|"]
    lines += [f"| {s.title} | {fmt3(v)} |" for s, v in expected.items()]
    return "\n".join(lines) + "\n"


def _report_outputs(report: Table1Report, fmt: str, out: Optional[str], command: str, params: Dict) -> str:
    text = render_table1(report, fmt)
    if out:
        write_text(text, out)
        write_manifest(
            out,
            command,
            params,
            elapsed_seconds=report.metadata.elapsed_seconds,
            timestamp=report.metadata.timestamp,
        )
    return text


def cmd_replicate(
    scenario: str,
    strategies: Sequence[str],
    reps: Optional[int],
    n: Optional[int],
    seed: int,
    workers: int = 1,
    fmt: str = "markdown",
    out: Optional[str] = None,
    estimates_out: Optional[str] = None,
) -> str:
    """``reps`` and ``n`` fall back to the scenario's own defaults when not given."""
    spec = resolve_scenario(scenario)
    reps = spec.reps if reps is None else reps
    n = spec.n if n is None else n
    chosen = tuple(Strategy.parse(s) for s in strategies) if strategies else tuple(Strategy)
    with Timer() as timer:
        run = replicate_estimates(spec, chosen, n=n, reps=reps, master_seed=seed, workers=workers)
    if estimates_out:
        write_estimates(run, estimates_out)

    report = Table1Report(
        scenario_ids=(spec.id,),
        cells=tuple(report_cells(spec, run)),
        metadata=Table1Metadata(
            master_seed=seed,
            reps=reps,
            n=n,
            timestamp=datetime.now(timezone.utc).isoformat(),
            elapsed_seconds=timer.elapsed,
        ),
    )
    params = {"scenario": spec.id, "strategies": [s.value for s in chosen], "reps": reps, "n": n, "seed": seed}
    return _report_outputs(report, fmt, out, "replicate", params)


def cmd_table1(
    reps: int,
    n: int,
    seed: int,
    workers: int = 1,
    fmt: str = "markdown",
    out: Optional[str] = None,
    scenarios: Sequence[str] = (),
) -> str:
    ids = tuple(scenarios) or builtin_ids()
    for sid in ids:
        builtin(sid)
    report = reproduce_table1(reps=reps, n=n, master_seed=seed, workers=workers, scenario_ids=ids)
    params = {"scenarios": list(ids), "reps": reps, "n": n, "seed": seed}
    return _report_outputs(report, fmt, out, "table1", params)


def cmd_dsep(
    x: str, y: str, given: Sequence[str] = (), dag_path: Optional[str] = None, scenario: Optional[str] = None
) -> str:
    dag = _dag_for(dag_path, scenario)
    verdict = "d-separated" if d_separated(dag, [x], [y], given) else "not d-separated"
    condition = f" | {', '.join(given)}" if given else ""
    return f"{x} and {y}{condition}: {verdict}\n"


def cmd_classify(
    exposure: str,
    baseline: str,
    followup: str,
    estimand: str = "total",
    dag_path: Optional[str] = None,
    scenario: Optional[str] = None,
) -> str:
    dag = _dag_for(dag_path, scenario)
    role = classify_baseline_role(dag, exposure, baseline, followup)
    strategy, warnings = recommend_strategy(role, Estimand(estimand))
    lines = [f"{role.value}; recommended: {strategy.label}"]
    lines += [f"note: {w}" for w in warnings]
    return "\n".join(lines) + "\n"


def cmd_oldham(n: int, seed: int) -> str:
    baseline_r, followup_r = oldham_correlation(n, seed)
    return _json({"n": n, "seed": seed, "baseline_vs_change": baseline_r, "followup_vs_change": followup_r})
