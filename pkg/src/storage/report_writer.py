"""
Table 1 renderings: markdown (3-decimal display, laid out like the published
table with analyses as rows and scenarios as columns), CSV and JSON at full
precision. A CSV written here parses back to exactly the JSON numbers.
"""

import json
import os
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from scenarios.scenario_library import Table1Report
from sem.strategy import Strategy
from storage.dataset_writer import FLOAT_FORMAT
from utils.errors import UsageError

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "templates")
FORMATS = ("markdown", "csv", "json")

_env = Environment(loader=FileSystemLoader(TEMPLATE_DIR), undefined=StrictUndefined, autoescape=False)


def fmt3(value: float) -> str:
    return f"{value:.3f}"


def _strategies(report: Table1Report) -> List[Strategy]:
    present = {c.strategy for c in report.cells}
    return [s for s in Strategy if s in present]


def table1_markdown(report: Table1Report, show_oracle: bool = True) -> str:
    rows, oracle_rows = [], []
    for strategy in _strategies(report):
        cells = [report.cell(sid, strategy) for sid in report.scenario_ids]
        rows.append(
            {
                "title": strategy.title,
                "cells": [f"{fmt3(c.summary.median)} ({fmt3(c.summary.lower)}, {fmt3(c.summary.upper)})" for c in cells],
            }
        )
        oracle_rows.append({"title": strategy.title, "cells": [fmt3(c.oracle) for c in cells]})

    meta = report.metadata
    caption = (
        "Estimated effect of baseline waist circumference (dm) on insulin concentration "
        f"(Log[mmol/L]): median (95% simulation limits) over {meta.reps} replicates of "
        f"n = {meta.n}, master seed {meta.master_seed}."
    )
    return _env.get_template("table1.md.j2").render(
        caption=caption,
        scenario_ids=list(report.scenario_ids),
        rows=rows,
        oracle_rows=oracle_rows if show_oracle else [],
    )


def table1_records(report: Table1Report) -> List[Dict]:
    records = []
    for cell in report.cells:
        s = cell.summary
        published = cell.published or (None, None, None)
        records.append(
            {
                "scenario": s.scenario_id,
                "strategy": s.strategy.value,
                "median": s.median,
                "lower": s.lower,
                "upper": s.upper,
                "oracle": cell.oracle,
                "reps": s.reps,
                "skipped": s.skipped,
                "published_median": published[0],
                "published_lower": published[1],
                "published_upper": published[2],
            }
        )
    return records


def table1_csv(report: Table1Report) -> str:
    frame = pd.DataFrame(table1_records(report))
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def table1_json(report: Table1Report) -> str:
    meta = report.metadata
    doc = {
        "master_seed": meta.master_seed,
        "reps": meta.reps,
        "n": meta.n,
        "units": "Log[mmol/L]/dm",
        "scenarios": list(report.scenario_ids),
        "cells": table1_records(report),
    }
    return json.dumps(doc, indent=2) + "\n"


def render_table1(report: Table1Report, fmt: str = "markdown") -> str:
    if fmt == "markdown":
        return table1_markdown(report)
    if fmt == "csv":
        return table1_csv(report)
    if fmt == "json":
        return table1_json(report)
    raise UsageError(f"Unknown report format: {fmt}", {"format": fmt})


def write_text(text: str, path: Optional[Union[str, Path]]) -> Optional[Path]:
    if path is None:
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
