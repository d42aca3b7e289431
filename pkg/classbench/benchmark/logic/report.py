"""
Writes comparison tables as CSV or JSON and ROC points as CSV.

Output only depends on the table: same table, same bytes. Wall time differs per run, so it is only written
when asked for.
"""
import json
import logging
from dataclasses import asdict
from typing import Any, Dict, List, Sequence, Tuple

import pyexcel as p
from tabulate import tabulate

from classbench.benchmark.logic import ClassbenchError
from classbench.benchmark.logic.harness import ComparisonTable, ResultRow

log = logging.getLogger(__package__)

REPORT_FORMAT = 'classbench-report 1'
FORMATS = ['csv', 'json']

CSV_COLUMNS = ['dataset', 'classifier', 'missing_method', 'parameters', 'seed', 'accuracy', 'accuracy_sd', 'rmse',
               'rmse_sd', 'kappa', 'kappa_sd', 'best']
TIMING_COLUMN = 'wall_time'


def columns(include_timing: bool = False) -> List[str]:
    return CSV_COLUMNS + [TIMING_COLUMN] if include_timing else list(CSV_COLUMNS)


def _cell(value: Any) -> Any:
    if isinstance(value, bool):
        return 'yes' if value else 'no'
    if isinstance(value, float):
        return repr(value)
    return value


def table_to_rows(table: ComparisonTable, include_timing: bool = False) -> List[List[Any]]:
    header = columns(include_timing)
    return [header] + [[_cell(getattr(row, column)) for column in header] for row in table.rows]


def table_to_text(table: ComparisonTable, include_timing: bool = False) -> str:
    """Human readable table for the console, metrics rounded to four decimals."""
    header = columns(include_timing)
    data = [[getattr(row, column) for column in header] for row in table.rows]
    return tabulate(data, headers=header, floatfmt='.4f')


def _write(path: str, content: str) -> None:
    try:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(content)
    except OSError as e:
        raise ClassbenchError(f"Could not write {path}: {e.strerror or e}")
    log.debug(f"Wrote {path}.")


def render_report(table: ComparisonTable, format: str = 'csv', include_timing: bool = False) -> str:
    if not table.rows:
        raise ClassbenchError("Will not write an empty report.")

    if format == 'csv':
        return p.get_sheet(array=table_to_rows(table, include_timing)).csv

    if format == 'json':
        header = columns(include_timing)
        document = {
            'format': REPORT_FORMAT,
            'columns': header,
            'rows': [{column: getattr(row, column) for column in header} for row in table.rows],
        }
        return json.dumps(document, indent=2, sort_keys=True) + '\n'

    raise ClassbenchError(f"Unsupported report format {format}, use one of {', '.join(FORMATS)}.")


def emit_report(table: ComparisonTable, format: str, path: str, include_timing: bool = False) -> None:
    _write(path, render_report(table, format, include_timing))


def load_report(path: str) -> ComparisonTable:
    """Reads a JSON report. Columns that were not written (wall_time) get their defaults."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = json.load(f)
    except OSError as e:
        raise ClassbenchError(f"Could not read {path}: {e.strerror or e}")
    except ValueError as e:
        raise ClassbenchError(f"{path} is not a JSON report: {e}")

    if not isinstance(document, dict) or document.get('format') != REPORT_FORMAT:
        raise ClassbenchError(f"{path} is not a {REPORT_FORMAT} document.")

    known = set(asdict(ResultRow('', '', '', '', '', 0, 0, 0, 0, 0, 0)))
    rows = []
    for number, values in enumerate(document.get('rows', []), start=1):
        unknown = set(values) - known
        if unknown:
            raise ClassbenchError(f"Row {number} of {path} has unknown columns: {', '.join(sorted(unknown))}.")
        rows.append(ResultRow(**values))
    return ComparisonTable(rows=rows)


def render_roc(points: Sequence[Tuple[float, float]]) -> str:
    rows: List[List[Any]] = [['fp_rate', 'tp_rate']]
    rows += [[repr(float(fp)), repr(float(tp))] for fp, tp in points]
    return p.get_sheet(array=rows).csv


def emit_roc(points: Sequence[Tuple[float, float]], path: str) -> None:
    if not points:
        raise ClassbenchError("There are no ROC points to write.")
    _write(path, render_roc(points))


def imputation_sidecar(config: Dict[str, Any], em_iterations: int, summary: Dict[str, Dict[str, float]]) -> str:
    """JSON written next to imputed datasets."""
    return json.dumps({'config': config, 'em_iterations': em_iterations, 'attributes': summary},
                      indent=2, sort_keys=True) + '\n'


def emit_imputation_sidecar(path: str, config: Dict[str, Any], em_iterations: int,
                            summary: Dict[str, Dict[str, float]]) -> None:
    _write(path, imputation_sidecar(config, em_iterations, summary))
