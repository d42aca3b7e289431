"""
Celery tasks: one cross-validation work unit per task.

Tasks get the path of the dataset instead of the dataset, so what is sent to a worker is a small JSON
document. Workers have to see the same file system as the process that started the experiment.
"""
import logging
import os
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

from celery import group

from classbench.benchmark.logic.data import Dataset, load_dataset_file
from classbench.benchmark.logic.harness import (MULTIPLE_IMPUTATION, Runner, UnitResult, WorkUnit, execute_unit,
                                                materialize)
from classbench.benchmark.logic.imputation import ImputationConfig
from classbench.celery import app, status

log = logging.getLogger(__package__)


@lru_cache(maxsize=4)
def _dataset(path: str, class_index: int, modified: float) -> Dataset:
    return load_dataset_file(path, class_index=class_index)


@lru_cache(maxsize=16)
def _completed(path: str, class_index: int, modified: float, method: str, imputation: Optional[ImputationConfig],
               seed: int) -> Tuple[Dataset, ...]:
    return tuple(materialize(_dataset(path, class_index, modified), method, imputation, seed))


@app.task
def cross_validate_task(dataset_path: str, class_index: int, unit: Dict[str, Any]) -> Dict[str, Any]:
    """Cross-validates one work unit, returns UnitResult.to_dict()."""
    work = WorkUnit.from_dict(unit)
    modified = os.path.getmtime(dataset_path)

    # a worker gets many units on the same completed data, only the seed matters for multiple imputation
    seed = work.seed if work.missing_method == MULTIPLE_IMPUTATION else 0
    completed = _completed(dataset_path, class_index, modified, work.missing_method, work.imputation, seed)
    result = execute_unit(_dataset(dataset_path, class_index, modified), work, list(completed))
    return result.to_dict()


def celery_runner(dataset_path: str, class_index: int = -1) -> Runner:
    """A harness Runner that sends every unit to celery as one group and waits for all of them."""

    def run(d: Dataset, units: List[WorkUnit]) -> List[UnitResult]:
        state = status()
        for alert in state['alerts']:
            log.warning(alert)

        log.info(f"Sending {len(units)} work units to {'this process' if state['eager'] else 'celery workers'}.")
        tasks = group(cross_validate_task.si(dataset_path, class_index, unit.to_dict()) for unit in units)
        results = tasks.apply_async().get(disable_sync_subtasks=False)
        return [UnitResult.from_dict(result) for result in results]

    return run
