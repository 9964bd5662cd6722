"""
Imputation quality metrics and the evaluation report.
RMSE is reported in raw feature units, accuracy in percent.
"""
import os
import math
import logging
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from sklearn.metrics import hamming_loss, mean_squared_error

from .data import HeldOutPairs
from .errors import DataError, DimensionError, UsageError
from .file_io import write_csv_atomic
from .vigan_model import ViganModel, impute

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['method', 'direction', 'metric', 'value', 'n']
DIRECTION_LABELS = {'x2y': 'V1->V2', 'y2x': 'V2->V1'}
METRICS = ('rmse', 'accuracy')

ImputeFn = Callable[[np.ndarray, str], np.ndarray]


@dataclass(frozen=True)
class EvalRow:
    method: str
    direction: str
    metric: str
    value: float
    n: int

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DataError(f'{self.method} {self.direction} {self.metric}: value is not finite')
        if self.metric == 'accuracy' and not 0.0 <= self.value <= 100.0:
            raise DataError(f'accuracy must lie in [0, 100], got {self.value}')
        if self.metric == 'rmse' and self.value < 0:
            raise DataError(f'rmse must be >= 0, got {self.value}')


class EvalReport:
    """Rows of (method, direction, metric, value, n), one per combination."""

    def __init__(self, rows: Optional[List[EvalRow]]=None):
        self.rows: List[EvalRow] = list(rows or [])

    def add(self, row: EvalRow) -> None:
        self.rows.append(row)

    def extend(self, other: 'EvalReport') -> None:
        self.rows.extend(other.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def value(self, method: str, direction: str, metric: str) -> float:
        for row in self.rows:
            if (row.method, row.direction, row.metric) == (method, direction, metric):
                return row.value
        raise KeyError((method, direction, metric))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows], columns=REPORT_COLUMNS)

    def pivot(self, metric: str='rmse') -> pd.DataFrame:
        """
        One row per method with V1->V2, V2->V1 and Average columns.

        Returns an empty frame when the report has no rows for the metric.
        """
        frame = self.to_frame()
        frame = frame[frame['metric'] == metric]
        if frame.empty:
            return pd.DataFrame(columns=['V1->V2', 'V2->V1', 'Average'])
        table = frame.pivot_table(index='method', columns='direction', values='value', aggfunc='first')
        for label in DIRECTION_LABELS.values():
            if label not in table.columns:
                table[label] = np.nan
        table = table[list(DIRECTION_LABELS.values())]
        table['Average'] = table.mean(axis=1)
        table.columns.name = None
        return table

    def to_csv(self, path: str, append: bool=False) -> None:
        """Write the report; with append, rows are added to an existing report file."""
        frame = self.to_frame()
        if append and os.path.exists(path):
            frame = pd.concat([EvalReport.from_csv(path).to_frame(), frame], ignore_index=True)
        write_csv_atomic(path, frame)
        logger.info(f'Wrote evaluation report with {len(frame)} rows to {path}')

    @classmethod
    def from_csv(cls, path: str) -> 'EvalReport':
        try:
            frame = pd.read_csv(path)
        except (OSError, pd.errors.EmptyDataError) as e:
            raise DataError(f'cannot read evaluation report {path}: {e}')
        if list(frame.columns) != REPORT_COLUMNS:
            raise DataError(f'{path} does not have the columns {REPORT_COLUMNS}')
        return cls([EvalRow(str(r.method), str(r.direction), str(r.metric), float(r.value), int(r.n)) for r in frame.itertuples(index=False)])


def rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    """
    Root mean squared error over all entries.

    Raises:
        DimensionError: Shapes differ
        DataError: No entries
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape:
        raise DimensionError(f'rmse: predictions {predictions.shape} and targets {targets.shape} differ')
    if predictions.size == 0:
        raise DataError('rmse: no examples')
    return float(np.sqrt(mean_squared_error(targets.reshape(-1), predictions.reshape(-1))))


def _check_bits(values: np.ndarray, label: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if not np.all((values == 0.0) | (values == 1.0)):
        raise DataError(f'hamming_accuracy: {label} contains values other than 0 and 1')
    return values.astype(np.int64)


def hamming_accuracy(pred_bits: np.ndarray, target_bits: np.ndarray) -> float:
    """
    100 * (1 - normalised Hamming distance), averaged over examples.

    Every example has the same length, so the per-example average equals the
    pooled fraction of matching bits.
    """
    pred = _check_bits(pred_bits, 'predictions')
    target = _check_bits(target_bits, 'targets')
    if pred.shape != target.shape:
        raise DimensionError(f'hamming_accuracy: predictions {pred.shape} and targets {target.shape} differ')
    if pred.size == 0:
        raise DataError('hamming_accuracy: no examples')
    if pred.ndim == 1:
        pred, target = pred.reshape(1, -1), target.reshape(1, -1)
    return float(100.0 * (1.0 - hamming_loss(target, pred)))


def as_impute_fn(imputer: Any) -> ImputeFn:
    """Accept a ViganModel, an object with `impute(inputs, direction)`, or a plain function."""
    if isinstance(imputer, ViganModel):
        return lambda inputs, direction: impute(imputer, inputs, direction)
    if hasattr(imputer, 'impute'):
        return imputer.impute
    if callable(imputer):
        return imputer
    raise UsageError(f'cannot impute with {type(imputer).__name__}')


def evaluate(imputer: Any, pairs: HeldOutPairs, direction: str, method: str, binary: Optional[Sequence[bool]]=None) -> EvalReport:
    """
    Hide the target view of complete pairs, impute it and score the result.

    Args:
        imputer: Model or imputer
        pairs: Complete pairs in raw units
        direction: 'x2y' (impute view 2) or 'y2x' (impute view 1)
        method: Label for the report rows
        binary: Binary flags of the target view; accuracy is added when all are set

    Returns:
        EvalReport: An rmse row, plus an accuracy row for binary targets

    Raises:
        DataError: No test pairs
    """
    if direction not in DIRECTION_LABELS:
        raise UsageError(f'unknown direction {direction!r}')
    if len(pairs) == 0:
        raise DataError(f'{method}: the evaluation set is empty')
    inputs, targets = (pairs.x, pairs.y) if direction == 'x2y' else (pairs.y, pairs.x)
    predictions = np.asarray(as_impute_fn(imputer)(inputs, direction), dtype=np.float64)
    label = DIRECTION_LABELS[direction]
    report = EvalReport([EvalRow(method, label, 'rmse', rmse(predictions, targets), len(pairs))])
    if binary is not None and len(binary) and all(binary):
        report.add(EvalRow(method, label, 'accuracy', hamming_accuracy(predictions, targets), len(pairs)))
    logger.info(f"{method} {label}: " + ', '.join((f'{r.metric}={r.value:.4f}' for r in report.rows)))
    return report
