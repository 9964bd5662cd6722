"""
Multi-view datasets: paired and single-view pools, CSV ingestion, min-max
normalisation, seeded minibatch sampling and synthetic generators with
ground truth for every hidden view.

Dataset directory layout:
    manifest.json      dims, column names, binary flags, split assignments, seed
    data.csv           header row; view-1 columns then view-2 columns; empty cells for a missing view
    ground_truth.csv   optional, complete rows in the same order (synthetic sets)
"""
import os
import json
import logging
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.preprocessing import MinMaxScaler

from .errors import DataError, DimensionError, EmptyPoolError, UsageError
from .file_io import write_csv_atomic, write_json_atomic

logger = logging.getLogger(__name__)

MANIFEST_FILE = 'manifest.json'
DATA_FILE = 'data.csv'
GROUND_TRUTH_FILE = 'ground_truth.csv'
MANIFEST_VERSION = 1

SYNTHETIC_KINDS = ('rotation', 'mlp-nonlinear', 'binary-symptom')
POOLS = ('all', 'unpaired', 'paired')


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature minimum and span of each view; constant features get span 1."""
    x_min: np.ndarray
    x_span: np.ndarray
    y_min: np.ndarray
    y_span: np.ndarray

    @staticmethod
    def _fit_view(rows: np.ndarray, dim: int) -> Tuple[np.ndarray, np.ndarray]:
        if rows.shape[0] == 0:
            logger.warning(f'No rows to fit normalisation for a view of width {dim}; using identity scaling')
            return np.zeros(dim), np.ones(dim)
        scaler = MinMaxScaler().fit(rows)
        span = np.where(scaler.data_range_ == 0, 1.0, scaler.data_range_)
        return scaler.data_min_.astype(np.float64), span.astype(np.float64)

    @classmethod
    def fit(cls, x_rows: np.ndarray, y_rows: np.ndarray) -> 'NormalizationStats':
        x_min, x_span = cls._fit_view(np.asarray(x_rows, dtype=np.float64), x_rows.shape[1])
        y_min, y_span = cls._fit_view(np.asarray(y_rows, dtype=np.float64), y_rows.shape[1])
        return cls(_frozen(x_min), _frozen(x_span), _frozen(y_min), _frozen(y_span))

    @classmethod
    def identity(cls, dim_x: int, dim_y: int) -> 'NormalizationStats':
        return cls(_frozen(np.zeros(dim_x)), _frozen(np.ones(dim_x)), _frozen(np.zeros(dim_y)), _frozen(np.ones(dim_y)))

    def _view(self, view: str) -> Tuple[np.ndarray, np.ndarray]:
        if view == 'x':
            return self.x_min, self.x_span
        if view == 'y':
            return self.y_min, self.y_span
        raise UsageError(f"view must be 'x' or 'y', got {view!r}")

    def normalize(self, values: np.ndarray, view: str) -> np.ndarray:
        low, span = self._view(view)
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != low.shape[0]:
            raise DimensionError(f'normalize: view {view} has width {low.shape[0]}, got {values.shape}')
        return (values - low) / span

    def denormalize(self, values: np.ndarray, view: str) -> np.ndarray:
        low, span = self._view(view)
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != low.shape[0]:
            raise DimensionError(f'denormalize: view {view} has width {low.shape[0]}, got {values.shape}')
        return values * span + low

    def to_dict(self) -> Dict[str, List[float]]:
        return {'x_min': self.x_min.tolist(), 'x_span': self.x_span.tolist(), 'y_min': self.y_min.tolist(), 'y_span': self.y_span.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence[float]]) -> 'NormalizationStats':
        return cls(*(_frozen(np.asarray(data[k], dtype=np.float64)) for k in ('x_min', 'x_span', 'y_min', 'y_span')))


@dataclass(frozen=True)
class MultiViewDataset:
    """
    Training data: N complete pairs, x-only and y-only pools.

    Immutable after construction. `normalized` records whether the arrays are
    already mapped to [0, 1] by `stats`.
    """
    paired_x: np.ndarray
    paired_y: np.ndarray
    x_only: np.ndarray
    y_only: np.ndarray
    x_names: Tuple[str, ...]
    y_names: Tuple[str, ...]
    x_binary: Tuple[bool, ...]
    y_binary: Tuple[bool, ...]
    stats: NormalizationStats
    normalized: bool = False

    def __post_init__(self):
        for attr in ('paired_x', 'paired_y', 'x_only', 'y_only'):
            object.__setattr__(self, attr, _frozen(getattr(self, attr)))
        dim_x, dim_y = len(self.x_names), len(self.y_names)
        if dim_x == 0 or dim_y == 0:
            raise DimensionError('both views need at least one feature')
        for attr, dim in (('paired_x', dim_x), ('x_only', dim_x), ('paired_y', dim_y), ('y_only', dim_y)):
            array = getattr(self, attr)
            if array.ndim != 2 or array.shape[1] != dim:
                raise DimensionError(f'{attr} must have width {dim}, got shape {array.shape}')
        if self.paired_x.shape[0] != self.paired_y.shape[0]:
            raise DimensionError(f'paired views disagree: {self.paired_x.shape[0]} x rows vs {self.paired_y.shape[0]} y rows')
        if len(self.x_binary) != dim_x or len(self.y_binary) != dim_y:
            raise DimensionError('binary flags must match the number of features per view')
        if not self.normalized:
            _check_binary(self.all_x, self.x_binary, self.x_names)
            _check_binary(self.all_y, self.y_binary, self.y_names)

    @property
    def dim_x(self) -> int:
        return len(self.x_names)

    @property
    def dim_y(self) -> int:
        return len(self.y_names)

    @property
    def n_paired(self) -> int:
        return int(self.paired_x.shape[0])

    @property
    def m_x(self) -> int:
        """Total x vectors: N + |x_only|."""
        return self.n_paired + int(self.x_only.shape[0])

    @property
    def m_y(self) -> int:
        """Total y vectors: N + |y_only|."""
        return self.n_paired + int(self.y_only.shape[0])

    @cached_property
    def all_x(self) -> np.ndarray:
        return _frozen(np.concatenate([self.paired_x, self.x_only], axis=0))

    @cached_property
    def all_y(self) -> np.ndarray:
        return _frozen(np.concatenate([self.paired_y, self.y_only], axis=0))

    def describe(self) -> Dict[str, int]:
        return {'dim_x': self.dim_x, 'dim_y': self.dim_y, 'paired': self.n_paired, 'x_only': int(self.x_only.shape[0]), 'y_only': int(self.y_only.shape[0])}


@dataclass(frozen=True)
class HeldOutPairs:
    """Complete pairs reserved for validation or testing, in raw units."""
    x: np.ndarray
    y: np.ndarray
    name: str = 'test'

    def __post_init__(self):
        object.__setattr__(self, 'x', _frozen(self.x))
        object.__setattr__(self, 'y', _frozen(self.y))
        if self.x.shape[0] != self.y.shape[0]:
            raise DimensionError(f'{self.name}: {self.x.shape[0]} x rows vs {self.y.shape[0]} y rows')

    def __len__(self) -> int:
        return int(self.x.shape[0])


@dataclass(frozen=True)
class SplitDataset:
    """Training dataset plus held-out pairs; only `train` is handed to trainers."""
    train: MultiViewDataset
    validation: HeldOutPairs
    test: HeldOutPairs
    manifest: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class GroundTruth:
    """Hidden views of the single-view examples, for measuring imputation error."""
    x_only: np.ndarray
    x_only_missing_y: np.ndarray
    y_only: np.ndarray
    y_only_missing_x: np.ndarray

    def as_pairs(self, direction: str) -> HeldOutPairs:
        """Complete pairs whose target view is the hidden one, for the given direction."""
        if direction == 'x2y':
            return HeldOutPairs(self.x_only, self.x_only_missing_y, name='ground-truth')
        if direction == 'y2x':
            return HeldOutPairs(self.y_only_missing_x, self.y_only, name='ground-truth')
        raise UsageError(f'unknown direction {direction!r}')


@dataclass
class SyntheticSpec:
    """Parameters of a synthetic two-view dataset."""
    kind: str = 'rotation'
    dim_x: int = 8
    dim_y: int = 8
    noise: float = 0.05
    paired: int = 2000
    x_only: int = 2000
    y_only: int = 2000
    validation: int = 200
    test: int = 300
    seed: int = 7

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise UsageError(f'unknown synthetic kind {self.kind!r}; expected one of {SYNTHETIC_KINDS}')
        if self.dim_x < 1 or self.dim_y < 1:
            raise DimensionError(f'invalid dims: dim_x={self.dim_x}, dim_y={self.dim_y}')
        if self.kind == 'rotation' and self.dim_x != self.dim_y:
            raise DimensionError(f'rotation data needs dim_x == dim_y, got {self.dim_x} and {self.dim_y}')
        if not self.noise >= 0:
            raise UsageError(f'noise level must be >= 0, got {self.noise}')
        for name in ('paired', 'x_only', 'y_only', 'validation', 'test'):
            if getattr(self, name) < 0:
                raise UsageError(f'{name} count must be >= 0')
        if self.validation + self.test > self.paired:
            raise UsageError(f'validation ({self.validation}) + test ({self.test}) exceed the paired count ({self.paired})')

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'SyntheticSpec':
        names = cls.__dataclass_fields__.keys()
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass
class BatchSizes:
    paired: int = 64
    x: int = 64
    y: int = 64


@dataclass
class MiniBatch:
    """One sampled minibatch (normalised arrays) and the indices drawn."""
    paired_x: np.ndarray
    paired_y: np.ndarray
    x: np.ndarray
    y: np.ndarray
    indices: Dict[str, np.ndarray] = field(default_factory=dict)


def _check_binary(rows: np.ndarray, flags: Sequence[bool], names: Sequence[str]) -> None:
    for j, flag in enumerate(flags):
        if flag and rows.shape[0]:
            column = rows[:, j]
            if not np.all((column == 0.0) | (column == 1.0)):
                raise DataError(f'binary feature {names[j]!r} contains values other than 0/1')


def normalize(dataset: MultiViewDataset) -> MultiViewDataset:
    """Map every view to [0, 1] per feature with the dataset's stats."""
    if dataset.normalized:
        return dataset
    stats = dataset.stats
    return MultiViewDataset(paired_x=stats.normalize(dataset.paired_x, 'x'), paired_y=stats.normalize(dataset.paired_y, 'y'), x_only=stats.normalize(dataset.x_only, 'x'), y_only=stats.normalize(dataset.y_only, 'y'), x_names=dataset.x_names, y_names=dataset.y_names, x_binary=dataset.x_binary, y_binary=dataset.y_binary, stats=stats, normalized=True)


def denormalize(stats: NormalizationStats, vector: np.ndarray, view: str) -> np.ndarray:
    """Invert min-max normalisation for one view."""
    return stats.denormalize(vector, view)


def sample_batches(dataset: MultiViewDataset, rng: np.random.Generator, sizes: BatchSizes, pool: str='all') -> MiniBatch:
    """
    Draw a paired batch and independent x and y batches, uniformly with replacement.

    Args:
        dataset: Source dataset (normalised for training)
        rng: Seeded generator; draws happen in the order paired, x, y
        sizes: Batch size per role; 0 yields an empty batch
        pool: Where x/y batches come from: 'all' (paired + single-view),
              'unpaired' (single-view pools only) or 'paired' (paired rows only)

    Returns:
        MiniBatch: Arrays plus the sampled indices
    """
    if pool not in POOLS:
        raise UsageError(f'unknown sampling pool {pool!r}; expected one of {POOLS}')
    if pool == 'all':
        x_pool, y_pool = dataset.all_x, dataset.all_y
    elif pool == 'unpaired':
        x_pool, y_pool = dataset.x_only, dataset.y_only
    else:
        x_pool, y_pool = dataset.paired_x, dataset.paired_y

    def _draw(n_rows: int, size: int, label: str) -> np.ndarray:
        if size < 0:
            raise UsageError(f'batch size for {label} must be >= 0')
        if size == 0:
            return np.zeros(0, dtype=np.int64)
        if n_rows == 0:
            raise EmptyPoolError(f'cannot sample {size} {label} examples from an empty pool')
        return rng.integers(0, n_rows, size=size)
    paired_idx = _draw(dataset.n_paired, sizes.paired, 'paired')
    x_idx = _draw(x_pool.shape[0], sizes.x, f'{pool} x')
    y_idx = _draw(y_pool.shape[0], sizes.y, f'{pool} y')
    return MiniBatch(paired_x=dataset.paired_x[paired_idx], paired_y=dataset.paired_y[paired_idx], x=x_pool[x_idx], y=y_pool[y_idx], indices={'paired': paired_idx, 'x': x_idx, 'y': y_idx})


def _check_row_widths(frame: pd.DataFrame, csv_path: str) -> None:
    """Short rows surface as NaN cells; empty fields stay '' with keep_default_na=False."""
    short = frame.isna().any(axis=1).to_numpy()
    if short.any():
        row = int(np.flatnonzero(short)[0])
        found = int(frame.iloc[row].notna().sum())
        raise DataError(f'{csv_path}: ragged data row {row + 1}: expected {len(frame.columns)} fields, found {found}')


def _parse_view(frame: pd.DataFrame, columns: Sequence[str], view: str) -> Tuple[np.ndarray, np.ndarray]:
    cells = frame[list(columns)]
    empty = cells.apply(lambda col: col.str.strip() == '').to_numpy()
    values = np.full(empty.shape, np.nan)
    for j, column in enumerate(columns):
        parsed = pd.to_numeric(cells[column].where(~empty[:, j]), errors='coerce').to_numpy(dtype=np.float64)
        bad = ~empty[:, j] & ~np.isfinite(parsed)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataError(f'non-numeric value {cells[column].iloc[row]!r} in column {column!r} (data row {row + 1})')
        values[:, j] = parsed
    present = ~empty.any(axis=1)
    absent = empty.all(axis=1)
    partial = ~present & ~absent
    if partial.any():
        row = int(np.flatnonzero(partial)[0])
        raise DataError(f'data row {row + 1}: view {view} is partially missing; only whole-view missingness is supported')
    return values, present


def _manifest_columns(manifest: Mapping[str, Any]) -> Tuple[List[str], List[str], List[bool], List[bool]]:
    try:
        x_cols = list(manifest['columns']['x'])
        y_cols = list(manifest['columns']['y'])
    except (KeyError, TypeError):
        raise DataError('manifest must declare columns.x and columns.y')
    binary = manifest.get('binary', {}) or {}
    x_bin = [bool(b) for b in binary.get('x', [False] * len(x_cols))]
    y_bin = [bool(b) for b in binary.get('y', [False] * len(y_cols))]
    if len(x_bin) != len(x_cols) or len(y_bin) != len(y_cols):
        raise DataError('manifest binary flags must match the column lists')
    dims = manifest.get('dims')
    if dims and (int(dims.get('x', len(x_cols))) != len(x_cols) or int(dims.get('y', len(y_cols))) != len(y_cols)):
        raise DataError(f'manifest dims {dims} disagree with its column lists')
    return x_cols, y_cols, x_bin, y_bin


def dataset_from_frame(frame: pd.DataFrame, manifest: Mapping[str, Any]) -> SplitDataset:
    """
    Build a SplitDataset from a string-typed frame laid out as in data.csv.

    Rows with every view-2 cell empty become x-only (and symmetrically); rows
    listed under manifest['splits'] must be complete and are held out.
    Normalisation statistics come from the training rows only.
    """
    x_cols, y_cols, x_bin, y_bin = _manifest_columns(manifest)
    if list(frame.columns) != x_cols + y_cols:
        raise DataError(f'CSV header {list(frame.columns)} does not match manifest columns {x_cols + y_cols}')
    if len(frame) == 0:
        raise DataError('dataset has a header but no rows')
    x_values, x_present = _parse_view(frame, x_cols, 'x')
    y_values, y_present = _parse_view(frame, y_cols, 'y')
    neither = ~x_present & ~y_present
    if neither.any():
        raise DataError(f'data row {int(np.flatnonzero(neither)[0]) + 1} has both views missing')
    splits = manifest.get('splits', {}) or {}
    held = {}
    taken = np.zeros(len(frame), dtype=bool)
    for name in ('validation', 'test'):
        rows = np.asarray(splits.get(name, []), dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= len(frame)):
            raise DataError(f'split {name!r} references rows outside the data file')
        if rows.size and not np.all(x_present[rows] & y_present[rows]):
            raise DataError(f'split {name!r} must reference complete pairs only')
        if np.any(taken[rows]):
            raise DataError(f'split {name!r} overlaps another split')
        taken[rows] = True
        held[name] = HeldOutPairs(x_values[rows] if rows.size else np.zeros((0, len(x_cols))), y_values[rows] if rows.size else np.zeros((0, len(y_cols))), name=name)
    train_paired = x_present & y_present & ~taken
    train_x_only = x_present & ~y_present
    train_y_only = y_present & ~x_present
    paired_x = x_values[train_paired]
    paired_y = y_values[train_paired]
    x_only = x_values[train_x_only]
    y_only = y_values[train_y_only]
    for label, rows, flags, names in (('x', np.concatenate([paired_x, x_only]), x_bin, x_cols), ('y', np.concatenate([paired_y, y_only]), y_bin, y_cols)):
        _check_binary(rows, flags, names)
    for name, pairs in held.items():
        _check_binary(pairs.x, x_bin, x_cols)
        _check_binary(pairs.y, y_bin, y_cols)
    stats = NormalizationStats.fit(np.concatenate([paired_x, x_only]), np.concatenate([paired_y, y_only]))
    train = MultiViewDataset(paired_x=paired_x, paired_y=paired_y, x_only=x_only, y_only=y_only, x_names=tuple(x_cols), y_names=tuple(y_cols), x_binary=tuple(x_bin), y_binary=tuple(y_bin), stats=stats)
    logger.info(f'Loaded dataset: {train.describe()}, validation={len(held["validation"])}, test={len(held["test"])}')
    return SplitDataset(train=train, validation=held['validation'], test=held['test'], manifest=dict(manifest))


def _read_string_frame(csv_path: str) -> pd.DataFrame:
    if not os.path.exists(csv_path):
        raise DataError(f'data file not found: {csv_path}')
    try:
        frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise DataError(f'{csv_path} is empty')
    except pd.errors.ParserError as e:
        raise DataError(f'{csv_path}: {e}')
    _check_row_widths(frame, csv_path)
    return frame


def load_csv(csv_path: str, manifest: Mapping[str, Any]) -> SplitDataset:
    """
    Parse a data file described by a manifest.

    Args:
        csv_path: Path to data.csv
        manifest: Parsed manifest (columns, binary flags, splits)

    Returns:
        SplitDataset: Training pools plus held-out pairs

    Raises:
        DataError: Empty file, ragged rows, non-numeric cells, partial view missingness
    """
    return dataset_from_frame(_read_string_frame(csv_path), manifest)


def read_manifest(directory: str) -> Dict[str, Any]:
    path = os.path.join(directory, MANIFEST_FILE)
    if not os.path.exists(path):
        raise DataError(f'manifest not found: {path}')
    try:
        with open(path, encoding='utf-8') as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise DataError(f'{path} is not valid JSON: {e}')


def load_ground_truth(directory: str, manifest: Mapping[str, Any]) -> Optional[GroundTruth]:
    """Read ground_truth.csv when present and align it with data.csv."""
    truth_path = os.path.join(directory, GROUND_TRUTH_FILE)
    if not os.path.exists(truth_path):
        return None
    x_cols, y_cols, _, _ = _manifest_columns(manifest)
    truth = pd.read_csv(truth_path)
    data = _read_string_frame(os.path.join(directory, DATA_FILE))
    if len(truth) != len(data) or list(truth.columns) != x_cols + y_cols:
        raise DataError(f'{truth_path} does not line up with {DATA_FILE}')
    x_empty = data[x_cols].apply(lambda col: col.str.strip() == '').all(axis=1).to_numpy()
    y_empty = data[y_cols].apply(lambda col: col.str.strip() == '').all(axis=1).to_numpy()
    tx = truth[x_cols].to_numpy(dtype=np.float64)
    ty = truth[y_cols].to_numpy(dtype=np.float64)
    return GroundTruth(x_only=_frozen(tx[y_empty]), x_only_missing_y=_frozen(ty[y_empty]), y_only=_frozen(ty[x_empty]), y_only_missing_x=_frozen(tx[x_empty]))


def load_dataset_dir(directory: str) -> Tuple[SplitDataset, Optional[GroundTruth]]:
    """Load manifest.json, data.csv and, if present, ground_truth.csv."""
    manifest = read_manifest(directory)
    split = load_csv(os.path.join(directory, DATA_FILE), manifest)
    return split, load_ground_truth(directory, manifest)


def _random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def generate_views(spec: SyntheticSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw complete (x, y) rows for every example of a synthetic spec.

    rotation:        x ~ N(0, I) clipped to [-3, 3]; y = R x + e, R random orthogonal
    mlp-nonlinear:   y = W2 tanh(W1 x + b1) + e with a fixed random hidden layer
    binary-symptom:  a latent severity vector per subject drives two sets of binary
                     criteria through correlated linear projections and thresholds
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.paired + spec.x_only + spec.y_only
    if spec.kind == 'rotation':
        rotation = _random_orthogonal(spec.dim_x, rng)
        x = np.clip(rng.standard_normal((n, spec.dim_x)), -3.0, 3.0)
        y = x @ rotation.T + spec.noise * rng.standard_normal((n, spec.dim_y))
    elif spec.kind == 'mlp-nonlinear':
        hidden = max(8, 2 * spec.dim_x)
        w1 = rng.standard_normal((spec.dim_x, hidden)) / np.sqrt(spec.dim_x)
        b1 = 0.1 * rng.standard_normal(hidden)
        w2 = rng.standard_normal((hidden, spec.dim_y)) / np.sqrt(hidden)
        x = np.clip(rng.standard_normal((n, spec.dim_x)), -3.0, 3.0)
        y = np.tanh(x @ w1 + b1) @ w2 + spec.noise * rng.standard_normal((n, spec.dim_y))
    else:
        latent_dim = 3
        load_x = rng.standard_normal((latent_dim, spec.dim_x))
        load_y = rng.standard_normal((latent_dim, spec.dim_y))
        shared = rng.standard_normal((latent_dim, spec.dim_y))
        load_y = 0.7 * load_y + 0.3 * shared
        thresh_x = rng.uniform(-0.5, 0.5, spec.dim_x)
        thresh_y = rng.uniform(-0.5, 0.5, spec.dim_y)
        severity = rng.standard_normal((n, latent_dim))
        x = (severity @ load_x + spec.noise * rng.standard_normal((n, spec.dim_x)) > thresh_x).astype(np.float64)
        y = (severity @ load_y + spec.noise * rng.standard_normal((n, spec.dim_y)) > thresh_y).astype(np.float64)
    return x, y


def synthesize_tables(spec: SyntheticSpec) -> Tuple[pd.DataFrame, Dict[str, Any], pd.DataFrame]:
    """
    Lay out a synthetic dataset as the three files of a dataset directory.

    Rows are ordered paired, x-only, y-only; validation and test rows are
    drawn from the paired block with ``spec.seed``.

    Returns:
        (data frame with missing cells as NaN, manifest dict, complete ground-truth frame)
    """
    x, y = generate_views(spec)
    x_cols = [f'x{j + 1}' for j in range(spec.dim_x)]
    y_cols = [f'y{j + 1}' for j in range(spec.dim_y)]
    truth = pd.DataFrame(np.concatenate([x, y], axis=1), columns=x_cols + y_cols)
    data = truth.copy()
    start_x_only = spec.paired
    start_y_only = spec.paired + spec.x_only
    data.iloc[start_x_only:start_y_only, spec.dim_x:] = np.nan
    data.iloc[start_y_only:, :spec.dim_x] = np.nan
    order = np.random.default_rng([spec.seed, 1]).permutation(spec.paired)
    validation = sorted(int(i) for i in order[:spec.validation])
    test = sorted(int(i) for i in order[spec.validation:spec.validation + spec.test])
    binary = spec.kind == 'binary-symptom'
    manifest = {'format_version': MANIFEST_VERSION, 'dims': {'x': spec.dim_x, 'y': spec.dim_y}, 'columns': {'x': x_cols, 'y': y_cols}, 'binary': {'x': [binary] * spec.dim_x, 'y': [binary] * spec.dim_y}, 'splits': {'validation': validation, 'test': test}, 'seed': spec.seed, 'synthetic': spec.to_dict()}
    return data, manifest, truth


def _frame_as_strings(frame: pd.DataFrame) -> pd.DataFrame:
    return frame.apply(lambda col: col.map(lambda v: '' if pd.isna(v) else repr(float(v))))


def generate(spec: SyntheticSpec) -> Tuple[SplitDataset, GroundTruth]:
    """
    Generate a synthetic dataset and the ground truth of every hidden view.

    The result is identical to writing the dataset directory and loading it back.
    """
    data, manifest, truth = synthesize_tables(spec)
    split = dataset_from_frame(_frame_as_strings(data), manifest)
    tx = truth.to_numpy()[:, :spec.dim_x]
    ty = truth.to_numpy()[:, spec.dim_x:]
    xs = slice(spec.paired, spec.paired + spec.x_only)
    ys = slice(spec.paired + spec.x_only, spec.paired + spec.x_only + spec.y_only)
    ground_truth = GroundTruth(x_only=_frozen(tx[xs]), x_only_missing_y=_frozen(ty[xs]), y_only=_frozen(ty[ys]), y_only_missing_x=_frozen(tx[ys]))
    return split, ground_truth


def write_dataset_dir(directory: str, data: pd.DataFrame, manifest: Mapping[str, Any], truth: Optional[pd.DataFrame]=None, force: bool=False) -> None:
    """
    Write manifest.json, data.csv and optionally ground_truth.csv.

    Raises:
        UsageError: The directory already holds a dataset and force is not set
    """
    if os.path.isdir(directory) and os.listdir(directory) and not force:
        raise UsageError(f'output directory {directory} already exists; pass --force to overwrite')
    os.makedirs(directory, exist_ok=True)
    write_csv_atomic(os.path.join(directory, DATA_FILE), data)
    write_json_atomic(os.path.join(directory, MANIFEST_FILE), dict(manifest))
    if truth is not None:
        write_csv_atomic(os.path.join(directory, GROUND_TRUTH_FILE), truth)
    logger.info(f'Wrote dataset with {len(data)} rows to {directory}')
