"""
Comparison imputers: per-feature mean, soft-impute matrix completion, and the
ablation arms of a trained model (raw generators, autoencoder alone).
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from sklearn.impute import SimpleImputer

from .data import MultiViewDataset
from .errors import DimensionError, EmptyPoolError, UsageError
from .vigan_model import DIRECTIONS, IMPUTE_PATHS, ViganModel, impute, threshold_binary

logger = logging.getLogger(__name__)

SVD_TOLERANCE = 1e-10


class MeanImputer:
    """Predicts the per-feature mean of the observed target view, whatever the input."""

    def __init__(self, train: MultiViewDataset, direction: str):
        if direction not in DIRECTIONS:
            raise UsageError(f'unknown direction {direction!r}')
        pool = train.all_y if direction == 'x2y' else train.all_x
        if pool.shape[0] == 0:
            raise EmptyPoolError(f'mean baseline {direction}: no observed target-view vectors')
        self.direction = direction
        self.input_dim = train.dim_x if direction == 'x2y' else train.dim_y
        self.flags = train.y_binary if direction == 'x2y' else train.x_binary
        self.imputer = SimpleImputer(strategy='mean').fit(pool)
        self.name = 'mean'

    @property
    def means(self) -> np.ndarray:
        return self.imputer.statistics_.copy()

    def impute(self, inputs: np.ndarray, direction: Optional[str]=None) -> np.ndarray:
        if direction is not None and direction != self.direction:
            raise UsageError(f'this mean imputer was fitted for {self.direction}, not {direction}')
        inputs = np.asarray(inputs, dtype=np.float64)
        batch = inputs.reshape(1, -1) if inputs.ndim == 1 else inputs
        if batch.shape[1] != self.input_dim:
            raise DimensionError(f'mean imputer: expected input width {self.input_dim}, got {batch.shape[1]}')
        blank = np.full((batch.shape[0], self.means.shape[0]), np.nan)
        filled = threshold_binary(self.imputer.transform(blank), self.flags)
        return filled[0] if inputs.ndim == 1 else filled


def baseline_mean(train: MultiViewDataset, direction: str) -> MeanImputer:
    """Fit the mean baseline for one direction."""
    return MeanImputer(train, direction)


class ModelImputer:
    """A trained model restricted to one imputation path (vigan, generator or dae)."""

    def __init__(self, model: ViganModel, path: str='vigan'):
        if path not in IMPUTE_PATHS:
            raise UsageError(f'unknown imputation path {path!r}')
        self.model = model
        self.path = path
        self.name = {'vigan': 'VIGAN', 'generator': 'CycleGAN', 'dae': 'DAE-only'}[path]

    def impute(self, inputs: np.ndarray, direction: str) -> np.ndarray:
        return impute(self.model, inputs, direction, path=self.path)


def truncated_svd(matrix: np.ndarray, rank: int, start: Optional[np.ndarray]=None, tol: float=SVD_TOLERANCE, max_iter: int=1000, rng: Optional[np.random.Generator]=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Leading `rank` singular triplets by orthogonal (subspace) iteration.

    Args:
        matrix: (m, n) array
        rank: Number of singular values to keep
        start: Optional (n, rank) warm-start basis for the right singular subspace
        tol: Convergence threshold on the change of the right subspace
        max_iter: Iteration cap

    Returns:
        (U (m, rank), s (rank,), Vt (rank, n)) with s in decreasing order
    """
    m, n = matrix.shape
    if not 1 <= rank <= min(m, n):
        raise UsageError(f'rank {rank} must lie in [1, {min(m, n)}]')
    if start is None or start.shape != (n, rank):
        rng = rng if rng is not None else np.random.default_rng(0)
        start = rng.standard_normal((n, rank))
    basis, _ = np.linalg.qr(start)
    for _ in range(max_iter):
        left, _ = np.linalg.qr(matrix @ basis)
        updated, _ = np.linalg.qr(matrix.T @ left)
        drift = np.linalg.norm(updated - basis @ (basis.T @ updated))
        basis = updated
        if drift < tol:
            break
    left, _ = np.linalg.qr(matrix @ basis)
    core = left.T @ matrix @ basis
    u_core, s, vt_core = np.linalg.svd(core)
    return left @ u_core, s, (basis @ vt_core.T).T


@dataclass
class SoftImputeResult:
    completed: np.ndarray
    iterations: int
    converged: bool
    objective_history: List[float] = field(default_factory=list)
    warning: Optional[str] = None


def baseline_softimpute(matrix: np.ndarray, mask: np.ndarray, rank: int, iterations: int=200, shrinkage: float=1e-3, tol: float=1e-6, seed: int=0) -> SoftImputeResult:
    """
    Complete a matrix by soft-thresholded low-rank approximation.

    Alternates between filling masked entries from the current estimate and
    recomputing a rank-limited SVD whose singular values are shrunk by
    `shrinkage`. Stops when the relative change of the estimate drops below
    `tol`; at the iteration cap the iterate with the lowest objective
    0.5 * |observed residual|^2 + shrinkage * nuclear norm is returned with a warning.

    Args:
        matrix: (m, n) values; entries under the mask are ignored
        mask: Boolean (m, n), True where the value is missing
        rank: Maximum rank of the estimate
        iterations: Iteration cap
        shrinkage: Soft-threshold applied to singular values
        tol: Relative-change convergence threshold
        seed: Seed for the first SVD start basis

    Returns:
        SoftImputeResult: Completed matrix (observed entries kept), iteration count,
        convergence flag and objective per iteration
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if matrix.ndim != 2 or mask.shape != matrix.shape:
        raise DimensionError(f'softimpute: matrix {matrix.shape} and mask {mask.shape} must be the same 2-D shape')
    if shrinkage < 0:
        raise UsageError('shrinkage must be >= 0')
    if iterations < 1:
        raise UsageError('soft-impute needs at least one iteration')
    if not mask.any():
        return SoftImputeResult(completed=matrix.copy(), iterations=0, converged=True)
    if not 1 <= rank <= min(matrix.shape):
        raise UsageError(f'rank {rank} must lie in [1, {min(matrix.shape)}]')
    observed = ~mask
    counts = observed.sum(axis=0)
    sums = np.where(observed, matrix, 0.0).sum(axis=0)
    column_means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    estimate = np.where(mask, column_means, matrix)
    rng = np.random.default_rng(seed)
    basis = None
    history: List[float] = []
    best: Optional[Tuple[float, np.ndarray]] = None
    converged = False
    steps = 0
    for steps in range(1, iterations + 1):
        filled = np.where(mask, estimate, matrix)
        u, s, vt = truncated_svd(filled, rank, start=basis, rng=rng)
        basis = vt.T
        shrunk = np.maximum(s - shrinkage, 0.0)
        updated = (u * shrunk) @ vt
        residual = np.where(observed, matrix - updated, 0.0)
        objective = 0.5 * float(np.sum(residual ** 2)) + shrinkage * float(np.sum(shrunk))
        history.append(objective)
        if best is None or objective <= best[0]:
            best = (objective, updated)
        change = np.linalg.norm(updated - estimate) / max(np.linalg.norm(estimate), 1e-300)
        estimate = updated
        if change < tol:
            converged = True
            break
    warning = None
    if not converged:
        warning = f'soft-impute did not converge within {iterations} iterations; returning the best iterate'
        logger.warning(warning)
        estimate = best[1]
    logger.debug(f'soft-impute: {steps} iterations, converged={converged}, objective={history[-1]:.6g}')
    return SoftImputeResult(completed=np.where(mask, estimate, matrix), iterations=steps, converged=converged, objective_history=history, warning=warning)


class SoftImputeImputer:
    """
    Matrix-completion baseline over the concatenated views.

    The training pairs and single-view rows (with their missing block masked)
    are stacked with the query rows, whose target block is masked. Values are
    min-max normalised with the training statistics, as for the model.
    """

    def __init__(self, train: MultiViewDataset, rank: Optional[int]=None, iterations: int=200, shrinkage: float=1e-3, seed: int=0):
        self.train = train
        self.rank = rank or min(train.dim_x, train.dim_y)
        self.iterations = iterations
        self.shrinkage = shrinkage
        self.seed = seed
        self.name = 'SoftImpute'
        self.last_result: Optional[SoftImputeResult] = None

    def _training_block(self) -> Tuple[np.ndarray, np.ndarray]:
        t = self.train
        stats = t.stats
        dx, dy = t.dim_x, t.dim_y
        rows = [np.concatenate([stats.normalize(t.paired_x, 'x'), stats.normalize(t.paired_y, 'y')], axis=1), np.concatenate([stats.normalize(t.x_only, 'x'), np.zeros((t.x_only.shape[0], dy))], axis=1), np.concatenate([np.zeros((t.y_only.shape[0], dx)), stats.normalize(t.y_only, 'y')], axis=1)]
        masks = [np.zeros((t.n_paired, dx + dy), dtype=bool), np.concatenate([np.zeros((t.x_only.shape[0], dx), dtype=bool), np.ones((t.x_only.shape[0], dy), dtype=bool)], axis=1), np.concatenate([np.ones((t.y_only.shape[0], dx), dtype=bool), np.zeros((t.y_only.shape[0], dy), dtype=bool)], axis=1)]
        return np.concatenate(rows, axis=0), np.concatenate(masks, axis=0)

    def impute(self, inputs: np.ndarray, direction: str) -> np.ndarray:
        if direction not in DIRECTIONS:
            raise UsageError(f'unknown direction {direction!r}')
        t = self.train
        inputs = np.asarray(inputs, dtype=np.float64)
        batch = inputs.reshape(1, -1) if inputs.ndim == 1 else inputs
        dx, dy = t.dim_x, t.dim_y
        present_dim = dx if direction == 'x2y' else dy
        if batch.shape[1] != present_dim:
            raise DimensionError(f'softimpute {direction}: expected input width {present_dim}, got {batch.shape[1]}')
        b = batch.shape[0]
        if direction == 'x2y':
            query = np.concatenate([t.stats.normalize(batch, 'x'), np.zeros((b, dy))], axis=1)
            query_mask = np.concatenate([np.zeros((b, dx), dtype=bool), np.ones((b, dy), dtype=bool)], axis=1)
        else:
            query = np.concatenate([np.zeros((b, dx)), t.stats.normalize(batch, 'y')], axis=1)
            query_mask = np.concatenate([np.ones((b, dx), dtype=bool), np.zeros((b, dy), dtype=bool)], axis=1)
        train_rows, train_mask = self._training_block()
        matrix = np.concatenate([train_rows, query], axis=0)
        mask = np.concatenate([train_mask, query_mask], axis=0)
        result = baseline_softimpute(matrix, mask, rank=min(self.rank, *matrix.shape), iterations=self.iterations, shrinkage=self.shrinkage, seed=self.seed)
        self.last_result = result
        completed = result.completed[-b:]
        if direction == 'x2y':
            out = threshold_binary(t.stats.denormalize(completed[:, dx:], 'y'), t.y_binary)
        else:
            out = threshold_binary(t.stats.denormalize(completed[:, :dx], 'x'), t.x_binary)
        return out[0] if inputs.ndim == 1 else out
