"""
Finite-difference verification of the full joint objective on a toy model.

Every parameter of all five networks is perturbed in turn; the suite runs one
independent check per seed on the batch processor.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .autodiff import GradCheckReport, Graph, format_tolerance, grad_check
from .batch_processing import BatchProcessor
from .errors import VerificationError
from .vigan_model import ArchitectureConfig, LossWeights, ViganModel, build_model, loss_total

logger = logging.getLogger(__name__)

KINK_OPS = ('relu', 'abs')
# Fourth-order central differences at a 5e-4 step keep roundoff near 1e-11 on the toy loss.
TOY_STEP = 5e-4
TOY_ORDER = 4
TOY_KINK_MARGIN = 1e-2


@dataclass
class ToyProblem:
    model: ViganModel
    weights: LossWeights
    paired_x: np.ndarray
    paired_y: np.ndarray
    x: np.ndarray
    y: np.ndarray
    draws: int = 1

    def loss(self):
        return loss_total(self.model, self.weights, self.paired_x, self.paired_y, self.x, self.y).total


def _kink_distance(problem: ToyProblem) -> float:
    """Smallest distance of any relu/abs input from its kink at 0."""
    with Graph('kink-scan') as graph:
        problem.loss()
        distances = [float(np.min(np.abs(node.inputs[0].data))) for node in graph.nodes if node.op in KINK_OPS and node.inputs[0].size]
    return min(distances) if distances else np.inf


def build_toy_problem(seed: int, dim_x: int=3, dim_y: int=2, hidden: int=4, batch: int=2, kink_margin: float=TOY_KINK_MARGIN, max_draws: int=5000) -> ToyProblem:
    """
    Toy model plus data in [0, 1] whose relu and abs inputs all stay at least
    `kink_margin` away from 0, so no finite-difference evaluation crosses a kink.

    Parameters and data are redrawn together from the seeded generator until
    the margin holds. Biases are drawn from [0.1, 0.5] so no layer starts dead.

    Raises:
        VerificationError: No draw within `max_draws` kept the margin
    """
    rng = np.random.default_rng(seed)
    arch = ArchitectureConfig(generator_hidden=[hidden], discriminator_hidden=[hidden], dae_hidden=[hidden], dae_code=hidden)
    weights = LossWeights(lambda_ae=1.0, lambda_cyc=10.0)
    for draw in range(1, max_draws + 1):
        model = build_model(dim_x, dim_y, arch, rng)
        for name, tensor in model.parameters().items():
            if name.endswith('.bias'):
                tensor.data[...] = rng.uniform(0.1, 0.5, size=tensor.shape)
        problem = ToyProblem(model, weights, rng.uniform(size=(batch, dim_x)), rng.uniform(size=(batch, dim_y)), rng.uniform(size=(batch, dim_x)), rng.uniform(size=(batch, dim_y)), draws=draw)
        if _kink_distance(problem) > kink_margin:
            logger.debug(f'seed {seed}: toy problem accepted after {draw} draws')
            return problem
    raise VerificationError(f'seed {seed}: no toy draw kept every kink input beyond {kink_margin} in {max_draws} draws')


def check_toy_model(seed: int, step: float=TOY_STEP, tolerance: float=1e-4, order: int=TOY_ORDER, **toy_kwargs) -> GradCheckReport:
    """
    Gradient check of loss_total over every parameter of a seeded toy model.

    The kink margin scales with `step` unless given explicitly.
    """
    toy_kwargs.setdefault('kink_margin', TOY_KINK_MARGIN * step / TOY_STEP)
    problem = build_toy_problem(seed, **toy_kwargs)
    return grad_check(problem.loss, problem.model.parameters(), step=step, tolerance=tolerance, order=order)


@dataclass
class SuiteResult:
    tolerance: float
    reports: Dict[int, GradCheckReport] = field(default_factory=dict)
    errors: Dict[int, str] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max((r.max_error for r in self.reports.values()), default=0.0)

    @property
    def worst_seed(self) -> Optional[int]:
        if not self.reports:
            return None
        return max(self.reports, key=lambda s: self.reports[s].max_error)

    @property
    def failed_seeds(self) -> List[int]:
        return sorted([s for s, r in self.reports.items() if not r.passed] + list(self.errors))

    @property
    def passed(self) -> bool:
        return bool(self.reports) and not self.failed_seeds

    def summary(self) -> str:
        if self.passed:
            return f'PASS max_rel_err={self.max_error:.3e} < {format_tolerance(self.tolerance)}'
        detail = f'failed seeds {self.failed_seeds}'
        worst = self.worst_seed
        if worst is not None and not self.reports[worst].passed:
            detail += f', worst parameter {self.reports[worst].worst_parameter} (seed {worst})'
        return f'FAIL max_rel_err={self.max_error:.3e} >= {format_tolerance(self.tolerance)} ({detail})'

    def raise_for_failure(self) -> None:
        if not self.passed:
            raise VerificationError(self.summary())


def run_gradient_suite(seeds: Sequence[int], step: float=TOY_STEP, tolerance: float=1e-4, max_workers: int=4, progress_callback: Optional[Callable[[int, int, float], None]]=None, **toy_kwargs) -> SuiteResult:
    """
    Check the toy model for each seed concurrently.

    Returns:
        SuiteResult: Per-seed reports plus any seed whose check raised
    """
    processor = BatchProcessor(max_workers=max_workers, batch_size=max(1, len(seeds)))
    outcomes = processor.process_batch(list(seeds), lambda seed: check_toy_model(seed, step=step, tolerance=tolerance, **toy_kwargs), progress_callback=progress_callback)
    result = SuiteResult(tolerance=tolerance)
    for seed, report, error in outcomes:
        if error is not None:
            result.errors[seed] = str(error)
        else:
            result.reports[seed] = report
    logger.info(f'Gradient suite over {len(seeds)} seeds: {result.summary()}; {processor.get_metrics()["items_per_second"]:.2f} seeds/s')
    return result
