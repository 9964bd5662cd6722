"""
Three-stage training: autoencoder pre-training on paired data, cycle-consistent
GAN training on unpaired pools, then joint fine-tuning of generators and
autoencoder against the discriminators.
"""
import time
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from .autodiff import Graph
from .data import BatchSizes, MiniBatch, MultiViewDataset, normalize, sample_batches
from .errors import DataError, DimensionError, UsageError
from .file_io import write_csv_atomic
from .neural_net import Adam, AdamSettings
from .vigan_model import ArchitectureConfig, GENERATOR_LOSSES, LossWeights, ViganModel, cyclegan_generator_objective, discriminator_objective, joint_generator_objective, loss_dae_pretrain

logger = logging.getLogger(__name__)

LOG_COLUMNS = ['stage', 'iter', 'loss_ae', 'loss_cyc', 'loss_gan_x', 'loss_gan_y', 'total', 'millis']
STAGES = (1, 2, 3)

IterationCallback = Callable[[int, int, int, Dict[str, float]], None]


@dataclass
class TrainConfig:
    """
    Everything that determines a training run.

    iterations holds one count per stage; stages lists the enabled ones.
    """
    iterations: List[int] = field(default_factory=lambda: [2000, 5000, 5000])
    batch_sizes: BatchSizes = field(default_factory=BatchSizes)
    weights: LossWeights = field(default_factory=LossWeights)
    adam: AdamSettings = field(default_factory=AdamSettings)
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    seed: int = 7
    stages: List[int] = field(default_factory=lambda: [1, 2, 3])
    generator_loss: str = 'minimax'
    stage3_paired_only: bool = False
    log_every: int = 100

    def __post_init__(self):
        self.iterations = [int(n) for n in self.iterations]
        if len(self.iterations) != 3 or any(n < 0 for n in self.iterations):
            raise UsageError(f'iterations must be three counts >= 0, got {self.iterations}')
        for role in ('paired', 'x', 'y'):
            if int(getattr(self.batch_sizes, role)) < 1:
                raise UsageError(f'batch size for {role} must be >= 1')
        self.stages = sorted({int(s) for s in self.stages})
        if any(s not in STAGES for s in self.stages):
            raise UsageError(f'stages must be drawn from {STAGES}, got {self.stages}')
        if self.generator_loss not in GENERATOR_LOSSES:
            raise UsageError(f'unknown generator loss {self.generator_loss!r}; expected one of {GENERATOR_LOSSES}')
        if int(self.log_every) < 1:
            raise UsageError('log_every must be >= 1')
        self.seed = int(self.seed)

    def to_dict(self) -> Dict[str, Any]:
        return {'iterations': list(self.iterations), 'batch_sizes': {'paired': self.batch_sizes.paired, 'x': self.batch_sizes.x, 'y': self.batch_sizes.y}, 'weights': self.weights.to_dict(), 'adam': self.adam.to_dict(), 'architecture': self.architecture.to_dict(), 'seed': self.seed, 'stages': list(self.stages), 'generator_loss': self.generator_loss, 'stage3_paired_only': self.stage3_paired_only, 'log_every': self.log_every}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'TrainConfig':
        kwargs: Dict[str, Any] = {k: data[k] for k in ('iterations', 'seed', 'stages', 'generator_loss', 'stage3_paired_only', 'log_every') if k in data}
        if 'batch_sizes' in data:
            kwargs['batch_sizes'] = BatchSizes(**data['batch_sizes'])
        if 'weights' in data:
            kwargs['weights'] = LossWeights.from_dict(data['weights'])
        if 'adam' in data:
            kwargs['adam'] = AdamSettings.from_dict(data['adam'])
        if 'architecture' in data:
            kwargs['architecture'] = ArchitectureConfig.from_dict(data['architecture'])
        return cls(**kwargs)


class TrainLog:
    """Per-iteration loss rows, strictly ordered by (stage, iteration)."""

    def __init__(self, rows: Optional[List[Dict[str, float]]]=None):
        self.rows: List[Dict[str, float]] = []
        for row in rows or []:
            self.append(row)

    def append(self, row: Mapping[str, float]) -> None:
        record = {column: row.get(column, 0.0) for column in LOG_COLUMNS}
        record['stage'] = int(record['stage'])
        record['iter'] = int(record['iter'])
        if self.rows:
            last = (self.rows[-1]['stage'], self.rows[-1]['iter'])
            if (record['stage'], record['iter']) <= last:
                raise UsageError(f"TrainLog rows must increase in (stage, iter); got {(record['stage'], record['iter'])} after {last}")
        self.rows.append(record)

    def extend(self, other: 'TrainLog') -> None:
        for row in other.rows:
            self.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def for_stage(self, stage: int) -> List[Dict[str, float]]:
        return [row for row in self.rows if row['stage'] == stage]

    def column(self, name: str, stage: Optional[int]=None) -> np.ndarray:
        rows = self.rows if stage is None else self.for_stage(stage)
        return np.array([row[name] for row in rows], dtype=np.float64)

    def fingerprint(self) -> Tuple[Tuple[float, ...], ...]:
        """Every row without wall-clock time; equal for runs with the same seed and config."""
        return tuple((tuple((row[c] for c in LOG_COLUMNS if c != 'millis')) for row in self.rows))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=LOG_COLUMNS)

    def to_csv(self, path: str) -> None:
        write_csv_atomic(path, self.to_frame())
        logger.info(f'Wrote training log with {len(self.rows)} rows to {path}')

    @classmethod
    def from_csv(cls, path: str) -> 'TrainLog':
        try:
            frame = pd.read_csv(path)
        except (OSError, pd.errors.EmptyDataError) as e:
            raise DataError(f'cannot read training log {path}: {e}')
        missing = [c for c in LOG_COLUMNS if c not in frame.columns]
        if missing:
            raise DataError(f'{path} is missing training-log columns {missing}')
        return cls(frame[LOG_COLUMNS].to_dict('records'))


def _forward_values(build: Callable[[], Any]) -> np.ndarray:
    """Run a forward pass in a throwaway graph and keep only the values."""
    with Graph('fakes'):
        return build().data.copy()


class ViganTrainer:
    """
    Owns the three optimizers of one model and runs the stages on it.

    Each stage draws its minibatches from its own generator seeded with
    (seed, stage), so a stage's index sequence does not depend on which
    other stages ran.
    """

    def __init__(self, model: ViganModel, dataset: MultiViewDataset, config: Optional[TrainConfig]=None, on_iteration: Optional[IterationCallback]=None):
        self.config = config or TrainConfig()
        if (dataset.dim_x, dataset.dim_y) != (model.dim_x, model.dim_y):
            raise DimensionError(f'model is {model.dim_x}x{model.dim_y} but dataset is {dataset.dim_x}x{dataset.dim_y}')
        self.model = model
        self.dataset = normalize(dataset)
        model.stats = dataset.stats
        model.x_binary, model.y_binary = dataset.x_binary, dataset.y_binary
        model.x_names, model.y_names = dataset.x_names, dataset.y_names
        self.on_iteration = on_iteration
        self.dae_opt = Adam(model.dae_params(), self.config.adam, name='dae')
        self.gen_opt = Adam(model.generator_params(), self.config.adam, name='generators')
        self.disc_opt = Adam(model.discriminator_params(), self.config.adam, name='discriminators')
        self.metrics = {'iterations': {1: 0, 2: 0, 3: 0}, 'skipped_stages': [], 'stage_seconds': {1: 0.0, 2: 0.0, 3: 0.0}}
        self.metrics_lock = threading.RLock()

    def _rng(self, stage: int) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, stage])

    def _record(self, log: TrainLog, stage: int, iteration: int, values: Dict[str, float], started: float, total_iters: int) -> None:
        row = {'stage': stage, 'iter': iteration, **values, 'millis': (time.perf_counter() - started) * 1000.0}
        log.append(row)
        if (iteration + 1) % self.config.log_every == 0 or iteration + 1 == total_iters:
            logger.info(f"stage {stage} iter {iteration + 1}/{total_iters}: total={values['total']:.6f} ae={values['loss_ae']:.6f} cyc={values['loss_cyc']:.6f} gan_x={values['loss_gan_x']:.6f} gan_y={values['loss_gan_y']:.6f}")
        if self.on_iteration:
            self.on_iteration(stage, iteration, total_iters, row)

    def _finish(self, stage: int, iterations: int, started: float) -> None:
        elapsed = time.time() - started
        with self.metrics_lock:
            self.metrics['iterations'][stage] += iterations
            self.metrics['stage_seconds'][stage] += elapsed
        if iterations:
            self.model.trained = True
        logger.info(f'Stage {stage} finished: {iterations} iterations in {elapsed:.2f}s')

    def stage1(self) -> TrainLog:
        """Pre-train the autoencoder on paired rows; no other network changes."""
        log = TrainLog()
        iterations = self.config.iterations[0]
        if self.dataset.n_paired == 0:
            logger.warning('Stage 1 skipped: the dataset has no paired examples; the autoencoder stays at its initialisation')
            with self.metrics_lock:
                self.metrics['skipped_stages'].append(1)
            return log
        rng = self._rng(1)
        sizes = BatchSizes(paired=self.config.batch_sizes.paired, x=0, y=0)
        stage_start = time.time()
        logger.info(f'Stage 1: autoencoder pre-training for {iterations} iterations on {self.dataset.n_paired} pairs')
        for iteration in range(iterations):
            started = time.perf_counter()
            batch = sample_batches(self.dataset, rng, sizes)
            with Graph('stage1') as graph:
                loss = loss_dae_pretrain(self.model, batch.paired_x, batch.paired_y)
                self.dae_opt.zero_grad()
                graph.backward(loss)
            self.dae_opt.step()
            value = loss.item()
            self._record(log, 1, iteration, {'loss_ae': value, 'loss_cyc': 0.0, 'loss_gan_x': 0.0, 'loss_gan_y': 0.0, 'total': value}, started, iterations)
        self._finish(1, iterations, stage_start)
        return log

    def _discriminator_step(self, batch: MiniBatch, fake_x: np.ndarray, fake_y: np.ndarray) -> None:
        with Graph('discriminators') as graph:
            objective = discriminator_objective(self.model, batch.x, batch.y, fake_x, fake_y)
            self.disc_opt.zero_grad()
            graph.backward(objective)
        self.disc_opt.step()

    def stage2(self) -> TrainLog:
        """
        CycleGAN training of G1, G2, D_X and D_Y; pairing is ignored.

        Each iteration samples one x batch and one y batch, takes a discriminator
        ascent step against the raw generator outputs, then a generator descent step.
        """
        log = TrainLog()
        iterations = self.config.iterations[1]
        rng = self._rng(2)
        sizes = BatchSizes(paired=0, x=self.config.batch_sizes.x, y=self.config.batch_sizes.y)
        stage_start = time.time()
        logger.info(f'Stage 2: cycle-consistent GAN training for {iterations} iterations on {self.dataset.m_x} x and {self.dataset.m_y} y vectors')
        model = self.model
        for iteration in range(iterations):
            started = time.perf_counter()
            batch = sample_batches(self.dataset, rng, sizes, pool='all')
            fake_y = _forward_values(lambda: model.g1(batch.x))
            fake_x = _forward_values(lambda: model.g2(batch.y))
            self._discriminator_step(batch, fake_x, fake_y)
            with Graph('stage2-generators') as graph:
                objective, breakdown = cyclegan_generator_objective(model, batch.x, batch.y, self.config.weights, self.config.generator_loss)
                self.gen_opt.zero_grad()
                graph.backward(objective)
            self.gen_opt.step()
            self._record(log, 2, iteration, breakdown.as_dict(), started, iterations)
        self._finish(2, iterations, stage_start)
        return log

    def stage3(self) -> TrainLog:
        """
        Joint fine-tuning: discriminators ascend on the adversarial terms of the
        full objective, then G1, G2 and the autoencoder descend on it.

        The discriminators judge autoencoder-refined completions. Without paired
        rows the reconstruction term is exactly 0.
        """
        log = TrainLog()
        iterations = self.config.iterations[2]
        rng = self._rng(3)
        pool = 'paired' if self.config.stage3_paired_only else 'all'
        paired_size = self.config.batch_sizes.paired if self.dataset.n_paired else 0
        sizes = BatchSizes(paired=paired_size, x=self.config.batch_sizes.x, y=self.config.batch_sizes.y)
        if not paired_size:
            logger.warning('Stage 3 runs without paired examples; the reconstruction term is 0')
        stage_start = time.time()
        logger.info(f'Stage 3: joint training for {iterations} iterations (pool={pool})')
        model = self.model
        for iteration in range(iterations):
            started = time.perf_counter()
            batch = sample_batches(self.dataset, rng, sizes, pool=pool)
            fake_y = _forward_values(lambda: model.project_y(model.refine_from_x(batch.x)))
            fake_x = _forward_values(lambda: model.project_x(model.refine_from_y(batch.y)))
            self._discriminator_step(batch, fake_x, fake_y)
            paired_x = batch.paired_x if paired_size else None
            paired_y = batch.paired_y if paired_size else None
            with Graph('stage3-joint') as graph:
                objective, breakdown = joint_generator_objective(model, self.config.weights, paired_x, paired_y, batch.x, batch.y, self.config.generator_loss)
                self.gen_opt.zero_grad()
                self.dae_opt.zero_grad()
                graph.backward(objective)
            self.gen_opt.step()
            self.dae_opt.step()
            self._record(log, 3, iteration, breakdown.as_dict(), started, iterations)
        self._finish(3, iterations, stage_start)
        return log

    def run(self) -> TrainLog:
        """Run the enabled stages in order 1, 2, 3 and concatenate their logs."""
        log = TrainLog()
        runners = {1: self.stage1, 2: self.stage2, 3: self.stage3}
        for stage in self.config.stages:
            log.extend(runners[stage]())
        if not len(log):
            logger.warning('No training iterations ran; the model keeps its initial parameters and stays untrained')
        self.model.hyperparams['train'] = self.config.to_dict()
        return log

    def get_metrics(self) -> Dict[str, Any]:
        with self.metrics_lock:
            metrics = {'iterations': dict(self.metrics['iterations']), 'skipped_stages': list(self.metrics['skipped_stages']), 'stage_seconds': dict(self.metrics['stage_seconds'])}
        total_seconds = float(np.sum(list(metrics['stage_seconds'].values())))
        total_iters = int(np.sum(list(metrics['iterations'].values())))
        metrics['iterations_per_second'] = total_iters / total_seconds if total_seconds > 0 else 0.0
        metrics['optimizer_steps'] = {'dae': self.dae_opt.steps, 'generators': self.gen_opt.steps, 'discriminators': self.disc_opt.steps}
        return metrics


def stage1_pretrain_dae(model: ViganModel, dataset: MultiViewDataset, config: Optional[TrainConfig]=None, on_iteration: Optional[IterationCallback]=None) -> TrainLog:
    """Stage 1 on its own; see ViganTrainer.stage1."""
    return ViganTrainer(model, dataset, config, on_iteration).stage1()


def stage2_train_cyclegan(model: ViganModel, dataset: MultiViewDataset, config: Optional[TrainConfig]=None, on_iteration: Optional[IterationCallback]=None) -> TrainLog:
    """Stage 2 on its own; see ViganTrainer.stage2."""
    return ViganTrainer(model, dataset, config, on_iteration).stage2()


def stage3_joint(model: ViganModel, dataset: MultiViewDataset, config: Optional[TrainConfig]=None, on_iteration: Optional[IterationCallback]=None) -> TrainLog:
    """Stage 3 on its own; see ViganTrainer.stage3."""
    return ViganTrainer(model, dataset, config, on_iteration).stage3()


def run_schedule(model: ViganModel, dataset: MultiViewDataset, config: Optional[TrainConfig]=None, on_iteration: Optional[IterationCallback]=None) -> Tuple[ViganModel, TrainLog]:
    """
    Train a model with the configured stage schedule.

    Args:
        model: Freshly built (or partially trained) model; mutated in place
        dataset: Training data in raw units; held-out rows must already be excluded
        config: Stage schedule, batch sizes, weights, optimizer settings and seed
        on_iteration: Called after every iteration with (stage, iteration, total, row)

    Returns:
        (model, TrainLog): The trained model and all stage logs concatenated
    """
    trainer = ViganTrainer(model, dataset, config, on_iteration)
    log = trainer.run()
    logger.info(f'Training finished: {trainer.get_metrics()}')
    return model, log
