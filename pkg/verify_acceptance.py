"""
End-to-end acceptance checks: gradient suite, loss identities, optimizer and
soft-impute oracles, determinism, and the imputation-quality ordering on the
synthetic rotation and binary-symptom datasets.

Usage:
    python verify_acceptance.py            # full schedule (several minutes)
    python verify_acceptance.py --quick    # one tenth of the iterations, ordering checks may fail
"""
import sys
import math
import time
import logging
import argparse
from typing import Callable, Dict, Tuple

import numpy as np

from modules.autodiff import Graph, Tensor
from modules.baselines import MeanImputer, ModelImputer, baseline_softimpute
from modules.data import MultiViewDataset, NormalizationStats, SyntheticSpec, generate
from modules.errors import EXIT_OK, EXIT_VERIFICATION
from modules.gradcheck import run_gradient_suite
from modules.metrics import EvalReport, evaluate
from modules.model_io import decode_model, encode_model
from modules.neural_net import AdamState, DenseLayer, Mlp, adam_step
from modules.training import TrainConfig, run_schedule, stage3_joint
from modules.vigan_model import ArchitectureConfig, ViganModel, build_model, impute, loss_aegan_y, loss_cyc

logging.basicConfig(level=logging.WARNING, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


def _report(ok: bool, message: str) -> bool:
    print(('✅ ' if ok else '❌ ') + message)
    return ok


def check_gradient_suite() -> bool:
    start = time.time()
    result = run_gradient_suite(list(range(20)))
    elapsed = time.time() - start
    print(f'   {result.summary()} in {elapsed:.1f}s')
    return _report(result.passed and elapsed < 60.0, 'every parameter gradient of the joint objective matches finite differences for 20 seeds')


def check_unpaired_reconstruction_term() -> bool:
    rng = np.random.default_rng(0)
    dataset = MultiViewDataset(paired_x=np.zeros((0, 3)), paired_y=np.zeros((0, 2)), x_only=rng.uniform(size=(50, 3)), y_only=rng.uniform(size=(50, 2)), x_names=('a', 'b', 'c'), y_names=('d', 'e'), x_binary=(False,) * 3, y_binary=(False,) * 2, stats=NormalizationStats.identity(3, 2))
    model = build_model(3, 2, ArchitectureConfig([8], [8], [8], 4), np.random.default_rng(1))
    log = stage3_joint(model, dataset, TrainConfig(iterations=[0, 0, 25]))
    return _report(len(log) == 25 and all(row['loss_ae'] == 0.0 for row in log.rows), 'stage 3 without pairs logs a reconstruction term of exactly 0')


def _linear(weight: np.ndarray, activation: str, name: str) -> Mlp:
    return Mlp([DenseLayer(Tensor(weight), Tensor(np.zeros(weight.shape[1])), activation)], name=name)


def check_loss_identities() -> bool:
    dim = 3
    identity = lambda name: _linear(np.eye(dim), 'none', name)
    flat = lambda name: _linear(np.zeros((dim, 1)), 'sigmoid', name)
    dae = _linear(np.eye(2 * dim), 'none', 'dae')
    model = ViganModel(identity('g1'), identity('g2'), flat('d_x'), flat('d_y'), dae)
    rng = np.random.default_rng(2)
    x, y = rng.uniform(size=(16, dim)), rng.uniform(size=(16, dim))
    with Graph():
        adversarial = loss_aegan_y(model, x, y).item()
        cycle = loss_cyc(model, x, y).item()
    ok = abs(adversarial + 2.0 * math.log(2.0)) < 1e-9 and abs(cycle) < 1e-12
    return _report(ok, f'uniform discriminator gives {adversarial:.12f} (-2 ln 2) and identity generators give cycle loss {cycle:.1e}')


def check_adam_first_step() -> bool:
    ok = True
    for magnitude in (1e-3, 1.0, 1e3):
        p = Tensor(np.zeros(1), requires_grad=True)
        state = AdamState(learning_rate=0.01)
        adam_step(state, {'p': p}, {'p': np.array([magnitude])})
        expected = 0.01 * magnitude / (magnitude + state.eps)
        ok &= abs(abs(p.data[0]) - expected) <= 0.01 * expected
    return _report(ok, 'first Adam step equals lr * |g| / (|g| + eps) for |g| in 1e-3, 1, 1e3')


def _recovery_error(truth: np.ndarray, mask: np.ndarray) -> float:
    result = baseline_softimpute(np.where(mask, 0.0, truth), mask, rank=2, iterations=500)
    return float(np.linalg.norm((result.completed - truth)[mask]) / np.linalg.norm(truth[mask]))


def check_softimpute_oracle() -> bool:
    rng = np.random.default_rng(3)
    truth = rng.normal(size=(20, 2)) @ rng.normal(size=(2, 20))
    uniform = rng.uniform(size=truth.shape) < 0.3
    block = np.zeros_like(uniform)
    block[:11, :11] = True
    uniform_error, block_error = _recovery_error(truth, uniform), _recovery_error(truth, block)
    print(f'   relative error: uniform mask {uniform_error:.2e}, block mask {block_error:.2e}')
    return _report(uniform_error < 1e-2 and block_error > uniform_error, 'soft-impute recovers a uniformly masked rank-2 matrix and does worse on a block mask')


def check_determinism() -> bool:
    split, _ = generate(SyntheticSpec(kind='rotation', dim_x=4, dim_y=4, paired=200, x_only=100, y_only=100, validation=0, test=20, seed=5))
    config = TrainConfig(iterations=[20, 20, 20], architecture=ArchitectureConfig([16], [16], [16], 8), seed=3)

    def train() -> Tuple[ViganModel, object]:
        return run_schedule(build_model(4, 4, config.architecture, np.random.default_rng(config.seed)), split.train, config)
    (first, first_log), (second, second_log) = train(), train()
    blob = encode_model(first)
    same_log = first_log.fingerprint() == second_log.fingerprint()
    same_bytes = blob == encode_model(second) and encode_model(decode_model(blob)) == blob
    same_impute = np.array_equal(impute(first, split.test.x), impute(decode_model(blob), split.test.x))
    return _report(same_log and same_bytes and same_impute, 'same seed and config give identical logs, model bytes and imputations')


def _train_and_score(spec: SyntheticSpec, scale: float, imputers: Dict[str, Callable]) -> EvalReport:
    split, _ = generate(spec)
    config = TrainConfig()
    config.iterations = [max(1, int(n * scale)) for n in config.iterations]
    model = build_model(split.train.dim_x, split.train.dim_y, config.architecture, np.random.default_rng(config.seed))
    start = time.time()
    model, _ = run_schedule(model, split.train, config)
    print(f'   trained {spec.kind} model in {time.time() - start:.0f}s')
    report = EvalReport()
    for direction in ('x2y', 'y2x'):
        flags = split.train.y_binary if direction == 'x2y' else split.train.x_binary
        for label, make in imputers.items():
            report.extend(evaluate(make(model, split.train, direction), split.test, direction, label, binary=flags))
    return report


def check_rotation_ordering(scale: float) -> bool:
    imputers = {'VIGAN': lambda m, t, d: ModelImputer(m, 'vigan'), 'CycleGAN': lambda m, t, d: ModelImputer(m, 'generator'), 'Mean': lambda m, t, d: MeanImputer(t, d)}
    table = _train_and_score(SyntheticSpec(kind='rotation', dim_x=8, dim_y=8), scale, imputers).pivot('rmse')
    print(table.to_string(float_format=lambda v: f'{v:.4f}'))
    vigan, cyclegan, mean = (table.loc[name, 'Average'] for name in ('VIGAN', 'CycleGAN', 'Mean'))
    return _report(vigan <= cyclegan and vigan <= 0.75 * mean, 'rotation RMSE: VIGAN <= CycleGAN and at least 25% below the mean baseline')


def check_binary_ordering(scale: float) -> bool:
    imputers = {'VIGAN': lambda m, t, d: ModelImputer(m, 'vigan'), 'DAE-only': lambda m, t, d: ModelImputer(m, 'dae'), 'Mean': lambda m, t, d: MeanImputer(t, d)}
    table = _train_and_score(SyntheticSpec(kind='binary-symptom', dim_x=11, dim_y=11), scale, imputers).pivot('accuracy')
    print(table.to_string(float_format=lambda v: f'{v:.2f}'))
    vigan = table.loc['VIGAN']
    ok = all(vigan[col] > 55.0 and vigan[col] >= table.loc['Mean', col] and vigan[col] >= table.loc['DAE-only', col] for col in ('V1->V2', 'V2->V1'))
    return _report(ok, 'binary accuracy: VIGAN above 55% both ways and no worse than the mean baseline or the autoencoder alone')


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument('--quick', action='store_true', help='run a tenth of the training iterations')
    args = parser.parse_args()
    scale = 0.1 if args.quick else 1.0
    checks = [('gradient suite', check_gradient_suite), ('unpaired reconstruction term', check_unpaired_reconstruction_term), ('loss identities', check_loss_identities), ('Adam first step', check_adam_first_step), ('soft-impute oracle', check_softimpute_oracle), ('determinism', check_determinism), ('rotation ordering', lambda: check_rotation_ordering(scale)), ('binary ordering', lambda: check_binary_ordering(scale))]
    results = {}
    for index, (name, check) in enumerate(checks, start=1):
        print(f'\nCheck {index}: {name}')
        try:
            results[name] = check()
        except Exception as e:
            logger.exception(f'{name} raised: {e}')
            results[name] = _report(False, f'{name} raised {type(e).__name__}: {e}')
    passed = sum(results.values())
    print(f'\nAcceptance: {passed}/{len(results)} checks passed')
    return EXIT_OK if passed == len(results) else EXIT_VERIFICATION


if __name__ == '__main__':
    sys.exit(main())
