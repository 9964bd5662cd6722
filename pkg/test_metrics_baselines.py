import logging

import numpy as np
import pytest

from modules.baselines import MeanImputer, ModelImputer, SoftImputeImputer, baseline_mean, baseline_softimpute, truncated_svd
from modules.data import HeldOutPairs, MultiViewDataset, NormalizationStats, SyntheticSpec, generate
from modules.errors import DataError, DimensionError, EmptyPoolError, UsageError
from modules.metrics import EvalReport, EvalRow, REPORT_COLUMNS, as_impute_fn, evaluate, hamming_accuracy, rmse
from modules.vigan_model import ArchitectureConfig, build_model

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


@pytest.fixture(scope='module')
def rotation():
    return generate(SyntheticSpec(kind='rotation', dim_x=3, dim_y=3, noise=0.05, paired=600, x_only=50, y_only=50, validation=0, test=400, seed=9))


def test_rmse_values():
    assert rmse(np.zeros((1, 2)), np.array([[5.0, 0.0]])) == pytest.approx(3.5355, abs=1e-4)
    v = np.random.default_rng(0).normal(size=(4, 3))
    assert rmse(v, v) == 0.0


def test_rmse_is_homogeneous():
    rng = np.random.default_rng(1)
    p, t = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    assert rmse(3.0 * p, 3.0 * t) == pytest.approx(3.0 * rmse(p, t), rel=1e-12)


def test_rmse_rejects_bad_input():
    with pytest.raises(DimensionError):
        rmse(np.zeros((2, 3)), np.zeros((3, 2)))
    with pytest.raises(DataError):
        rmse(np.zeros((0, 3)), np.zeros((0, 3)))


def test_hamming_accuracy_values():
    bits = np.array([[1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0]], dtype=float)
    assert hamming_accuracy(bits, bits) == 100.0
    assert hamming_accuracy(1.0 - bits, bits) == 0.0
    flipped = bits.copy()
    flipped[0, [2, 7]] = 1.0 - flipped[0, [2, 7]]
    assert hamming_accuracy(flipped, bits) == pytest.approx(81.82, abs=0.01)
    assert hamming_accuracy(flipped[0], bits[0]) == pytest.approx(81.82, abs=0.01)


def test_hamming_accuracy_of_complement_sums_to_100():
    rng = np.random.default_rng(12)
    for _ in range(20):
        preds = (rng.uniform(size=(7, 11)) < 0.5).astype(float)
        targets = (rng.uniform(size=(7, 11)) < 0.5).astype(float)
        assert hamming_accuracy(preds, targets) + hamming_accuracy(1.0 - preds, targets) == pytest.approx(100.0, abs=1e-9)


def test_hamming_accuracy_averages_over_examples():
    targets = np.zeros((2, 4))
    preds = np.array([[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 0.0]])
    assert hamming_accuracy(preds, targets) == pytest.approx(50.0)
    with pytest.raises(DataError):
        hamming_accuracy(np.array([[0.5]]), np.array([[1.0]]))


def test_mean_baseline_on_constant_target_is_exact():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 2))
    y = np.full((20, 1), 4.5)
    train = MultiViewDataset(paired_x=x, paired_y=y, x_only=np.zeros((0, 2)), y_only=np.zeros((0, 1)), x_names=('a', 'b'), y_names=('c',), x_binary=(False, False), y_binary=(False,), stats=NormalizationStats.fit(x, y))
    imputer = baseline_mean(train, 'x2y')
    assert rmse(imputer.impute(rng.normal(size=(7, 2))), np.full((7, 1), 4.5)) == 0.0
    assert imputer.impute(np.zeros(2)).shape == (1,)
    with pytest.raises(DimensionError):
        imputer.impute(np.zeros((3, 5)))
    with pytest.raises(UsageError):
        imputer.impute(np.zeros((3, 2)), 'y2x')


def test_mean_baseline_error_matches_target_spread(rotation):
    split, _ = rotation
    imputer = MeanImputer(split.train, 'x2y')
    np.testing.assert_allclose(imputer.means, split.train.all_y.mean(axis=0), atol=1e-12)
    spread = np.sqrt(np.mean(split.test.y.var(axis=0)))
    report = evaluate(imputer, split.test, 'x2y', 'mean')
    assert report.value('mean', 'V1->V2', 'rmse') == pytest.approx(spread, rel=0.05)


def test_mean_baseline_needs_observed_target():
    train = MultiViewDataset(paired_x=np.zeros((0, 1)), paired_y=np.zeros((0, 1)), x_only=np.ones((3, 1)), y_only=np.zeros((0, 1)), x_names=('a',), y_names=('b',), x_binary=(False,), y_binary=(False,), stats=NormalizationStats.identity(1, 1))
    with pytest.raises(EmptyPoolError):
        MeanImputer(train, 'x2y')


def test_softimpute_without_missing_entries_is_identity():
    matrix = np.random.default_rng(3).normal(size=(6, 4))
    result = baseline_softimpute(matrix, np.zeros_like(matrix, dtype=bool), rank=2)
    np.testing.assert_array_equal(result.completed, matrix)
    assert result.converged and result.iterations == 0


def test_softimpute_recovers_low_rank_matrix():
    rng = np.random.default_rng(4)
    truth = rng.normal(size=(20, 2)) @ rng.normal(size=(2, 20))
    mask = rng.uniform(size=truth.shape) < 0.3
    result = baseline_softimpute(np.where(mask, 0.0, truth), mask, rank=2, iterations=500)
    error = np.sqrt(np.mean((result.completed[mask] - truth[mask]) ** 2))
    assert error < 1e-2
    np.testing.assert_array_equal(result.completed[~mask], truth[~mask])
    assert len(result.objective_history) == result.iterations


def test_softimpute_objective_never_increases():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        truth = rng.normal(size=(12, 3)) @ rng.normal(size=(3, 10))
        mask = rng.uniform(size=truth.shape) < 0.3
        for shrinkage in (1e-3, 0.1, 1.0):
            history = baseline_softimpute(np.where(mask, 0.0, truth), mask, rank=3, iterations=100, shrinkage=shrinkage).objective_history
            assert len(history) > 1
            for previous, current in zip(history, history[1:]):
                assert current <= previous + 1e-9 * max(1.0, abs(previous))


def _relative_recovery_error(truth, mask):
    result = baseline_softimpute(np.where(mask, 0.0, truth), mask, rank=2, iterations=500)
    return np.linalg.norm((result.completed - truth)[mask]) / np.linalg.norm(truth[mask])


def test_softimpute_block_mask_is_harder_than_uniform_mask():
    rng = np.random.default_rng(3)
    truth = rng.normal(size=(20, 2)) @ rng.normal(size=(2, 20))
    uniform = rng.uniform(size=truth.shape) < 0.3
    block = np.zeros_like(uniform)
    block[:11, :11] = True
    uniform_error = _relative_recovery_error(truth, uniform)
    assert uniform_error < 1e-2
    assert _relative_recovery_error(truth, block) > uniform_error


def test_softimpute_reports_non_convergence():
    rng = np.random.default_rng(5)
    matrix = rng.normal(size=(10, 6))
    mask = rng.uniform(size=matrix.shape) < 0.4
    result = baseline_softimpute(matrix, mask, rank=3, iterations=1, tol=0.0)
    assert not result.converged
    assert result.warning is not None
    assert result.completed.shape == matrix.shape


def test_softimpute_argument_checks():
    with pytest.raises(DimensionError):
        baseline_softimpute(np.zeros((3, 3)), np.zeros((3, 2), dtype=bool), rank=1)
    with pytest.raises(UsageError):
        baseline_softimpute(np.zeros((3, 3)), np.ones((3, 3), dtype=bool), rank=4)


def test_truncated_svd_matches_full_svd():
    matrix = np.random.default_rng(6).normal(size=(8, 5))
    _, s, _ = truncated_svd(matrix, 3)
    np.testing.assert_allclose(s, np.linalg.svd(matrix, compute_uv=False)[:3], rtol=1e-6)


def test_softimpute_imputer_beats_mean_on_linear_views(rotation):
    split, _ = rotation
    soft = SoftImputeImputer(split.train, rank=4, iterations=300)
    pairs = HeldOutPairs(split.test.x[:60], split.test.y[:60])
    soft_rmse = evaluate(soft, pairs, 'x2y', 'SoftImpute').value('SoftImpute', 'V1->V2', 'rmse')
    mean_rmse = evaluate(MeanImputer(split.train, 'x2y'), pairs, 'x2y', 'mean').value('mean', 'V1->V2', 'rmse')
    assert soft_rmse < mean_rmse
    assert soft.last_result is not None
    assert soft.impute(split.test.y[0], 'y2x').shape == (3,)


def test_evaluate_perfect_imputer_on_binary_targets():
    rng = np.random.default_rng(7)
    pairs = HeldOutPairs(rng.uniform(size=(30, 2)), (rng.uniform(size=(30, 11)) > 0.5).astype(float))
    report = evaluate(lambda inputs, direction: pairs.y.copy(), pairs, 'x2y', 'oracle', binary=[True] * 11)
    assert report.value('oracle', 'V1->V2', 'rmse') == 0.0
    assert report.value('oracle', 'V1->V2', 'accuracy') == 100.0
    assert all(row.n == 30 for row in report.rows)


def test_evaluate_random_guess_is_near_half():
    rng = np.random.default_rng(8)
    pairs = HeldOutPairs((rng.uniform(size=(2000, 11)) > 0.5).astype(float), np.zeros((2000, 3)))
    guess = lambda inputs, direction: (rng.uniform(size=(inputs.shape[0], 11)) > 0.5).astype(float)
    report = evaluate(guess, pairs, 'y2x', 'coin', binary=[True] * 11)
    assert report.value('coin', 'V2->V1', 'accuracy') == pytest.approx(50.0, abs=3.0)


def test_evaluate_rejects_empty_sets_and_bad_imputers():
    empty = HeldOutPairs(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(DataError):
        evaluate(lambda i, d: i, empty, 'x2y', 'identity')
    with pytest.raises(UsageError):
        as_impute_fn(42)
    with pytest.raises(UsageError):
        evaluate(lambda i, d: i, HeldOutPairs(np.zeros((1, 2)), np.zeros((1, 2))), 'z2w', 'identity')


def test_model_imputer_names_paths():
    model = build_model(2, 2, ArchitectureConfig([4], [4], [4], 2), np.random.default_rng(0))
    assert [ModelImputer(model, path).name for path in ('vigan', 'generator', 'dae')] == ['VIGAN', 'CycleGAN', 'DAE-only']
    with pytest.raises(UsageError):
        ModelImputer(model, 'magic')


def test_report_pivot_and_csv(tmp_path):
    report = EvalReport([EvalRow('mean', 'V1->V2', 'rmse', 1.0, 10), EvalRow('mean', 'V2->V1', 'rmse', 3.0, 10), EvalRow('VIGAN', 'V1->V2', 'rmse', 0.5, 10)])
    table = report.pivot('rmse')
    assert list(table.columns) == ['V1->V2', 'V2->V1', 'Average']
    assert table.loc['mean', 'Average'] == pytest.approx(2.0)
    assert np.isnan(table.loc['VIGAN', 'V2->V1'])
    assert report.pivot('accuracy').empty
    path = tmp_path / 'report.csv'
    report.to_csv(str(path))
    EvalReport([EvalRow('SoftImpute', 'V1->V2', 'rmse', 0.75, 10)]).to_csv(str(path), append=True)
    restored = EvalReport.from_csv(str(path))
    assert len(restored) == 4
    assert restored.value('SoftImpute', 'V1->V2', 'rmse') == 0.75
    assert path.read_text().splitlines()[0] == ','.join(REPORT_COLUMNS)


def test_eval_row_validation():
    with pytest.raises(DataError):
        EvalRow('m', 'V1->V2', 'accuracy', 120.0, 1)
    with pytest.raises(DataError):
        EvalRow('m', 'V1->V2', 'rmse', float('nan'), 1)
