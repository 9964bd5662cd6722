import json
import logging

import numpy as np
import pandas as pd
import pytest

from modules.data import BatchSizes, DATA_FILE, MANIFEST_FILE, MultiViewDataset, NormalizationStats, SyntheticSpec, dataset_from_frame, generate, load_csv, load_dataset_dir, normalize, sample_batches, synthesize_tables, write_dataset_dir
from modules.errors import DataError, DimensionError, EmptyPoolError, UsageError

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

MANIFEST = {'columns': {'x': ['a', 'b'], 'y': ['c']}, 'binary': {'x': [False, False], 'y': [False]}, 'splits': {'validation': [], 'test': []}}


def write_table(path, lines):
    path.write_text('\n'.join(lines) + '\n')
    return str(path)


def small_dataset(n_paired=4, n_x=3, n_y=2, seed=0):
    rng = np.random.default_rng(seed)
    return MultiViewDataset(paired_x=rng.uniform(size=(n_paired, 2)), paired_y=rng.uniform(size=(n_paired, 1)), x_only=rng.uniform(size=(n_x, 2)), y_only=rng.uniform(size=(n_y, 1)), x_names=('a', 'b'), y_names=('c',), x_binary=(False, False), y_binary=(False,), stats=NormalizationStats.identity(2, 1))


def test_rows_are_classified_by_missing_view(tmp_path):
    path = write_table(tmp_path / DATA_FILE, ['a,b,c', '1,2,3', '4,5,6', '7,8,9', '1,1,', '2,2,'])
    split = load_csv(path, MANIFEST)
    train = split.train
    assert train.n_paired == 3
    assert train.x_only.shape == (2, 2)
    assert train.y_only.shape == (0, 1)
    assert (train.m_x, train.m_y) == (5, 3)


def test_empty_and_header_only_files_are_data_errors(tmp_path):
    empty = tmp_path / 'empty.csv'
    empty.write_text('')
    with pytest.raises(DataError):
        load_csv(str(empty), MANIFEST)
    header = write_table(tmp_path / 'header.csv', ['a,b,c'])
    with pytest.raises(DataError):
        load_csv(header, MANIFEST)


def test_malformed_rows_are_rejected(tmp_path):
    with pytest.raises(DataError, match='ragged data row 2'):
        load_csv(write_table(tmp_path / 'ragged.csv', ['a,b,c', '1,2,3', '1,2']), MANIFEST)
    with pytest.raises(DataError):
        load_csv(write_table(tmp_path / 'long.csv', ['a,b,c', '1,2,3', '1,2,3,4']), MANIFEST)
    with pytest.raises(DataError):
        load_csv(write_table(tmp_path / 'text.csv', ['a,b,c', '1,two,3']), MANIFEST)
    with pytest.raises(DataError):
        load_csv(write_table(tmp_path / 'partial.csv', ['a,b,c', '1,,3']), MANIFEST)
    with pytest.raises(DataError):
        load_csv(write_table(tmp_path / 'neither.csv', ['a,b,c', ',,']), MANIFEST)
    with pytest.raises(DataError):
        load_csv(write_table(tmp_path / 'header.csv', ['a,c,b', '1,2,3']), MANIFEST)


def test_binary_columns_must_hold_zero_or_one(tmp_path):
    manifest = dict(MANIFEST, binary={'x': [True, False], 'y': [False]})
    assert load_csv(write_table(tmp_path / 'ok.csv', ['a,b,c', '1,0.5,3', '0,2,']), manifest).train.x_binary == (True, False)
    with pytest.raises(DataError):
        load_csv(write_table(tmp_path / 'bad.csv', ['a,b,c', '2,0.5,3']), manifest)


def test_splits_hold_out_complete_pairs(tmp_path):
    manifest = dict(MANIFEST, splits={'validation': [0], 'test': [2]})
    split = load_csv(write_table(tmp_path / DATA_FILE, ['a,b,c', '1,2,3', '4,5,6', '7,8,9', '1,1,']), manifest)
    assert split.train.n_paired == 1
    assert split.validation.x.tolist() == [[1.0, 2.0]]
    assert split.test.y.tolist() == [[9.0]]
    with pytest.raises(DataError):
        load_csv(write_table(tmp_path / 'bad.csv', ['a,b,c', '1,2,3', '1,1,']), dict(MANIFEST, splits={'test': [1]}))


def test_normalization_uses_training_minimum_and_span(tmp_path):
    split = load_csv(write_table(tmp_path / DATA_FILE, ['a,b,c', '2,5,0', '4,5,10', '3,5,']), MANIFEST)
    stats = split.train.stats
    assert stats.normalize(np.array([[3.0, 5.0]]), 'x')[0, 0] == pytest.approx(0.5)
    assert stats.x_span[1] == 1.0
    assert stats.normalize(np.array([[3.0, 5.0]]), 'x')[0, 1] == 0.0
    normalized = normalize(split.train)
    assert normalized.normalized
    assert normalized.all_x.min() >= 0.0 and normalized.all_x.max() <= 1.0
    back = stats.denormalize(normalized.paired_y, 'y')
    np.testing.assert_allclose(back, split.train.paired_y, atol=1e-12)


def test_normalization_stats_round_trip_dict():
    stats = NormalizationStats.fit(np.array([[0.0, 1.0], [2.0, 3.0]]), np.array([[5.0], [5.0]]))
    restored = NormalizationStats.from_dict(json.loads(json.dumps(stats.to_dict())))
    np.testing.assert_array_equal(restored.x_span, stats.x_span)
    assert restored.y_span.tolist() == [1.0]


def test_dataset_checks_widths():
    with pytest.raises(DimensionError):
        MultiViewDataset(paired_x=np.zeros((2, 3)), paired_y=np.zeros((2, 1)), x_only=np.zeros((0, 2)), y_only=np.zeros((0, 1)), x_names=('a', 'b'), y_names=('c',), x_binary=(False, False), y_binary=(False,), stats=NormalizationStats.identity(2, 1))
    with pytest.raises(DimensionError):
        MultiViewDataset(paired_x=np.zeros((2, 2)), paired_y=np.zeros((3, 1)), x_only=np.zeros((0, 2)), y_only=np.zeros((0, 1)), x_names=('a', 'b'), y_names=('c',), x_binary=(False, False), y_binary=(False,), stats=NormalizationStats.identity(2, 1))


def test_zero_batch_size_gives_empty_batch():
    batch = sample_batches(small_dataset(), np.random.default_rng(0), BatchSizes(paired=0, x=5, y=0))
    assert batch.paired_x.shape == (0, 2)
    assert batch.y.shape == (0, 1)
    assert batch.x.shape == (5, 2)


def test_sampling_from_empty_pool_fails():
    with pytest.raises(EmptyPoolError):
        sample_batches(small_dataset(n_paired=0), np.random.default_rng(0), BatchSizes(paired=1, x=0, y=0))
    with pytest.raises(EmptyPoolError):
        sample_batches(small_dataset(n_y=0), np.random.default_rng(0), BatchSizes(paired=0, x=0, y=2), pool='unpaired')
    with pytest.raises(UsageError):
        sample_batches(small_dataset(), np.random.default_rng(0), BatchSizes(), pool='everything')


def test_sampling_is_deterministic_per_seed():
    dataset = small_dataset()
    first = sample_batches(dataset, np.random.default_rng(42), BatchSizes(3, 3, 3))
    second = sample_batches(dataset, np.random.default_rng(42), BatchSizes(3, 3, 3))
    for role in ('paired', 'x', 'y'):
        np.testing.assert_array_equal(first.indices[role], second.indices[role])


def test_sampling_is_uniform_over_the_pool():
    dataset = small_dataset(n_paired=2, n_x=3, n_y=0)
    rng = np.random.default_rng(1)
    counts = np.zeros(5)
    for _ in range(10000):
        batch = sample_batches(dataset, rng, BatchSizes(paired=0, x=5, y=0))
        counts += np.bincount(batch.indices['x'], minlength=5)
    frequencies = counts / counts.sum()
    np.testing.assert_allclose(frequencies, np.full(5, 0.2), atol=0.01)


def test_sampled_pairs_stay_aligned():
    dataset = small_dataset(n_paired=6)
    batch = sample_batches(dataset, np.random.default_rng(3), BatchSizes(paired=10, x=1, y=1))
    np.testing.assert_array_equal(batch.paired_x, dataset.paired_x[batch.indices['paired']])
    np.testing.assert_array_equal(batch.paired_y, dataset.paired_y[batch.indices['paired']])


def test_noise_free_rotation_is_exactly_orthogonal():
    split, _ = generate(SyntheticSpec(kind='rotation', dim_x=4, dim_y=4, noise=0.0, paired=300, x_only=0, y_only=0, validation=0, test=0, seed=5))
    x, y = split.train.paired_x, split.train.paired_y
    rotation, *_ = np.linalg.lstsq(x, y, rcond=None)
    np.testing.assert_allclose(rotation.T @ rotation, np.eye(4), atol=1e-8)
    np.testing.assert_allclose(np.linalg.norm(y, axis=1), np.linalg.norm(x, axis=1), atol=1e-8)


def test_generation_is_deterministic_per_seed():
    spec = SyntheticSpec(kind='mlp-nonlinear', dim_x=3, dim_y=2, paired=50, x_only=20, y_only=20, validation=5, test=5, seed=11)
    first, _ = generate(spec)
    second, _ = generate(SyntheticSpec.from_dict(spec.to_dict()))
    np.testing.assert_array_equal(first.train.all_x, second.train.all_x)
    np.testing.assert_array_equal(first.test.y, second.test.y)
    other, _ = generate(SyntheticSpec.from_dict(dict(spec.to_dict(), seed=12)))
    assert not np.array_equal(first.train.all_x, other.train.all_x)


def test_binary_symptom_data_is_zero_one():
    split, truth = generate(SyntheticSpec(kind='binary-symptom', dim_x=11, dim_y=11, paired=100, x_only=50, y_only=50, validation=10, test=10, seed=2))
    assert split.train.x_binary == (True,) * 11
    for values in (split.train.all_x, split.train.all_y, truth.x_only_missing_y, split.test.x):
        assert set(np.unique(values)) <= {0.0, 1.0}


def test_synthetic_counts_and_ground_truth():
    spec = SyntheticSpec(kind='rotation', dim_x=3, dim_y=3, paired=40, x_only=15, y_only=10, validation=5, test=8, seed=4)
    split, truth = generate(spec)
    assert split.train.n_paired == 27
    assert (len(split.validation), len(split.test)) == (5, 8)
    assert truth.x_only.shape == (15, 3) and truth.x_only_missing_y.shape == (15, 3)
    np.testing.assert_array_equal(truth.x_only, split.train.x_only)
    np.testing.assert_array_equal(truth.y_only, split.train.y_only)
    pairs = truth.as_pairs('y2x')
    assert len(pairs) == 10
    with pytest.raises(UsageError):
        truth.as_pairs('sideways')


def test_synthetic_spec_validation():
    with pytest.raises(DimensionError):
        SyntheticSpec(kind='rotation', dim_x=3, dim_y=4)
    with pytest.raises(UsageError):
        SyntheticSpec(kind='spiral')
    with pytest.raises(UsageError):
        SyntheticSpec(paired=10, validation=6, test=6)


def test_written_directory_loads_back_identically(tmp_path):
    spec = SyntheticSpec(kind='mlp-nonlinear', dim_x=3, dim_y=2, paired=30, x_only=10, y_only=12, validation=4, test=6, seed=8)
    data, manifest, truth = synthesize_tables(spec)
    out = tmp_path / 'data'
    write_dataset_dir(str(out), data, manifest, truth)
    loaded, loaded_truth = load_dataset_dir(str(out))
    direct, direct_truth = generate(spec)
    np.testing.assert_allclose(loaded.train.all_x, direct.train.all_x, atol=1e-12)
    np.testing.assert_allclose(loaded.train.all_y, direct.train.all_y, atol=1e-12)
    np.testing.assert_allclose(loaded.test.x, direct.test.x, atol=1e-12)
    np.testing.assert_allclose(loaded_truth.y_only_missing_x, direct_truth.y_only_missing_x, atol=1e-12)
    assert json.loads((out / MANIFEST_FILE).read_text())['splits'] == manifest['splits']
    assert pd.read_csv(out / DATA_FILE).iloc[30:40, 3:].isna().all().all()


def test_existing_directory_needs_force(tmp_path):
    spec = SyntheticSpec(dim_x=2, dim_y=2, paired=10, x_only=2, y_only=2, validation=0, test=2)
    data, manifest, truth = synthesize_tables(spec)
    write_dataset_dir(str(tmp_path), data, manifest, truth)
    with pytest.raises(UsageError):
        write_dataset_dir(str(tmp_path), data, manifest, truth)
    write_dataset_dir(str(tmp_path), data, manifest, truth, force=True)


def test_frame_without_rows_is_rejected():
    frame = pd.DataFrame({'a': pd.Series([], dtype=str), 'b': pd.Series([], dtype=str), 'c': pd.Series([], dtype=str)})
    with pytest.raises(DataError):
        dataset_from_frame(frame, MANIFEST)
