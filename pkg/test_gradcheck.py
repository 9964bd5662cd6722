import logging
import threading

import numpy as np
import pytest

from modules.autodiff import GradCheckReport
from modules.batch_processing import BatchProcessor
from modules.errors import JobTimeoutError, VerificationError
from modules.gradcheck import TOY_KINK_MARGIN, SuiteResult, _kink_distance, build_toy_problem, check_toy_model, run_gradient_suite

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


def test_toy_problem_is_seeded():
    first, second = build_toy_problem(5), build_toy_problem(5)
    np.testing.assert_array_equal(first.paired_x, second.paired_x)
    for name, tensor in first.model.parameters().items():
        np.testing.assert_array_equal(tensor.data, second.model.parameters()[name].data)
    assert first.draws == second.draws
    assert first.paired_x.shape == (2, 3) and first.y.shape == (2, 2)
    assert np.all((first.x >= 0) & (first.x <= 1))


def test_toy_problem_keeps_every_kink_input_clear():
    for seed in (10, 14, 15, 18):
        problem = build_toy_problem(seed)
        assert _kink_distance(problem) > TOY_KINK_MARGIN
        biases = [t.data for name, t in problem.model.parameters().items() if name.endswith('.bias')]
        assert all(np.all((b >= 0.1) & (b <= 0.5)) for b in biases)


def test_toy_problem_gives_up_after_max_draws():
    with pytest.raises(VerificationError):
        build_toy_problem(0, kink_margin=10.0, max_draws=3)


def test_toy_model_gradients_pass():
    report = check_toy_model(3)
    assert report.passed, report.summary()
    assert report.order == 4
    assert report.entries_checked == build_toy_problem(3).model.count_params()


@pytest.mark.parametrize('seed', range(21))
def test_toy_model_passes_for_every_seed(seed):
    report = check_toy_model(seed)
    assert report.max_error < 1e-4, report.summary()


def test_suite_over_several_seeds():
    seen = []
    result = run_gradient_suite([0, 1, 2], max_workers=3, progress_callback=lambda done, total, fraction: seen.append(done))
    assert result.passed, result.summary()
    assert sorted(result.reports) == [0, 1, 2]
    assert seen == [3]
    assert result.summary().startswith('PASS max_rel_err=')
    result.raise_for_failure()


def test_failed_suite_raises_verification_error():
    failing = GradCheckReport(errors={'g1.0.weight': 0.2, 'dae.1.bias': 1e-9}, tolerance=1e-4, step=1e-5)
    result = SuiteResult(tolerance=1e-4, reports={4: failing}, errors={9: 'boom'})
    assert result.failed_seeds == [4, 9]
    assert 'g1.0.weight' in result.summary()
    with pytest.raises(VerificationError) as info:
        result.raise_for_failure()
    assert info.value.exit_code == 3
    assert not SuiteResult(tolerance=1e-4).passed


def test_batch_processor_keeps_input_order_and_collects_errors():
    processor = BatchProcessor(max_workers=4, batch_size=3)
    lock = threading.Lock()
    calls = []

    def work(item):
        with lock:
            calls.append(item)
        if item == 5:
            raise ValueError('five')
        return item * item

    results = processor.process_batch(list(range(8)), work)
    assert [item for item, _, _ in results] == list(range(8))
    assert results[2][1] == 4
    assert isinstance(results[5][2], ValueError)
    metrics = processor.get_metrics()
    assert (metrics['successful_items'], metrics['failed_items']) == (7, 1)
    processor.reset_metrics()
    assert processor.get_metrics()['total_items'] == 0


def test_batch_processor_reports_stalled_jobs_as_timeouts():
    processor = BatchProcessor(max_workers=3, batch_size=3, timeout=0.2)
    release = threading.Event()

    def work(item):
        if item == 1:
            release.wait(5.0)
        return item + 10

    try:
        results = processor.process_batch([0, 1, 2], work)
    finally:
        release.set()
    assert [item for item, _, _ in results] == [0, 1, 2]
    assert [result for _, result, _ in results] == [10, None, 12]
    assert isinstance(results[1][2], JobTimeoutError)
    assert '0.2s' in str(results[1][2])
    assert processor.get_metrics()['failed_items'] == 1
