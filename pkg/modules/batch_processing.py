"""
Concurrent execution of independent jobs (gradient checks per seed, sweep runs).
Each job builds its own graphs, so jobs share nothing but their inputs.
"""
import time
import threading
import concurrent.futures
import logging
from typing import Any, Callable, Dict, List, Optional, Tuple, TypeVar

from .errors import JobTimeoutError

logger = logging.getLogger(__name__)
T = TypeVar('T')
U = TypeVar('U')

JobResult = Tuple[T, Optional[U], Optional[Exception]]


class BatchProcessor:
    """
    Runs a function over many items on a thread pool and keeps run metrics.
    """

    def __init__(self, max_workers: int=4, batch_size: int=10, timeout: Optional[float]=600.0):
        """
        Initialize batch processor.

        Args:
            max_workers: Maximum number of concurrent workers
            batch_size: Items submitted to the pool at once
            timeout: Timeout per batch in seconds
        """
        self.max_workers = max(1, int(max_workers))
        self.batch_size = max(1, int(batch_size))
        self.timeout = timeout
        self.metrics = self._empty_metrics()
        self.metrics_lock = threading.RLock()

    @staticmethod
    def _empty_metrics() -> Dict[str, Any]:
        return {'total_batches': 0, 'total_items': 0, 'successful_items': 0, 'failed_items': 0, 'total_time': 0.0, 'last_batch_time': 0.0, 'last_batch_size': 0}

    def process_batch(self, items: List[T], process_func: Callable[[T], U], max_workers: Optional[int]=None, progress_callback: Optional[Callable[[int, int, float], None]]=None) -> List[JobResult]:
        """
        Process items concurrently; results come back in input order.

        Args:
            items: Items to process
            process_func: Function applied to each item
            max_workers: Override of the pool size
            progress_callback: Called with (done, total, fraction) after each batch

        Returns:
            List of (item, result, exception) tuples
        """
        max_workers = max_workers if max_workers is not None else self.max_workers
        start_time = time.time()
        with self.metrics_lock:
            self.metrics['total_batches'] += 1
            self.metrics['total_items'] += len(items)
        results: List[JobResult] = []
        for i in range(0, len(items), self.batch_size):
            batch = items[i:i + self.batch_size]
            results.extend(self._process_concurrent(batch, process_func, max_workers))
            if progress_callback:
                done = min(i + self.batch_size, len(items))
                progress_callback(done, len(items), done / len(items))
        batch_time = time.time() - start_time
        failed = sum((1 for _, _, error in results if error is not None))
        with self.metrics_lock:
            self.metrics['successful_items'] += len(results) - failed
            self.metrics['failed_items'] += failed
            self.metrics['total_time'] += batch_time
            self.metrics['last_batch_time'] = batch_time
            self.metrics['last_batch_size'] = len(items)
        logger.info(f'Processed {len(items)} jobs: {len(results) - failed} succeeded, {failed} failed, {batch_time:.2f}s')
        return results

    def _process_concurrent(self, batch: List[T], process_func: Callable[[T], U], max_workers: int) -> List[JobResult]:
        slots: List[Optional[JobResult]] = [None] * len(batch)
        executor = concurrent.futures.ThreadPoolExecutor(max_workers=max_workers)
        future_to_index = {executor.submit(process_func, item): index for index, item in enumerate(batch)}
        try:
            for future in concurrent.futures.as_completed(future_to_index, timeout=self.timeout):
                index = future_to_index[future]
                try:
                    slots[index] = (batch[index], future.result(), None)
                except Exception as e:
                    logger.warning(f'Job {batch[index]!r} failed: {e}')
                    slots[index] = (batch[index], None, e)
        except concurrent.futures.TimeoutError:
            for future, index in future_to_index.items():
                if slots[index] is None:
                    future.cancel()
                    logger.error(f'Job {batch[index]!r} did not finish within {self.timeout}s')
                    slots[index] = (batch[index], None, JobTimeoutError(f'job {batch[index]!r} exceeded the {self.timeout}s batch timeout'))
        finally:
            executor.shutdown(wait=False, cancel_futures=True)
        return [slot for slot in slots if slot is not None]

    def get_metrics(self) -> Dict[str, Any]:
        """
        Get batch processing metrics.

        Returns:
            dict: Counts, timings and throughput
        """
        with self.metrics_lock:
            metrics = self.metrics.copy()
        total = metrics['total_items']
        metrics['overall_success_rate'] = metrics['successful_items'] / total * 100 if total else 0
        metrics['items_per_second'] = total / metrics['total_time'] if metrics['total_time'] > 0 else 0
        return metrics

    def reset_metrics(self) -> None:
        with self.metrics_lock:
            self.metrics = self._empty_metrics()
