"""
Atomic file output.
Every file the toolkit produces goes through a temporary file in the target
directory followed by os.replace, so a crashed run never leaves a partial file.
"""
import os
import json
import logging
import tempfile
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Union

import pandas as pd

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]


@contextmanager
def atomic_open(path: PathLike, mode: str='w', encoding: str='utf-8') -> Iterator[Any]:
    """
    Open a temporary sibling of `path` for writing and move it into place on success.

    Args:
        path: Final destination
        mode: 'w' for text or 'wb' for binary
        encoding: Text encoding (ignored for binary mode)

    Yields:
        File object to write to
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix='.' + os.path.basename(path) + '.', suffix='.tmp', dir=directory)
    try:
        if 'b' in mode:
            handle = os.fdopen(fd, mode)
        else:
            handle = os.fdopen(fd, mode, encoding=encoding, newline='')
        with handle:
            yield handle
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_path, path)
        logger.debug(f'Wrote {path}')
    except BaseException:
        try:
            os.remove(tmp_path)
        except OSError:
            pass
        raise


def write_bytes_atomic(path: PathLike, payload: bytes) -> None:
    """Write raw bytes atomically."""
    with atomic_open(path, 'wb') as handle:
        handle.write(payload)


def write_json_atomic(path: PathLike, data: Dict[str, Any]) -> None:
    """Write a JSON document atomically with stable key order."""
    with atomic_open(path, 'w') as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write('\n')


def write_csv_atomic(path: PathLike, frame: pd.DataFrame, float_format: str='%.17g') -> None:
    """
    Write a DataFrame as CSV atomically.

    Args:
        path: Destination path
        frame: Data to write (index is not written)
        float_format: printf-style float format; the default round-trips float64 exactly
    """
    with atomic_open(path, 'w') as handle:
        frame.to_csv(handle, index=False, float_format=float_format, lineterminator='\n')
