"""
VIGM model files.

Layout:
    4 bytes   magic b'VIGM'
    uint32    format version (little-endian)
    uint32    header length in bytes
    header    UTF-8 JSON: dims, layer shapes and activations per network,
              normalisation stats, binary flags, feature names, hyperparameters,
              trained flag
    payload   every parameter as little-endian float64, row-major; networks in
              the order g1, g2, d_x, d_y, dae and, within a network, weight then
              bias per layer
"""
import os
import json
import struct
import logging
from typing import Any, Dict, List, Tuple

import numpy as np

from .data import NormalizationStats
from .errors import DataError, ModelFormatError, UsageError
from .file_io import write_bytes_atomic
from .neural_net import DenseLayer, Mlp
from .autodiff import Tensor
from .vigan_model import NETWORK_NAMES, ViganModel

logger = logging.getLogger(__name__)

MAGIC = b'VIGM'
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct('<4sII')
_FLOAT = np.dtype('<f8')


def build_header(model: ViganModel) -> Dict[str, Any]:
    return {'dim_x': model.dim_x, 'dim_y': model.dim_y, 'networks': {name: [[layer.in_dim, layer.out_dim, layer.activation] for layer in net.layers] for name, net in model.networks().items()}, 'stats': model.stats.to_dict(), 'x_binary': list(model.x_binary), 'y_binary': list(model.y_binary), 'x_names': list(model.x_names), 'y_names': list(model.y_names), 'hyperparams': model.hyperparams, 'trained': bool(model.trained)}


def encode_model(model: ViganModel) -> bytes:
    """Serialize a model to VIGM bytes."""
    header = json.dumps(build_header(model), sort_keys=True).encode('utf-8')
    chunks = [_PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header)), header]
    for name in NETWORK_NAMES:
        for layer in model.networks()[name].layers:
            chunks.append(np.ascontiguousarray(layer.weight.data, dtype=_FLOAT).tobytes(order='C'))
            chunks.append(np.ascontiguousarray(layer.bias.data, dtype=_FLOAT).tobytes(order='C'))
    return b''.join(chunks)


def save_model(model: ViganModel, path: str) -> None:
    """
    Write a model atomically.

    Args:
        model: Model to save
        path: Destination (conventionally *.vigan)
    """
    payload = encode_model(model)
    write_bytes_atomic(path, payload)
    logger.info(f'Saved model ({model.count_params()} parameters, {len(payload)} bytes) to {path}')


def _split_preamble(blob: bytes) -> Tuple[Dict[str, Any], int]:
    if len(blob) < _PREAMBLE.size:
        raise ModelFormatError('file too short to be a VIGM model')
    magic, version, header_len = _PREAMBLE.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ModelFormatError(f'bad magic {magic!r}; not a VIGM model')
    if version != FORMAT_VERSION:
        raise ModelFormatError(f'unsupported VIGM version {version}; this build reads version {FORMAT_VERSION}')
    end = _PREAMBLE.size + header_len
    if len(blob) < end:
        raise ModelFormatError('truncated VIGM header')
    try:
        header = json.loads(blob[_PREAMBLE.size:end].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f'corrupt VIGM header: {e}')
    return header, end


def decode_model(blob: bytes) -> ViganModel:
    """Rebuild a model from VIGM bytes; every array is a fresh writable copy."""
    header, offset = _split_preamble(blob)
    try:
        layouts: Dict[str, List[List[Any]]] = header['networks']
        networks: Dict[str, Mlp] = {}
        for name in NETWORK_NAMES:
            layers = []
            for in_dim, out_dim, activation in layouts[name]:
                sizes = (int(in_dim) * int(out_dim), int(out_dim))
                arrays = []
                for count in sizes:
                    nbytes = count * _FLOAT.itemsize
                    if offset + nbytes > len(blob):
                        raise ModelFormatError(f'truncated VIGM payload in network {name}')
                    arrays.append(np.frombuffer(blob, dtype=_FLOAT, count=count, offset=offset).astype(np.float64))
                    offset += nbytes
                weight = arrays[0].reshape(int(in_dim), int(out_dim))
                layers.append(DenseLayer(Tensor(weight), Tensor(arrays[1]), activation))
            networks[name] = Mlp(layers, name=name)
        if offset != len(blob):
            raise ModelFormatError(f'{len(blob) - offset} unexpected trailing bytes after VIGM payload')
        model = ViganModel(networks['g1'], networks['g2'], networks['d_x'], networks['d_y'], networks['dae'], stats=NormalizationStats.from_dict(header['stats']), x_binary=header.get('x_binary'), y_binary=header.get('y_binary'), x_names=header.get('x_names'), y_names=header.get('y_names'), hyperparams=header.get('hyperparams', {}), trained=bool(header.get('trained', False)))
    except (KeyError, TypeError, ValueError, UsageError) as e:
        raise ModelFormatError(f'inconsistent VIGM header: {e}')
    except DataError as e:
        if isinstance(e, ModelFormatError):
            raise
        raise ModelFormatError(f'VIGM layers do not form a valid model: {e}')
    if (model.dim_x, model.dim_y) != (header.get('dim_x'), header.get('dim_y')):
        raise ModelFormatError(f"header dims ({header.get('dim_x')}, {header.get('dim_y')}) disagree with the stored networks")
    return model


def load_model(path: str) -> ViganModel:
    """
    Read a VIGM model file.

    Raises:
        DataError: The file does not exist
        ModelFormatError: The file is not a valid VIGM model
    """
    if not os.path.exists(path):
        raise DataError(f'model file not found: {path}')
    with open(path, 'rb') as handle:
        blob = handle.read()
    model = decode_model(blob)
    logger.info(f'Loaded {model!r} from {path}')
    return model


def read_header(path: str) -> Dict[str, Any]:
    """Return only the JSON header of a model file, for display."""
    if not os.path.exists(path):
        raise DataError(f'model file not found: {path}')
    with open(path, 'rb') as handle:
        blob = handle.read()
    header, _ = _split_preamble(blob)
    header['format_version'] = FORMAT_VERSION
    header['file_bytes'] = len(blob)
    return header
