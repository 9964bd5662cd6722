import json
import logging
import struct

import numpy as np
import pytest

from modules.data import NormalizationStats
from modules.errors import DataError, ModelFormatError
from modules.model_io import MAGIC, decode_model, encode_model, load_model, read_header, save_model
from modules.vigan_model import ArchitectureConfig, build_model, impute

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


@pytest.fixture
def model():
    m = build_model(3, 2, ArchitectureConfig([5], [4], [6], 3), np.random.default_rng(0), hyperparams={'source': 'unit-test'})
    m.stats = NormalizationStats.fit(np.array([[0.0, 1.0, 2.0], [4.0, 3.0, 2.0]]), np.array([[-1.0, 0.0], [1.0, 10.0]]))
    m.x_names = ('age', 'weight', 'height')
    m.y_binary = (True, False)
    m.trained = True
    return m


def test_round_trip_preserves_parameters_and_metadata(model, tmp_path):
    path = str(tmp_path / 'model.vigan')
    save_model(model, path)
    loaded = load_model(path)
    original, restored = model.snapshot(), loaded.snapshot()
    assert list(restored) == list(original)
    for name in original:
        np.testing.assert_array_equal(restored[name], original[name])
    assert loaded.x_names == model.x_names
    assert loaded.y_binary == (True, False)
    assert loaded.trained
    assert loaded.hyperparams['source'] == 'unit-test'
    np.testing.assert_array_equal(loaded.stats.y_span, model.stats.y_span)
    assert [net.layer_shapes() for net in loaded.networks().values()] == [net.layer_shapes() for net in model.networks().values()]


def test_loaded_model_imputes_identically(model):
    loaded = decode_model(encode_model(model))
    inputs = np.random.default_rng(1).uniform(0, 4, size=(6, 3))
    np.testing.assert_array_equal(impute(loaded, inputs), impute(model, inputs))


def test_loaded_arrays_are_writable_copies(model):
    loaded = decode_model(encode_model(model))
    weight = loaded.g1.layers[0].weight
    weight.data += 1.0
    assert weight.requires_grad
    assert not np.array_equal(weight.data, model.g1.layers[0].weight.data)


def test_payload_size(model):
    blob = encode_model(model)
    header_len = struct.unpack_from('<I', blob, 8)[0]
    assert len(blob) == 12 + header_len + 8 * model.count_params()


def test_bad_magic(model):
    blob = bytearray(encode_model(model))
    blob[:4] = b'NOPE'
    with pytest.raises(ModelFormatError):
        decode_model(bytes(blob))


def test_unsupported_version(model):
    blob = bytearray(encode_model(model))
    struct.pack_into('<I', blob, 4, 99)
    with pytest.raises(ModelFormatError):
        decode_model(bytes(blob))


def test_truncated_and_trailing_bytes(model):
    blob = encode_model(model)
    for broken in (blob[:6], blob[:20], blob[:-8], blob + b'\x00' * 8):
        with pytest.raises(ModelFormatError):
            decode_model(broken)


def test_inconsistent_header(model):
    blob = encode_model(model)
    header_len = struct.unpack_from('<I', blob, 8)[0]
    header = json.loads(blob[12:12 + header_len])
    header['networks']['g1'][0][2] = 'softmax'
    patched = json.dumps(header, sort_keys=True).encode('utf-8')
    with pytest.raises(ModelFormatError):
        decode_model(struct.pack('<4sII', MAGIC, 1, len(patched)) + patched + blob[12 + header_len:])


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_model(str(tmp_path / 'absent.vigan'))


def test_read_header_only(model, tmp_path):
    path = str(tmp_path / 'model.vigan')
    save_model(model, path)
    header = read_header(path)
    assert (header['dim_x'], header['dim_y']) == (3, 2)
    assert header['networks']['dae'] == [[5, 6, 'relu'], [6, 3, 'relu'], [3, 6, 'relu'], [6, 5, 'sigmoid']]
    assert header['format_version'] == 1
    assert header['file_bytes'] == len(encode_model(model))
