"""Binary tensor snapshots: rank + extents as little-endian u64, f32 data."""

import struct

import numpy as np
import pytest

from qblab.errors import DataError
from qblab.nn import decode_tensor, encode_tensor, read_tensor, write_tensor


class TestEncoding:
    def test_header_layout(self):
        buf = encode_tensor(np.zeros((2, 3), np.float32))
        assert struct.unpack_from("<Q", buf, 0)[0] == 2
        assert struct.unpack_from("<2Q", buf, 8) == (2, 3)
        assert len(buf) == 8 + 16 + 2 * 3 * 4

    def test_roundtrip_values_and_shape(self):
        rng = np.random.default_rng(0)
        for shape in [(4,), (2, 3), (1, 2, 3, 4), ()]:
            arr = rng.standard_normal(shape).astype(np.float32)
            out, _ = decode_tensor(encode_tensor(arr))
            assert out.shape == arr.shape
            np.testing.assert_array_equal(out, arr)

    def test_float64_input_narrowed_to_f32(self):
        arr = np.array([1.0, np.pi], np.float64)
        out, _ = decode_tensor(encode_tensor(arr))
        assert out.dtype == np.float32
        np.testing.assert_array_equal(out, arr.astype(np.float32))

    def test_sequential_decode_offsets(self):
        a = np.arange(6, dtype=np.float32).reshape(2, 3)
        b = np.arange(4, dtype=np.float32)
        buf = encode_tensor(a) + encode_tensor(b)
        got_a, off = decode_tensor(buf)
        got_b, off = decode_tensor(buf, off)
        assert off == len(buf)
        np.testing.assert_array_equal(got_a, a)
        np.testing.assert_array_equal(got_b, b)

    def test_truncation_rejected(self):
        buf = encode_tensor(np.ones((3, 3), np.float32))
        with pytest.raises(DataError):
            decode_tensor(buf[:-2])
        with pytest.raises(DataError):
            decode_tensor(buf[:10])


class TestFiles:
    def test_file_roundtrip(self, tmp_path):
        arr = np.random.default_rng(1).standard_normal((5, 7)).astype(np.float32)
        p = tmp_path / "t.qbt"
        write_tensor(p, arr)
        np.testing.assert_array_equal(read_tensor(p), arr)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_tensor(tmp_path / "absent.qbt")
