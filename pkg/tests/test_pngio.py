import numpy as np
import pytest
from PIL import Image

from undertext import pngio
from undertext.errors import DataError


@pytest.mark.parametrize("bit_depth,dtype", [(8, np.uint8), (16, np.uint16)])
@pytest.mark.parametrize("channels", [1, 3])
def test_round_trip(bit_depth, dtype, channels, tmp_path):
    rng = np.random.default_rng(3)
    shape = (13, 17) if channels == 1 else (13, 17, 3)
    arr = rng.integers(0, 2**bit_depth, size=shape).astype(dtype)
    path = tmp_path / "x.png"
    pngio.write_png(path, arr, bit_depth, text={"note": "hello"})
    back = pngio.read_png(path)
    assert back.bit_depth == bit_depth
    assert back.text == {"note": "hello"}
    np.testing.assert_array_equal(back.samples, arr)


def test_bytes_deterministic():
    arr = np.arange(64, dtype=np.uint8).reshape(8, 8)
    assert pngio.encode_png(arr, 8) == pngio.encode_png(arr, 8)


def test_pillow_can_read_our_8bit_exports(tmp_path):
    arr = np.arange(64, dtype=np.uint8).reshape(8, 8)
    path = tmp_path / "x.png"
    pngio.write_png(path, arr, 8)
    with Image.open(path) as img:
        np.testing.assert_array_equal(np.asarray(img), arr)


def test_we_can_read_pillow_output(tmp_path):
    # Pillow may pick per-row filters; the reader must unfilter them
    rng = np.random.default_rng(11)
    arr = rng.integers(0, 256, size=(32, 40, 3)).astype(np.uint8)
    path = tmp_path / "pil.png"
    Image.fromarray(arr, mode="RGB").save(path)
    back = pngio.read_png(path)
    np.testing.assert_array_equal(back.samples, arr)


def test_wrong_dtype_rejected():
    with pytest.raises(DataError):
        pngio.encode_png(np.zeros((4, 4), np.uint8), 16)


def test_truncated_rejected():
    data = pngio.encode_png(np.zeros((4, 4), np.uint8), 8)
    with pytest.raises(DataError):
        pngio.decode_png(data[:20])
