import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra.numpy import arrays
from hypothesis import strategies as st

from despeckle.pgm import (
    PGMDepthError,
    PGMHeaderError,
    PGMTruncatedError,
    encode_pgm,
    parse_pgm,
    read_image,
    write_image,
)


def test_parse_p5_with_comments():
    data = b"P5\n# made by hand\n3 2\n# depth\n255\n" + bytes([0, 1, 2, 253, 254, 255])
    np.testing.assert_array_equal(parse_pgm(data), [[0, 1, 2], [253, 254, 255]])


def test_parse_p2_and_rescale():
    data = b"P2 2 2 15\n0 15\n5 10\n"
    np.testing.assert_allclose(parse_pgm(data), [[0, 255], [85, 170]])


@pytest.mark.parametrize(
    "data, err",
    [
        (b"P6\n1 1\n255\n\x00\x00\x00", PGMHeaderError),
        (b"P5\n2 x\n255\n\x00\x00", PGMHeaderError),
        (b"P5\n0 1\n255\n", PGMHeaderError),
        (b"P5\n2 2", PGMHeaderError),
        (b"P5\n1 1\n65535\n\x00\x00", PGMDepthError),
        (b"P5\n2 2\n255\n\x00\x00\x00", PGMTruncatedError),
        (b"P2\n2 2\n255\n1 2 3", PGMTruncatedError),
        (b"P2\n1 2\n9\n1 12", PGMDepthError),
        (b"P2\n1 1\n9\nq", PGMHeaderError),
    ],
)
def test_malformed(data, err):
    with pytest.raises(err):
        parse_pgm(data)


def test_encode_clamps_and_rounds_half_up():
    out = encode_pgm(np.array([[-3.0, 0.5, 1.49, 254.5, 300.0]]))
    assert out.startswith(b"P5\n5 1\n255\n")
    assert list(out[-5:]) == [0, 1, 1, 255, 255]
    with pytest.raises(ValueError):
        encode_pgm(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        encode_pgm(np.zeros(3))


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_roundtrip(pixels):
    img = pixels.astype(float)
    np.testing.assert_array_equal(parse_pgm(encode_pgm(img)), img)


def test_read_image_floors_zeros(tmp_path):
    path = tmp_path / "z.pgm"
    write_image(path, np.array([[0.0, 7.0]]))
    np.testing.assert_array_equal(read_image(path), [[1.0, 7.0]])
    np.testing.assert_array_equal(read_image(path, floor=None), [[0.0, 7.0]])
