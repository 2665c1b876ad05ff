"""Minimal 8-bit PGM (P2 ASCII / P5 binary) reader and P5 writer."""
import logging

import numpy as np

from .noise import NOISY_FLOOR

log = logging.getLogger(__name__)


class PGMError(ValueError):
    pass


class PGMHeaderError(PGMError):
    pass


class PGMDepthError(PGMError):
    pass


class PGMTruncatedError(PGMError):
    pass


def _header_tokens(data, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last token.
    """
    tokens = []
    pos = 0
    size = len(data)
    while len(tokens) < count:
        while pos < size and data[pos : pos + 1].isspace():
            pos += 1
        if pos < size and data[pos : pos + 1] == b"#":
            while pos < size and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < size and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMHeaderError("unexpected end of header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def parse_pgm(data):
    """Decode PGM bytes into a ``uint8``-valued float array (no flooring)."""
    if data[:2] not in (b"P2", b"P5"):
        raise PGMHeaderError(f"not a grayscale PGM (magic {data[:2]!r})")
    try:
        tokens, offset = _header_tokens(data, 4)
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PGMHeaderError(f"malformed header: {exc}") from None
    if width < 1 or height < 1:
        raise PGMHeaderError(f"bad dimensions {width}x{height}")
    if not 0 < maxval < 256:
        raise PGMDepthError(f"only 8-bit PGM is supported (maxval {maxval})")
    count = width * height
    if tokens[0] == b"P5":
        payload = data[offset : offset + count]
        if len(payload) < count:
            raise PGMTruncatedError(f"expected {count} bytes of pixel data, got {len(payload)}")
        pixels = np.frombuffer(payload, dtype=np.uint8)
    else:
        words = data[offset:].split()
        if len(words) < count:
            raise PGMTruncatedError(f"expected {count} pixel values, got {len(words)}")
        try:
            pixels = np.array([int(w) for w in words[:count]])
        except ValueError as exc:
            raise PGMHeaderError(f"bad ASCII pixel value: {exc}") from None
        if pixels.min() < 0 or pixels.max() > maxval:
            raise PGMDepthError("pixel value outside [0, maxval]")
    image = pixels.reshape(height, width).astype(float)
    if maxval != 255:
        image *= 255.0 / maxval
    return image


def read_image(path, floor=NOISY_FLOOR):
    """Read a PGM file on the 0-255 scale, raising zero pixels to ``floor``.

    Pass ``floor=None`` to keep zeros (e.g. for clean reference images).
    """
    with open(path, "rb") as fh:
        image = parse_pgm(fh.read())
    if floor is not None:
        zeros = image == 0
        if zeros.any():
            log.info("%s: raised %d zero pixels to %g", path, int(zeros.sum()), floor)
            image[zeros] = floor
    return image


def encode_pgm(u):
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise ValueError("expected a 2-D image")
    if not np.all(np.isfinite(u)):
        raise ValueError("cannot encode non-finite pixels")
    pixels = np.floor(np.clip(u, 0.0, 255.0) + 0.5).astype(np.uint8)
    m, n = pixels.shape
    return b"P5\n%d %d\n255\n" % (n, m) + pixels.tobytes()


def write_image(path, u):
    """Write ``u`` as binary PGM, clamped to [0, 255] and rounded half up."""
    data = encode_pgm(u)
    with open(path, "wb") as fh:
        fh.write(data)
