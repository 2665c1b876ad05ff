"""Test images at 256x256.

If ``DESPECKLE_IMAGES`` names a directory, clean 8-bit PGMs found there
(``cameraman.pgm``, ``barbara.pgm``, ``lena.pgm``, ``remote2.pgm`` and so
on) are used. Otherwise Cameraman comes from scikit-image and an aerial
photograph from PyWavelets stands in for a remote-sensing scene; both are
reduced from 512x512 by 2x2 block averaging. Other names are unavailable.
"""
import os
from pathlib import Path

import numpy as np

from despeckle.pgm import read_image


def block_mean(img, factor=2):
    img = np.asarray(img, dtype=float)
    m, n = img.shape
    return img[: m - m % factor, : n - n % factor].reshape(m // factor, factor, n // factor, factor).mean(axis=(1, 3))


def _stand_in(name):
    if name == "cameraman":
        from skimage import data

        return block_mean(data.camera()), "scikit-image camera, 2x2 block mean"
    if name == "remote2":
        import pywt.data

        return block_mean(pywt.data.aero()), "PyWavelets aero (stand-in), 2x2 block mean"
    return None, "unavailable"


def load(name):
    """Return ``(image or None, provenance)`` for a named test image."""
    root = os.environ.get("DESPECKLE_IMAGES")
    if root:
        path = Path(root) / f"{name}.pgm"
        if path.exists():
            return read_image(path, floor=None), str(path)
    try:
        return _stand_in(name)
    except ImportError as exc:
        return None, f"unavailable ({exc})"


def cameraman():
    img, _ = load("cameraman")
    if img is None:
        import pytest

        pytest.skip("no Cameraman image available")
    return img


def aerial():
    img, _ = load("remote2")
    if img is None:
        import pytest

        pytest.skip("no aerial image available")
    return img
