"""Write freely available stand-in images as 256x256 PGMs.

``cameraman.pgm`` comes from scikit-image and ``aerial.pgm`` (a detail-rich
aerial photograph usable in place of a remote-sensing scene) from PyWavelets.
Both are reduced from 512x512 by 2x2 block averaging.

    python scripts/export_test_images.py OUTDIR
"""
import argparse
from pathlib import Path

import numpy as np
import pywt.data
from skimage import data

from despeckle.pgm import write_image


def block_mean(img, factor=2):
    img = np.asarray(img, dtype=float)
    m, n = img.shape
    return img.reshape(m // factor, factor, n // factor, factor).mean(axis=(1, 3))


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("outdir", type=Path)
    args = parser.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)
    write_image(args.outdir / "cameraman.pgm", block_mean(data.camera()))
    write_image(args.outdir / "aerial.pgm", block_mean(pywt.data.aero()))


if __name__ == "__main__":
    main()
