"""Shared helpers for the demo scripts: a few natural photos and a codebook."""

import numpy as np

from aric import Image, center_crop, train_codebook
from aric.codec import divisible_crop
from aric.tokenizer import extract_features


def photos(names=("astronaut", "chelsea", "coffee", "rocket"), size=256):
    from skimage import data  # only the demos need scikit-image

    out = {}
    for name in names:
        img = Image.from_uint8(getattr(data, name)())
        img = center_crop(img, min(size, img.width), min(size, img.height))
        out[name] = divisible_crop(img, 8)
    return out


def codebook_for(images, V, seed=0):
    feats = np.concatenate([extract_features(i, 8).reshape(-1, 192) for i in images])
    return train_codebook(feats, V, seed, patch_size=8, channels=3, reserve_zero=True).codebook
