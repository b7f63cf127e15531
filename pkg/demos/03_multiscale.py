"""
Coarse to fine token pyramids
=============================

Mode 1 codes a pyramid of residual token maps. Each finer scale only has to
describe what the coarser scales missed, and token 0 (the zero vector) says
"nothing to add here". The parent model predicts a token from the token one
scale up.
"""

import numpy as np
from _common import photos

from aric import encode_image, psnr
from aric.codec import decode_image, tokenize_image
from aric.tokenizer import default_resolutions, extract_features, multiscale_training_vectors, train_codebook

imgs = photos()
vecs = []
for img in imgs.values():
    f = extract_features(img, 8)
    vecs.append(multiscale_training_vectors(f, default_resolutions(f.shape[1], f.shape[0])))
cb = train_codebook(np.concatenate(vecs), 1024, seed=0, patch_size=8, channels=3, reserve_zero=True).codebook

img = imgs["chelsea"]
_, pyr = tokenize_image(img, cb, mode=1)
for k, g in enumerate(pyr.scales):
    zeros = np.mean(g.tokens == 0)
    print(f"scale {k}: {g.tw}x{g.th} tokens, {100 * zeros:.0f}% zero")

_, single = tokenize_image(img, cb, mode=0)
print(f"\nsingle-scale tokens: {single.tokens.size}, pyramid tokens: {pyr.n_tokens}")

for model_id, label in ((0, "uniform"), (1, "raster ppm"), (2, "parent"), (3, "parent+west")):
    data, rep = encode_image(img, cb, mode=1, model_id=model_id)
    print(f"{label:<12} bpp {rep.bpp_payload:.4f}  ar {rep.ar_ratio:.3f}  "
          f"psnr {psnr(img, decode_image(data, cb)):.2f}")
