"""
Bigger codebooks dilute the context statistics
==============================================

With a fixed amount of training data, every extra codebook entry spreads the
same counts over more symbols. The average log-probability a fitted model
gives unseen images drops as V grows.
"""

import numpy as np
from _common import codebook_for, photos

from aric.codec import fit_model, tokenize_image, token_log2_probs

train = photos(("astronaut", "chelsea", "rocket", "immunohistochemistry"))
held = photos(("coffee", "hubble_deep_field"))

for V in (64, 256, 1024):
    cb = codebook_for(train.values(), V)
    model = fit_model([tokenize_image(i, cb)[1] for i in train.values()], 1, V)
    lp = [token_log2_probs(tokenize_image(i, cb)[1], V, 1, model).mean() for i in held.values()]
    print(f"V={V:5d}: held-out mean log2 p = {np.mean(lp):.3f} bits")
