"""
The coding model as a generator
===============================

Any model that can code tokens can also draw them. We warm a raster PPM
model up on a few photos and sample new token grids from it at a few
temperatures.
"""

from pathlib import Path

from _common import codebook_for, photos

from aric import save_ppm
from aric.codec import fit_model, reconstruct, sample_tokens, token_log2_probs, tokenize_image

imgs = photos()
cb = codebook_for(imgs.values(), V=256)
grids = [tokenize_image(img, cb)[1] for img in imgs.values()]
model = fit_model(grids, model_id=1, V=cb.V)

out = Path("demo_samples")
out.mkdir(exist_ok=True)
for temp in (0.5, 1.0, 2.0):
    tokens, _ = sample_tokens(cb, 0, 1, (256, 256), seed=1, temperature=temp, model=model)
    lp = token_log2_probs(tokens, cb.V, 1, model).mean()
    path = out / f"sample_t{temp:g}.ppm"
    save_ppm(path, reconstruct(tokens, cb))
    print(f"temperature {temp:g}: {len(set(tokens.tokens.ravel().tolist()))} distinct tokens, "
          f"mean log2 p {lp:.2f}, wrote {path}")
