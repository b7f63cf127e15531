"""
Where the bits go: tokenizer ratio times AR ratio
=================================================

Cutting an image into 8x8 patches and replacing each patch by one of V
codebook entries already shrinks it a lot. Entropy-coding the token ids with
an adaptive context model then removes whatever redundancy is left between
neighbouring tokens.
"""

from _common import codebook_for, photos

from aric import compression_ratios, encode_image, psnr
from aric.codec import decode_image

# a 1024-token, 16-bit-per-token tokenizer at 512x512 gives a ratio of 384
r = compression_ratios(512, 512, 3, 1024, 65536)
print(f"raw {r.raw_bits} bits, tokens {r.token_raw_bits} bits, tokenizer ratio {r.tokenizer_ratio:g}")

imgs = photos()
cb = codebook_for(imgs.values(), V=1024)
print(f"\ncodebook: V={cb.V}, id {cb.id:016x}")

print(f"\n{'image':<10} {'model':<8} {'bpp':>7} {'tok':>6} {'ar':>6} {'overall':>8} {'psnr':>6}")
for name, img in imgs.items():
    for model_id, label in ((0, "uniform"), (1, "ppm")):
        data, rep = encode_image(img, cb, mode=0, model_id=model_id)
        out = decode_image(data, cb)
        print(f"{name:<10} {label:<8} {rep.bpp_payload:7.4f} {rep.tokenizer_ratio:6.1f} "
              f"{rep.ar_ratio:6.3f} {rep.overall_ratio:8.1f} {psnr(img, out):6.2f}")
