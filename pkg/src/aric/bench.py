"""Rate/distortion/timing sweep over a corpus, one CSV row per configuration."""

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .codec import decode_image, encode_image
from .image_io import center_crop, load_ppm
from .metrics import ms_ssim, msssim_scales, psnr

COLUMNS = ["file", "mode", "model", "V", "patch", "bpp_payload", "bpp_total", "psnr", "msssim",
           "tokenizer_ratio", "ar_ratio", "overall_ratio", "enc_ms", "dec_ms"]
TIMING_COLUMNS = ("enc_ms", "dec_ms")


@dataclass
class BenchRow:
    file: str
    mode: int
    model: int
    V: int
    patch: int
    bpp_payload: float
    bpp_total: float
    psnr: float
    msssim: float
    tokenizer_ratio: float
    ar_ratio: float
    overall_ratio: float
    enc_ms: float
    dec_ms: float

    @property
    def key(self):
        return (self.file, self.mode, self.model, self.V)


def corpus_files(directory):
    d = Path(directory)
    return sorted(p for p in d.iterdir() if p.suffix.lower() in (".ppm", ".pgm", ".pnm"))


def crop_to(img, crop):
    """Center-crop to at most ``crop = (w, h)``; ``None`` keeps the image."""
    if crop is None:
        return img
    w, h = min(crop[0], img.width), min(crop[1], img.height)
    return img if (w, h) == (img.width, img.height) else center_crop(img, w, h)


def bench_image(name, img, codebooks, modes, models, num_scales=4):
    rows = []
    for cb in codebooks:
        for mode in modes:
            if mode == 1 and not cb.zero_reserved:
                continue
            for model in models:
                t0 = time.perf_counter()
                enc = encode_image(img, cb, mode, model, num_scales=num_scales, full=True)
                t1 = time.perf_counter()
                out = decode_image(enc.data, cb)
                t2 = time.perf_counter()
                rep = enc.report
                ref = enc.image
                ssim = ms_ssim(ref, out) if msssim_scales(ref.height, ref.width) else math.nan
                rows.append(BenchRow(
                    name, mode, model, cb.V, cb.patch_size, rep.bpp_payload, rep.bpp_total,
                    psnr(ref, out), ssim, rep.tokenizer_ratio, rep.ar_ratio, rep.overall_ratio,
                    (t1 - t0) * 1e3, (t2 - t1) * 1e3,
                ))
    return rows


def _bench_path(args):
    path, codebooks, modes, models, crop, num_scales = args
    img = crop_to(load_ppm(path), crop)
    return bench_image(Path(path).name, img, codebooks, modes, models, num_scales)


def run_bench(paths, codebooks, modes=(0,), models=(0, 1), crop=(512, 512), jobs=1, num_scales=4):
    tasks = [(str(p), codebooks, tuple(modes), tuple(models), crop, num_scales) for p in paths]
    if os.environ.get("ARIC_NO_PARALLEL") == "1":
        jobs = 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_bench_path, tasks))
    else:
        chunks = [_bench_path(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: r.key)
    return rows


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.12g}"
    return str(v)


def rows_to_csv(rows, mask_timing=False):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(["-" if mask_timing and c in TIMING_COLUMNS else _fmt(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()
