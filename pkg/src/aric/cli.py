"""``aric`` command line: codebook training, encode/decode, bench sweeps, sampling.

Every subcommand accepts ``--config FILE`` with ``key=value`` lines naming long
options (``num-scales=3``); options given on the command line win.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .bench import corpus_files, crop_to, rows_to_csv, run_bench
from .codec import decode_image, divisible_crop, encode_image, sample_unconditional
from .errors import AricError, UsageError
from .image_io import load_ppm, save_ppm
from .tokenizer import (Codebook, default_resolutions, extract_features,
                        multiscale_training_vectors, train_codebook)

DEFAULT_CROP = (512, 512)


def parse_size(text):
    """``"WxH"`` -> ``(w, h)``; ``"none"`` -> ``None``."""
    if text is None or text.lower() == "none":
        return None
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError(f"size must be positive, got {text!r}")
    return w, h


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def read_config(path):
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        cfg[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return cfg


# -- commands -------------------------------------------------------------------

def _training_vectors(paths, patch, crop, multiscale, num_scales):
    chunks = []
    channels = None
    for path in paths:
        img = divisible_crop(crop_to(load_ppm(path), crop), patch)
        if channels is None:
            channels = img.channels
        elif img.channels != channels:
            raise UsageError(f"{path}: {img.channels} channels, expected {channels}")
        feats = extract_features(img, patch)
        if multiscale:
            th, tw, _ = feats.shape
            chunks.append(multiscale_training_vectors(feats, default_resolutions(tw, th, num_scales)))
        else:
            chunks.append(feats.reshape(-1, feats.shape[-1]))
    return np.concatenate(chunks), channels


def cmd_codebook(args):
    if args.V < 2:
        raise UsageError("V must be at least 2")
    paths = corpus_files(args.train_dir)
    if not paths:
        raise UsageError(f"no .ppm/.pgm images in {args.train_dir}")
    X, channels = _training_vectors(paths, args.patch, args.crop, args.multiscale, args.num_scales)
    if args.max_vectors and X.shape[0] > args.max_vectors:
        X = X[np.linspace(0, X.shape[0] - 1, args.max_vectors).astype(np.int64)]
    res = train_codebook(X, args.V, args.seed, patch_size=args.patch, channels=channels,
                         reserve_zero=args.multiscale)
    res.codebook.save(args.out)
    print(f"codebook_id={res.codebook.id:016x}")
    print(f"V={res.codebook.V}")
    print(f"vectors={X.shape[0]}")
    print(f"iterations={res.iterations}")
    print(f"sse={res.history[-1]:.12g}")
    return 0


def cmd_encode(args):
    cb = Codebook.load(args.codebook)
    img = crop_to(load_ppm(args.input), args.crop)
    t0 = time.perf_counter()
    data, report = encode_image(img, cb, args.mode, args.model, num_scales=args.num_scales)
    enc_ms = (time.perf_counter() - t0) * 1e3
    Path(args.out).write_bytes(data)
    for k, v in report.as_dict().items():
        print(f"{k}={v:.12g}" if isinstance(v, float) else f"{k}={v}")
    print(f"enc_ms={enc_ms:.3f}")
    return 0


def cmd_decode(args):
    cb = Codebook.load(args.codebook)
    data = Path(args.input).read_bytes()
    t0 = time.perf_counter()
    img = decode_image(data, cb)
    dec_ms = (time.perf_counter() - t0) * 1e3
    save_ppm(args.out, img)
    print(f"width={img.width}")
    print(f"height={img.height}")
    print(f"dec_ms={dec_ms:.3f}")
    return 0


def cmd_bench(args):
    codebooks = [Codebook.load(p) for p in args.codebook]
    paths = corpus_files(args.corpus_dir)
    if not paths:
        raise UsageError(f"no .ppm/.pgm images in {args.corpus_dir}")
    rows = run_bench(paths, codebooks, args.modes, args.models, args.crop, args.jobs, args.num_scales)
    text = rows_to_csv(rows, mask_timing=args.mask_timing)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_sample(args):
    cb = Codebook.load(args.codebook)
    w, h = args.size
    img = sample_unconditional(cb, args.mode, args.model, (w, h), args.seed, args.temp)
    save_ppm(args.out, img)
    return 0


# -- parser -------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="aric", description="Patch-token image codec with arithmetic coding.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="key=value file; command-line flags take precedence")
        p.set_defaults(func=func)
        return p

    p = add("codebook", cmd_codebook, "train a k-means patch codebook")
    p.add_argument("train_dir")
    p.add_argument("out")
    p.add_argument("-V", "--V", type=int, default=256, help="codebook size")
    p.add_argument("--patch", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--multiscale", action="store_true",
                   help="train on pyramid residuals and reserve entry 0 as the zero vector")
    p.add_argument("--num-scales", type=int, default=4)
    p.add_argument("--crop", type=parse_size, default=DEFAULT_CROP)
    p.add_argument("--max-vectors", type=int, default=0, help="evenly subsample training vectors (0 = all)")

    p = add("encode", cmd_encode, "encode one image")
    p.add_argument("input")
    p.add_argument("codebook")
    p.add_argument("out")
    p.add_argument("--mode", type=int, default=0, choices=(0, 1))
    p.add_argument("--model", type=int, default=1, choices=(0, 1, 2, 3))
    p.add_argument("--crop", type=parse_size, default=DEFAULT_CROP, help="WxH center crop, or none")
    p.add_argument("--num-scales", type=int, default=4)

    p = add("decode", cmd_decode, "decode one bitstream")
    p.add_argument("input")
    p.add_argument("codebook")
    p.add_argument("out")

    p = add("bench", cmd_bench, "rate/distortion sweep, CSV output")
    p.add_argument("corpus_dir")
    p.add_argument("--codebook", action="append", required=True, help="repeat for several V")
    p.add_argument("--modes", type=_int_list, default=[0])
    p.add_argument("--models", type=_int_list, default=[0, 1])
    p.add_argument("--crop", type=parse_size, default=DEFAULT_CROP)
    p.add_argument("--num-scales", type=int, default=4)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--mask-timing", action="store_true", help="write '-' in the timing columns")
    p.add_argument("-o", "--out")

    p = add("sample", cmd_sample, "draw an image from the model alone")
    p.add_argument("codebook")
    p.add_argument("out")
    p.add_argument("--mode", type=int, default=0, choices=(0, 1))
    p.add_argument("--model", type=int, default=1, choices=(0, 1, 2, 3))
    p.add_argument("--size", type=parse_size, default=(256, 256))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temp", type=float, default=1.0)
    return ap


def _apply_config(ap, argv):
    args = ap.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = read_config(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    sub = ap._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions if a.option_strings}
    defaults = {}
    for k, v in cfg.items():
        if k not in actions or k in ("config", "help"):
            raise UsageError(f"unknown config key {k!r} for {args.command}")
        a = actions[k]
        if isinstance(a, argparse._StoreTrueAction):
            defaults[k] = v.lower() in ("1", "true", "yes", "on")
        elif isinstance(a, argparse._AppendAction):
            defaults[k] = [s.strip() for s in v.split(",")]
        else:
            defaults[k] = v  # string defaults go through the option's type
    sub.set_defaults(**defaults)
    return ap.parse_args(argv)


def main(argv=None):
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
        return args.func(args)
    except AricError as exc:
        print(f"aric: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"aric: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
