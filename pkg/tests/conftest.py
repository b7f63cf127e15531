import time

import numpy as np
import pytest

from aric import Image, center_crop, save_ppm, train_codebook
from aric.codec import divisible_crop
from aric.tokenizer import extract_features

# 8 natural RGB photos bundled with scikit-image. The main codebooks are
# trained on all of them; the last two are held out for the generalization
# checks (held-out codebooks and models never see them).
TRAIN_NAMES = ["astronaut", "chelsea", "rocket", "hubble_deep_field", "retina", "immunohistochemistry"]
HELDOUT_NAMES = ["coffee", "motorcycle"]
CORPUS_NAMES = TRAIN_NAMES + HELDOUT_NAMES
CODEBOOK_SIZES = (256, 1024, 4096)
CODEBOOK_SEED = 2024


def _load_natural(name):
    from skimage import data

    arr = data.stereo_motorcycle()[0] if name == "motorcycle" else getattr(data, name)()
    img = Image.from_uint8(arr)
    w, h = min(512, img.width), min(512, img.height)
    img = center_crop(img, w, h)
    return divisible_crop(img, 8)


@pytest.fixture(scope="session")
def corpus():
    return {name: _load_natural(name) for name in CORPUS_NAMES}


@pytest.fixture(scope="session")
def corpus_dir(corpus, tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    for name, img in corpus.items():
        save_ppm(d / f"{name}.ppm", img)
    return d


def _features(corpus, names):
    return np.concatenate([extract_features(corpus[n], 8).reshape(-1, 192) for n in names])


def _train_all(features, sizes):
    out, timings = {}, {}
    for V in sizes:
        t0 = time.perf_counter()
        out[V] = train_codebook(features, V, CODEBOOK_SEED, patch_size=8, channels=3,
                                reserve_zero=True).codebook
        timings[V] = time.perf_counter() - t0
    out["timings"] = timings
    return out


@pytest.fixture(scope="session")
def codebooks(corpus):
    """Zero-reserved p=8 RGB codebooks (V = 256, 4096) trained on the whole corpus."""
    return _train_all(_features(corpus, CORPUS_NAMES), (256, 4096))


@pytest.fixture(scope="session")
def heldout_codebooks(corpus):
    """Codebooks for V in CODEBOOK_SIZES trained on the 6 training images only."""
    return _train_all(_features(corpus, TRAIN_NAMES), CODEBOOK_SIZES)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_random_image(rng, w, h, channels=3):
    """Blurry colour field plus a little noise; looks more like a photo than white noise does."""
    from scipy.ndimage import zoom

    cw, ch = max(2, w // 24), max(2, h // 24)
    coarse = rng.random((ch, cw, channels))
    img = zoom(coarse, (h / ch, w / cw, 1), order=1)[:h, :w]
    img = img + rng.normal(0, 0.04, img.shape)
    return Image(np.clip(img, 0, 1))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
