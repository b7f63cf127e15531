"""Lossless coding of VQ patch tokens with adaptive context models."""

from .bitstream import Header, parse_stream, write_stream
from .codec import (decode_image, decode_tokens, encode_image, encode_tokens, sample_tokens,
                    sample_unconditional, tokenize_image)
from .errors import (AricError, CorruptionError, DimensionError, FormatError, HashMismatchError,
                     MagicError, TrainingError, TruncationError, UsageError, VersionError)
from .image_io import Image, center_crop, load_ppm, read_ppm, save_ppm, write_ppm
from .metrics import RateReport, compression_ratios, ms_ssim, psnr
from .prob_model import Context, PPMModel, UniformModel, make_model
from .range_coder import FreqTable, quantize
from .tokenizer import (Codebook, ScalePyramid, TokenGrid, detokenize, detokenize_multiscale,
                        extract_features, tokenize, tokenize_multiscale, train_codebook)

__version__ = "0.1.0"
