"""Unpaired adversarial HDR tone mapping toolkit."""

__version__ = "0.1.0"

from .image import HdrImage, LdrImage, LuminanceMap, luminance, \
    reproduce_color
from .rangecompress import CompressionParams, Histogram, SearchConfig, \
    build_canonical_histogram, compress, cross_entropy_objective, \
    estimate_lambda, histogram20
from .trainloop import Ablations, Checkpoint, TrainConfig, load_checkpoint, \
    pretrain_discriminators, save_checkpoint, tonemap, train

__all__ = [
    "HdrImage", "LdrImage", "LuminanceMap", "luminance", "reproduce_color",
    "CompressionParams", "Histogram", "SearchConfig",
    "build_canonical_histogram", "compress", "cross_entropy_objective",
    "estimate_lambda", "histogram20",
    "Ablations", "Checkpoint", "TrainConfig", "load_checkpoint",
    "pretrain_discriminators", "save_checkpoint", "tonemap", "train",
]
