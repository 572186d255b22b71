"""SkyGAN: aerial image dehazing via unpaired hyperspectral reconstruction.

Subpackages cover the full desk-scale pipeline: fractal haze synthesis and
dataset builds (hazegen), color cues and channel spanning (colorcue), the
hazy-to-hyperspectral training core (h2h), catalyst extraction (hsc), the
conditional dehazer and end-to-end pipeline (i2i), metrics and reports
(evalkit), and the staged training orchestrator.
"""

__version__ = "0.1.0"

from .imagecore import ImageTensor, DatasetPair, load_image, save_image, crop_tiles
from .evalkit import psnr, ssim

__all__ = [
    "ImageTensor",
    "DatasetPair",
    "load_image",
    "save_image",
    "crop_tiles",
    "psnr",
    "ssim",
    "__version__",
]
