from .bayer import BayerPattern, RawImage, bilinear_demosaic, mosaic
from .color import luminance, rgb_to_lab, srgb_decode, srgb_encode
from .stretch import StretchResult, histogram_stretch

__all__ = [
    "BayerPattern",
    "RawImage",
    "bilinear_demosaic",
    "mosaic",
    "luminance",
    "rgb_to_lab",
    "srgb_decode",
    "srgb_encode",
    "StretchResult",
    "histogram_stretch",
]
