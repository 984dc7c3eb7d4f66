from src.models.image import Image2D, PreIntegratedImage, ValidRegion
from src.models.scale_map import A_MIN, ClampReport, ScaleMap, ScaleVector4

__all__ = [
    "A_MIN",
    "ClampReport",
    "Image2D",
    "PreIntegratedImage",
    "ScaleMap",
    "ScaleVector4",
    "ValidRegion",
]
