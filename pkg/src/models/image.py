"""
椭圆自适应滤波 — 图像数据模型

Image2D 为双精度稠密灰度网格，附带可选的有效区域；
PreIntegratedImage 为四遍游程求和后的全局预积分图像，所有像素只读共享。
"""
from dataclasses import dataclass

import numpy as np

from src.utils.error_handler import ParameterError


@dataclass(frozen=True)
class ValidRegion:
    """
    有效区域矩形，半开区间 [x0, x1) × [y0, y1)。
    x 为列方向 (k1)，y 为行方向 (k2)。
    """
    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def isEmpty(self) -> bool:
        return self.x1 <= self.x0 or self.y1 <= self.y0

    @property
    def width(self) -> int:
        return max(0, self.x1 - self.x0)

    @property
    def height(self) -> int:
        return max(0, self.y1 - self.y0)

    def slices(self) -> tuple[slice, slice]:
        """返回 (行切片, 列切片)，可直接用于 ndarray 索引"""
        return slice(self.y0, max(self.y0, self.y1)), slice(self.x0, max(self.x0, self.x1))

    def intersect(self, other: "ValidRegion") -> "ValidRegion":
        return ValidRegion(
            max(self.x0, other.x0), max(self.y0, other.y0),
            min(self.x1, other.x1), min(self.y1, other.y1),
        )

    def __str__(self) -> str:
        return f"{self.x0},{self.y0},{self.x1},{self.y1}"


@dataclass
class Image2D:
    """
    二维双精度图像。samples 形状为 (height, width)，行优先。

    @param samples 像素值，构造时转换为 C 连续的 float64
    @param validRegion 有效区域；None 表示整幅图像都有效
    """
    samples: np.ndarray
    validRegion: ValidRegion | None = None

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.samples, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ParameterError(f"图像必须是非空二维数组，实际形状 {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("图像包含非有限值 (NaN/Inf)")
        self.samples = arr

    @property
    def width(self) -> int:
        return int(self.samples.shape[1])

    @property
    def height(self) -> int:
        return int(self.samples.shape[0])

    @property
    def region(self) -> ValidRegion:
        """有效区域；未标注时为整幅图像"""
        if self.validRegion is None:
            return ValidRegion(0, 0, self.width, self.height)
        return self.validRegion

    def validView(self) -> np.ndarray:
        """有效区域内的像素视图"""
        rows, cols = self.region.slices()
        return self.samples[rows, cols]


@dataclass(frozen=True)
class PreIntegratedImage:
    """
    全局预积分图像 g_b。

    data 覆盖原图加四周边距；原图像素 (k1, k2) 位于 data[top + k2, left + k1]。
    预积分只做一次，之后所有像素的局部化都只读访问它。
    """
    data: np.ndarray
    width: int
    height: int
    left: int
    top: int
    right: int
    bottom: int
    maxScale: tuple[float, float, float, float]
    provenance: tuple[float, float, float, float]
    meanRemoved: float = 0.0

    @property
    def paddedWidth(self) -> int:
        return int(self.data.shape[1])

    @property
    def paddedHeight(self) -> int:
        return int(self.data.shape[0])
