"""
椭圆自适应滤波 — 尺度向量与尺度图数据模型

ScaleVector4 是驱动核形状的四方向尺度 a = (a1, a2, a3, a4)；
ScaleMap 是逐像素的尺度向量场 a: Z² → R⁴₊，构造时即校验不变量。
"""
from dataclasses import dataclass

import numpy as np

from src.utils.error_handler import ParameterError

# NOTE: 尺度下限。网格权重 α = (a1·a2·a3·a4)⁻¹，尺度过小会导致权重溢出
A_MIN = 0.1


@dataclass(frozen=True)
class ScaleVector4:
    """
    四方向尺度向量，方向依次为 0、π/4、π/2、3π/4。

    @param clamped 由协方差反解得到且有分量被 aMin 截断时为 True，
                   说明实际协方差只是目标的近似
    """
    a1: float
    a2: float
    a3: float
    a4: float
    clamped: bool = False

    def __post_init__(self) -> None:
        values = (self.a1, self.a2, self.a3, self.a4)
        if not all(np.isfinite(v) and v > 0 for v in values):
            raise ParameterError(f"尺度向量分量必须为正有限值: {values}")

    @classmethod
    def fromSequence(cls, values, clamped: bool = False) -> "ScaleVector4":
        items = [float(v) for v in values]
        if len(items) != 4:
            raise ParameterError(f"尺度向量必须有 4 个分量，实际 {len(items)} 个")
        return cls(*items, clamped=clamped)

    def asArray(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3, self.a4], dtype=np.float64)

    def __iter__(self):
        return iter((self.a1, self.a2, self.a3, self.a4))

    def __str__(self) -> str:
        return ",".join(f"{v:.6g}" for v in self)


@dataclass
class ScaleMap:
    """
    逐像素尺度图。scales 形状为 (height, width, 4)，float64。

    不变量：所有分量有限且 ≥ aMin。
    """
    scales: np.ndarray
    aMin: float = A_MIN

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.scales, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 4 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ParameterError(f"尺度图形状必须为 (H, W, 4)，实际 {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("尺度图包含非有限值")
        low = float(arr.min())
        if low < self.aMin:
            raise ParameterError(f"尺度图最小分量 {low:.6g} 低于下限 aMin={self.aMin:g}")
        self.scales = arr

    @property
    def width(self) -> int:
        return int(self.scales.shape[1])

    @property
    def height(self) -> int:
        return int(self.scales.shape[0])

    def at(self, k1: int, k2: int) -> ScaleVector4:
        """像素 (k1 列, k2 行) 处的尺度向量"""
        return ScaleVector4.fromSequence(self.scales[k2, k1])

    def maxScale(self) -> np.ndarray:
        """逐方向最大尺度，用于确定预积分边距"""
        return self.scales.reshape(-1, 4).max(axis=0)

    def isConstant(self) -> bool:
        flat = self.scales.reshape(-1, 4)
        return bool(np.all(flat == flat[0]))

    def matches(self, width: int, height: int) -> bool:
        return self.width == width and self.height == height


@dataclass(frozen=True)
class ClampReport:
    """
    尺度图构造报告。

    infeasibleMask 标记协方差被投影到可行域的像素，
    aMinMask 标记有尺度分量被 aMin 截断的像素。
    """
    infeasibleMask: np.ndarray
    aMinMask: np.ndarray

    @property
    def infeasibleCount(self) -> int:
        return int(np.count_nonzero(self.infeasibleMask))

    @property
    def aMinCount(self) -> int:
        return int(np.count_nonzero(self.aMinMask))

    @property
    def clampedCount(self) -> int:
        """任一原因被近似的像素数"""
        return int(np.count_nonzero(self.infeasibleMask | self.aMinMask))

    @property
    def isEmpty(self) -> bool:
        return self.clampedCount == 0
