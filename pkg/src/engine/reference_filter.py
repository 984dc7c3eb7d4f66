"""
暴力参考实现: 逐像素直接计算 s[m] = Σ_k f[k]·β⁴_{a(m)}(k − m)

不使用游程求和、FD 网格或 ZP 插值，只用于小图像上校验引擎。
默认用数值核网格 (kernelGridEval) 取核值，与引擎的闭式 ZP 求值相互独立；
exact=True 时改用闭式求值 boxSpline4Eval。
"""
import functools
import logging
import math

import numpy as np

from src.engine.elliptical_filter import kernelHalfExtents, validRegionFor
from src.models.image import Image2D
from src.models.scale_map import ScaleMap
from src.splines.boxspline2d import (
    DEFAULT_KERNEL_CELL_BUDGET,
    KernelGrid,
    boxSpline4Eval,
    kernelGridEval,
)
from src.utils.error_handler import BudgetExceededError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_PIXEL_BUDGET = 4096
DEFAULT_ORACLE_RES = 1.0 / 16.0


@functools.lru_cache(maxsize=256)
def _cachedGrid(scales: tuple[float, ...], h: float, upsample: int, cellBudget: int) -> KernelGrid:
    """同一尺度向量的核网格只构造一次，跨调用复用"""
    return kernelGridEval(4, scales, h, upsample, cellBudget)


def referenceFilter(
    image: Image2D,
    scaleMap: ScaleMap,
    h: float = DEFAULT_ORACLE_RES,
    exact: bool = False,
    upsample: int = 4,
    cellBudget: int = DEFAULT_KERNEL_CELL_BUDGET,
    pixelBudget: int = DEFAULT_ORACLE_PIXEL_BUDGET,
) -> Image2D:
    """
    暴力参考滤波。

    @param h 数值核网格分辨率 (≤ 1/16)
    @param exact True 时用闭式精确求值 β⁴_a，忽略 h
    @param pixelBudget 图像像素数上限，超出抛出 BudgetExceededError
    """
    if not scaleMap.matches(image.width, image.height):
        raise ParameterError("尺度图尺寸与图像不一致")
    pixels = image.width * image.height
    if pixels > pixelBudget:
        raise BudgetExceededError("参考实现像素数", pixels, pixelBudget)
    if not exact and not (0 < h <= DEFAULT_ORACLE_RES):
        raise ParameterError(f"参考分辨率 h={h} 必须在 (0, 1/16] 之间")

    samples = image.samples
    width, height = image.width, image.height
    used: set[tuple[float, ...]] = set()
    out = np.empty((height, width), dtype=np.float64)

    for k2 in range(height):
        for k1 in range(width):
            scales = scaleMap.scales[k2, k1]
            extX, extY = kernelHalfExtents(scales)
            rx, ry = math.ceil(float(extX)), math.ceil(float(extY))
            c0, c1 = max(0, k1 - rx), min(width, k1 + rx + 1)
            r0, r1 = max(0, k2 - ry), min(height, k2 + ry + 1)
            d1, d2 = np.meshgrid(np.arange(c0, c1) - k1, np.arange(r0, r1) - k2)

            if exact:
                weights = boxSpline4Eval(scales, d1, d2)
            else:
                key = tuple(float(v) for v in scales)
                used.add(key)
                weights = _cachedGrid(key, float(h), int(upsample), int(cellBudget)).valueAt(d1, d2)
            out[k2, k1] = float(np.sum(weights * samples[r0:r1, c0:c1]))

    logger.info(
        "🔍 参考滤波完成: %dx%d, 模式 %s, 核网格 %d 个",
        width, height, "精确" if exact else f"网格 h={h:g}", len(used),
    )
    return Image2D(out, validRegion=validRegionFor(width, height, scaleMap.maxScale()))
