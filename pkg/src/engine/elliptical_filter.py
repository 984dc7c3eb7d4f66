"""
椭圆自适应滤波引擎 (N = 4)

流程:
1. 全局预积分: 对零延拓图像做四遍固定尺度游程求和，得到 g_b（只做一次）
2. 逐像素局部化: s[m] = Σ_i h[i]·g_I(m + τ − x_i)，16 个网格顶点，
   每个顶点用 4×4 个 ZP 插值抽头，每像素运算量固定，与尺度无关

逐像素路径 (filterImage) 与常数尺度快速路径 (filterConstant) 共用同一套
偏移与权重计算，对常数尺度图两者输出逐位相同。
"""
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from src.models.image import Image2D, PreIntegratedImage, ValidRegion
from src.models.scale_map import ScaleMap, ScaleVector4
from src.splines.boxspline2d import SQRT2, ZP_SCALES, zpEval
from src.splines.ops2d import RSStep, meshOffsets, meshSigns, preintegrationSteps
from src.utils.error_handler import (
    BudgetExceededError,
    OutOfDomainError,
    ParameterError,
)

logger = logging.getLogger(__name__)

DEFAULT_PREINTEGRATION_CELL_BUDGET = 64_000_000

# ZP 插值在每个轴上的抽头偏移；frac ∈ [0, 1) 时 ZP 支撑只覆盖这 4 个整数点
ZP_TAPS = (-1, 0, 1, 2)
MESH_VERTICES = 16

# 每像素: 16 顶点 × 16 抽头乘加，16 次顶点合并，1 次乘 α
OPS_PER_PIXEL = MESH_VERTICES * len(ZP_TAPS) ** 2 + MESH_VERTICES + 1

# NOTE: 逐像素路径每个线程任务处理的像素数上限，控制临时数组内存
_BAND_PIXELS = 1 << 15

_SIGNS = meshSigns()


class OpCounter:
    """
    局部化算术运算计数器。
    计数只依赖像素数，用于验证每像素代价与尺度无关。
    """

    def __init__(self) -> None:
        self.ops = 0
        self.pixels = 0
        self._lock = threading.Lock()

    def add(self, ops: int, pixels: int = 0) -> None:
        with self._lock:
            self.ops += int(ops)
            self.pixels += int(pixels)

    def perPixel(self) -> float:
        return self.ops / self.pixels if self.pixels else 0.0

    def reset(self) -> None:
        with self._lock:
            self.ops = 0
            self.pixels = 0


def _asScaleArray(a) -> np.ndarray:
    if isinstance(a, ScaleVector4):
        return a.asArray()
    arr = np.asarray(list(a), dtype=np.float64)
    if arr.shape != (4,) or not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ParameterError(f"尺度向量必须为 4 个正有限值: {arr}")
    return arr


def kernelHalfExtents(scales) -> tuple[np.ndarray, np.ndarray]:
    """
    β⁴_a 支撑的半宽 (extX, extY)，逐元素计算。

    @param scales 形状 (..., 4)
    """
    s = np.asarray(scales, dtype=np.float64)
    diagonal = (s[..., 1] + s[..., 3]) / SQRT2
    return 0.5 * (s[..., 0] + diagonal), 0.5 * (s[..., 2] + diagonal)


def preintegrationMargins(maxScale) -> tuple[int, int, int, int]:
    """
    预积分边距 (left, top, right, bottom)。

    网格顶点偏移 τ − x_i 在 x1 方向落在 [−extX − ½, extX − ½]，
    在 x2 方向落在 [−extY − 3/2, extY − 3/2]，再加上 ZP 抽头 −1..2 与 1 格余量。
    """
    extX, extY = kernelHalfExtents(_asScaleArray(maxScale))
    extX, extY = float(extX), float(extY)
    return (
        math.ceil(extX + 2.5) + 1,
        math.ceil(extY + 3.5) + 1,
        math.ceil(extX + 1.5) + 1,
        math.ceil(extY + 0.5) + 1,
    )


def validRegionFor(width: int, height: int, maxScale) -> ValidRegion:
    """核支撑完全落在原图内的像素矩形"""
    extX, extY = kernelHalfExtents(_asScaleArray(maxScale))
    ex, ey = math.ceil(float(extX)), math.ceil(float(extY))
    return ValidRegion(ex, ey, width - ex, height - ey)


def _interiorMask(width: int, height: int, scales: np.ndarray) -> np.ndarray:
    """逐像素判断自身核支撑是否落在原图内。scales 形状 (H·W, 4)"""
    extX, extY = kernelHalfExtents(scales)
    ex = np.ceil(extX)
    ey = np.ceil(extY)
    k2, k1 = np.divmod(np.arange(width * height), width)
    return (k1 >= ex) & (k1 <= width - 1 - ex) & (k2 >= ey) & (k2 <= height - 1 - ey)


# ==================================================
# 全局预积分
# ==================================================

def runningSumPass(arr: np.ndarray, step: RSStep) -> np.ndarray:
    """
    单遍方向游程求和 y[k] = y[k − step] + gain·x[k]，零初始条件。

    支持的步长: (1,0) 行内累加，(0,1) 列内累加，(±1,1) 逐行沿对角线累加。
    """
    dx, dy = step.step
    scaled = step.gain * np.asarray(arr, dtype=np.float64)
    if (dx, dy) == (1, 0):
        return np.cumsum(scaled, axis=1)
    if (dx, dy) == (0, 1):
        return np.cumsum(scaled, axis=0)
    if dy != 1 or dx not in (1, -1):
        raise ParameterError(f"不支持的游程求和步长 {step.step}")

    out = scaled.copy()
    for row in range(1, out.shape[0]):
        if dx == 1:
            out[row, 1:] += out[row - 1, :-1]
        else:
            out[row, :-1] += out[row - 1, 1:]
    return out


def preintegrate(
    image: Image2D,
    maxScale,
    cellBudget: int = DEFAULT_PREINTEGRATION_CELL_BUDGET,
    meanValue: float = 0.0,
) -> PreIntegratedImage:
    """
    对零延拓图像做四遍游程求和，得到 g_b。

    前三遍在宽度 Wp + Hp − 1 的加宽数组上进行，使第四遍沿反对角线
    向右上回溯时读到的都是精确的零延拓结果，最后裁回 Wp 列。

    @param image 输入图像
    @param maxScale 之后要用的尺度图逐方向上界，决定边距
    @param cellBudget 加宽数组单元数上限
    @param meanValue 预积分前从原图像素中减去的均值
    """
    scaleBound = _asScaleArray(maxScale)
    left, top, right, bottom = preintegrationMargins(scaleBound)
    paddedWidth = image.width + left + right
    paddedHeight = image.height + top + bottom
    wide = paddedWidth + paddedHeight - 1
    cells = paddedHeight * wide
    if cells > cellBudget:
        raise BudgetExceededError("预积分图像", cells, cellBudget)

    work = np.zeros((paddedHeight, wide), dtype=np.float64)
    work[top:top + image.height, left:left + image.width] = image.samples - meanValue

    steps = preintegrationSteps()
    for step in steps[:3]:
        work = runningSumPass(work, step)
    data = np.ascontiguousarray(runningSumPass(work, steps[3])[:, :paddedWidth])

    if not np.all(np.isfinite(data)):
        raise ParameterError("预积分结果出现非有限值")

    logger.debug(
        "🧮 预积分完成: 原图 %dx%d → 填充 %dx%d (边距 L%d T%d R%d B%d)",
        image.width, image.height, paddedWidth, paddedHeight, left, top, right, bottom,
    )
    return PreIntegratedImage(
        data=data,
        width=image.width,
        height=image.height,
        left=left,
        top=top,
        right=right,
        bottom=bottom,
        maxScale=tuple(float(v) for v in scaleBound),
        provenance=ZP_SCALES,
        meanRemoved=float(meanValue),
    )


# ==================================================
# ZP 插值
# ==================================================

def _tapWindowOutside(pre: PreIntegratedImage, rows0, cols0) -> np.ndarray:
    """逐元素判断抽头窗口 [base−1, base+2] 是否越出填充数组（上下左右四侧）"""
    rows0 = np.asarray(rows0)
    cols0 = np.asarray(cols0)
    return (
        (rows0 - 1 < 0) | (rows0 + 2 >= pre.paddedHeight)
        | (cols0 - 1 < 0) | (cols0 + 2 >= pre.paddedWidth)
    )


def _checkTapWindow(pre: PreIntegratedImage, rows0, cols0, offset) -> None:
    """抽头窗口 [base−1, base+2] 必须落在填充数组内"""
    if np.any(_tapWindowOutside(pre, rows0, cols0)):
        raise OutOfDomainError(offset)


def _zpGather(data: np.ndarray, rows0, cols0, frac1, frac2) -> np.ndarray:
    """Σ_j zp(frac − j)·g[base + j]，抽头按 (行, 列) 字典序累加"""
    acc = np.zeros(np.shape(frac1), dtype=np.float64)
    for jy in ZP_TAPS:
        for jx in ZP_TAPS:
            weight = zpEval(frac1 - jx, frac2 - jy)
            acc = acc + weight * data[rows0 + jy, cols0 + jx]
    return acc


def zpInterpolateMany(pre: PreIntegratedImage, x1, x2) -> np.ndarray:
    """
    g_I(x) = Σ_k g_b[k]·zp(x − k) 的向量化版本。

    @param x1 列坐标（原图坐标系，可为分数）
    @param x2 行坐标
    """
    p1 = np.atleast_1d(np.asarray(x1, dtype=np.float64))
    p2 = np.atleast_1d(np.asarray(x2, dtype=np.float64))
    base1 = np.floor(p1)
    base2 = np.floor(p2)
    rows0 = pre.top + base2.astype(np.int64)
    cols0 = pre.left + base1.astype(np.int64)
    _checkTapWindow(pre, rows0, cols0, (float(p1.flat[0]), float(p2.flat[0])))
    return _zpGather(pre.data, rows0, cols0, p1 - base1, p2 - base2)


def zpInterpolate(pre: PreIntegratedImage, x1: float, x2: float) -> float:
    """在单个分数坐标处做 ZP 插值"""
    return float(zpInterpolateMany(pre, [x1], [x2])[0])


# ==================================================
# 局部化
# ==================================================

def localizeMany(
    pre: PreIntegratedImage,
    k1: np.ndarray,
    k2: np.ndarray,
    scales: np.ndarray,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """
    逐像素局部化。

    @param k1 像素列坐标 (P,)
    @param k2 像素行坐标 (P,)
    @param scales 各像素尺度向量 (P, 4)
    @returns 滤波值 (P,)
    """
    k1 = np.asarray(k1, dtype=np.int64)
    k2 = np.asarray(k2, dtype=np.int64)
    positions, shift, alpha = meshOffsets(scales)
    total = np.zeros(k1.shape, dtype=np.float64)

    for vertex in range(MESH_VERTICES):
        offset = shift - positions[:, vertex, :]
        base = np.floor(offset)
        frac = offset - base
        rows0 = pre.top + k2 + base[:, 1].astype(np.int64)
        cols0 = pre.left + k1 + base[:, 0].astype(np.int64)
        outside = _tapWindowOutside(pre, rows0, cols0)
        if np.any(outside):
            bad = int(np.flatnonzero(outside)[0])
            raise OutOfDomainError(
                (float(offset[bad, 0]), float(offset[bad, 1])),
                f"像素 ({int(k1[bad])}, {int(k2[bad])}) 的网格顶点偏移 "
                f"({offset[bad, 0]:.4g}, {offset[bad, 1]:.4g}) 超出预积分边距",
            )
        values = _zpGather(pre.data, rows0, cols0, frac[:, 0], frac[:, 1])
        total = total + _SIGNS[vertex] * values

    if counter is not None:
        counter.add(OPS_PER_PIXEL * k1.size, k1.size)
    return alpha * total


def localize(pre: PreIntegratedImage, k1: int, k2: int, a, counter: OpCounter | None = None) -> float:
    """单像素局部化: s[m] = Σ_i h[i]·g_I(m + τ − x_i)"""
    scales = _asScaleArray(a)[None, :]
    return float(localizeMany(pre, np.array([k1]), np.array([k2]), scales, counter)[0])


def _localizeConstantRows(
    pre: PreIntegratedImage,
    scales: np.ndarray,
    rowStart: int,
    rowStop: int,
    counter: OpCounter | None,
) -> np.ndarray:
    """常数尺度下对行区间 [rowStart, rowStop) 做整块切片局部化"""
    positions, shift, alpha = meshOffsets(scales[None, :])
    rows = rowStop - rowStart
    width = pre.width
    total = np.zeros((rows, width), dtype=np.float64)

    for vertex in range(MESH_VERTICES):
        offset = shift - positions[:, vertex, :]
        base = np.floor(offset)
        frac = offset - base
        row0 = pre.top + rowStart + int(base[0, 1])
        col0 = pre.left + int(base[0, 0])
        _checkTapWindow(
            pre, [row0, row0 + rows - 1], [col0, col0 + width - 1],
            (float(offset[0, 0]), float(offset[0, 1])),
        )
        acc = np.zeros((rows, width), dtype=np.float64)
        for jy in ZP_TAPS:
            for jx in ZP_TAPS:
                weight = zpEval(frac[:, 0] - jx, frac[:, 1] - jy)
                block = pre.data[row0 + jy:row0 + jy + rows, col0 + jx:col0 + jx + width]
                acc = acc + weight * block
        total = total + _SIGNS[vertex] * acc

    if counter is not None:
        counter.add(OPS_PER_PIXEL * rows * width, rows * width)
    return alpha * total


def _rowBands(height: int, width: int) -> list[tuple[int, int]]:
    rowsPerBand = max(1, _BAND_PIXELS // max(width, 1))
    return [(start, min(start + rowsPerBand, height)) for start in range(0, height, rowsPerBand)]


def _runBands(task, bands: list[tuple[int, int]], threads: int) -> None:
    """按行带并行执行；各行带写入互不相交的输出区域"""
    if threads > 1 and len(bands) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            list(executor.map(lambda band: task(*band), bands))
    else:
        for band in bands:
            task(*band)


# ==================================================
# 直流增益与均值减除
# ==================================================

def dcGainMany(
    scales: np.ndarray,
    maxScale,
    cellBudget: int = DEFAULT_PREINTEGRATION_CELL_BUDGET,
) -> np.ndarray:
    """
    在常数 1 的小图块中心测量 β⁴_a 的直流增益 Σ_k β⁴_a(k − m)。

    图块尺寸只由 maxScale 决定。
    """
    bound = _asScaleArray(maxScale)
    extX, extY = kernelHalfExtents(bound)
    halfX = math.ceil(float(extX)) + 1
    halfY = math.ceil(float(extY)) + 1
    tile = Image2D(np.ones((2 * halfY + 1, 2 * halfX + 1)))
    pre = preintegrate(tile, bound, cellBudget)
    count = int(np.asarray(scales).shape[0])
    return localizeMany(pre, np.full(count, halfX), np.full(count, halfY), np.asarray(scales, dtype=np.float64))


def dcGain(a) -> float:
    """单个尺度向量的直流增益（理论值 1）"""
    scales = _asScaleArray(a)
    return float(dcGainMany(scales[None, :], scales)[0])


def _dcField(
    width: int,
    height: int,
    scalesFlat: np.ndarray,
    maxScale: np.ndarray,
    boundaryValues,
    cellBudget: int,
) -> np.ndarray:
    """
    逐像素直流增益 D：内部像素取小图块测得的增益，
    边界像素取原图指示函数 1_Ω 的滤波值（由 boundaryValues 回调给出）。
    """
    interior = _interiorMask(width, height, scalesFlat)
    field = np.empty(width * height, dtype=np.float64)
    if np.any(interior):
        unique, inverse = np.unique(scalesFlat[interior], axis=0, return_inverse=True)
        gains = dcGainMany(unique, maxScale, cellBudget)
        field[interior] = gains[np.reshape(inverse, -1)]
    if not np.all(interior):
        field[~interior] = boundaryValues(~interior)
    return field.reshape(height, width)


# ==================================================
# 对外接口
# ==================================================

def filterImage(
    image: Image2D,
    scaleMap: ScaleMap,
    threads: int = 1,
    meanSubtract: bool = True,
    cellBudget: int = DEFAULT_PREINTEGRATION_CELL_BUDGET,
    counter: OpCounter | None = None,
) -> Image2D:
    """
    空间可变椭圆滤波: 预积分一次，然后逐像素局部化。

    @param image 输入图像
    @param scaleMap 逐像素尺度图，尺寸必须与图像一致
    @param threads 并行线程数；结果与线程数无关
    @param meanSubtract 预积分前减去均值，局部化后按直流增益加回
    @returns 输出图像，附带有效区域
    """
    if not scaleMap.matches(image.width, image.height):
        raise ParameterError(
            f"尺度图尺寸 {scaleMap.width}x{scaleMap.height} 与图像 {image.width}x{image.height} 不一致"
        )
    width, height = image.width, image.height
    maxScale = scaleMap.maxScale()
    mean = float(np.mean(image.samples)) if meanSubtract else 0.0
    pre = preintegrate(image, maxScale, cellBudget, meanValue=mean)

    scalesFlat = scaleMap.scales.reshape(-1, 4)
    k2, k1 = np.divmod(np.arange(width * height), width)
    out = np.empty(width * height, dtype=np.float64)

    def task(rowStart: int, rowStop: int) -> None:
        sl = slice(rowStart * width, rowStop * width)
        out[sl] = localizeMany(pre, k1[sl], k2[sl], scalesFlat[sl], counter)

    _runBands(task, _rowBands(height, width), threads)
    result = out.reshape(height, width)

    if meanSubtract:
        def boundaryValues(mask: np.ndarray) -> np.ndarray:
            ones = preintegrate(Image2D(np.ones((height, width))), maxScale, cellBudget)
            return localizeMany(ones, k1[mask], k2[mask], scalesFlat[mask])

        dc = _dcField(width, height, scalesFlat, maxScale, boundaryValues, cellBudget)
        result = result + mean * dc

    region = validRegionFor(width, height, maxScale)
    logger.info(
        "🎯 逐像素椭圆滤波完成: %dx%d, 线程 %d, 有效区域 %s", width, height, threads, region,
    )
    return Image2D(result, validRegion=region)


def filterConstant(
    image: Image2D,
    a,
    threads: int = 1,
    meanSubtract: bool = True,
    cellBudget: int = DEFAULT_PREINTEGRATION_CELL_BUDGET,
    counter: OpCounter | None = None,
) -> Image2D:
    """
    常数尺度快速路径。网格与 16 组 ZP 抽头权重只算一次，
    结果与 filterImage(image, constantMap(a)) 逐位相同。
    """
    scales = _asScaleArray(a)
    width, height = image.width, image.height
    mean = float(np.mean(image.samples)) if meanSubtract else 0.0
    pre = preintegrate(image, scales, cellBudget, meanValue=mean)

    result = np.empty((height, width), dtype=np.float64)

    def task(rowStart: int, rowStop: int) -> None:
        result[rowStart:rowStop] = _localizeConstantRows(pre, scales, rowStart, rowStop, counter)

    _runBands(task, _rowBands(height, width), threads)

    if meanSubtract:
        def boundaryValues(mask: np.ndarray) -> np.ndarray:
            ones = preintegrate(Image2D(np.ones((height, width))), scales, cellBudget)
            return _localizeConstantRows(ones, scales, 0, height, None).reshape(-1)[mask]

        scalesFlat = np.broadcast_to(scales, (width * height, 4))
        dc = _dcField(width, height, scalesFlat, scales, boundaryValues, cellBudget)
        result = result + mean * dc

    region = validRegionFor(width, height, scales)
    logger.info(
        "⚡ 常数尺度椭圆滤波完成: %dx%d, a=(%s), 有效区域 %s",
        width, height, ", ".join(f"{v:.4g}" for v in scales), region,
    )
    return Image2D(result, validRegion=region)


def kernelImage(a) -> tuple[Image2D, tuple[int, int]]:
    """
    通过冲激响应采样 β⁴_a。

    @returns (核图像, 中心像素 (列, 行))；样本 [cy + d2, cx + d1] = β⁴_a(d1, d2)
    """
    scales = _asScaleArray(a)
    extX, extY = kernelHalfExtents(scales)
    halfX = math.ceil(float(extX)) + 1
    halfY = math.ceil(float(extY)) + 1
    impulse = np.zeros((2 * halfY + 1, 2 * halfX + 1))
    impulse[halfY, halfX] = 1.0
    response = filterConstant(Image2D(impulse), scales, meanSubtract=False)
    return Image2D(response.samples), (halfX, halfY)
