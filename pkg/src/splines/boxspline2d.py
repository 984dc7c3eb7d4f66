"""
径向均匀盒样条核 — 构造、求值、矩、协方差反解与高斯收敛分析

方向 θ_k = (k−1)π/N，r_k = (cos θ_k, sin θ_k)；
坐标约定 x1 为列方向，x2 为行方向，数组按 [行, 列] 存储。
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from src.models.scale_map import A_MIN, ScaleVector4
from src.utils.error_handler import (
    BudgetExceededError,
    FeasibilityError,
    ParameterError,
)

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

# NOTE: 与整数格点兼容的固定尺度 b，对应 ZP 元
ZP_SCALES = (1.0, SQRT2, 1.0, SQRT2)

# NOTE: ZP 元支撑的八边形落在 [−1.5, 1.5]² 内
ZP_RADIUS = 1.5

DEFAULT_KERNEL_CELL_BUDGET = 16_000_000


def directions(n: int) -> np.ndarray:
    """N 个均匀分布方向的单位向量，形状 (N, 2)"""
    theta = np.arange(n) * math.pi / n
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)


def _checkScales(n: int, a) -> np.ndarray:
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ParameterError(f"方向数 N 必须为 ≥ 2 的整数，实际 {n}")
    scales = np.asarray(list(a), dtype=np.float64)
    if scales.shape != (int(n),):
        raise ParameterError(f"尺度向量长度 {scales.size} 与方向数 N={n} 不一致")
    if not np.all(np.isfinite(scales)) or np.any(scales <= 0):
        raise ParameterError(f"尺度向量分量必须为正有限值: {scales}")
    return scales


# ==================================================
# 精确求值 (N = 4)
# ==================================================

def _rampSquare(t: np.ndarray) -> np.ndarray:
    clipped = np.maximum(t, 0.0)
    return 0.5 * clipped * clipped


def _areaBelowDiagonal(u0, u1, v0, v1, s):
    """矩形 [u0,u1]×[v0,v1] 落在半平面 u + v ≤ s 内的面积"""
    return (
        _rampSquare(s - u0 - v0)
        - _rampSquare(s - u1 - v0)
        - _rampSquare(s - u0 - v1)
        + _rampSquare(s - u1 - v1)
    )


def boxSpline4Eval(a, x1, x2):
    """
    精确求四方向径向均匀盒样条 β⁴_a(x)。

    β⁴_a 是轴向矩形 (a1 × a3) 与 45° 旋转矩形 (a2 × a4) 两个均匀密度的卷积，
    因此 β⁴_a(x) = α·area(A_x ∩ B)，α = (a1·a2·a3·a4)⁻¹，
    A_x 为以 x 为中心的轴向矩形，B = {|u+v| ≤ a2/√2, |u−v| ≤ a4/√2}。

    @param a 四方向尺度
    @param x1 列方向坐标（标量或数组）
    @param x2 行方向坐标（与 x1 同形状）
    """
    a1, a2, a3, a4 = (float(v) for v in a)
    if min(a1, a2, a3, a4) <= 0:
        raise ParameterError(f"尺度向量分量必须为正: {(a1, a2, a3, a4)}")
    scalar = np.ndim(x1) == 0 and np.ndim(x2) == 0
    p1, p2 = np.broadcast_arrays(np.asarray(x1, dtype=np.float64), np.asarray(x2, dtype=np.float64))

    # 偶对称: 统一折到上半平面，保证 β(x) 与 β(−x) 逐位相同
    flip = (p2 < 0) | ((p2 == 0) & (p1 < 0))
    p1 = np.where(flip, -p1, p1)
    p2 = np.where(flip, -p2, p2)

    diag2 = a2 / SQRT2
    diag4 = a4 / SQRT2
    c = 0.5 * (diag2 + diag4)

    u0 = np.clip(p1 - 0.5 * a1, -c, c)
    u1 = np.clip(p1 + 0.5 * a1, -c, c)
    v0 = np.clip(p2 - 0.5 * a3, -c, c)
    v1 = np.clip(p2 + 0.5 * a3, -c, c)
    area = (u1 - u0) * (v1 - v0)

    # 从包围盒 [−c, c]² 中扣除四个互不相交的角三角形
    inside = (
        _areaBelowDiagonal(u0, u1, v0, v1, diag2)
        - _areaBelowDiagonal(u0, u1, v0, v1, -diag2)
        + _areaBelowDiagonal(-u1, -u0, v0, v1, diag4)
        - _areaBelowDiagonal(-u1, -u0, v0, v1, -diag4)
        - area
    )
    values = np.maximum(inside, 0.0) / (a1 * a2 * a3 * a4)
    if scalar:
        return float(values)
    return values


def zpEval(x1, x2):
    """ZP 元 β⁴_b(x)，b = (1, √2, 1, √2)，单位积分，原点取值 0.5"""
    return boxSpline4Eval(ZP_SCALES, x1, x2)


def supportHalfExtents(n: int, a) -> tuple[float, float]:
    """支撑 (zonotope) 在 x1、x2 方向的半宽"""
    scales = _checkScales(n, a)
    dirs = directions(int(n))
    return (
        float(0.5 * np.sum(scales * np.abs(dirs[:, 0]))),
        float(0.5 * np.sum(scales * np.abs(dirs[:, 1]))),
    )


# ==================================================
# 数值核网格 (任意 N)
# ==================================================

@dataclass(frozen=True)
class KernelGrid:
    """
    以原点为中心的核函数网格。values[i, j] 对应坐标
    x1 = (j − centre[1])·h, x2 = (i − centre[0])·h。
    """
    values: np.ndarray
    h: float
    centre: tuple[int, int]

    @property
    def x1(self) -> np.ndarray:
        return (np.arange(self.values.shape[1]) - self.centre[1]) * self.h

    @property
    def x2(self) -> np.ndarray:
        return (np.arange(self.values.shape[0]) - self.centre[0]) * self.h

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.h * self.h)

    def valueAt(self, x1, x2) -> np.ndarray:
        """双线性插值取值，网格外为 0"""
        rows = np.asarray(x2, dtype=np.float64) / self.h + self.centre[0]
        cols = np.asarray(x1, dtype=np.float64) / self.h + self.centre[1]
        coords = np.stack([np.ravel(rows), np.ravel(cols)])
        sampled = ndimage.map_coordinates(self.values, coords, order=1, mode="constant", cval=0.0)
        return sampled.reshape(np.shape(rows))


def _splatSegment(shape: tuple[int, int], centre: tuple[int, int], length: float,
                  direction: np.ndarray, hf: float) -> np.ndarray:
    """把长度为 length、方向为 direction 的线段核以中点采样 + 双线性散布栅格化"""
    count = max(8, int(math.ceil(8.0 * length / hf)))
    t = (-0.5 + (np.arange(count) + 0.5) / count) * length
    cols = centre[1] + t * direction[0] / hf
    rows = centre[0] + t * direction[1] / hf

    c0 = np.floor(cols).astype(np.int64)
    r0 = np.floor(rows).astype(np.int64)
    fc = cols - c0
    fr = rows - r0
    mass = 1.0 / count

    grid = np.zeros(shape, dtype=np.float64)
    np.add.at(grid, (r0, c0), mass * (1 - fr) * (1 - fc))
    np.add.at(grid, (r0, c0 + 1), mass * (1 - fr) * fc)
    np.add.at(grid, (r0 + 1, c0), mass * fr * (1 - fc))
    np.add.at(grid, (r0 + 1, c0 + 1), mass * fr * fc)
    return grid


def kernelGridEval(
    n: int,
    a,
    h: float = 1.0 / 16.0,
    upsample: int = 4,
    cellBudget: int = DEFAULT_KERNEL_CELL_BUDGET,
) -> KernelGrid:
    """
    数值构造 β^N_a 的核网格。

    在 h/upsample 的细网格上栅格化各方向线段核并逐个卷积，
    再抽样到分辨率 h，归一化使 sum × h² = 1。
    双线性散布在每个轴上引入约 (h/upsample)²/6 × N 量级的额外方差。

    @param n 方向数 N (≥ 2)
    @param a 尺度向量（长度 N）
    @param h 输出分辨率 (≤ 1/8)
    @param upsample 细网格倍数
    @param cellBudget 细网格单元数上限，超出抛出 BudgetExceededError
    """
    scales = _checkScales(n, a)
    if not (0 < h <= 0.125):
        raise ParameterError(f"核网格分辨率 h={h} 必须在 (0, 1/8] 之间")
    if int(upsample) < 1:
        raise ParameterError(f"上采样倍数必须 ≥ 1，实际 {upsample}")
    upsample = int(upsample)
    hf = h / upsample
    extX, extY = supportHalfExtents(n, scales)

    # 半宽取 upsample 的整数倍，使粗网格中心与细网格中心重合
    guard = int(n) + 2
    halfX = upsample * int(math.ceil((extX / hf + guard) / upsample))
    halfY = upsample * int(math.ceil((extY / hf + guard) / upsample))
    shape = (2 * halfY + 1, 2 * halfX + 1)
    cells = shape[0] * shape[1]
    if cells > cellBudget:
        raise BudgetExceededError("核函数网格", cells, cellBudget)

    centre = (halfY, halfX)
    dirs = directions(int(n))
    fine = None
    for length, direction in zip(scales, dirs):
        segment = _splatSegment(shape, centre, float(length), direction, hf)
        fine = segment if fine is None else signal.fftconvolve(fine, segment, mode="same")

    coarse = fine[::upsample, ::upsample] / (hf * hf)
    coarse = 0.5 * (coarse + coarse[::-1, ::-1])
    coarse = np.where(np.abs(coarse) < 1e-13 * coarse.max(), 0.0, coarse)
    coarse /= coarse.sum() * h * h

    logger.debug(
        "🧩 核网格构造完成: N=%d, 网格 %dx%d (细网格 %d 单元), h=%g",
        n, coarse.shape[1], coarse.shape[0], cells, h,
    )
    return KernelGrid(values=coarse, h=float(h), centre=(halfY // upsample, halfX // upsample))


def kernelMoments(grid: KernelGrid) -> tuple[np.ndarray, np.ndarray]:
    """
    核网格的数值一阶矩与二阶中心矩。

    @returns (mean (2,), covariance (2, 2))，分量顺序为 (x1, x2)
    """
    x1, x2 = np.meshgrid(grid.x1, grid.x2)
    weights = grid.values / grid.values.sum()
    mean = np.array([np.sum(weights * x1), np.sum(weights * x2)])
    d1 = x1 - mean[0]
    d2 = x2 - mean[1]
    cov = np.array([
        [np.sum(weights * d1 * d1), np.sum(weights * d1 * d2)],
        [np.sum(weights * d1 * d2), np.sum(weights * d2 * d2)],
    ])
    return mean, cov


# ==================================================
# 协方差
# ==================================================

def covariance(n: int, a) -> np.ndarray:
    """β^N_a 的精确二阶矩 Σ_k (a_k²/12)·r_k r_kᵀ"""
    scales = _checkScales(n, a)
    dirs = directions(int(n))
    weights = scales * scales / 12.0
    return np.einsum("k,ki,kj->ij", weights, dirs, dirs)


def scalesFromMoments(cxx, cyy, cxy, aMin: float = A_MIN) -> tuple[np.ndarray, np.ndarray]:
    """
    向量化的 N=4 协方差反解，调用方负责保证 |Cxy| ≤ min(Cxx, Cyy)。

    取 S = q + t = clamp((Cxx+Cyy)/2, 2|Cxy|, 2·min(Cxx,Cyy))，
    再由 p = Cxx − S/2, r = Cyy − S/2, q = (S + 2Cxy)/2, t = (S − 2Cxy)/2 得到 a_k = √(12·value)。

    @returns (scales (..., 4), aMinMask)，aMinMask 标记有分量被截断到 aMin 的位置
    """
    cxx = np.asarray(cxx, dtype=np.float64)
    cyy = np.asarray(cyy, dtype=np.float64)
    cxy = np.asarray(cxy, dtype=np.float64)
    upper = 2.0 * np.minimum(cxx, cyy)
    lower = np.minimum(2.0 * np.abs(cxy), upper)
    total = np.clip(0.5 * (cxx + cyy), lower, upper)

    moments = np.stack([
        cxx - 0.5 * total,
        0.5 * (total + 2.0 * cxy),
        cyy - 0.5 * total,
        0.5 * (total - 2.0 * cxy),
    ], axis=-1)
    raw = np.sqrt(12.0 * np.maximum(moments, 0.0))
    clampedMask = np.any(raw < aMin, axis=-1)
    return np.maximum(raw, aMin), clampedMask


def scalesFromCovariance(cov, aMin: float = A_MIN) -> ScaleVector4:
    """
    把目标协方差反解为四方向尺度向量。

    @param cov 2×2 对称正定矩阵，顺序 (x1, x2)
    @param aMin 分量下限；截断时结果的 clamped 标志为 True
    """
    c = np.asarray(cov, dtype=np.float64)
    if c.shape != (2, 2) or not np.all(np.isfinite(c)):
        raise ParameterError(f"协方差必须是有限的 2×2 矩阵，实际形状 {c.shape}")
    cxx, cyy = float(c[0, 0]), float(c[1, 1])
    cxy = 0.5 * (float(c[0, 1]) + float(c[1, 0]))
    if abs(c[0, 1] - c[1, 0]) > 1e-12 * max(abs(cxx), abs(cyy), 1.0):
        raise ParameterError("协方差矩阵不对称")
    if cxx <= 0 or cyy <= 0 or cxx * cyy - cxy * cxy <= 0:
        raise ParameterError(
            f"协方差退化或非正定 (Cxx={cxx:.6g}, Cyy={cyy:.6g}, Cxy={cxy:.6g})，无法用正尺度表示"
        )

    maxAbsCxy = min(cxx, cyy)
    if abs(cxy) > maxAbsCxy * (1.0 + 1e-12):
        raise FeasibilityError(cxy, maxAbsCxy)

    scales, clampedMask = scalesFromMoments(cxx, cyy, cxy, aMin)
    clamped = bool(clampedMask)
    if clamped:
        logger.warning("⚠️ 尺度分量被截断到 aMin=%g，实际协方差只是近似", aMin)
    return ScaleVector4.fromSequence(scales, clamped=clamped)


# ==================================================
# 高斯收敛
# ==================================================

def gaussianLimitScales(n: int, sigma: float) -> np.ndarray:
    """协方差为 σ²·I 的等尺度向量，分量 σ·√(24/N)"""
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ParameterError(f"方向数 N 必须为 ≥ 2 的整数，实际 {n}")
    if not sigma > 0:
        raise ParameterError(f"σ 必须为正，实际 {sigma}")
    return np.full(int(n), sigma * math.sqrt(24.0 / n))


def gaussianDistance(
    n: int,
    sigma: float,
    h: float = 1.0 / 16.0,
    upsample: int = 4,
    cellBudget: int = DEFAULT_KERNEL_CELL_BUDGET,
) -> float:
    """等尺度 β^N 核网格与同协方差二维高斯的 L∞ 距离"""
    if not (0 < h <= 1.0 / 16.0):
        raise ParameterError(f"高斯距离分辨率 h={h} 必须在 (0, 1/16] 之间")
    grid = kernelGridEval(n, gaussianLimitScales(n, sigma), h, upsample, cellBudget)
    x1, x2 = np.meshgrid(grid.x1, grid.x2)
    gauss = np.exp(-(x1 * x1 + x2 * x2) / (2.0 * sigma * sigma)) / (2.0 * math.pi * sigma * sigma)
    distance = float(np.max(np.abs(grid.values - gauss)))
    logger.debug("📐 高斯距离: N=%d, σ=%g, h=%g → %.3e", n, sigma, h, distance)
    return distance
