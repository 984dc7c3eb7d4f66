"""
尺度图构造 — 常数图、椭圆参数场与结构张量自适应图

椭圆参数约定: σ1 为主轴标准差，θ 为主轴相对 x1（列方向）的夹角，弧度。
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from src.models.image import Image2D
from src.models.scale_map import A_MIN, ClampReport, ScaleMap
from src.splines.boxspline2d import scalesFromMoments
from src.utils.error_handler import ParameterError

logger = logging.getLogger(__name__)

GRADIENT_STENCILS = ("central", "sobel")


@dataclass(frozen=True)
class StructureTensorField:
    """结构张量导出的逐像素椭圆参数"""
    sigmaAlong: np.ndarray
    sigmaAcross: np.ndarray
    theta: np.ndarray
    coherence: np.ndarray


def constantMap(width: int, height: int, a, aMin: float = A_MIN) -> ScaleMap:
    """所有像素取同一尺度向量的尺度图"""
    if width < 1 or height < 1:
        raise ParameterError(f"尺度图尺寸必须为正: {width}x{height}")
    scales = np.asarray(list(a), dtype=np.float64)
    if scales.shape != (4,):
        raise ParameterError(f"尺度向量必须有 4 个分量，实际 {scales.size} 个")
    return ScaleMap(np.broadcast_to(scales, (height, width, 4)).copy(), aMin=aMin)


def fromEllipseField(sigma1, sigma2, theta, aMin: float = A_MIN) -> tuple[ScaleMap, ClampReport]:
    """
    把逐像素椭圆 (σ1, σ2, θ) 转换为尺度图。

    C = R_θ·diag(σ1², σ2²)·R_θᵀ；|Cxy| 超过 min(Cxx, Cyy) 的像素被投影到可行边界，
    与分量被截断到 aMin 的像素一起记入 ClampReport。

    @param sigma1 主轴标准差，二维数组或可广播的标量
    @param sigma2 次轴标准差
    @param theta 主轴角度（弧度）
    """
    s1, s2, angle = np.broadcast_arrays(
        np.asarray(sigma1, dtype=np.float64),
        np.asarray(sigma2, dtype=np.float64),
        np.asarray(theta, dtype=np.float64),
    )
    if s1.ndim != 2:
        raise ParameterError(f"椭圆参数场必须是二维的，实际维度 {s1.ndim}")
    if not (np.all(np.isfinite(s1)) and np.all(np.isfinite(s2)) and np.all(np.isfinite(angle))):
        raise ParameterError("椭圆参数场包含非有限值")
    if np.any(s1 <= 0) or np.any(s2 <= 0):
        raise ParameterError("椭圆标准差必须为正")

    c, s = np.cos(angle), np.sin(angle)
    v1, v2 = s1 * s1, s2 * s2
    cxx = v1 * c * c + v2 * s * s
    cyy = v1 * s * s + v2 * c * c
    cxy = (v1 - v2) * s * c

    limit = np.minimum(cxx, cyy)
    infeasible = np.abs(cxy) > limit * (1.0 + 1e-12)
    cxy = np.clip(cxy, -limit, limit)

    scales, aMinMask = scalesFromMoments(cxx, cyy, cxy, aMin)
    report = ClampReport(infeasibleMask=infeasible, aMinMask=aMinMask)
    if not report.isEmpty:
        logger.warning(
            "⚠️ 尺度图有 %d 个像素被近似 (不可行协方差 %d, aMin 截断 %d)",
            report.clampedCount, report.infeasibleCount, report.aMinCount,
        )
    return ScaleMap(scales, aMin=aMin), report


def structureTensorField(
    image: Image2D,
    smoothing: float = 1.0,
    gradient: str = "central",
    sigmaBase: float = 1.5,
    gain: float = 2.0,
    epsilon: float = 1e-12,
) -> StructureTensorField:
    """
    由结构张量计算逐像素椭圆参数。

    沿边缘方向（次特征向量）拉长、垂直边缘方向收窄:
    σ_along = σ_base·(1 + gain·c)，σ_across = σ_base / (1 + gain·c)，
    c = ((λ1 − λ2)/(λ1 + λ2))² 为相干度。
    """
    if gradient not in GRADIENT_STENCILS:
        raise ParameterError(f"梯度模板 {gradient!r} 不受支持，可选 {GRADIENT_STENCILS}")
    if smoothing <= 0 or sigmaBase <= 0 or gain < 0:
        raise ParameterError("结构张量参数无效: 平滑与基准尺度必须为正，增益不能为负")

    f = image.samples
    if gradient == "central":
        gy, gx = np.gradient(f)
    else:
        gx = ndimage.sobel(f, axis=1, mode="nearest") / 8.0
        gy = ndimage.sobel(f, axis=0, mode="nearest") / 8.0

    j11 = ndimage.gaussian_filter(gx * gx, smoothing, mode="nearest")
    j22 = ndimage.gaussian_filter(gy * gy, smoothing, mode="nearest")
    j12 = ndimage.gaussian_filter(gx * gy, smoothing, mode="nearest")

    half = 0.5 * (j11 + j22)
    radius = np.sqrt(0.25 * (j11 - j22) ** 2 + j12 * j12)
    lam1, lam2 = half + radius, half - radius
    total = lam1 + lam2
    coherence = np.zeros_like(total)
    strong = total > epsilon
    coherence[strong] = ((lam1[strong] - lam2[strong]) / total[strong]) ** 2

    # 主特征向量为梯度方向，边缘方向与之垂直
    major = 0.5 * np.arctan2(2.0 * j12, j11 - j22)
    theta = np.mod(major + 0.5 * np.pi, np.pi)

    stretch = 1.0 + gain * coherence
    return StructureTensorField(
        sigmaAlong=sigmaBase * stretch,
        sigmaAcross=sigmaBase / stretch,
        theta=theta,
        coherence=coherence,
    )


def structureTensorMap(
    image: Image2D,
    smoothing: float = 1.0,
    gradient: str = "central",
    sigmaBase: float = 1.5,
    gain: float = 2.0,
    epsilon: float = 1e-12,
    aMin: float = A_MIN,
) -> tuple[ScaleMap, ClampReport]:
    """边缘自适应尺度图: 沿边缘平滑、跨边缘保持锐利"""
    field = structureTensorField(image, smoothing, gradient, sigmaBase, gain, epsilon)
    logger.debug(
        "🧭 结构张量场: 平均相干度 %.3f, 最大 σ_along %.3g",
        float(field.coherence.mean()), float(field.sigmaAlong.max()),
    )
    return fromEllipseField(field.sigmaAlong, field.sigmaAcross, field.theta, aMin)
