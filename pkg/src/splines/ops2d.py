"""
二维方向有限差分网格与游程求和步长

FD 网格是 N 个一阶方向差分 Δ_{a_k,θ_k} 的复合展开，
每个方向子集 S 贡献一个顶点 Σ_{k∈S} a_k r_k，权重 (−1)^{|S|}·α。
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from src.splines.boxspline2d import ZP_SCALES, directions
from src.utils.error_handler import IncompatibleScaleError, ParameterError

logger = logging.getLogger(__name__)

# NOTE: 整数格点判定容差，浮点下 √2·cos(π/4) 不精确等于 1
LATTICE_TOL = 1e-9

_DIRECTIONS_4 = directions(4)
# 子集按位掩码升序: bit k 表示第 k+1 个方向
_SUBSETS_4 = np.array([[(mask >> k) & 1 for k in range(4)] for mask in range(16)], dtype=np.float64)
_SIGNS_4 = np.array([(-1.0) ** bin(mask).count("1") for mask in range(16)])


@dataclass(frozen=True)
class MeshStencil:
    """
    FD 网格。positions 形状 (2^N, 2)，顺序为子集位掩码升序；
    weights 为带符号权重，shift 为对齐平移 τ。
    """
    positions: np.ndarray
    weights: np.ndarray
    shift: np.ndarray
    scales: tuple[float, ...]

    @property
    def vertexCount(self) -> int:
        return int(self.weights.size)

    @property
    def alpha(self) -> float:
        return float(abs(self.weights[0]))


@dataclass(frozen=True)
class RSStep:
    """方向游程求和 y[k] = y[k − step] + gain·x[k]"""
    step: tuple[int, int]
    gain: float


def fdMesh(n: int, a) -> MeshStencil:
    """
    展开 Δ_{a1,θ1} ∘ … ∘ Δ_{aN,θN} 得到 2^N 顶点网格。
    平移 τ 相对于同方向数的固定尺度（N=4 时为 ZP 尺度，其他 N 为全 1）。
    """
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ParameterError(f"方向数 N 必须为 ≥ 2 的整数，实际 {n}")
    n = int(n)
    scales = np.asarray(list(a), dtype=np.float64)
    if scales.shape != (n,) or not np.all(np.isfinite(scales)) or np.any(scales <= 0):
        raise ParameterError(f"尺度向量必须为 {n} 个正有限值: {scales}")

    if n == 4:
        positions, shift, alpha = meshOffsets(scales[None, :])
        weights = _SIGNS_4 * alpha[0]
        return MeshStencil(positions[0], weights, shift[0], tuple(float(v) for v in scales))

    dirs = directions(n)
    steps = scales[:, None] * dirs
    alpha = 1.0 / float(np.prod(scales))
    positions = np.zeros((2 ** n, 2))
    weights = np.zeros(2 ** n)
    for mask in range(2 ** n):
        members = [k for k in range(n) if (mask >> k) & 1]
        positions[mask] = steps[members].sum(axis=0) if members else 0.0
        weights[mask] = (-1.0) ** len(members) * alpha
    shift = shiftVector(scales, np.ones(n), n)
    return MeshStencil(positions, weights, shift, tuple(float(v) for v in scales))


def meshOffsets(scales: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    N=4 网格的向量化构造。

    @param scales 形状 (..., 4) 的尺度数组
    @returns (positions (..., 16, 2), shift τ (..., 2), alpha (...))，
             τ 相对 ZP 尺度 b = (1, √2, 1, √2)
    """
    a = np.asarray(scales, dtype=np.float64)
    steps = a[..., :, None] * _DIRECTIONS_4
    diff = a - np.asarray(ZP_SCALES)

    # NOTE: 只用逐元素运算按固定顺序累加，结果与数组形状无关，逐像素路径与常数路径逐位一致
    positions = np.zeros(a.shape[:-1] + (16, 2))
    shift = np.zeros(a.shape[:-1] + (2,))
    for k in range(4):
        positions = positions + _SUBSETS_4[:, k, None] * steps[..., None, k, :]
        shift = shift + diff[..., k, None] * _DIRECTIONS_4[k]
    shift = 0.5 * shift
    alpha = 1.0 / (a[..., 0] * a[..., 1] * a[..., 2] * a[..., 3])
    return positions, shift, alpha


def meshSigns() -> np.ndarray:
    """N=4 网格各顶点的符号，顺序与 meshOffsets 一致"""
    return _SIGNS_4.copy()


def rsStep(b: float, theta: float) -> RSStep:
    """
    方向 θ、尺度 b 的游程求和步长。

    @raises IncompatibleScaleError (b cosθ, b sinθ) 不是整数向量
    """
    if not b > 0:
        raise ParameterError(f"游程求和尺度必须为正，实际 {b}")
    step = (b * math.cos(theta), b * math.sin(theta))
    snapped = (round(step[0]), round(step[1]))
    if any(abs(s - r) > LATTICE_TOL for s, r in zip(step, snapped)) or snapped == (0, 0):
        raise IncompatibleScaleError(b, theta, step)
    return RSStep(step=(int(snapped[0]), int(snapped[1])), gain=float(b))


def shiftVector(a, b, n: int) -> np.ndarray:
    """τ = ½·Σ_k (a_k − b_k)·r_k"""
    av = np.asarray(list(a), dtype=np.float64)
    bv = np.asarray(list(b), dtype=np.float64)
    if av.shape != (int(n),) or bv.shape != (int(n),):
        raise ParameterError(f"尺度向量长度必须都等于 N={n}")
    return 0.5 * ((av - bv) @ directions(int(n)))


def preintegrationSteps() -> list[RSStep]:
    """ZP 尺度下四个方向的游程求和步长，依次为 0、π/4、π/2、3π/4"""
    return [rsStep(b, k * math.pi / 4.0) for k, b in enumerate(ZP_SCALES)]
