"""
一维 B 样条机制 — 有限差分 / 游程求和算子、B 样条求值与尺度自适应滤波

两步滤波: 先对模型系数做一次全局游程求和 (RS)，
再对每个输出位置用与尺度相关的稀疏局部化掩膜求值。
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from src.models.scale_map import A_MIN
from src.utils.error_handler import ParameterError

logger = logging.getLogger(__name__)

SUPPORTED_N1 = (0, 1, 3)
SUPPORTED_N2 = (0, 1, 2, 3)
FD_MODES = ("full", "causal", "valid")

# NOTE: 判定尺度是否为整数的容差
_INTEGER_TOL = 1e-9

# NOTE: 直接投影的求积步长上限
MAX_QUADRATURE_STEP = 1.0 / 64.0

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)

# 三次 B 样条在整数点上的取值 b³[−1], b³[0], b³[1]
_CUBIC_SAMPLES = (1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0)


def _checkOrder(n, name: str) -> int:
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise ParameterError(f"{name} 必须为非负整数，实际 {n}")
    return int(n)


def _checkScale(a: float) -> float:
    a = float(a)
    if not (np.isfinite(a) and a > 0):
        raise ParameterError(f"尺度必须为正有限值，实际 {a}")
    return a


# ==================================================
# 数据结构
# ==================================================

@dataclass(frozen=True)
class FDFilter1D:
    """
    n 阶尺度 a 的有限差分 Δ^n_a: 抽头位于 a·k，权重 a⁻ⁿ·(−1)^k·C(n, k)。
    """
    order: int
    scale: float
    offsets: np.ndarray
    weights: np.ndarray

    @property
    def isIntegral(self) -> bool:
        return abs(self.scale - round(self.scale)) <= _INTEGER_TOL


@dataclass(frozen=True)
class LocalizationMask1D:
    """稀疏局部化掩膜。s[m] = Σ weights[i]·g[m − offsets[i]]"""
    offsets: np.ndarray
    weights: np.ndarray
    tau: float

    @property
    def tapCount(self) -> int:
        return int(self.offsets.size)


@dataclass(frozen=True)
class Signal1D:
    """滤波输出，附带不受零延拓影响的有效区间 [validStart, validStop)"""
    values: np.ndarray
    validStart: int
    validStop: int

    def validValues(self) -> np.ndarray:
        return self.values[self.validStart:max(self.validStart, self.validStop)]


# ==================================================
# FD / RS 算子
# ==================================================

def fdTaps(n: int, a: float) -> FDFilter1D:
    """
    构造 Δ^n_a 的抽头。

    @param n 差分阶数 (≥ 0)
    @param a 尺度 (> 0，可为非整数)
    """
    n = _checkOrder(n, "差分阶数")
    a = _checkScale(a)
    k = np.arange(n + 1)
    signs = np.where(k % 2 == 0, 1.0, -1.0)
    binom = np.array([math.comb(n, int(j)) for j in k], dtype=np.float64)
    return FDFilter1D(order=n, scale=a, offsets=a * k, weights=signs * binom / a ** n)


def applyFd(seq, fdFilter: FDFilter1D, mode: str = "full") -> np.ndarray:
    """
    对序列施加整数尺度的有限差分。

    @param mode 'full' 全长卷积；'causal' 截断到输入长度 (零初始条件)；
                'valid' 仅保留窗口完全落在输入内的输出
    """
    if mode not in FD_MODES:
        raise ParameterError(f"未知的差分模式 {mode!r}，可选 {FD_MODES}")
    if not fdFilter.isIntegral:
        raise ParameterError(
            f"非整数尺度 {fdFilter.scale:g} 不能直接作用于序列，请使用局部化掩膜"
        )
    x = np.asarray(seq, dtype=np.float64)
    b = int(round(fdFilter.scale))
    n = fdFilter.order

    # 整数二项式系数先卷积，最后统一除以 bⁿ
    kernel = np.zeros(n * b + 1, dtype=np.float64)
    for k in range(n + 1):
        kernel[k * b] = (-1) ** k * math.comb(n, k)

    full = np.convolve(x, kernel, mode="full") / float(b) ** n
    if mode == "full":
        return full
    if mode == "causal":
        return full[:x.size]
    return full[n * b:x.size]


def applyRs(seq, b: int, order: int, length: int | None = None) -> np.ndarray:
    """
    重复游程求和 (Δ^{order}_b)⁻¹: y[m] = y[m − b] + b·g[m]，零初始条件。

    @param b 整数步长
    @param order 重复次数 (≥ 1)
    @param length 输出长度，默认与输入相同；更长时输入视为零延拓
    """
    if abs(float(b) - round(float(b))) > _INTEGER_TOL or round(float(b)) < 1:
        raise ParameterError(f"游程求和步长必须为正整数，实际 {b}")
    order = _checkOrder(order, "游程求和次数")
    if order < 1:
        raise ParameterError("游程求和次数至少为 1")
    b = int(round(float(b)))

    x = np.asarray(seq, dtype=np.float64)
    size = x.size if length is None else int(length)
    y = np.zeros(size, dtype=np.float64)
    used = min(size, x.size)
    y[:used] = x[:used]

    for _ in range(order):
        for phase in range(b):
            y[phase::b] = np.cumsum(b * y[phase::b])
    return y


# ==================================================
# B 样条求值
# ==================================================

def _cardinalBSpline(n: int, t: np.ndarray) -> np.ndarray:
    """单位尺度中心 B 样条 βⁿ，逐阶递推，β⁰ 取 (−½, ½] 的指示函数"""
    shifts = np.arange(n + 1) - n / 2.0
    prev = [((t + s > -0.5) & (t + s <= 0.5)).astype(np.float64) for s in shifts]
    for d in range(1, n + 1):
        half = (d + 1) / 2.0
        cur = []
        for i in range(n - d + 1):
            u = t + (i - (n - d) / 2.0)
            cur.append(((u + half) * prev[i + 1] + (half - u) * prev[i]) / d)
        prev = cur
    return prev[0]


def bsplineEval(n: int, a: float, x):
    """
    求 βⁿ_a(x) = βⁿ(x / a) / a。

    @param n 次数 (≥ 0)
    @param a 尺度 (> 0)
    @param x 标量或数组
    """
    n = _checkOrder(n, "B 样条次数")
    a = _checkScale(a)
    t = np.asarray(x, dtype=np.float64) / a
    values = _cardinalBSpline(n, t) / a
    if np.ndim(x) == 0:
        return float(values)
    return values


def bsplineViaRunningSums(n: int, a: float, x):
    """
    用 FD ∘ RS 分解重建 βⁿ_a(x)，供与 bsplineEval 交叉验证。

    βⁿ_a(x) = Σ_j Δ^{n+1}_a[j] · G(x + τ − a·j)，
    其中 G(y) = Σ_{k≥0} C(k+n, n)·βⁿ(y − k)，τ = (a − 1)(n + 1)/2。
    """
    n = _checkOrder(n, "B 样条次数")
    a = _checkScale(a)
    xs = np.asarray(x, dtype=np.float64)
    tau = (a - 1.0) * (n + 1) / 2.0
    fd = fdTaps(n + 1, a)
    half = (n + 1) / 2.0

    result = np.zeros_like(xs)
    for offset, weight in zip(fd.offsets, fd.weights):
        z = xs + tau - offset
        kmax = int(math.ceil(float(np.max(z)) + half)) + 1 if z.size else 0
        summed = np.zeros_like(z)
        for k in range(max(kmax, 0) + 1):
            summed += math.comb(k + n, n) * _cardinalBSpline(n, z - k)
        result += weight * summed

    if np.ndim(x) == 0:
        return float(result)
    return result


def interpPrefilter(samples, n1: int) -> np.ndarray:
    """
    插值预滤波: 求系数 c 使 Σ c[k]·β^{n1}(m − k) = f[m]。

    n1 ∈ {0, 1} 时即为样本本身；n1 = 3 时在零延拓下求解三对角方程组
    (1/6, 4/6, 1/6)·c = f，使零延拓的样条模型在全部整数点上精确插值。
    """
    if n1 not in SUPPORTED_N1:
        raise ParameterError(f"模型次数 n1={n1} 不受支持，可选 {SUPPORTED_N1}")
    f = np.asarray(samples, dtype=np.float64)
    if f.ndim != 1:
        raise ParameterError(f"一维预滤波只接受一维序列，实际维度 {f.ndim}")
    if n1 <= 1 or f.size == 0:
        return f.copy()

    # 对称 Toeplitz 三对角，行 0 为上对角、行 2 为下对角
    banded = np.repeat(np.asarray(_CUBIC_SAMPLES)[:, None], f.size, axis=1)
    return linalg.solve_banded((1, 1), banded, f)


# ==================================================
# 两步尺度自适应滤波
# ==================================================

def localizationMask1d(n1: int, n2: int, a: float) -> LocalizationMask1D:
    """
    局部化掩膜 w[k] = Σ_j Δ^{n2+1}_a[j]·β^{N'}(k + τ − a·j)，
    N' = n1 + n2 + 1，τ = (a − 1)(n2 + 1)/2。

    非零抽头数只取决于 (n1, n2) 与 τ 的小数部分，与 a 的大小无关。
    """
    if n1 not in SUPPORTED_N1:
        raise ParameterError(f"模型次数 n1={n1} 不受支持，可选 {SUPPORTED_N1}")
    if n2 not in SUPPORTED_N2:
        raise ParameterError(f"核次数 n2={n2} 不受支持，可选 {SUPPORTED_N2}")
    a = _checkScale(a)

    total = n1 + n2 + 1
    tau = (a - 1.0) * (n2 + 1) / 2.0
    half = (total + 1) / 2.0
    kmin = int(math.floor(-tau - half))
    kmax = int(math.ceil(a * (n2 + 1) - tau + half))
    k = np.arange(kmin, kmax + 1)

    fd = fdTaps(n2 + 1, a)
    weights = np.zeros(k.size, dtype=np.float64)
    for offset, weight in zip(fd.offsets, fd.weights):
        weights += weight * _cardinalBSpline(total, k + tau - offset)

    keep = weights != 0.0
    return LocalizationMask1D(offsets=k[keep], weights=weights[keep], tau=tau)


def adaptiveFilter1d(samples, n1: int, n2: int, scales, aMin: float = A_MIN) -> Signal1D:
    """
    一维尺度自适应 B 样条滤波。

    @param samples 输入样本 f
    @param n1 模型次数 (0/1/3)
    @param n2 核次数 (0..3)
    @param scales 逐位置尺度，长度与 samples 相同或为标量
    @returns Signal1D，输出与输入等长；有效区间外受零延拓影响
    """
    f = np.asarray(samples, dtype=np.float64)
    if f.ndim != 1 or f.size == 0:
        raise ParameterError("输入必须为非空一维序列")
    if n2 not in SUPPORTED_N2:
        raise ParameterError(f"核次数 n2={n2} 不受支持，可选 {SUPPORTED_N2}")
    a = np.broadcast_to(np.asarray(scales, dtype=np.float64), f.shape)
    if not np.all(np.isfinite(a)) or float(a.min()) < aMin:
        raise ParameterError(f"尺度必须为有限值且不低于 aMin={aMin:g}")

    coeffs = interpPrefilter(f, n1)
    total = n1 + n2 + 1
    amax = float(a.max())
    margin = int(math.ceil(amax * (n2 + 1) / 2.0 + (n2 + 1) / 2.0 + (total + 1) / 2.0)) + 1

    padded = np.zeros(f.size + 2 * margin, dtype=np.float64)
    padded[margin:margin + f.size] = coeffs
    g = applyRs(padded, 1, n2 + 1)

    masks: dict[float, LocalizationMask1D] = {}
    out = np.empty(f.size, dtype=np.float64)
    for m in range(f.size):
        scale = float(a[m])
        mask = masks.get(scale)
        if mask is None:
            mask = localizationMask1d(n1, n2, scale)
            masks[scale] = mask
        out[m] = np.dot(mask.weights, g[margin + m - mask.offsets])

    start = int(math.ceil(amax * (n2 + 1) / 2.0 + (n1 + 1) / 2.0))
    logger.debug(
        "📈 一维自适应滤波完成: 长度 %d, n1=%d, n2=%d, 掩膜缓存 %d 个",
        f.size, n1, n2, len(masks),
    )
    return Signal1D(values=out, validStart=min(start, f.size), validStop=max(f.size - start, 0))


def bsplineProjectionDirect(
    samples,
    n1: int,
    n2: int,
    a: float,
    m: float,
    step: float = MAX_QUADRATURE_STEP,
) -> float:
    """
    直接数值求积 ∫ f̃(x)·β^{n2}_a(x − m) dx，作为两步滤波的对照。

    在模型与核的全部节点处切分积分区间，每段再按 step 细分，
    用 4 点 Gauss–Legendre 求积，对分段多项式精确。
    """
    if not (0 < step <= MAX_QUADRATURE_STEP):
        raise ParameterError(f"求积步长 {step} 必须在 (0, 1/64] 之间")
    a = _checkScale(a)
    coeffs = interpPrefilter(samples, n1)

    lo = m - a * (n2 + 1) / 2.0
    hi = m + a * (n2 + 1) / 2.0
    kernelKnots = lo + a * np.arange(n2 + 2)
    frac = ((n1 + 1) / 2.0) % 1.0
    modelKnots = np.arange(math.floor(lo) - 1, math.ceil(hi) + 2) + frac
    grid = lo + step * np.arange(int(math.ceil((hi - lo) / step)) + 1)
    points = np.concatenate([kernelKnots, modelKnots, grid, [lo, hi]])
    points = np.unique(points[(points >= lo) & (points <= hi)])

    left, right = points[:-1], points[1:]
    mid = 0.5 * (left + right)
    halfWidth = 0.5 * (right - left)
    x = (mid[:, None] + halfWidth[:, None] * _GL_NODES[None, :]).ravel()
    w = (halfWidth[:, None] * _GL_WEIGHTS[None, :]).ravel()

    support = (n1 + 1) / 2.0
    kFirst = max(int(math.floor(lo - support)), 0)
    kLast = min(int(math.ceil(hi + support)), coeffs.size - 1)
    model = np.zeros_like(x)
    for k in range(kFirst, kLast + 1):
        model += coeffs[k] * _cardinalBSpline(n1, x - k)

    kernel = bsplineEval(n2, a, x - m)
    return float(np.sum(w * model * kernel))
