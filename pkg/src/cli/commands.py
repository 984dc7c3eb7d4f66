"""
命令实现 — filter / kernel / compare / bench / map-gen

每个命令接收校验过的 CliConfig，结果以 key=value 行写到 stdout，
异常由 exitOnError 统一转换为退出码。
"""
import hashlib
import logging
import math
import time
from pathlib import Path

import numpy as np

from src.cli import output
from src.codecs.pgm_codec import readPgm, writePgm
from src.config.filter_config import Settings
from src.engine.elliptical_filter import (
    OpCounter,
    dcGain,
    filterConstant,
    filterImage,
    kernelImage,
)
from src.engine.reference_filter import referenceFilter
from src.maps.scale_maps import constantMap, fromEllipseField, structureTensorMap
from src.maps.svm4 import readMapFile, writeMapFile
from src.models.image import Image2D
from src.models.scale_map import ScaleMap, ScaleVector4
from src.schemas.cli import CliConfig
from src.splines.boxspline2d import covariance
from src.splines.ops2d import fdMesh
from src.utils.error_handler import EXIT_CODES, ParameterError, exitOnError

logger = logging.getLogger(__name__)


# ==================================================
# 尺度来源解析
# ==================================================

def _ellipseScales(config: CliConfig) -> ScaleVector4:
    """把 --sigma1/--sigma2/--theta（度）换算成常数尺度向量"""
    sigma1 = config.sigma1
    sigma2 = config.sigma2 if config.sigma2 is not None else sigma1
    theta = math.radians(config.thetaDegrees)
    scaleMap, report = fromEllipseField(
        np.full((1, 1), sigma1), np.full((1, 1), sigma2), np.full((1, 1), theta), config.aMin,
    )
    return ScaleVector4.fromSequence(scaleMap.scales[0, 0], clamped=not report.isEmpty)


def _constantScales(config: CliConfig) -> ScaleVector4 | None:
    if config.scales is not None:
        return ScaleVector4.fromSequence(config.scales)
    if config.sigma1 is not None:
        return _ellipseScales(config)
    return None


def _resolveScaleMap(config: CliConfig, image: Image2D) -> tuple[ScaleMap | None, int]:
    """
    解析非常数尺度来源。

    @returns (尺度图, 被近似的像素数)；常数来源返回 (None, 0)
    """
    if config.mapPath is not None:
        scaleMap = readMapFile(config.mapPath, config.aMin)
        if not scaleMap.matches(image.width, image.height):
            raise ParameterError(
                f"尺度图尺寸 {scaleMap.width}x{scaleMap.height} 与图像 {image.width}x{image.height} 不一致"
            )
        return scaleMap, 0
    if config.structureTensor:
        scaleMap, report = structureTensorMap(
            image,
            smoothing=config.smoothing,
            gradient=config.gradient,
            sigmaBase=config.sigmaBase,
            gain=config.gain,
            aMin=config.aMin,
        )
        return scaleMap, report.clampedCount
    return None, 0


# ==================================================
# 命令
# ==================================================

@exitOnError
def cmdFilter(config: CliConfig, settings: Settings) -> int:
    """读图 → 解析尺度来源 → 滤波 → 写图"""
    image, maxval = readPgm(config.inputPath)
    constant = _constantScales(config)
    scaleMap = None
    if constant is not None:
        clamped = int(constant.clamped)
    else:
        scaleMap, clamped = _resolveScaleMap(config, image)
        # 常数尺度图同样走快速路径，输出与逐像素路径逐位相同
        if scaleMap.isConstant():
            constant = scaleMap.at(0, 0)

    start = time.perf_counter()
    if constant is not None:
        result = filterConstant(
            image, constant, threads=config.threads, meanSubtract=config.meanSubtract,
            cellBudget=settings.preintegrationCellBudget,
        )
        mode = "constant"
    else:
        result = filterImage(
            image, scaleMap, threads=config.threads, meanSubtract=config.meanSubtract,
            cellBudget=settings.preintegrationCellBudget,
        )
        mode = "per-pixel"
    elapsed = time.perf_counter() - start

    writePgm(config.outputPath, result, maxval)
    output.emit("output", config.outputPath)
    output.emit("width", image.width)
    output.emit("height", image.height)
    output.emit("mode", mode)
    output.emit("valid_region", result.region)
    output.emit("clamped_pixels", clamped)
    output.emit("elapsed_ms", f"{elapsed * 1e3:.3f}")
    output.emit("ns_per_pixel", f"{elapsed * 1e9 / (image.width * image.height):.1f}")
    return EXIT_CODES["ok"]


@exitOnError
def cmdKernel(config: CliConfig, settings: Settings) -> int:
    """输出 β⁴_a 的采样图像与参数说明文件"""
    scales = _constantScales(config)
    kernel, (cx, cy) = kernelImage(scales)
    peak = float(kernel.samples.max())
    writePgm(config.outputPath, kernel.samples / peak if peak > 0 else kernel.samples)

    mesh = fdMesh(4, scales)
    cov = covariance(4, scales)
    d1, d2 = np.meshgrid(np.arange(kernel.width) - cx, np.arange(kernel.height) - cy)
    mass = float(kernel.samples.sum())
    numeric = [
        float(np.sum(kernel.samples * d1 * d1) / mass),
        float(np.sum(kernel.samples * d1 * d2) / mass),
        float(np.sum(kernel.samples * d2 * d2) / mass),
    ]

    lines = {
        "scales": str(scales),
        "clamped": str(scales.clamped).lower(),
        "alpha": f"{mesh.alpha:.12g}",
        "tau": f"{mesh.shift[0]:.12g},{mesh.shift[1]:.12g}",
        "cov_xx": f"{cov[0, 0]:.12g}",
        "cov_xy": f"{cov[0, 1]:.12g}",
        "cov_yy": f"{cov[1, 1]:.12g}",
        "sample_cov": ",".join(f"{v:.6g}" for v in numeric),
        "sample_mass": f"{mass:.12g}",
        "dc_gain": f"{dcGain(scales):.12g}",
        "peak": f"{peak:.12g}",
    }
    for index, (position, weight) in enumerate(zip(mesh.positions, mesh.weights)):
        lines[f"vertex_{index:02d}"] = f"{position[0]:.12g},{position[1]:.12g},{weight:+.12g}"

    sidecar = Path(config.outputPath).with_suffix(".txt")
    sidecar.write_text("".join(f"{key}={value}\n" for key, value in lines.items()), encoding="utf-8")

    output.emit("output", config.outputPath)
    output.emit("sidecar", sidecar)
    for key in ("scales", "alpha", "tau", "cov_xx", "cov_xy", "cov_yy"):
        output.emit(key, lines[key])
    return EXIT_CODES["ok"]


@exitOnError
def cmdCompare(config: CliConfig, settings: Settings) -> int:
    """引擎输出与参考实现的偏差，max ≤ tolerance 时返回 0"""
    rng = np.random.default_rng(config.seed)
    if config.inputPath is not None:
        image, _ = readPgm(config.inputPath)
    else:
        image = Image2D(rng.random((config.randomSize, config.randomSize)))

    constant = _constantScales(config)
    if constant is not None:
        scaleMap = constantMap(image.width, image.height, constant, config.aMin)
    else:
        scaleMap, _ = _resolveScaleMap(config, image)
        if scaleMap is None:
            lo, hi = config.scaleRange
            scaleMap = ScaleMap(rng.uniform(lo, hi, size=(image.height, image.width, 4)), config.aMin)

    engine = filterImage(
        image, scaleMap, threads=config.threads, meanSubtract=config.meanSubtract,
        cellBudget=settings.preintegrationCellBudget,
    )
    if config.oracle == "engine":
        oracle = filterImage(image, scaleMap, threads=1, meanSubtract=config.meanSubtract,
                             cellBudget=settings.preintegrationCellBudget)
    else:
        oracle = referenceFilter(
            image, scaleMap,
            h=config.oracleRes,
            exact=config.oracle == "exact",
            upsample=settings.gridUpsample,
            cellBudget=settings.kernelCellBudget,
            pixelBudget=settings.oraclePixelBudget,
        )

    region = engine.region.intersect(oracle.region)
    if region.isEmpty:
        raise ParameterError(f"有效区域为空 ({region})，图像相对核尺度过小")
    rows, cols = region.slices()
    deviation = np.abs(engine.samples[rows, cols] - oracle.samples[rows, cols])
    maxDev = float(deviation.max())
    passed = maxDev <= config.tolerance

    output.emit("oracle", config.oracle)
    if config.oracle == "grid":
        output.emit("oracle_res", f"{config.oracleRes:g}")
    output.emit("valid_region", region)
    output.emit("pixels_compared", deviation.size)
    output.emit("max_abs_dev", f"{maxDev:.6e}")
    output.emit("mean_abs_dev", f"{float(deviation.mean()):.6e}")
    output.emit("tolerance", f"{config.tolerance:g}")
    output.emit("pass", str(passed).lower())
    if not passed:
        logger.error("❌ 偏差 %.3e 超过容差 %g", maxDev, config.tolerance)
        return EXIT_CODES["numeric"]
    logger.info("✅ 对照通过: 最大偏差 %.3e", maxDev)
    return EXIT_CODES["ok"]


def _checksum(samples: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(samples).tobytes()).hexdigest()[:16]


@exitOnError
def cmdBench(config: CliConfig, settings: Settings) -> int:
    """常数尺度阶梯上的每像素耗时，以及单线程/多线程输出一致性"""
    rng = np.random.default_rng(0)
    image = Image2D(rng.random((config.size, config.size)))
    pixels = config.size * config.size
    timings = []

    for c in config.ladder:
        scales = (c, c, c, c)
        best = math.inf
        counter = OpCounter()
        for _ in range(config.repeat):
            counter.reset()
            start = time.perf_counter()
            filterConstant(
                image, scales, threads=config.threads, meanSubtract=False,
                cellBudget=settings.preintegrationCellBudget, counter=counter,
            )
            best = min(best, time.perf_counter() - start)
        nsPerPixel = best * 1e9 / pixels
        timings.append(nsPerPixel)
        output.emit(f"ns_per_pixel_{c:g}", f"{nsPerPixel:.1f}")
        output.emit(f"ops_per_pixel_{c:g}", f"{counter.perPixel():g}")

    output.emit("ratio", f"{max(timings) / min(timings):.3f}")

    checkScales = (config.ladder[0],) * 4
    single = filterConstant(image, checkScales, threads=1, meanSubtract=config.meanSubtract,
                            cellBudget=settings.preintegrationCellBudget)
    multi = filterConstant(image, checkScales, threads=config.threads, meanSubtract=config.meanSubtract,
                           cellBudget=settings.preintegrationCellBudget)
    output.emit("checksum_single", _checksum(single.samples))
    output.emit("checksum_multi", _checksum(multi.samples))
    output.emit("deterministic", str(_checksum(single.samples) == _checksum(multi.samples)).lower())
    return EXIT_CODES["ok"]


@exitOnError
def cmdMapGen(config: CliConfig, settings: Settings) -> int:
    """由输入图像的结构张量生成 SVM4 尺度图"""
    image, _ = readPgm(config.inputPath)
    scaleMap, report = structureTensorMap(
        image,
        smoothing=config.smoothing,
        gradient=config.gradient,
        sigmaBase=config.sigmaBase,
        gain=config.gain,
        epsilon=settings.stEpsilon,
        aMin=config.aMin,
    )
    writeMapFile(config.outputPath, scaleMap)
    output.emit("output", config.outputPath)
    output.emit("width", scaleMap.width)
    output.emit("height", scaleMap.height)
    output.emit("clamped_pixels", report.clampedCount)
    output.emit("infeasible_pixels", report.infeasibleCount)
    output.emit("max_scale", ",".join(f"{v:.6g}" for v in scaleMap.maxScale()))
    return EXIT_CODES["ok"]
