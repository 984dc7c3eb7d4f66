"""
椭圆自适应滤波 — 配置加载模块

从 .env 文件读取所有配置项，提供类型安全的 Settings 数据类。
库函数本身只接收显式参数；只有 CLI 读取 Settings 并把值传进去。
"""
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# NOTE: 项目根目录定位基于此文件的相对路径 (src/config/ → 根)
PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent

_GRADIENT_STENCILS = ("central", "sobel")


def _parseLadder(text: str) -> tuple[float, ...]:
    """把 "2,5,10" 形式的字符串解析为尺度阶梯"""
    return tuple(float(part) for part in text.split(",") if part.strip())


def _parseBool(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "on", "yes")


@dataclass
class Settings:
    """
    全局配置数据类。
    所有字段均从环境变量加载，带有合理的默认值。
    """

    # --- 日志 ---
    logLevel: str = "INFO"
    logDir: str | None = None

    # --- 引擎 ---
    aMin: float = 0.1                     # 尺度下限，防止网格权重 α 溢出
    threads: int = 0                      # 0 表示使用全部可用核心
    meanSubtract: bool = True             # 预积分前减去均值
    preintegrationCellBudget: int = 64_000_000

    # --- 核函数网格 / 参考实现 ---
    oracleRes: float = 1.0 / 16.0
    gridUpsample: int = 4
    kernelCellBudget: int = 16_000_000
    oraclePixelBudget: int = 4096
    compareTolerance: float = 1e-3

    # --- 基准测试 ---
    benchSize: int = 512
    benchRepeat: int = 3
    benchLadder: tuple[float, ...] = (2.0, 5.0, 10.0, 20.0, 40.0)

    # --- 结构张量尺度图 ---
    stGradient: str = "central"
    stSmoothing: float = 1.0
    stSigmaBase: float = 1.5
    stGain: float = 2.0
    stEpsilon: float = 1e-12

    # --- 派生属性 ---
    effectiveThreads: int = field(init=False)

    def __post_init__(self) -> None:
        """根据 threads 推导实际线程数"""
        self.effectiveThreads = self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def validate(self) -> None:
        """
        校验配置项。
        非法配置时抛出 ValueError，防止带着无效配置启动。
        """
        if self.aMin <= 0:
            raise ValueError(f"尺度下限 aMin ({self.aMin}) 必须大于 0")

        if self.threads < 0:
            raise ValueError(f"线程数 ({self.threads}) 不能为负")

        if not (0 < self.oracleRes <= 1.0 / 16.0):
            raise ValueError(f"参考分辨率 oracleRes ({self.oracleRes}) 必须在 (0, 1/16] 之间")

        if self.gridUpsample < 1:
            raise ValueError(f"网格上采样倍数 ({self.gridUpsample}) 至少为 1")

        if min(self.kernelCellBudget, self.preintegrationCellBudget, self.oraclePixelBudget) <= 0:
            raise ValueError("预算配置必须为正整数")

        if self.compareTolerance < 0:
            raise ValueError(f"比较容差 ({self.compareTolerance}) 不能为负")

        if self.benchSize < 8 or self.benchRepeat < 1 or not self.benchLadder:
            raise ValueError("基准测试参数无效: 尺寸至少 8，重复至少 1，阶梯不能为空")

        if any(a < self.aMin for a in self.benchLadder):
            raise ValueError(f"基准尺度阶梯 {self.benchLadder} 含有低于 aMin 的值")

        if self.stGradient not in _GRADIENT_STENCILS:
            raise ValueError(f"梯度模板 ({self.stGradient}) 必须是 {_GRADIENT_STENCILS} 之一")

        if self.stSmoothing <= 0 or self.stSigmaBase <= 0 or self.stGain < 0:
            raise ValueError("结构张量参数无效: 平滑与基准尺度必须为正，增益不能为负")

        logger.debug("✅ 配置校验通过")

    def logSummary(self) -> None:
        """输出配置摘要"""
        logger.info("=" * 50)
        logger.info("📋 滤波配置摘要")
        logger.info("=" * 50)
        logger.info("尺度下限:       %g", self.aMin)
        logger.info("线程数:         %d", self.effectiveThreads)
        logger.info("均值减除:       %s", "开启" if self.meanSubtract else "关闭")
        logger.info("参考分辨率:     1/%g (上采样 %dx)", 1.0 / self.oracleRes, self.gridUpsample)
        logger.info("比较容差:       %g", self.compareTolerance)
        logger.info(
            "结构张量:       %s 梯度, 平滑 σ=%g, 基准 σ=%g, 增益 %g",
            self.stGradient, self.stSmoothing, self.stSigmaBase, self.stGain,
        )
        logger.info("=" * 50)


def loadSettings(envPath: str | None = None) -> Settings:
    """
    从 .env 文件加载配置并返回 Settings 实例。

    @param envPath 自定义 .env 文件路径；显式给出但不存在时抛出 FileNotFoundError，
                   默认使用项目根目录下的 .env（不存在则直接读取系统环境变量）
    @returns Settings 实例（尚未校验）
    """
    if envPath is not None and not Path(envPath).exists():
        raise FileNotFoundError(f"配置文件不存在: {envPath}")

    dotenvPath = envPath or str(PROJECT_ROOT / ".env")

    if not Path(dotenvPath).exists():
        logger.debug("ℹ️ 未找到本地 %s 文件，直接从系统读取环境变量", dotenvPath)
    else:
        load_dotenv(dotenvPath, override=True)

    return Settings(
        logLevel=os.getenv("LOG_LEVEL", "INFO"),
        logDir=os.getenv("LOG_DIR") or None,
        aMin=float(os.getenv("A_MIN", "0.1")),
        threads=int(os.getenv("THREADS", "0")),
        meanSubtract=_parseBool(os.getenv("MEAN_SUBTRACT", "true")),
        preintegrationCellBudget=int(float(os.getenv("PREINTEGRATION_CELL_BUDGET", "64000000"))),
        oracleRes=float(os.getenv("ORACLE_RES", "0.0625")),
        gridUpsample=int(os.getenv("KERNEL_GRID_UPSAMPLE", "4")),
        kernelCellBudget=int(float(os.getenv("KERNEL_CELL_BUDGET", "16000000"))),
        oraclePixelBudget=int(os.getenv("ORACLE_PIXEL_BUDGET", "4096")),
        compareTolerance=float(os.getenv("COMPARE_TOLERANCE", "1e-3")),
        benchSize=int(os.getenv("BENCH_SIZE", "512")),
        benchRepeat=int(os.getenv("BENCH_REPEAT", "3")),
        benchLadder=_parseLadder(os.getenv("BENCH_LADDER", "2,5,10,20,40")),
        stGradient=os.getenv("ST_GRADIENT", "central"),
        stSmoothing=float(os.getenv("ST_SMOOTHING", "1.0")),
        stSigmaBase=float(os.getenv("ST_SIGMA_BASE", "1.5")),
        stGain=float(os.getenv("ST_GAIN", "2.0")),
        stEpsilon=float(os.getenv("ST_EPSILON", "1e-12")),
    )
