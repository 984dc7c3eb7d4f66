"""
命令行入口 — 参数解析与命令分发

stdout 只输出 key=value 结果行，日志写 stderr。
退出码: 0 成功，1 用法错误，2 I/O 与格式错误，3 数值与可行性错误。
"""
import argparse
import logging

from pydantic import ValidationError

from src.cli import commands
from src.config.filter_config import Settings
from src.schemas.cli import CliConfig
from src.utils.error_handler import UsageError, exitOnError

logger = logging.getLogger(__name__)

COMMANDS = {
    "filter": commands.cmdFilter,
    "kernel": commands.cmdKernel,
    "compare": commands.cmdCompare,
    "bench": commands.cmdBench,
    "map-gen": commands.cmdMapGen,
}


class _ArgumentParser(argparse.ArgumentParser):
    """把 argparse 的用法错误转换为 UsageError，而不是直接退出进程"""

    def error(self, message: str):  # type: ignore[override]
        raise UsageError(message)


def _floatList(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"无法解析数值列表: {text!r}") from None


def _scaleVector(text: str) -> tuple[float, ...]:
    values = _floatList(text)
    if len(values) != 4:
        raise argparse.ArgumentTypeError(f"--scales 需要 4 个数值 a1,a2,a3,a4，实际 {len(values)} 个")
    return values


def _range(text: str) -> tuple[float, ...]:
    values = _floatList(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"--scale-range 需要 lo,hi 两个数值: {text!r}")
    return values


def _onOff(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"取值必须为 on 或 off: {text!r}")
    return text == "on"


def buildParser(settings: Settings) -> argparse.ArgumentParser:
    """构造命令行解析器；未给出的参数取 Settings 中的默认值"""
    parser = _ArgumentParser(prog="ellipfilter", description="空间可变椭圆盒样条滤波")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def addScaleSources(sub: argparse.ArgumentParser, withMap: bool = True) -> None:
        sub.add_argument("--scales", type=_scaleVector, help="常数尺度向量 a1,a2,a3,a4")
        sub.add_argument("--sigma1", type=float, help="椭圆主轴标准差")
        sub.add_argument("--sigma2", type=float, help="椭圆次轴标准差（默认等于 sigma1）")
        sub.add_argument("--theta", type=float, default=0.0, help="主轴角度（度）")
        if withMap:
            sub.add_argument("--map", dest="mapPath", help="SVM4 尺度图文件")
            sub.add_argument("--structure-tensor", action="store_true", help="由输入图像的结构张量生成尺度图")

    def addEngineOptions(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--threads", type=int, default=settings.effectiveThreads)
        sub.add_argument(
            "--mean-subtract", type=_onOff, default=settings.meanSubtract, metavar="on|off",
        )

    def addStructureTensorOptions(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--smoothing", type=float, default=settings.stSmoothing)
        sub.add_argument("--gradient", choices=("central", "sobel"), default=settings.stGradient)
        sub.add_argument("--sigma-base", type=float, default=settings.stSigmaBase)
        sub.add_argument("--gain", type=float, default=settings.stGain)

    sub = subparsers.add_parser("filter", help="对 PGM 图像做椭圆自适应滤波")
    sub.add_argument("--in", dest="inputPath")
    sub.add_argument("--out", dest="outputPath")
    addScaleSources(sub)
    addEngineOptions(sub)
    addStructureTensorOptions(sub)

    sub = subparsers.add_parser("kernel", help="输出核函数图像与参数说明文件")
    sub.add_argument("--out", dest="outputPath")
    addScaleSources(sub, withMap=False)

    sub = subparsers.add_parser("compare", help="引擎与暴力参考实现对照")
    sub.add_argument("--in", dest="inputPath")
    sub.add_argument("--random-size", type=int)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--scale-range", type=_range, default=(1.0, 4.0))
    sub.add_argument("--tolerance", type=float, default=settings.compareTolerance)
    sub.add_argument("--oracle", choices=("grid", "exact", "engine"), default="grid")
    sub.add_argument("--oracle-res", type=float, default=settings.oracleRes)
    addScaleSources(sub)
    addEngineOptions(sub)
    addStructureTensorOptions(sub)

    sub = subparsers.add_parser("bench", help="每像素耗时基准测试")
    sub.add_argument("--size", type=int, default=settings.benchSize)
    sub.add_argument("--repeat", type=int, default=settings.benchRepeat)
    sub.add_argument("--ladder", type=_floatList, default=settings.benchLadder)
    addEngineOptions(sub)

    sub = subparsers.add_parser("map-gen", help="由结构张量生成 SVM4 尺度图")
    sub.add_argument("--in", dest="inputPath")
    sub.add_argument("--out", dest="outputPath")
    addStructureTensorOptions(sub)

    return parser


def parseArgs(argv: list[str] | None, settings: Settings) -> CliConfig:
    """
    解析命令行参数并校验。

    @raises UsageError 参数缺失、格式错误或互斥冲突
    """
    namespace = buildParser(settings).parse_args(argv)
    raw = vars(namespace)
    fields = {
        "command": raw["command"],
        "inputPath": raw.get("inputPath"),
        "outputPath": raw.get("outputPath"),
        "mapPath": raw.get("mapPath"),
        "sigma1": raw.get("sigma1"),
        "sigma2": raw.get("sigma2"),
        "thetaDegrees": raw.get("theta", 0.0),
        "scales": raw.get("scales"),
        "structureTensor": raw.get("structure_tensor", False) or raw["command"] == "map-gen",
        "aMin": settings.aMin,
    }
    optional = {
        "threads": "threads",
        "mean_subtract": "meanSubtract",
        "tolerance": "tolerance",
        "oracle_res": "oracleRes",
        "oracle": "oracle",
        "random_size": "randomSize",
        "seed": "seed",
        "scale_range": "scaleRange",
        "repeat": "repeat",
        "size": "size",
        "ladder": "ladder",
        "smoothing": "smoothing",
        "gradient": "gradient",
        "sigma_base": "sigmaBase",
        "gain": "gain",
    }
    for argName, fieldName in optional.items():
        if argName in raw:
            fields[fieldName] = raw[argName]

    try:
        return CliConfig(**fields)
    except ValidationError as e:
        messages = "; ".join(err["msg"] for err in e.errors())
        raise UsageError(messages) from None


@exitOnError
def runCli(argv: list[str] | None, settings: Settings) -> int:
    """解析参数并执行命令，返回进程退出码"""
    config = parseArgs(argv, settings)
    logger.debug("▶️ 执行命令 %s", config.command)
    return COMMANDS[config.command](config, settings)
