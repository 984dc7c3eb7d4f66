"""
椭圆自适应滤波 — 程序入口

加载配置、初始化日志后把参数交给命令行分发器。
stdout 只有 key=value 结果行，日志全部写到 stderr。
"""
import logging
import sys

from src.cli.app import runCli
from src.config.filter_config import loadSettings
from src.utils.logger import setupLogger

logger = logging.getLogger(__name__)


def main(argv: list[str] | None = None) -> int:
    """主函数：加载配置 → 初始化日志 → 校验 → 执行命令"""
    settings = loadSettings()
    setupLogger(logLevel=settings.logLevel, logDir=settings.logDir)

    try:
        settings.validate()
    except ValueError as e:
        logger.error("❌ 配置无效: %s", e)
        return 1
    settings.logSummary()

    return runCli(argv, settings)


if __name__ == "__main__":
    sys.exit(main())
