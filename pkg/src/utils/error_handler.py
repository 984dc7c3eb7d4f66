"""
椭圆自适应滤波 — 异常体系与退出码映射模块

定义分层异常体系，并提供装饰器把命令函数抛出的异常统一转换为 CLI 退出码。
"""
import functools
import logging
from typing import Any, Callable, TypeVar

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., int])


# ==================================================
# 自定义异常层级
# ==================================================

class FilterError(Exception):
    """滤波库基础异常，所有自定义异常的父类"""
    pass


class ParameterError(FilterError):
    """参数越界（阶数、尺度、次数不合法等）"""
    pass


class FeasibilityError(FilterError):
    """
    目标协方差无法用四方向盒样条表示。
    携带当前对角元下可表示的最大 |Cxy|，便于调用方投影。
    """

    def __init__(self, cxy: float, maxAbsCxy: float) -> None:
        self.cxy = cxy
        self.maxAbsCxy = maxAbsCxy
        super().__init__(
            f"协方差不可行: |Cxy|={abs(cxy):.6g} 超过可表示上限 {maxAbsCxy:.6g}"
        )


class IncompatibleScaleError(FilterError):
    """RS 步长 (b cosθ, b sinθ) 不是整数格点向量"""

    def __init__(self, b: float, theta: float, step: tuple[float, float]) -> None:
        self.b = b
        self.theta = theta
        self.step = step
        super().__init__(
            f"尺度 b={b:.6g} 与方向 θ={theta:.6g} 不兼容: 步长 ({step[0]:.6g}, {step[1]:.6g}) 不是整数向量"
        )


class BudgetExceededError(FilterError):
    """网格/边距/内存预算超限"""

    def __init__(self, what: str, required: int, budget: int) -> None:
        self.what = what
        self.required = required
        self.budget = budget
        super().__init__(f"{what} 超出预算: 需要 {required} 个单元，上限 {budget}")


class OutOfDomainError(FilterError):
    """访问超出预积分图像的填充区域，说明边距不足"""

    def __init__(self, offset: tuple[float, float], message: str = "") -> None:
        self.offset = offset
        super().__init__(
            message or f"访问越界: 偏移 ({offset[0]:.6g}, {offset[1]:.6g}) 超出填充区域"
        )


class FormatError(FilterError):
    """文件格式错误的父类"""
    pass


class MapFormatError(FormatError):
    """SVM4 尺度图格式错误（魔数、数值非法等）"""
    pass


class TruncatedPayloadError(MapFormatError):
    """SVM4 头部声明的尺寸与负载长度不一致"""
    pass


class ImageFormatError(FormatError):
    """PGM 图像格式错误（头部畸形、maxval 不支持、数据截断）"""
    pass


class UsageError(FilterError):
    """命令行用法错误（参数缺失、互斥参数冲突）"""
    pass


# ==================================================
# 异常类别 → 退出码映射
# ==================================================

# NOTE: 退出码约定：1 用法错误，2 I/O 与格式错误，3 数值与可行性错误
EXIT_CODES = {
    "ok": 0,
    "usage": 1,
    "io": 2,
    "numeric": 3,
}


def classifyError(exc: BaseException) -> str:
    """
    根据异常类型分类。

    @param exc 捕获到的异常
    @returns 分类标签: 'usage' / 'io' / 'numeric'
    """
    if isinstance(exc, UsageError):
        return "usage"
    if isinstance(exc, (FormatError, OSError)):
        return "io"
    return "numeric"


def classifyExitCode(exc: BaseException) -> int:
    """返回异常对应的进程退出码"""
    return EXIT_CODES[classifyError(exc)]


def exitOnError(func: F) -> F:
    """
    命令函数装饰器。

    将命令执行期间抛出的异常记录到 stderr 日志，并按类别返回退出码：
    - UsageError → 1
    - OSError / FormatError → 2
    - 其余 FilterError / ValueError / ArithmeticError → 3
    未知异常原样抛出，不吞掉真正的程序错误。
    """

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> int:
        try:
            return func(*args, **kwargs)

        except UsageError as e:
            logger.error("❌ 用法错误: %s | 命令: %s", e, func.__name__)
            return EXIT_CODES["usage"]

        except (FormatError, OSError) as e:
            logger.error("📂 I/O 错误: %s | 命令: %s", e, func.__name__)
            return EXIT_CODES["io"]

        except (FilterError, ValueError, ArithmeticError) as e:
            logger.error("🧮 数值错误 [%s]: %s | 命令: %s", type(e).__name__, e, func.__name__)
            return EXIT_CODES["numeric"]

    return wrapper  # type: ignore
