"""
SVM4 尺度图二进制格式

布局: 魔数 b"SVM4"，小端 uint32 宽、高，随后按行优先存放像素，
每像素 4 个小端 float32 (a1, a2, a3, a4)。无填充，无校验和。
"""
import logging
from pathlib import Path

import numpy as np

from src.models.scale_map import A_MIN, ScaleMap
from src.utils.error_handler import MapFormatError, ParameterError, TruncatedPayloadError

logger = logging.getLogger(__name__)

MAGIC = b"SVM4"
HEADER_SIZE = 12
_PIXEL_DTYPE = np.dtype("<f4")


def writeMap(scaleMap: ScaleMap) -> bytes:
    """序列化尺度图"""
    header = MAGIC + np.array([scaleMap.width, scaleMap.height], dtype="<u4").tobytes()
    return header + scaleMap.scales.astype(_PIXEL_DTYPE).tobytes(order="C")


def readMap(data: bytes, aMin: float = A_MIN) -> ScaleMap:
    """
    反序列化尺度图。

    @raises MapFormatError 魔数错误、尺寸为零或数值非法
    @raises TruncatedPayloadError 负载长度与头部声明不一致
    """
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise MapFormatError(f"魔数错误: 期望 {MAGIC!r}，实际 {bytes(data[:4])!r}")
    if len(data) < HEADER_SIZE:
        raise TruncatedPayloadError(f"头部不完整: 只有 {len(data)} 字节")

    width, height = (int(v) for v in np.frombuffer(data, dtype="<u4", count=2, offset=len(MAGIC)))
    if width == 0 or height == 0:
        raise MapFormatError(f"尺度图尺寸非法: {width}x{height}")

    expected = width * height * 4 * _PIXEL_DTYPE.itemsize
    actual = len(data) - HEADER_SIZE
    if actual != expected:
        raise TruncatedPayloadError(
            f"负载长度不一致: 头部声明 {width}x{height} 需要 {expected} 字节，实际 {actual} 字节"
        )

    values = np.frombuffer(data, dtype=_PIXEL_DTYPE, offset=HEADER_SIZE).astype(np.float64)
    try:
        return ScaleMap(values.reshape(height, width, 4), aMin=aMin)
    except ParameterError as e:
        raise MapFormatError(f"尺度图数值非法: {e}") from e


def writeMapFile(path: str | Path, scaleMap: ScaleMap) -> None:
    Path(path).write_bytes(writeMap(scaleMap))
    logger.info("💾 尺度图已写入 %s (%dx%d)", path, scaleMap.width, scaleMap.height)


def readMapFile(path: str | Path, aMin: float = A_MIN) -> ScaleMap:
    scaleMap = readMap(Path(path).read_bytes(), aMin)
    logger.debug("📂 读取尺度图 %s (%dx%d)", path, scaleMap.width, scaleMap.height)
    return scaleMap
