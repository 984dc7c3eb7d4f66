"""
二进制 PGM (P5) 灰度图编解码

支持 maxval 255（单字节）与 65535（双字节，高位在前）；
读取时归一化到 [0, 1]，写入时四舍五入（远离零）并截断到 [0, maxval]。
"""
import logging
from pathlib import Path

import numpy as np

from src.models.image import Image2D
from src.utils.error_handler import ImageFormatError

logger = logging.getLogger(__name__)

SUPPORTED_MAXVALS = (255, 65535)
_WHITESPACE = b" \t\r\n\x0b\x0c"


def _nextToken(data: bytes, pos: int) -> tuple[bytes, int]:
    """跳过空白与 # 注释，返回下一个头部记号及其后的位置"""
    size = len(data)
    while pos < size:
        ch = data[pos:pos + 1]
        if ch == b"#":
            end = data.find(b"\n", pos)
            pos = size if end < 0 else end + 1
        elif ch in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < size and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ImageFormatError("PGM 头部不完整")
    return data[start:pos], pos


def _parseInt(token: bytes, name: str) -> int:
    if not token.isdigit():
        raise ImageFormatError(f"PGM 头部 {name} 不是整数: {token!r}")
    return int(token)


def readPgmBytes(data: bytes) -> tuple[Image2D, int]:
    """
    解析 P5 字节流，返回 (图像, maxval)。

    @raises ImageFormatError 头部畸形、maxval 不支持或数据截断
    """
    magic, pos = _nextToken(data, 0)
    if magic != b"P5":
        raise ImageFormatError(f"不是二进制 PGM (P5): 魔数 {magic!r}")
    widthToken, pos = _nextToken(data, pos)
    heightToken, pos = _nextToken(data, pos)
    maxvalToken, pos = _nextToken(data, pos)
    width = _parseInt(widthToken, "宽度")
    height = _parseInt(heightToken, "高度")
    maxval = _parseInt(maxvalToken, "maxval")

    if width == 0 or height == 0:
        raise ImageFormatError(f"PGM 尺寸非法: {width}x{height}")
    if maxval not in SUPPORTED_MAXVALS:
        raise ImageFormatError(f"不支持的 maxval={maxval}，可选 {SUPPORTED_MAXVALS}")
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise ImageFormatError("PGM 头部与像素数据之间缺少分隔空白")
    pos += 1

    dtype = np.dtype("u1") if maxval == 255 else np.dtype(">u2")
    expected = width * height * dtype.itemsize
    if len(data) - pos < expected:
        raise ImageFormatError(f"PGM 数据截断: 需要 {expected} 字节，实际 {len(data) - pos} 字节")

    raster = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return Image2D(raster.reshape(height, width).astype(np.float64) / maxval), maxval


def writePgmBytes(samples, maxval: int = 255) -> bytes:
    """把 [0, 1] 范围的双精度图像量化为 P5 字节流"""
    if maxval not in SUPPORTED_MAXVALS:
        raise ImageFormatError(f"不支持的 maxval={maxval}，可选 {SUPPORTED_MAXVALS}")
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2:
        raise ImageFormatError(f"PGM 只支持二维灰度图，实际维度 {arr.ndim}")

    scaled = arr * maxval
    quantized = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    quantized = np.clip(quantized, 0, maxval)
    dtype = np.dtype("u1") if maxval == 255 else np.dtype(">u2")
    header = b"P5\n%d %d\n%d\n" % (arr.shape[1], arr.shape[0], maxval)
    return header + quantized.astype(dtype).tobytes()


def readPgm(path: str | Path) -> tuple[Image2D, int]:
    image, maxval = readPgmBytes(Path(path).read_bytes())
    logger.debug("📂 读取图像 %s (%dx%d, maxval %d)", path, image.width, image.height, maxval)
    return image, maxval


def writePgm(path: str | Path, image: Image2D | np.ndarray, maxval: int = 255) -> None:
    samples = image.samples if isinstance(image, Image2D) else image
    Path(path).write_bytes(writePgmBytes(samples, maxval))
    logger.info("💾 图像已写入 %s", path)
