"""
PGM 编解码单元测试
"""
import numpy as np
import pytest

from src.codecs.pgm_codec import readPgm, readPgmBytes, writePgm, writePgmBytes
from src.models.image import Image2D
from src.utils.error_handler import ImageFormatError


class TestReadPgm:
    """解码测试"""

    def test_eightBitRoundTrip(self) -> None:
        samples = np.arange(12, dtype=np.float64).reshape(3, 4) * 20.0 / 255.0
        image, maxval = readPgmBytes(writePgmBytes(samples))
        assert maxval == 255
        np.testing.assert_allclose(image.samples, samples, atol=1e-12)

    def test_headerComments(self) -> None:
        data = b"P5\n# created by hand\n2 1\n# maxval next\n255\n\x00\xff"
        image, _ = readPgmBytes(data)
        np.testing.assert_array_equal(image.samples, [[0.0, 1.0]])

    def test_sixteenBitBigEndian(self) -> None:
        image, maxval = readPgmBytes(b"P5 2 1 65535\n\x01\x00\xff\xff")
        assert maxval == 65535
        np.testing.assert_allclose(image.samples, [[256.0 / 65535.0, 1.0]])

    def test_wrongMagic(self) -> None:
        with pytest.raises(ImageFormatError):
            readPgmBytes(b"P2\n2 1\n255\n0 255\n")

    def test_nonNumericHeader(self) -> None:
        with pytest.raises(ImageFormatError):
            readPgmBytes(b"P5\n2 x\n255\n\x00\x00")

    def test_unsupportedMaxval(self) -> None:
        with pytest.raises(ImageFormatError):
            readPgmBytes(b"P5\n1 1\n1023\n\x00\x00")

    def test_truncatedData(self) -> None:
        with pytest.raises(ImageFormatError):
            readPgmBytes(b"P5\n4 4\n255\n\x00\x01\x02")

    def test_missingHeaderField(self) -> None:
        with pytest.raises(ImageFormatError):
            readPgmBytes(b"P5\n4 4")


class TestWritePgm:
    """编码测试"""

    def test_roundingAndClipping(self) -> None:
        data = writePgmBytes(np.array([[0.5, 0.25, 2.0, -1.0]]))
        assert data.endswith(bytes([128, 64, 255, 0]))

    def test_sixteenBitOutput(self) -> None:
        data = writePgmBytes(np.array([[1.0]]), maxval=65535)
        assert data == b"P5\n1 1\n65535\n\xff\xff"

    def test_rejectsColourArray(self) -> None:
        with pytest.raises(ImageFormatError):
            writePgmBytes(np.zeros((2, 2, 3)))

    def test_fileRoundTrip(self, tmp_path) -> None:
        path = tmp_path / "img.pgm"
        samples = np.array([[0.0, 1.0], [128.0 / 255.0, 64.0 / 255.0]])
        writePgm(path, Image2D(samples))
        image, maxval = readPgm(path)
        assert maxval == 255
        np.testing.assert_allclose(image.samples, samples, atol=1e-12)
