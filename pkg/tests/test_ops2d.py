"""
FD 网格与游程求和步长单元测试
"""
import math

import numpy as np
import pytest

from src.engine.elliptical_filter import preintegrate, zpInterpolateMany
from src.models.image import Image2D
from src.splines.boxspline2d import SQRT2, ZP_SCALES, kernelGridEval
from src.splines.ops2d import (
    fdMesh,
    meshOffsets,
    meshSigns,
    preintegrationSteps,
    rsStep,
    shiftVector,
)
from src.utils.error_handler import IncompatibleScaleError, ParameterError


def _expectedVertices(a) -> np.ndarray:
    """四方向网格的 16 个顶点，p_j = a_j/√2"""
    a1, a2, a3, a4 = a
    p2, p4 = a2 / SQRT2, a4 / SQRT2
    return np.array([
        (0.0, 0.0),
        (a1, 0.0),
        (p2, p2),
        (a1 + p2, p2),
        (0.0, a3),
        (a1, a3),
        (p2, p2 + a3),
        (a1 + p2, p2 + a3),
        (-p4, p4),
        (a1 - p4, p4),
        (p2 - p4, p2 + p4),
        (a1 + p2 - p4, p2 + p4),
        (-p4, a3 + p4),
        (a1 - p4, a3 + p4),
        (p2 - p4, p2 + a3 + p4),
        (a1 + p2 - p4, p2 + a3 + p4),
    ])


def _sortedRows(points: np.ndarray) -> np.ndarray:
    rounded = np.round(points, 9)
    return rounded[np.lexsort((rounded[:, 1], rounded[:, 0]))]


class TestFdMesh:
    """FD 网格测试"""

    def test_sixteenVertices(self) -> None:
        mesh = fdMesh(4, (2.0, 3.0, 1.5, 2.5))
        assert mesh.vertexCount == 16

    def test_unitScalesSigns(self) -> None:
        mesh = fdMesh(4, (1.0, 1.0, 1.0, 1.0))
        np.testing.assert_allclose(np.abs(mesh.weights), 1.0)
        assert int(np.sum(mesh.weights > 0)) == 8
        assert int(np.sum(mesh.weights < 0)) == 8

    def test_twoDirections(self) -> None:
        mesh = fdMesh(2, (2.0, 2.0))
        np.testing.assert_allclose(mesh.positions, [(0, 0), (2, 0), (0, 2), (2, 2)], atol=1e-12)
        np.testing.assert_allclose(mesh.weights, [0.25, -0.25, -0.25, 0.25])

    def test_vertexFivePresent(self) -> None:
        a = (2.0, 3.0, 1.5, 2.5)
        mesh = fdMesh(4, a)
        target = np.array([a[0] + a[1] / SQRT2, a[1] / SQRT2])
        assert np.any(np.all(np.abs(mesh.positions - target) < 1e-12, axis=1))

    def test_positionsMatchClosedFormList(self) -> None:
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = rng.uniform(0.5, 6.0, 4)
            mesh = fdMesh(4, a)
            np.testing.assert_allclose(
                _sortedRows(mesh.positions), _sortedRows(_expectedVertices(a)), atol=1e-12
            )

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_weightSums(self, n: int) -> None:
        scales = np.linspace(0.8, 3.2, n)
        mesh = fdMesh(n, scales)
        assert abs(float(mesh.weights.sum())) < 1e-12
        assert float(np.abs(mesh.weights).sum()) == pytest.approx(2 ** n * mesh.alpha)
        assert mesh.alpha == pytest.approx(1.0 / float(np.prod(scales)))

    def test_signsFollowSubsetParity(self) -> None:
        signs = meshSigns()
        for mask in range(16):
            assert signs[mask] == (-1.0) ** bin(mask).count("1")

    def test_zpShiftIsZero(self) -> None:
        np.testing.assert_allclose(fdMesh(4, ZP_SCALES).shift, 0.0, atol=1e-15)

    def test_invalidScales(self) -> None:
        with pytest.raises(ParameterError):
            fdMesh(4, (1.0, -1.0, 1.0, 1.0))
        with pytest.raises(ParameterError):
            fdMesh(1, (1.0,))


class TestMeshOffsets:
    """向量化网格构造测试"""

    def test_matchesSingleMesh(self) -> None:
        rng = np.random.default_rng(5)
        scales = rng.uniform(0.5, 5.0, (6, 4))
        positions, shift, alpha = meshOffsets(scales)
        assert positions.shape == (6, 16, 2)
        for index in range(6):
            mesh = fdMesh(4, scales[index])
            np.testing.assert_array_equal(positions[index], mesh.positions)
            np.testing.assert_array_equal(shift[index], mesh.shift)
            assert alpha[index] == mesh.alpha

    def test_shapeIndependentResults(self) -> None:
        """单个尺度与批量中的同一尺度结果逐位相同"""
        a = np.array([2.2, 1.7, 3.1, 2.6])
        single = meshOffsets(a[None, :])
        batch = meshOffsets(np.tile(a, (9, 1)))
        for s, b in zip(single, batch):
            np.testing.assert_array_equal(np.broadcast_to(s[0], b.shape), b)


class TestFactorization:
    """FD 网格作用在预积分连续函数上重现 β⁴_a"""

    def test_meshOnPreintegratedImpulseGivesKernel(self) -> None:
        a = (2.0, 3.0, 1.5, 2.5)
        impulse = np.zeros((16, 16))
        impulse[8, 8] = 1.0
        pre = preintegrate(Image2D(impulse), a)
        mesh = fdMesh(4, a)
        grid = kernelGridEval(4, a, h=1.0 / 16.0)
        x1, x2 = np.meshgrid(grid.x1, grid.x2)

        value = np.zeros_like(x1)
        for (p1, p2), weight in zip(mesh.positions, mesh.weights):
            g = zpInterpolateMany(
                pre,
                (8.0 + x1 + mesh.shift[0] - p1).ravel(),
                (8.0 + x2 + mesh.shift[1] - p2).ravel(),
            )
            value = value + weight * g.reshape(x1.shape)
        np.testing.assert_allclose(value, grid.values, atol=1e-3)


class TestRsStep:
    """游程求和步长测试"""

    def test_diagonal(self) -> None:
        step = rsStep(SQRT2, math.pi / 4.0)
        assert step.step == (1, 1)
        assert step.gain == pytest.approx(SQRT2)

    def test_horizontal(self) -> None:
        step = rsStep(1.0, 0.0)
        assert step.step == (1, 0)
        assert step.gain == 1.0

    def test_incompatible(self) -> None:
        with pytest.raises(IncompatibleScaleError):
            rsStep(1.0, math.pi / 4.0)

    def test_nonPositive(self) -> None:
        with pytest.raises(ParameterError):
            rsStep(0.0, 0.0)

    def test_preintegrationSteps(self) -> None:
        steps = preintegrationSteps()
        assert [s.step for s in steps] == [(1, 0), (1, 1), (0, 1), (-1, 1)]
        np.testing.assert_allclose([s.gain for s in steps], ZP_SCALES)


class TestShiftVector:
    """对齐平移 τ 测试"""

    def test_equalScales(self) -> None:
        np.testing.assert_allclose(shiftVector(ZP_SCALES, ZP_SCALES, 4), 0.0, atol=1e-15)

    def test_closedForms(self) -> None:
        rng = np.random.default_rng(9)
        for _ in range(5):
            a1, a2, a3, a4 = rng.uniform(0.5, 6.0, 4)
            tau = shiftVector((a1, a2, a3, a4), ZP_SCALES, 4)
            assert tau[0] == pytest.approx((SQRT2 * a1 + a2 - a4 - SQRT2) / (2 * SQRT2), abs=1e-12)
            assert tau[1] == pytest.approx((a2 + SQRT2 * a3 + a4 - 3 * SQRT2) / (2 * SQRT2), abs=1e-12)

    def test_meshShiftUsesZpReference(self) -> None:
        a = (2.0, 3.0, 1.5, 2.5)
        np.testing.assert_allclose(fdMesh(4, a).shift, shiftVector(a, ZP_SCALES, 4), atol=1e-14)

    def test_lengthMismatch(self) -> None:
        with pytest.raises(ParameterError):
            shiftVector((1.0, 2.0), (1.0, 2.0, 3.0), 2)
