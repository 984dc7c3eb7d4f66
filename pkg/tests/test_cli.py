"""
命令行入口单元测试
"""
import numpy as np
import pytest

from src.cli.app import parseArgs, runCli
from src.codecs.pgm_codec import readPgm, writePgm
from src.config.filter_config import Settings
from src.maps.scale_maps import constantMap
from src.maps.svm4 import readMapFile, writeMapFile
from src.models.scale_map import ScaleMap
from src.utils.error_handler import UsageError


@pytest.fixture
def settings() -> Settings:
    return Settings(threads=1)


@pytest.fixture
def inputImage(tmp_path):
    path = tmp_path / "in.pgm"
    samples = np.random.default_rng(0).integers(0, 256, (20, 24)) / 255.0
    writePgm(path, samples)
    return path


def _results(capsys) -> dict[str, str]:
    """把 stdout 的 key=value 行解析为字典"""
    lines = capsys.readouterr().out.strip().splitlines()
    return dict(line.split("=", 1) for line in lines if "=" in line)


class TestParseArgs:
    """参数解析与校验测试"""

    def test_filterDefaults(self, settings: Settings) -> None:
        config = parseArgs(["filter", "--in", "a.pgm", "--out", "b.pgm", "--scales", "2,2,2,2"], settings)
        assert config.scales == (2.0, 2.0, 2.0, 2.0)
        assert config.threads == 1
        assert config.meanSubtract is True

    def test_meanSubtractOff(self, settings: Settings) -> None:
        config = parseArgs(
            ["filter", "--in", "a", "--out", "b", "--sigma1", "2", "--mean-subtract", "off"], settings
        )
        assert config.meanSubtract is False

    def test_mutuallyExclusiveSources(self, settings: Settings) -> None:
        with pytest.raises(UsageError, match="互斥"):
            parseArgs(
                ["filter", "--in", "a", "--out", "b", "--scales", "2,2,2,2", "--sigma1", "2"], settings
            )

    def test_missingSource(self, settings: Settings) -> None:
        with pytest.raises(UsageError):
            parseArgs(["filter", "--in", "a", "--out", "b"], settings)

    def test_wrongScaleCount(self, settings: Settings) -> None:
        with pytest.raises(UsageError):
            parseArgs(["kernel", "--out", "k.pgm", "--scales", "2,2,2"], settings)

    def test_compareNeedsOneInput(self, settings: Settings) -> None:
        with pytest.raises(UsageError):
            parseArgs(["compare", "--in", "a.pgm", "--random-size", "12"], settings)

    def test_compareOracleDefaultsToGrid(self, settings: Settings) -> None:
        config = parseArgs(["compare", "--random-size", "12"], settings)
        assert config.oracle == "grid"
        assert config.oracleRes == pytest.approx(1.0 / 16.0)

    def test_oracleResolutionTooCoarse(self, settings: Settings) -> None:
        with pytest.raises(UsageError):
            parseArgs(["compare", "--random-size", "12", "--oracle-res", "0.125"], settings)

    def test_mapGenForcesStructureTensor(self, settings: Settings) -> None:
        config = parseArgs(["map-gen", "--in", "a.pgm", "--out", "m.svm4"], settings)
        assert config.structureTensor is True


class TestRunCli:
    """命令执行与退出码测试"""

    def test_unknownCommand(self, settings: Settings) -> None:
        assert runCli(["sharpen"], settings) == 1

    def test_missingInputFile(self, settings: Settings, tmp_path) -> None:
        code = runCli(
            ["filter", "--in", str(tmp_path / "nope.pgm"), "--out", str(tmp_path / "o.pgm"),
             "--scales", "2,2,2,2"],
            settings,
        )
        assert code == 2

    def test_filterConstantScales(self, settings: Settings, inputImage, tmp_path, capsys) -> None:
        out = tmp_path / "out.pgm"
        code = runCli(
            ["filter", "--in", str(inputImage), "--out", str(out), "--sigma1", "3", "--sigma2", "1",
             "--theta", "0"],
            settings,
        )
        assert code == 0
        results = _results(capsys)
        assert results["width"] == "24"
        assert results["height"] == "20"
        assert results["mode"] == "constant"
        image, maxval = readPgm(out)
        assert (image.width, image.height, maxval) == (24, 20, 255)

    def test_filterWithConstantMap(self, settings: Settings, inputImage, tmp_path, capsys) -> None:
        mapPath = tmp_path / "scales.svm4"
        writeMapFile(mapPath, constantMap(24, 20, (2.0, 1.5, 2.0, 1.5)))
        out = tmp_path / "out.pgm"
        code = runCli(["filter", "--in", str(inputImage), "--out", str(out), "--map", str(mapPath)], settings)
        assert code == 0
        assert _results(capsys)["mode"] == "constant"

        direct = tmp_path / "direct.pgm"
        code = runCli(
            ["filter", "--in", str(inputImage), "--out", str(direct), "--scales", "2,1.5,2,1.5"], settings
        )
        assert code == 0
        np.testing.assert_array_equal(readPgm(out)[0].samples, readPgm(direct)[0].samples)

    def test_filterWithVaryingMap(self, settings: Settings, inputImage, tmp_path, capsys) -> None:
        scales = np.empty((20, 24, 4))
        scales[:, :12] = (2.0, 2.0, 2.0, 2.0)
        scales[:, 12:] = (3.0, 1.5, 2.0, 2.5)
        mapPath = tmp_path / "scales.svm4"
        writeMapFile(mapPath, ScaleMap(scales))
        out = tmp_path / "out.pgm"
        code = runCli(["filter", "--in", str(inputImage), "--out", str(out), "--map", str(mapPath)], settings)
        assert code == 0
        assert _results(capsys)["mode"] == "per-pixel"
        assert out.exists()

    def test_filterMapSizeMismatch(self, settings: Settings, inputImage, tmp_path) -> None:
        mapPath = tmp_path / "scales.svm4"
        writeMapFile(mapPath, constantMap(10, 10, (2.0, 2.0, 2.0, 2.0)))
        code = runCli(
            ["filter", "--in", str(inputImage), "--out", str(tmp_path / "o.pgm"), "--map", str(mapPath)],
            settings,
        )
        assert code == 3

    def test_filterCorruptMap(self, settings: Settings, inputImage, tmp_path) -> None:
        mapPath = tmp_path / "bad.svm4"
        mapPath.write_bytes(b"NOPE" + bytes(8))
        code = runCli(
            ["filter", "--in", str(inputImage), "--out", str(tmp_path / "o.pgm"), "--map", str(mapPath)],
            settings,
        )
        assert code == 2

    def test_kernelSidecar(self, settings: Settings, tmp_path, capsys) -> None:
        out = tmp_path / "kernel.pgm"
        code = runCli(["kernel", "--out", str(out), "--scales", "1,1.41421356237,1,1.41421356237"], settings)
        assert code == 0
        results = _results(capsys)
        assert float(results["cov_xx"]) == pytest.approx(0.25, abs=1e-9)
        sidecar = dict(
            line.split("=", 1) for line in out.with_suffix(".txt").read_text(encoding="utf-8").splitlines()
        )
        assert len([key for key in sidecar if key.startswith("vertex_")]) == 16
        assert float(sidecar["dc_gain"]) == pytest.approx(1.0, abs=1e-9)

    def test_compareAgainstExactOracle(self, settings: Settings, capsys) -> None:
        code = runCli(
            ["compare", "--random-size", "16", "--scale-range", "1,3", "--seed", "2", "--oracle", "exact"],
            settings,
        )
        assert code == 0
        results = _results(capsys)
        assert results["pass"] == "true"
        assert float(results["max_abs_dev"]) <= 1e-3

    def test_compareDefaultsToGridOracle(self, settings: Settings, capsys) -> None:
        code = runCli(["compare", "--random-size", "16", "--scales", "2,1.5,3,2.5"], settings)
        assert code == 0
        results = _results(capsys)
        assert results["oracle"] == "grid"
        assert float(results["oracle_res"]) == pytest.approx(1.0 / 16.0)
        assert results["pass"] == "true"

    def test_compareGridResolutionHonoured(self, settings: Settings, capsys) -> None:
        code = runCli(
            ["compare", "--random-size", "12", "--scales", "2,2,2,2", "--oracle-res", "0.03125"], settings
        )
        assert code == 0
        assert float(_results(capsys)["oracle_res"]) == pytest.approx(0.03125)

    def test_compareEngineWithItself(self, settings: Settings, capsys) -> None:
        code = runCli(
            ["compare", "--random-size", "16", "--scales", "2,2,2,2", "--oracle", "engine", "--threads", "2"],
            settings,
        )
        assert code == 0
        assert float(_results(capsys)["max_abs_dev"]) == 0.0

    def test_compareZeroTolerance(self, settings: Settings, capsys) -> None:
        code = runCli(
            ["compare", "--random-size", "12", "--scale-range", "1,3", "--oracle", "exact", "--tolerance", "0"],
            settings,
        )
        assert code == 3
        assert _results(capsys)["pass"] == "false"

    def test_compareOracleBudget(self, settings: Settings) -> None:
        tight = Settings(threads=1, oraclePixelBudget=16)
        assert runCli(["compare", "--random-size", "12"], tight) == 3

    def test_bench(self, settings: Settings, capsys) -> None:
        code = runCli(
            ["bench", "--size", "16", "--repeat", "1", "--ladder", "2,5", "--threads", "2"], settings
        )
        assert code == 0
        results = _results(capsys)
        assert results["ops_per_pixel_2"] == results["ops_per_pixel_5"]
        assert results["deterministic"] == "true"
        assert float(results["ratio"]) >= 1.0

    def test_mapGen(self, settings: Settings, inputImage, tmp_path, capsys) -> None:
        out = tmp_path / "edges.svm4"
        code = runCli(["map-gen", "--in", str(inputImage), "--out", str(out)], settings)
        assert code == 0
        scaleMap = readMapFile(out)
        assert (scaleMap.width, scaleMap.height) == (24, 20)
        assert int(_results(capsys)["clamped_pixels"]) >= 0
