"""
命令行配置模型

argparse 解析出的参数统一收敛到 CliConfig，由 pydantic 校验取值范围
与尺度来源的互斥关系。
"""
from typing import Literal

from pydantic import BaseModel, Field, model_validator

CommandName = Literal["filter", "kernel", "compare", "bench", "map-gen"]
OracleMode = Literal["exact", "grid", "engine"]


class CliConfig(BaseModel):
    command: CommandName
    inputPath: str | None = None
    outputPath: str | None = None

    # --- 尺度来源（互斥） ---
    mapPath: str | None = None
    sigma1: float | None = Field(default=None, gt=0)
    sigma2: float | None = Field(default=None, gt=0)
    thetaDegrees: float = 0.0
    scales: tuple[float, float, float, float] | None = None
    structureTensor: bool = False

    # --- 引擎 ---
    threads: int = Field(default=1, ge=1)
    meanSubtract: bool = True
    aMin: float = Field(default=0.1, gt=0)

    # --- 对照 ---
    tolerance: float = Field(default=1e-3, ge=0)
    oracleRes: float = Field(default=1.0 / 16.0, gt=0, le=1.0 / 16.0)
    oracle: OracleMode = "grid"
    randomSize: int | None = Field(default=None, ge=1)
    seed: int = 0
    scaleRange: tuple[float, float] = (1.0, 4.0)

    # --- 基准测试 ---
    repeat: int = Field(default=3, ge=1)
    size: int = Field(default=512, ge=8)
    ladder: tuple[float, ...] = (2.0, 5.0, 10.0, 20.0, 40.0)

    # --- 结构张量 ---
    smoothing: float = Field(default=1.0, gt=0)
    gradient: Literal["central", "sobel"] = "central"
    sigmaBase: float = Field(default=1.5, gt=0)
    gain: float = Field(default=2.0, ge=0)

    @property
    def scaleSources(self) -> list[str]:
        """已给出的尺度来源名称"""
        sources = []
        if self.scales is not None:
            sources.append("--scales")
        if self.sigma1 is not None or self.sigma2 is not None:
            sources.append("--sigma1/--sigma2")
        if self.mapPath is not None:
            sources.append("--map")
        if self.structureTensor:
            sources.append("--structure-tensor")
        return sources

    @model_validator(mode="after")
    def checkCommand(self) -> "CliConfig":
        sources = self.scaleSources
        if len(sources) > 1:
            raise ValueError(f"尺度来源互斥，只能指定一个: {', '.join(sources)}")
        if self.sigma2 is not None and self.sigma1 is None:
            raise ValueError("给出 --sigma2 时必须同时给出 --sigma1")
        if self.scales is not None and min(self.scales) < self.aMin:
            raise ValueError(f"--scales 分量不能低于 aMin={self.aMin:g}")
        lo, hi = self.scaleRange
        if not (self.aMin <= lo <= hi):
            raise ValueError(f"--scale-range 必须满足 aMin ≤ lo ≤ hi，实际 {lo},{hi}")
        if not self.ladder or min(self.ladder) < self.aMin:
            raise ValueError("--ladder 不能为空且各尺度不能低于 aMin")

        if self.command == "filter":
            self._require("inputPath", "outputPath")
            if not sources:
                raise ValueError("filter 需要一个尺度来源: --scales / --sigma1 / --map / --structure-tensor")
        elif self.command == "kernel":
            self._require("outputPath")
            if sources not in (["--scales"], ["--sigma1/--sigma2"]):
                raise ValueError("kernel 需要 --scales 或 --sigma1/--sigma2 之一")
        elif self.command == "compare":
            if (self.inputPath is None) == (self.randomSize is None):
                raise ValueError("compare 需要 --in 与 --random-size 之一")
        elif self.command == "map-gen":
            self._require("inputPath", "outputPath")
            if sources and sources != ["--structure-tensor"]:
                raise ValueError("map-gen 只根据结构张量生成尺度图，不接受其他尺度来源")
        return self

    def _require(self, *names: str) -> None:
        flags = {"inputPath": "--in", "outputPath": "--out"}
        missing = [flags[name] for name in names if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.command} 缺少必需参数: {', '.join(missing)}")
