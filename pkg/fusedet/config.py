"""Configuration loading and validation using Pydantic."""

import math
import os
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from fusedet.domain.errors import ConfigError

CONFIG_ENV_VAR = "FUSEDET_CONFIG_PATH"
OUTPUT_ROOT_ENV_VAR = "FUSEDET_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataConfig(_Section):
    """Dataset, voxelizer and synthetic generator settings."""

    class_names: list[str] = Field(default_factory=lambda: ["Car", "Pedestrian", "Cyclist"])
    point_cloud_range: list[float] = Field(
        default_factory=lambda: [2.0, -30.08, -3.0, 46.8, 30.08, 1.0]
    )
    voxel_size: list[float] = Field(default_factory=lambda: [0.16, 0.16, 0.16])
    max_points_per_voxel: int = Field(default=32, ge=1)
    max_box_size: list[float] = Field(default_factory=lambda: [8.0, 4.0, 4.0])
    signal_scale: float = Field(default=2.0, gt=0)
    dataset_dir: str = "data"
    num_train: int = Field(default=20, ge=1)
    num_val: int = Field(default=10, ge=1)
    seed: int = 0
    image_height: int = Field(default=96, ge=8)
    image_width: int = Field(default=320, ge=8)
    focal_length: float = Field(default=160.0, gt=0)
    min_objects: int = Field(default=1, ge=0)
    max_objects: int = Field(default=8, ge=0)
    points_per_object: int = Field(default=60, ge=10)
    clutter_points: int = Field(default=400, ge=1)
    point_noise: float = Field(default=0.01, ge=0)
    image_noise: float = Field(default=0.1, ge=0)
    aug_enabled: bool = True
    aug_flip_prob: float = Field(default=0.5, ge=0, le=1)
    aug_max_rotation: float = Field(default=math.pi / 8, ge=0)
    aug_scale_range: tuple[float, float] = (0.95, 1.05)
    aug_translation_std: float = Field(default=0.2, ge=0)

    @field_validator("point_cloud_range")
    @classmethod
    def validate_range(cls, v: list[float]) -> list[float]:
        if len(v) != 6 or any(v[i + 3] <= v[i] for i in range(3)):
            raise ValueError(f"point_cloud_range must be [xmin, ymin, zmin, xmax, ymax, zmax], got {v}")
        return v

    @field_validator("voxel_size", "max_box_size")
    @classmethod
    def validate_triplet(cls, v: list[float]) -> list[float]:
        if len(v) != 3 or any(x <= 0 for x in v):
            raise ValueError(f"Expected three positive values, got {v}")
        return v

    @model_validator(mode="after")
    def validate_object_counts(self) -> "DataConfig":
        if self.min_objects > self.max_objects:
            raise ValueError("data.min_objects must not exceed data.max_objects")
        return self


class DiffusionConfig(_Section):
    num_steps: int = Field(default=1000, ge=1)
    schedule: Literal["cosine", "linear"] = "cosine"
    paper_literal_noise: bool = False  # corrupt with (1 - alpha_bar) instead of its square root


class ModelConfig(_Section):
    """Architecture; defaults are the full fusion model."""

    d_model: int = Field(default=128, ge=1)
    num_heads: int = Field(default=4, ge=1)
    head_dim: int = Field(default=32, ge=1)
    roi_grid: int = Field(default=7, ge=1)
    fusion_mode: Literal["res_ca", "ca", "sum", "concat", "dp", "mlp"] = "res_ca"
    attention_scope: Literal["across", "diagonal"] = "across"
    encoder_fusion: bool = True
    image_roi: bool = True
    time_embedding: bool = True
    image_channels: int = Field(default=64, ge=1)
    image_strides: list[int] = Field(default_factory=lambda: [2, 2, 1, 1])
    voxel_channels: int = Field(default=16, ge=1)
    point_channels: int = Field(default=64, ge=1)
    bev_stride: int = Field(default=4, ge=1)
    dtype: Literal["float32", "float64"] = "float32"


class TrainConfig(_Section):
    lr: float = Field(default=1e-4, gt=0)
    betas: tuple[float, float] = (0.9, 0.999)
    dropout: float = Field(default=0.3, ge=0, lt=1)
    epochs: int = Field(default=60, ge=1)
    batch_size: int = Field(default=1, ge=1)
    seed: int = 0
    num_proposals: int = Field(default=300, ge=1)
    grad_clip: float = Field(default=1.0, gt=0)
    max_steps: int | None = Field(default=None, ge=1)
    prefetch: int = Field(default=2, ge=1)
    loader_workers: int = Field(default=2, ge=1)
    resume: str | None = None


class MatchConfig(_Section):
    kind: Literal["ota", "hungarian"] = "ota"
    top_k: int = Field(default=3, ge=1)


class LossConfig(_Section):
    cls_weight: float = Field(default=1.0, ge=0)
    reg_weight: float = Field(default=1.0, ge=0)
    l1_weight: float = Field(default=2.5, ge=0)
    giou_weight: float = Field(default=1.0, ge=0)
    center_weight: float = Field(default=1.0, ge=0)
    gamma: float = Field(default=2.0, ge=0)


class InferConfig(_Section):
    d_steps: int = Field(default=4, ge=1)
    num_proposals: int = Field(default=300, ge=1)
    score_threshold: float = Field(default=0.05, ge=0, le=1)
    nms: bool = False
    nms_iou: float = Field(default=0.5, gt=0, le=1)
    box_renewal: bool = False
    renewal_threshold: float = Field(default=0.5, ge=0, le=1)
    seed: int = 0


class EvalConfig(_Section):
    iou_threshold: float = Field(default=0.7, gt=0, le=1)
    interp_points: Literal[11, 40] = 40
    difficulty: Literal["easy", "moderate", "hard"] | None = None


class AblateConfig(_Section):
    fusion_modes: list[Literal["res_ca", "ca", "sum", "concat", "dp", "mlp"]] = Field(
        default_factory=lambda: ["res_ca"]
    )
    image_roi: list[bool] = Field(default_factory=lambda: [True, False])
    d_steps: list[int] = Field(default_factory=lambda: [1, 4, 8])
    num_proposals: list[int] = Field(default_factory=lambda: [100, 300])
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2])
    num_scenes: int = Field(default=50, ge=1)
    train_steps: int = Field(default=200, ge=1)
    workers: int = Field(default=1, ge=1)


class SelftestConfig(_Section):
    seed: int = 0
    iou_pairs: int = Field(default=100, ge=1)
    mc_samples: int = Field(default=1_000_000, ge=1000)
    iou_tolerance: float = Field(default=0.01, gt=0)
    hungarian_trials: int = Field(default=1000, ge=1)
    max_assignment_size: int = Field(default=7, ge=1, le=8)
    gradcheck: bool = True


class RunConfig(_Section):
    """Every key of a run; unknown keys are rejected."""

    data: DataConfig = Field(default_factory=DataConfig)
    diffusion: DiffusionConfig = Field(default_factory=DiffusionConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    match: MatchConfig = Field(default_factory=MatchConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    infer: InferConfig = Field(default_factory=InferConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    ablate: AblateConfig = Field(default_factory=AblateConfig)
    selftest: SelftestConfig = Field(default_factory=SelftestConfig)

    @model_validator(mode="after")
    def validate_steps(self) -> "RunConfig":
        limit = self.diffusion.num_steps
        if self.infer.d_steps > limit:
            raise ValueError(f"infer.d_steps={self.infer.d_steps} exceeds diffusion.num_steps={limit}")
        if any(d < 1 or d > limit for d in self.ablate.d_steps):
            raise ValueError(f"ablate.d_steps must lie in [1, {limit}]")
        return self


def find_config_file(cwd: Path | None = None) -> Path | None:
    """Find config file in standard locations.

    Search order:
    1. FUSEDET_CONFIG_PATH env var (if set)
    2. fusedet.yaml or fusedet.json in cwd
    3. .fusedet/fusedet.yaml in cwd
    4. ~/.fusedet/fusedet.yaml
    """
    if env_path := os.environ.get(CONFIG_ENV_VAR):
        return Path(env_path)

    base = cwd or Path.cwd()
    candidates = [
        base / "fusedet.yaml",
        base / "fusedet.json",
        base / ".fusedet" / "fusedet.yaml",
        Path.home() / ".fusedet" / "fusedet.yaml",
    ]
    for path in candidates:
        if path.exists():
            return path

    return None  # No config found, use defaults


def _parse_scalar(text: str) -> Any:
    # YAML 1.1 reads "3e-4" as a string
    value = yaml.safe_load(text) if text else ""
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def parse_overrides(args: Sequence[str]) -> dict[str, Any]:
    """`--section.key=value` flags -> {"section.key": typed value}."""
    overrides: dict[str, Any] = {}
    for arg in args:
        if not arg.startswith("--") or "=" not in arg:
            raise ConfigError(f"Override must look like --section.key=value, got {arg!r}")
        key, _, raw = arg[2:].partition("=")
        if "." not in key:
            raise ConfigError(f"Override key needs a section, got {key!r}")
        overrides[key] = _parse_scalar(raw)
    return overrides


def apply_overrides(data: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Write dotted keys into a nested raw config document."""
    for dotted, value in overrides.items():
        node = data
        *parents, leaf = dotted.split(".")
        for part in parents:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Cannot override {dotted}: {part} is not a section")
            node = child
        node[leaf] = value
    return data


def read_config_document(config_path: Path | str | None) -> dict[str, Any]:
    if config_path is None or not Path(config_path).exists():
        return {}
    try:
        with open(config_path, encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot read config {config_path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config {config_path} must be a mapping at the top level")
    return data


def load_config(
    config_path: Path | str | None = None,
    overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """Load YAML/JSON config, apply overrides, validate."""
    if config_path is None:
        config_path = find_config_file()
    data = apply_overrides(read_config_document(config_path), overrides or {})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV_VAR) or DEFAULT_OUTPUT_ROOT)
