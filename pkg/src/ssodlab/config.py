"""Run configuration: one JSON file wiring every stage together.

The file has four optional sections (``pipeline``, ``scene``, ``teacher``,
``anchors``) plus ``scene_count``.  Unknown keys anywhere are rejected so
typos cannot silently fall back to defaults.  ``SSODLAB_CONFIG`` names a
default config path for the command-line tools.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .pipeline import PipelineConfig
from .simulator import SceneConfig, TeacherModel
from .sla import AnchorSet, gen_anchor_grid

ENV_VAR = "SSODLAB_CONFIG"

# short file keys -> PipelineConfig field names
_PIPELINE_KEYS = {
    "alpha": "alpha",
    "p": "percentile",
    "k": "top_k",
    "floor": "floor",
    "bg_thr": "bg_threshold",
    "s_max": "hard_score_max",
    "ema_momentum": "ema_momentum",
    "labeled_per_batch": "labeled_per_batch",
    "unlabeled_per_batch": "unlabeled_per_batch",
    "small_area": "small_area",
    "param_dim": "param_dim",
}
_SCENE_PAIRS = {"image_size", "small_side", "large_side", "aspect_range"}
_TEACHER_PAIRS = {"small_score", "large_score", "false_positive_score",
                  "fp_small_side", "fp_large_side", "bg_overlap", "bg_background"}
_SCENE_KEYS = {f.name for f in dataclasses.fields(SceneConfig)}
_TEACHER_KEYS = {f.name for f in dataclasses.fields(TeacherModel)}
_ANCHOR_KEYS = {"strides", "scale", "ratios"}
_TOP_KEYS = {"pipeline", "scene", "teacher", "anchors", "scene_count"}


@dataclass(frozen=True)
class RunConfig:
    """Effective configuration for a whole run."""

    pipeline: PipelineConfig = PipelineConfig()
    scene: SceneConfig = SceneConfig()
    teacher: TeacherModel = TeacherModel()
    anchor_strides: tuple[int, ...] = (8, 16, 32, 64, 128)
    anchor_scale: float = 8.0
    anchor_ratios: tuple[float, ...] = (0.5, 1.0, 2.0)
    scene_count: int = 8

    def anchors(self) -> AnchorSet:
        return gen_anchor_grid(self.scene.image_size, strides=self.anchor_strides,
                               scale=self.anchor_scale, ratios=self.anchor_ratios)

    def to_dict(self) -> dict:
        """Full effective configuration, using the file's key names."""
        pipeline = {short: getattr(self.pipeline, long)
                    for short, long in _PIPELINE_KEYS.items()}
        scene = {}
        for f in dataclasses.fields(SceneConfig):
            value = getattr(self.scene, f.name)
            scene[f.name] = list(value) if f.name in _SCENE_PAIRS else value
        teacher = {}
        for f in dataclasses.fields(TeacherModel):
            value = getattr(self.teacher, f.name)
            teacher[f.name] = list(value) if f.name in _TEACHER_PAIRS else value
        return {
            "pipeline": pipeline,
            "scene": scene,
            "teacher": teacher,
            "anchors": {
                "strides": list(self.anchor_strides),
                "scale": self.anchor_scale,
                "ratios": list(self.anchor_ratios),
            },
            "scene_count": self.scene_count,
        }


def _require_dict(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a JSON object")
    return value


def _pair(value, where: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{where} must be a pair of numbers")
    try:
        return (float(value[0]), float(value[1]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} must be a pair of numbers") from exc


def _int_pair(value, where: str) -> tuple[int, int]:
    pair = _pair(value, where)
    return (int(pair[0]), int(pair[1]))


def _build_pipeline(data: dict) -> PipelineConfig:
    kwargs = {}
    for key, value in data.items():
        if key not in _PIPELINE_KEYS:
            raise ConfigError(f"unknown config key 'pipeline.{key}'")
        kwargs[_PIPELINE_KEYS[key]] = value
    try:
        return PipelineConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"pipeline: {exc}") from exc


def _build_scene(data: dict) -> SceneConfig:
    kwargs = {}
    for key, value in data.items():
        if key not in _SCENE_KEYS:
            raise ConfigError(f"unknown config key 'scene.{key}'")
        if key == "image_size":
            value = _int_pair(value, f"scene.{key}")
        elif key in _SCENE_PAIRS:
            value = _pair(value, f"scene.{key}")
        kwargs[key] = value
    try:
        return SceneConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"scene: {exc}") from exc


def _build_teacher(data: dict) -> TeacherModel:
    kwargs = {}
    for key, value in data.items():
        if key not in _TEACHER_KEYS:
            raise ConfigError(f"unknown config key 'teacher.{key}'")
        if key in _TEACHER_PAIRS:
            value = _pair(value, f"teacher.{key}")
        kwargs[key] = value
    try:
        return TeacherModel(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"teacher: {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    """Build the effective configuration, applying defaults for absent keys."""
    data = _require_dict(data, "config")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")

    pipeline = _build_pipeline(_require_dict(data.get("pipeline", {}), "pipeline"))
    scene = _build_scene(_require_dict(data.get("scene", {}), "scene"))
    teacher = _build_teacher(_require_dict(data.get("teacher", {}), "teacher"))

    anchors = _require_dict(data.get("anchors", {}), "anchors")
    unknown = set(anchors) - _ANCHOR_KEYS
    if unknown:
        raise ConfigError(f"unknown config key 'anchors.{sorted(unknown)[0]}'")
    strides = anchors.get("strides", [8, 16, 32, 64, 128])
    if not isinstance(strides, (list, tuple)) or not strides:
        raise ConfigError("anchors.strides must be a non-empty list of integers")
    try:
        strides = tuple(int(s) for s in strides)
    except (TypeError, ValueError) as exc:
        raise ConfigError("anchors.strides must be a non-empty list of integers") from exc
    scale = anchors.get("scale", 8.0)
    if not isinstance(scale, (int, float)) or isinstance(scale, bool):
        raise ConfigError("anchors.scale must be a number")
    ratios = anchors.get("ratios", [0.5, 1.0, 2.0])
    if not isinstance(ratios, (list, tuple)) or not ratios:
        raise ConfigError("anchors.ratios must be a non-empty list of numbers")
    try:
        ratios = tuple(float(r) for r in ratios)
    except (TypeError, ValueError) as exc:
        raise ConfigError("anchors.ratios must be a non-empty list of numbers") from exc

    scene_count = data.get("scene_count", 8)
    if not isinstance(scene_count, int) or isinstance(scene_count, bool) or scene_count < 0:
        raise ConfigError("scene_count must be a non-negative integer")

    config = RunConfig(pipeline=pipeline, scene=scene, teacher=teacher,
                       anchor_strides=strides, anchor_scale=float(scale),
                       anchor_ratios=ratios, scene_count=scene_count)
    try:
        config.anchors()
    except ValueError as exc:
        raise ConfigError(f"anchors: {exc}") from exc
    return config


def load_config(path: str | Path) -> RunConfig:
    """Load and validate a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from exc
    return from_dict(data)


def resolve_config(path: str | None) -> RunConfig:
    """Config from an explicit path, the environment, or defaults (that order)."""
    if path is None:
        path = os.environ.get(ENV_VAR)
    if path is None:
        return RunConfig()
    return load_config(path)
