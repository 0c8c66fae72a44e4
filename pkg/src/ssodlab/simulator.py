"""Statistical simulator standing in for a trained detector.

Scenes are synthesized with a controlled small/large object mix, and a
"teacher" produces detections whose confidence, miss rate, localization
noise, and background scores follow configured distributions.  Per-group
score gaps and miss rates are chosen so that small objects score lower
and get missed more often, which is the regime the label engine targets.

All randomness flows through ``numpy`` generators seeded by an explicit
split function, so every artifact is reproducible from one run seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import PlacementError
from .geometry import RotatedBox, boxes_to_array, is_small
from .types import Detection

# stream tags for seed splitting (spawn-key path components)
SCENE_STREAM = 0
TEACHER_STREAM = 1
LOSS_STREAM = 2


def seed_sequence(seed: int, *path: int) -> np.random.SeedSequence:
    """Deterministic child sequence: the run seed is the entropy, the path the spawn key."""
    if not 0 <= int(seed) < 2 ** 64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Generator for one named stream of a run."""
    return np.random.default_rng(seed_sequence(seed, *path))


@dataclass(frozen=True)
class SceneConfig:
    """Distribution of synthetic scenes.

    Object areas are ``side**2`` regardless of aspect ratio, so the side
    ranges directly control the small/large split: small sides must stay
    below 32 px and large sides at or above it.
    """

    image_size: tuple[int, int] = (1024, 1024)
    object_count: int = 24
    small_fraction: float = 0.66
    small_side: tuple[float, float] = (8.0, 31.0)
    large_side: tuple[float, float] = (32.0, 96.0)
    aspect_range: tuple[float, float] = (0.5, 2.0)
    class_count: int = 5
    max_overlap_iou: float = 0.1
    placement_retries: int = 100

    def __post_init__(self) -> None:
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise ValueError(f"image size must be positive: {self.image_size}")
        if self.object_count < 0:
            raise ValueError(f"object count must be non-negative: {self.object_count}")
        if not 0.0 <= self.small_fraction <= 1.0:
            raise ValueError(f"small fraction must be in [0, 1]: {self.small_fraction}")
        lo, hi = self.small_side
        if not 0.0 < lo <= hi or hi >= 32.0:
            raise ValueError(f"small sides must satisfy 0 < lo <= hi < 32: {self.small_side}")
        lo, hi = self.large_side
        if not 32.0 <= lo <= hi:
            raise ValueError(f"large sides must satisfy 32 <= lo <= hi: {self.large_side}")
        lo, hi = self.aspect_range
        if not 0.0 < lo <= hi:
            raise ValueError(f"aspect range must be positive and ordered: {self.aspect_range}")
        if self.class_count < 1:
            raise ValueError(f"class count must be at least 1: {self.class_count}")
        if not 0.0 <= self.max_overlap_iou <= 1.0:
            raise ValueError(f"overlap cap must be in [0, 1]: {self.max_overlap_iou}")
        if self.placement_retries < 1:
            raise ValueError(f"placement retries must be at least 1: {self.placement_retries}")


@dataclass(frozen=True)
class TeacherModel:
    """Behavior of the simulated teacher detector.

    Score distributions are Beta(a, b) pairs.  Small correct detections
    score around 0.55 with a wide spread while large ones sit near 0.85,
    a deliberately imbalanced teacher.  Background scores depend on
    whether the region overlaps a real object: occupied regions get low
    background confidence even when the object itself was missed.
    """

    small_score: tuple[float, float] = (2.2, 1.8)
    large_score: tuple[float, float] = (17.0, 3.0)
    miss_rate_small: float = 0.35
    miss_rate_large: float = 0.05
    false_positive_rate: float = 0.15
    false_positive_score: tuple[float, float] = (1.5, 4.0)
    fp_small_fraction: float = 0.66
    fp_small_side: tuple[float, float] = (8.0, 31.0)
    fp_large_side: tuple[float, float] = (32.0, 96.0)
    center_noise_px: float = 1.5
    size_noise: float = 0.05
    angle_noise: float = 0.05
    bg_overlap: tuple[float, float] = (2.0, 6.0)
    bg_background: tuple[float, float] = (9.0, 2.0)
    proposal_count: int = 512
    proposal_near_fraction: float = 0.3
    loss_mean: float = 1.0

    def __post_init__(self) -> None:
        for name in ("small_score", "large_score", "false_positive_score",
                     "bg_overlap", "bg_background"):
            a, b = getattr(self, name)
            if a <= 0.0 or b <= 0.0:
                raise ValueError(f"{name} Beta parameters must be positive: {(a, b)}")
        for name in ("miss_rate_small", "miss_rate_large", "false_positive_rate",
                     "fp_small_fraction", "proposal_near_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]: {v}")
        for name in ("center_noise_px", "size_noise", "angle_noise"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.proposal_count < 0:
            raise ValueError(f"proposal count must be non-negative: {self.proposal_count}")
        if self.loss_mean <= 0.0:
            raise ValueError(f"loss mean must be positive: {self.loss_mean}")


@dataclass(frozen=True)
class SimScene:
    """One synthetic scene: ground truth plus size bookkeeping."""

    image_id: str
    image_size: tuple[int, int]
    gts: tuple[Detection, ...]
    n_small: int
    n_large: int


@dataclass(frozen=True)
class Proposals:
    """Region proposals with the teacher's background score for each."""

    boxes: np.ndarray
    bg_scores: np.ndarray

    def __len__(self) -> int:
        return int(self.boxes.shape[0])


class LossSampler:
    """Seeded stream of non-negative loss stand-in values.

    Values are exponential with the configured mean and independent of
    everything else; draws are consumed in call order.
    """

    def __init__(self, seq: np.random.SeedSequence, mean: float) -> None:
        self._rng = np.random.default_rng(seq)
        self._mean = float(mean)

    def draw(self, n: int) -> np.ndarray:
        return self._rng.exponential(self._mean, size=int(n))


@dataclass(frozen=True)
class TeacherSim:
    """Everything the simulated teacher emits for one scene."""

    predictions: tuple[Detection, ...]
    proposals: Proposals
    detected: np.ndarray
    losses: LossSampler = field(repr=False)


def _sample_box_shape(rng: np.random.Generator, small: bool,
                      small_side: tuple[float, float], large_side: tuple[float, float],
                      aspect_range: tuple[float, float]) -> tuple[float, float, float]:
    side = rng.uniform(*(small_side if small else large_side))
    aspect = math.exp(rng.uniform(math.log(aspect_range[0]), math.log(aspect_range[1])))
    root = math.sqrt(aspect)
    return side * root, side / root, rng.uniform(-math.pi / 2.0, math.pi / 2.0)


def gen_scene(config: SceneConfig, seed: int, image_id: str = "scene_000000") -> SimScene:
    """Synthesize one scene.

    Draw order: per-object shape specs first (group, side, aspect, angle,
    class), then center placements with up to ``placement_retries``
    rejection attempts per object against the pairwise overlap cap.
    """
    rng = rng_for(seed, SCENE_STREAM)
    width, height = config.image_size
    specs = []
    for _ in range(config.object_count):
        small = bool(rng.random() < config.small_fraction)
        w, h, theta = _sample_box_shape(
            rng, small, config.small_side, config.large_side, config.aspect_range)
        category = f"c{int(rng.integers(config.class_count))}"
        specs.append((w, h, theta, category))

    placed = np.empty((config.object_count, 5), dtype=np.float64)
    gts = []
    for i, (w, h, theta, category) in enumerate(specs):
        margin = 0.5 * math.hypot(w, h)
        if margin >= width - margin or margin >= height - margin:
            raise PlacementError(
                f"object {i} ({w:.1f}x{h:.1f}) cannot fit inside {width}x{height}")
        for _ in range(config.placement_retries):
            cx = rng.uniform(margin, width - margin)
            cy = rng.uniform(margin, height - margin)
            candidate = np.array([[cx, cy, w, h, theta]])
            if i > 0:
                overlaps = kernels.rotated_iou_matrix(candidate, placed[:i])
                if overlaps.max() > config.max_overlap_iou:
                    continue
            placed[i] = candidate[0]
            gts.append(Detection(box=RotatedBox(cx, cy, w, h, theta),
                                 category=category, score=1.0))
            break
        else:
            raise PlacementError(
                f"could not place object {i} after {config.placement_retries} attempts")

    n_small = sum(1 for g in gts if is_small(g.box))
    return SimScene(
        image_id=image_id,
        image_size=(int(width), int(height)),
        gts=tuple(gts),
        n_small=n_small,
        n_large=len(gts) - n_small,
    )


def _max_gt_overlap(boxes: np.ndarray, gt_boxes: np.ndarray) -> np.ndarray:
    if boxes.shape[0] == 0 or gt_boxes.shape[0] == 0:
        return np.zeros(boxes.shape[0], dtype=np.float64)
    return kernels.rotated_iou_matrix(boxes, gt_boxes).max(axis=1)


def simulate_teacher(scene: SimScene, model: TeacherModel, seed: int) -> TeacherSim:
    """Run the simulated teacher on a scene.

    Draw order: per-object miss coins, per-detection score and noise,
    false-positive count and contents, prediction background scores,
    proposals, proposal background scores.  Loss values come from a
    separate stream so downstream consumption cannot shift anything here.
    """
    rng = rng_for(seed, TEACHER_STREAM)
    width, height = scene.image_size
    gt_arr = boxes_to_array([g.box for g in scene.gts])

    detected = np.zeros(len(scene.gts), dtype=bool)
    for i, gt in enumerate(scene.gts):
        miss = model.miss_rate_small if is_small(gt.box) else model.miss_rate_large
        detected[i] = rng.random() >= miss

    boxes: list[RotatedBox] = []
    categories: list[str] = []
    scores: list[float] = []
    for i, gt in enumerate(scene.gts):
        if not detected[i]:
            continue
        params = model.small_score if is_small(gt.box) else model.large_score
        score = float(rng.beta(*params))
        dx, dy = rng.normal(0.0, model.center_noise_px, size=2)
        fw, fh = np.exp(rng.normal(0.0, model.size_noise, size=2))
        dtheta = rng.normal(0.0, model.angle_noise)
        box = gt.box
        boxes.append(RotatedBox(box.cx + dx, box.cy + dy,
                                box.w * fw, box.h * fh, box.theta + dtheta))
        categories.append(gt.category)
        scores.append(score)

    scene_classes = sorted({g.category for g in scene.gts}) or ["c0"]
    n_fp = int(rng.poisson(model.false_positive_rate * max(len(scene.gts), 1)))
    for _ in range(n_fp):
        small = bool(rng.random() < model.fp_small_fraction)
        w, h, theta = _sample_box_shape(
            rng, small, model.fp_small_side, model.fp_large_side, (0.5, 2.0))
        cx = rng.uniform(0.0, width)
        cy = rng.uniform(0.0, height)
        boxes.append(RotatedBox(cx, cy, w, h, theta))
        categories.append(scene_classes[int(rng.integers(len(scene_classes)))])
        scores.append(float(rng.beta(*model.false_positive_score)))

    pred_overlap = _max_gt_overlap(boxes_to_array(boxes), gt_arr)
    predictions = []
    for box, category, score, ov in zip(boxes, categories, scores, pred_overlap):
        params = model.bg_overlap if ov >= 0.5 else model.bg_background
        predictions.append(Detection(box=box, category=category, score=score,
                                     bg_score=float(rng.beta(*params))))

    prop_rows = []
    n_near = int(round(model.proposal_count * model.proposal_near_fraction))
    if len(scene.gts) == 0:
        n_near = 0
    for _ in range(n_near):
        gt = scene.gts[int(rng.integers(len(scene.gts)))].box
        cx = gt.cx + rng.uniform(-0.25, 0.25) * gt.w
        cy = gt.cy + rng.uniform(-0.25, 0.25) * gt.h
        w = gt.w * rng.uniform(0.8, 1.25)
        h = gt.h * rng.uniform(0.8, 1.25)
        prop_rows.append((cx, cy, w, h, gt.theta + rng.uniform(-0.1, 0.1)))
    for _ in range(model.proposal_count - n_near):
        small = bool(rng.random() < model.fp_small_fraction)
        w, h, theta = _sample_box_shape(
            rng, small, model.fp_small_side, model.fp_large_side, (0.5, 2.0))
        prop_rows.append((rng.uniform(0.0, width), rng.uniform(0.0, height), w, h, theta))
    prop_boxes = np.array(prop_rows, dtype=np.float64).reshape(-1, 5)

    prop_overlap = _max_gt_overlap(prop_boxes, gt_arr)
    bg_scores = np.empty(len(prop_rows), dtype=np.float64)
    for j, ov in enumerate(prop_overlap):
        params = model.bg_overlap if ov >= 0.5 else model.bg_background
        bg_scores[j] = rng.beta(*params)

    return TeacherSim(
        predictions=tuple(predictions),
        proposals=Proposals(boxes=prop_boxes, bg_scores=bg_scores),
        detected=detected,
        losses=LossSampler(seed_sequence(seed, LOSS_STREAM), model.loss_mean),
    )
