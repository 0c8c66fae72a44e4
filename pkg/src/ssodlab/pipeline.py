"""Teacher-student training loop orchestration on simulated scenes.

Each iteration runs the full label engine: the simulated teacher predicts
on unlabeled scenes, size-aware thresholding keeps pseudo labels, anchors
are assigned by Gaussian transport distance, negatives are mined from the
teacher's background map, and the resulting loss stand-ins are combined
with the supervised branch.  The teacher parameter vector then tracks the
student by exponential moving average.  No learning happens; the point is
that every quantity is deterministic and checkable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .geometry import boxes_to_array, is_small
from .sat import SatThresholds, apply_thresholds, select_pseudo_labels
from .simulator import (
    LossSampler,
    SceneConfig,
    SimScene,
    TeacherModel,
    TeacherSim,
    gen_scene,
    seed_sequence,
    simulate_teacher,
)
from .sla import (
    AnchorSet,
    LossSample,
    baseline_iou_assign,
    positive_loss_reweight,
    topk_assign,
    wd_similarity_matrix,
)
from .tnl import negative_loss, select_negatives

# stream tags for pipeline-level seed splitting (simulator uses 0..2)
SUP_LOSS_STREAM = 10
TEACHER_SEED_STREAM = 11
INIT_STREAM = 12
LABELED_SCENE_STREAM = 13
UNLABELED_SCENE_STREAM = 14
ITERATION_STREAM = 15


def child_seed(seed: int, *path: int) -> int:
    """Derive an independent integer seed for a named stream of a run."""
    return int(seed_sequence(seed, *path).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs of the training loop and label engine."""

    alpha: float = 4.0
    percentile: float = 35.0
    floor: float = 0.5
    top_k: int = 2
    bg_threshold: float = 0.7
    hard_score_max: float = 0.5
    ema_momentum: float = 0.999
    labeled_per_batch: int = 1
    unlabeled_per_batch: int = 4
    small_area: float = 1024.0
    param_dim: int = 16

    def __post_init__(self) -> None:
        if not np.isfinite(self.alpha) or self.alpha < 0.0:
            raise ValueError(f"alpha must be finite and non-negative: {self.alpha}")
        if not 0.0 <= self.percentile <= 100.0:
            raise ValueError(f"percentile must be in [0, 100]: {self.percentile}")
        for name in ("floor", "bg_threshold", "hard_score_max"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]: {v}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be at least 1: {self.top_k}")
        if not 0.0 <= self.ema_momentum < 1.0:
            raise ValueError(f"ema momentum must be in [0, 1): {self.ema_momentum}")
        if self.labeled_per_batch < 0 or self.unlabeled_per_batch < 0:
            raise ValueError("batch sizes must be non-negative")
        if self.small_area <= 0.0:
            raise ValueError(f"small area cutoff must be positive: {self.small_area}")
        if self.param_dim < 1:
            raise ValueError(f"param dim must be at least 1: {self.param_dim}")


@dataclass
class EmaState:
    """Teacher and student parameter vectors; the teacher tracks the student."""

    teacher: np.ndarray
    student: np.ndarray

    def __post_init__(self) -> None:
        self.teacher = np.asarray(self.teacher, dtype=np.float64)
        self.student = np.asarray(self.student, dtype=np.float64)
        if self.teacher.shape != self.student.shape:
            raise ValueError("teacher and student parameters must share a shape")

    def copy(self) -> "EmaState":
        return EmaState(teacher=self.teacher.copy(), student=self.student.copy())

    @property
    def gap(self) -> float:
        return float(np.linalg.norm(self.teacher - self.student))


def ema_update(state: EmaState, momentum: float) -> EmaState:
    """One exponential-moving-average step of the teacher toward the student."""
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1): {momentum}")
    teacher = momentum * state.teacher + (1.0 - momentum) * state.student
    return EmaState(teacher=teacher, student=state.student.copy())


def combine_losses(supervised: float, unsupervised: float, alpha: float = 4.0) -> float:
    """Total loss: supervised plus the weighted unsupervised branch."""
    if not np.isfinite(alpha) or alpha < 0.0:
        raise ValueError(f"alpha must be finite and non-negative: {alpha}")
    return float(supervised) + float(alpha) * float(unsupervised)


@dataclass(frozen=True)
class DatasetBatch:
    """One iteration's worth of scenes."""

    labeled: tuple[SimScene, ...]
    unlabeled: tuple[SimScene, ...]


@dataclass(frozen=True)
class SceneSummary:
    """Label-engine bookkeeping for one unlabeled scene."""

    image_id: str
    n_predictions: int
    n_pseudo: int
    n_positives: int
    n_small_positives: int
    n_large_positives: int
    n_negatives_normal: int
    n_negatives_hard: int

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "n_predictions": self.n_predictions,
            "n_pseudo": self.n_pseudo,
            "n_positives": self.n_positives,
            "n_small_positives": self.n_small_positives,
            "n_large_positives": self.n_large_positives,
            "n_negatives_normal": self.n_negatives_normal,
            "n_negatives_hard": self.n_negatives_hard,
        }


@dataclass(frozen=True)
class IterationRecord:
    """Everything one iteration produced, ready for serialization."""

    index: int
    thresholds: SatThresholds
    scenes: tuple[SceneSummary, ...]
    n_small_positives: int
    n_large_positives: int
    loss_supervised: float
    loss_unsupervised: float
    loss_total: float
    ema_gap: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "thresholds": {
                "small_threshold": self.thresholds.small_threshold,
                "large_threshold": self.thresholds.large_threshold,
                "percentile": self.thresholds.percentile,
                "floor": self.thresholds.floor,
                "n_small_candidates": self.thresholds.n_small_candidates,
                "n_large_candidates": self.thresholds.n_large_candidates,
                "n_small_kept": self.thresholds.n_small_kept,
                "n_large_kept": self.thresholds.n_large_kept,
            },
            "scenes": [s.to_dict() for s in self.scenes],
            "n_small_positives": self.n_small_positives,
            "n_large_positives": self.n_large_positives,
            "loss_supervised": self.loss_supervised,
            "loss_unsupervised": self.loss_unsupervised,
            "loss_total": self.loss_total,
            "ema_gap": self.ema_gap,
        }


def _supervised_loss(scenes: Sequence[SimScene], anchors: AnchorSet,
                     loss_mean: float, seed: int) -> float:
    """Assign ground truth to anchors by overlap and sum one loss draw per positive."""
    total = 0.0
    for i, scene in enumerate(scenes):
        if not scene.gts:
            continue
        assignment = baseline_iou_assign(
            boxes_to_array([g.box for g in scene.gts]), anchors, iou_threshold=0.5)
        n_pos = int((assignment.anchor_labels >= 0).sum())
        sampler = LossSampler(seed_sequence(seed, SUP_LOSS_STREAM, i), loss_mean)
        total += float(sampler.draw(n_pos).sum())
    return total


def run_iteration(
    batch: DatasetBatch,
    state: EmaState,
    config: PipelineConfig,
    teacher_model: TeacherModel,
    anchors: AnchorSet,
    seed: int,
    index: int = 0,
) -> IterationRecord:
    """Run one training iteration and apply the EMA update to ``state``.

    The unlabeled branch pools teacher predictions across the batch for
    thresholding, assigns kept pseudo labels per scene, and draws loss
    stand-ins per scene in a fixed order: positives (pseudo index, then
    pick rank), plain negatives, hard negatives.
    """
    loss_sup = _supervised_loss(batch.labeled, anchors, teacher_model.loss_mean, seed)

    sims: list[TeacherSim] = []
    for j, scene in enumerate(batch.unlabeled):
        sims.append(simulate_teacher(
            scene, teacher_model, child_seed(seed, TEACHER_SEED_STREAM, j)))

    pooled = [p for sim in sims for p in sim.predictions]
    _, thresholds = select_pseudo_labels(
        pooled, percentile=config.percentile, floor=config.floor,
        small_area=config.small_area)

    positive_samples: list[LossSample] = []
    scene_negative_loss = 0.0
    summaries: list[SceneSummary] = []
    n_small_pos = n_large_pos = 0
    for scene, sim in zip(batch.unlabeled, sims):
        kept = apply_thresholds(sim.predictions, thresholds, small_area=config.small_area)
        kept_boxes = boxes_to_array([d.box for d in kept])
        if kept:
            matrix = wd_similarity_matrix(kept_boxes, anchors)
            assignment = topk_assign(matrix, k=config.top_k)
            positives = assignment.positives
        else:
            positives = ()
        n_positives = sum(len(p) for p in positives)
        scene_small = scene_large = 0
        draws = sim.losses.draw(n_positives)
        cursor = 0
        for pi, picks in enumerate(positives):
            small = is_small(kept[pi].box, small_area=config.small_area)
            for _ in picks:
                positive_samples.append(LossSample(value=float(draws[cursor]), is_small=small))
                cursor += 1
            if small:
                scene_small += len(picks)
            else:
                scene_large += len(picks)

        selection = select_negatives(
            sim.proposals.boxes, sim.proposals.bg_scores, sim.predictions,
            bg_threshold=config.bg_threshold, hard_score_max=config.hard_score_max)
        normal_draws = sim.losses.draw(len(selection.kept_normal))
        hard_draws = sim.losses.draw(len(selection.hard))
        scene_negative_loss += negative_loss(
            normal_losses=normal_draws.tolist(),
            hard_losses=[(float(v), h.score) for v, h in zip(hard_draws, selection.hard)],
        )

        n_small_pos += scene_small
        n_large_pos += scene_large
        summaries.append(SceneSummary(
            image_id=scene.image_id,
            n_predictions=len(sim.predictions),
            n_pseudo=len(kept),
            n_positives=n_positives,
            n_small_positives=scene_small,
            n_large_positives=scene_large,
            n_negatives_normal=len(selection.kept_normal),
            n_negatives_hard=len(selection.hard),
        ))

    loss_pos, _ = positive_loss_reweight(positive_samples)
    loss_unsup = loss_pos + scene_negative_loss
    loss_total = combine_losses(loss_sup, loss_unsup, config.alpha)

    updated = ema_update(state, config.ema_momentum)
    state.teacher = updated.teacher
    return IterationRecord(
        index=index,
        thresholds=thresholds,
        scenes=tuple(summaries),
        n_small_positives=n_small_pos,
        n_large_positives=n_large_pos,
        loss_supervised=loss_sup,
        loss_unsupervised=loss_unsup,
        loss_total=loss_total,
        ema_gap=state.gap,
    )


def init_state(config: PipelineConfig, seed: int) -> EmaState:
    """Random initial teacher/student vectors (distinct, so the gap is positive)."""
    rng = np.random.default_rng(seed_sequence(seed, INIT_STREAM))
    return EmaState(
        teacher=rng.normal(size=config.param_dim),
        student=rng.normal(size=config.param_dim),
    )


def run_pipeline(
    config: PipelineConfig,
    scene_config: SceneConfig,
    teacher_model: TeacherModel,
    anchors: AnchorSet,
    iterations: int,
    seed: int,
) -> Iterator[IterationRecord]:
    """Generate fresh scene batches and yield one record per iteration."""
    if iterations < 0:
        raise ValueError(f"iteration count must be non-negative: {iterations}")
    state = init_state(config, seed)
    for t in range(iterations):
        labeled = tuple(
            gen_scene(scene_config, child_seed(seed, LABELED_SCENE_STREAM, t, i),
                      image_id=f"lab_{t:04d}_{i:02d}")
            for i in range(config.labeled_per_batch)
        )
        unlabeled = tuple(
            gen_scene(scene_config, child_seed(seed, UNLABELED_SCENE_STREAM, t, j),
                      image_id=f"unl_{t:04d}_{j:02d}")
            for j in range(config.unlabeled_per_batch)
        )
        batch = DatasetBatch(labeled=labeled, unlabeled=unlabeled)
        yield run_iteration(batch, state, config, teacher_model, anchors,
                            seed=child_seed(seed, ITERATION_STREAM, t), index=t)
