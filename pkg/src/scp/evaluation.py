"""Ground-truth evaluation: landmark detection from templates, radial-error
metrics, the label-aware representative score, and correlation utilities."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, DegenerateVarianceError, SchemaError, ValidationError
from .features import FeatureMap
from .keypoints import KeyPointSet
from .matching import match_forward_multi
from .parallel import map_ordered
from .selection import CombinationScore, ReverseSimCache, representative_score


@dataclass(frozen=True)
class LandmarkSet:
    """Ordered landmark coordinates for one image; sub-pixel reals allowed."""

    image_id: str
    points: np.ndarray  # (L, 2) float64, columns x, y

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValidationError(f"landmarks must be (L, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("landmark coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class EvalReport:
    mre_mm: float
    sdr: Mapping[float, float]
    per_landmark_errors_mm: tuple[float, ...]


def _pixel(coord: float) -> int:
    # round half up, for determinism independent of the banker's rule
    return int(np.floor(coord + 0.5))


def detect_landmarks(tmpls: Sequence[tuple[FeatureMap, LandmarkSet]],
                     target: FeatureMap) -> LandmarkSet:
    """Predict each landmark by the best forward match over all templates."""
    if not tmpls:
        raise ValidationError("template list must be non-empty")
    n_lm = len(tmpls[0][1])
    for fm, lms in tmpls:
        if len(lms) != n_lm:
            raise SchemaError(
                f"template {lms.image_id!r} has {len(lms)} landmarks, expected {n_lm}"
            )
    maps = [fm for fm, _ in tmpls]
    preds = np.zeros((n_lm, 2), dtype=np.float64)
    for l in range(n_lm):
        pts = [( _pixel(lms.points[l, 0]), _pixel(lms.points[l, 1]) ) for _, lms in tmpls]
        result = match_forward_multi(maps, pts, target)
        preds[l] = result.location
    return LandmarkSet(image_id=target.source_image_id, points=preds)


def mre(pred: LandmarkSet, gt: LandmarkSet, spacing_mm: float) -> float:
    """Mean Euclidean error in millimeters."""
    if len(pred) != len(gt):
        raise SchemaError(f"landmark counts differ: {len(pred)} vs {len(gt)}")
    err = np.sqrt(np.sum((pred.points - gt.points) ** 2, axis=1))
    return float(np.mean(spacing_mm * err))


def sdr(preds: Sequence[LandmarkSet], gts: Sequence[LandmarkSet], spacing_mm: float,
        radii_mm: Sequence[float]) -> dict[float, float]:
    """Fraction of all (image, landmark) pairs within each radius."""
    if len(preds) != len(gts):
        raise SchemaError(f"{len(preds)} predictions vs {len(gts)} ground truths")
    radii = [float(r) for r in radii_mm]
    if any(r <= 0 for r in radii) or any(a >= b for a, b in zip(radii, radii[1:])):
        raise ValidationError("radii must be positive and ascending")
    errors = []
    for p, g in zip(preds, gts):
        if len(p) != len(g):
            raise SchemaError(
                f"landmark counts differ for {g.image_id!r}: {len(p)} vs {len(g)}"
            )
        errors.append(spacing_mm * np.sqrt(np.sum((p.points - g.points) ** 2, axis=1)))
    all_err = np.concatenate(errors)
    return {r: float(np.mean(all_err <= r)) for r in radii}


def evaluate(preds: Sequence[LandmarkSet], gts: Sequence[LandmarkSet], spacing_mm: float,
             radii_mm: Sequence[float]) -> EvalReport:
    per = []
    for p, g in zip(preds, gts):
        per.extend((spacing_mm * np.sqrt(np.sum((p.points - g.points) ** 2, axis=1))).tolist())
    return EvalReport(
        mre_mm=float(np.mean(np.array(per))),
        sdr=sdr(preds, gts, spacing_mm, radii_mm),
        per_landmark_errors_mm=tuple(per),
    )


LabeledDataset = Mapping[str, tuple[FeatureMap, LandmarkSet]]


def landmark_representative_score(template_ids: Sequence[str],
                                  dataset: LabeledDataset) -> CombinationScore:
    """Label-aware analogue of the keypoint score: mean over images and
    landmark indices of the best forward-match similarity."""
    tids = list(template_ids)
    if not tids:
        raise ValidationError("template_ids must be non-empty")
    for tid in tids:
        if tid not in dataset:
            raise DataError(f"template id {tid!r} not in dataset")
    n_lm = None
    for img_id, (fm, lms) in dataset.items():
        if lms is None or len(lms) == 0:
            raise DataError(f"image {img_id!r} has no landmarks")
        if n_lm is None:
            n_lm = len(lms)
        elif len(lms) != n_lm:
            raise SchemaError(f"image {img_id!r} has {len(lms)} landmarks, expected {n_lm}")
    maps = [dataset[tid][0] for tid in tids]
    lm_sets = [dataset[tid][1] for tid in tids]
    per_image: dict[str, float] = {}
    for img_id, (fm, _) in dataset.items():
        sims = []
        for l in range(n_lm or 0):
            pts = [(_pixel(ls.points[l, 0]), _pixel(ls.points[l, 1])) for ls in lm_sets]
            sims.append(match_forward_multi(maps, pts, fm).similarity)
        per_image[img_id] = float(np.mean(np.array(sims)))
    score = float(np.mean(np.array(list(per_image.values()))))
    return CombinationScore(template_ids=tuple(tids), score=score, per_image_means=per_image)


def pearson_cc(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation coefficient of two equally long series."""
    a = np.asarray(xs, dtype=np.float64)
    b = np.asarray(ys, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValidationError("series must be 1-D and equally long")
    if a.shape[0] < 3:
        raise ValidationError("need at least 3 points")
    da = a - a.mean()
    db = b - b.mean()
    va = float(np.sum(da * da))
    vb = float(np.sum(db * db))
    if va == 0.0 or vb == 0.0:
        raise DegenerateVarianceError("correlation undefined for a constant series")
    return float(np.sum(da * db) / np.sqrt(va * vb))


@dataclass(frozen=True)
class SweepRow:
    template_id: str
    keypoint_score: float
    landmark_score: float
    mean_mre_mm: float


SweepDataset = Mapping[str, tuple[FeatureMap, KeyPointSet, LandmarkSet]]


def oracle_template_sweep(dataset: SweepDataset, jobs: int = 1) -> list[SweepRow]:
    """For every single-template candidate: its keypoint score, its
    landmark score, and the mean radial error of detecting every other
    image's landmarks from it.  Rows in dataset order."""
    ids = list(dataset.keys())
    feat_kp = {i: (fm, kp) for i, (fm, kp, _) in dataset.items()}
    feat_lm = {i: (fm, lm) for i, (fm, _, lm) in dataset.items()}
    for img_id, (fm, kp, lm) in dataset.items():
        if len(kp) == 0:
            raise DataError(f"image {img_id!r} has no keypoints")
        if len(lm) == 0:
            raise DataError(f"image {img_id!r} has no landmarks")
    cache = ReverseSimCache.build(feat_kp, jobs=jobs)

    def one(tid: str) -> SweepRow:
        r_kp = representative_score([tid], feat_kp, cache=cache).score
        r_lm = landmark_representative_score([tid], feat_lm).score
        tmpl = [(dataset[tid][0], dataset[tid][2])]
        errs = []
        for img_id in ids:
            if img_id == tid:
                continue
            fm, _, gt = dataset[img_id]
            pred = detect_landmarks(tmpl, fm)
            errs.append(mre(pred, gt, fm.spacing_mm))
        return SweepRow(
            template_id=tid,
            keypoint_score=r_kp,
            landmark_score=r_lm,
            mean_mre_mm=float(np.mean(np.array(errs))) if errs else 0.0,
        )

    return map_ordered(one, ids, jobs)


# --- landmark file format: "scp-lm v1 <image_id> <L>" ------------------------

LM_HEADER = "scp-lm v1"


def write_landmark_file(lms: LandmarkSet, path: str | Path) -> None:
    lines = [f"{LM_HEADER} {lms.image_id} {len(lms)}"]
    for x, y in lms.points:
        lines.append(f"{x:.9g} {y:.9g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_landmark_file(path: str | Path) -> LandmarkSet:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty landmark file")
    head = lines[0].split()
    if len(head) != 4 or " ".join(head[:2]) != LM_HEADER:
        raise ValidationError(f"{path}: bad landmark header {lines[0]!r}")
    image_id, count = head[2], int(head[3])
    pts = []
    for ln in lines[1:]:
        if not ln.strip():
            continue
        x, y = ln.split()
        pts.append((float(x), float(y)))
    if len(pts) != count:
        raise ValidationError(f"{path}: header declares {count} landmarks, found {len(pts)}")
    return LandmarkSet(image_id=image_id, points=np.array(pts, dtype=np.float64))
