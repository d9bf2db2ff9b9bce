"""Representative scoring of template subsets and the subset search.

The score of a template set is the average, over every image and every one
of its keypoints, of the best reverse-match similarity into the set.  The
maximum over a set decomposes as an elementwise maximum over per-template
score vectors, so all pairwise vectors are computed once and any number of
candidate subsets can then be scored cheaply.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import CapacityError, DataError, UnknownIdError, ValidationError
from .features import FeatureMap
from .keypoints import KeyPointSet
from .matching import reverse_max_similarities
from .parallel import map_ordered

FeatureDataset = Mapping[str, tuple[FeatureMap, KeyPointSet]]

REDRAW_CAP_FACTOR = 50


@dataclass(frozen=True)
class CombinationScore:
    template_ids: tuple[str, ...]
    score: float
    per_image_means: Mapping[str, float]

    def __post_init__(self) -> None:
        if len(self.template_ids) < 1:
            raise ValidationError("a combination needs at least one template")
        if len(set(self.template_ids)) != len(self.template_ids):
            raise ValidationError("template ids must be distinct")


@dataclass(frozen=True)
class ScoreSummary:
    mean: float
    std: float
    min: float
    max: float


@dataclass(frozen=True)
class SelectionReport:
    best: CombinationScore
    trials_evaluated: int
    search_mode: str  # "exhaustive" | "sampled"
    seed: int
    all_scores_summary: ScoreSummary
    top: tuple[CombinationScore, ...] = ()


class ReverseSimCache:
    """Per-(image, template) vectors of per-keypoint best similarities."""

    def __init__(self, ids: Sequence[str], vectors: dict[tuple[str, str], np.ndarray]):
        self.ids = list(ids)
        self.vectors = vectors

    @classmethod
    def build(cls, dataset: FeatureDataset, template_ids: Sequence[str] | None = None,
              jobs: int = 1) -> "ReverseSimCache":
        ids = list(dataset.keys())
        tids = ids if template_ids is None else list(template_ids)
        _validate_dataset(dataset, tids)
        pairs = [(img_id, tid) for img_id in ids for tid in tids]

        def one(pair: tuple[str, str]) -> np.ndarray:
            img_id, tid = pair
            fm, kps = dataset[img_id]
            return reverse_max_similarities(fm, kps.coords(), dataset[tid][0])

        vecs = map_ordered(one, pairs, jobs)
        return cls(ids, dict(zip(pairs, vecs)))


def _validate_dataset(dataset: FeatureDataset, template_ids: Sequence[str]) -> None:
    if not dataset:
        raise DataError("dataset is empty")
    for tid in template_ids:
        if tid not in dataset:
            raise UnknownIdError(f"template id {tid!r} not in dataset")
    for img_id, (fm, kps) in dataset.items():
        if len(kps) == 0:
            raise DataError(f"image {img_id!r} has no keypoints")


def representative_score(template_ids: Sequence[str], dataset: FeatureDataset,
                         cache: ReverseSimCache | None = None) -> CombinationScore:
    """Mean over images of mean over keypoints of best reverse-match
    similarity into the template set.  Template images are averaged over
    like any other image."""
    tids = list(template_ids)
    if not tids:
        raise ValidationError("template_ids must be non-empty")
    if len(set(tids)) != len(tids):
        raise ValidationError("template ids must be distinct")
    _validate_dataset(dataset, tids)
    if cache is None:
        cache = ReverseSimCache.build(dataset, template_ids=tids)
    per_image: dict[str, float] = {}
    for img_id in dataset.keys():
        acc = np.maximum.reduce([cache.vectors[(img_id, tid)] for tid in tids])
        per_image[img_id] = float(np.mean(acc))
    score = float(np.mean(np.array(list(per_image.values()), dtype=np.float64)))
    return CombinationScore(template_ids=tuple(tids), score=score, per_image_means=per_image)


def _score_combos(combos: np.ndarray, cache: ReverseSimCache, ids: list[str]) -> np.ndarray:
    """Scores for a (B, m) integer array of template-index combinations."""
    B = combos.shape[0]
    per_image = np.empty((B, len(ids)), dtype=np.float64)
    block = 4096  # keeps the (block, m, K) gather small
    for col, img_id in enumerate(ids):
        stack = np.stack([cache.vectors[(img_id, tid)] for tid in ids])  # (N, K_img)
        for a in range(0, B, block):
            sel = stack[combos[a : a + block]]  # (b, m, K_img)
            per_image[a : a + block, col] = sel.max(axis=1).mean(axis=1)
    return np.mean(per_image, axis=1)


def _draw_combinations(n: int, m: int, budget: int, seed: int) -> np.ndarray:
    """Up to `budget` distinct sorted m-subsets of range(n), seeded."""
    rng = np.random.default_rng(seed)
    seen: set[tuple[int, ...]] = set()
    out: list[tuple[int, ...]] = []
    attempts = 0
    cap = REDRAW_CAP_FACTOR * budget
    while len(out) < budget and attempts < cap:
        attempts += 1
        combo = tuple(sorted(rng.choice(n, size=m, replace=False).tolist()))
        if combo in seen:
            continue
        seen.add(combo)
        out.append(combo)
    return np.array(out, dtype=np.intp)


def select_templates(dataset: FeatureDataset, m: int, budget: int = 10_000,
                     seed: int = 0, jobs: int = 1) -> SelectionReport:
    """Highest-scoring m-subset, by full enumeration when it fits in the
    budget and by seeded distinct random sampling otherwise."""
    ids = list(dataset.keys())
    n = len(ids)
    if m < 1 or m > n:
        raise CapacityError(f"m={m} outside 1..{n}")
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    _validate_dataset(dataset, ids)
    cache = ReverseSimCache.build(dataset, jobs=jobs)

    total = comb(n, m)
    if total <= budget:
        combos = np.array(list(itertools.combinations(range(n), m)), dtype=np.intp)
        mode = "exhaustive"
    else:
        combos = _draw_combinations(n, m, budget, seed)
        mode = "sampled"

    scores = _score_combos(combos, cache, ids)
    id_lists = [tuple(sorted(ids[i] for i in row)) for row in combos.tolist()]
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], id_lists[i]))
    best_i = order[0]
    best = representative_score(id_lists[best_i], dataset, cache=cache)

    top = tuple(
        CombinationScore(
            template_ids=id_lists[i],
            score=float(scores[i]),
            per_image_means={},
        )
        for i in order[: min(20, len(order))]
    )
    summary = ScoreSummary(
        mean=float(np.mean(scores)),
        std=float(np.std(scores)),
        min=float(np.min(scores)),
        max=float(np.max(scores)),
    )
    return SelectionReport(
        best=best,
        trials_evaluated=int(len(scores)),
        search_mode=mode,
        seed=seed,
        all_scores_summary=summary,
        top=top,
    )


@dataclass(frozen=True)
class BaselineSummary:
    mean: float
    std: float
    trials: int


def random_baseline(dataset: FeatureDataset, m: int, trials: int, seed: int,
                    jobs: int = 1) -> BaselineSummary:
    """Score statistics over independently drawn random m-subsets."""
    ids = list(dataset.keys())
    n = len(ids)
    if m < 1 or m > n:
        raise CapacityError(f"m={m} outside 1..{n}")
    if trials < 2:
        raise ValidationError("trials must be >= 2")
    _validate_dataset(dataset, ids)
    cache = ReverseSimCache.build(dataset, jobs=jobs)
    rng = np.random.default_rng(seed)
    combos = np.stack([np.sort(rng.choice(n, size=m, replace=False)) for _ in range(trials)])
    scores = _score_combos(combos.astype(np.intp), cache, ids)
    return BaselineSummary(mean=float(np.mean(scores)), std=float(np.std(scores)), trials=trials)


# --- report serialization: "scp-report v1" ----------------------------------

REPORT_HEADER = "scp-report v1"


def write_report(report: SelectionReport, path: str | Path) -> None:
    lines = [
        REPORT_HEADER,
        f"mode {report.search_mode}",
        f"seed {report.seed}",
        f"m {len(report.best.template_ids)}",
        f"trials {report.trials_evaluated}",
        f"score_mean {report.all_scores_summary.mean:.9g}",
        f"score_std {report.all_scores_summary.std:.9g}",
        f"score_min {report.all_scores_summary.min:.9g}",
        f"score_max {report.all_scores_summary.max:.9g}",
        f"best_score {report.best.score:.9g}",
        "best_ids " + ",".join(report.best.template_ids),
        "",
        "rank\tscore\ttemplate_ids",
    ]
    for rank, combo in enumerate(report.top, start=1):
        lines.append(f"{rank}\t{combo.score:.9g}\t{','.join(combo.template_ids)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
