"""Forward and reverse template matching over dense feature maps.

Forward: given a pixel in a template, find its best match in a target map.
Reverse: given a pixel in a target, find its best match anywhere in a list
of templates.  Both scan exhaustively at full resolution; ties break toward
the lowest template index, then the lowest row-major pixel index.

The vectorized scans reuse the einsum kernel from `features`, so their
similarity values are bit-identical to calling `point_similarity` pixel by
pixel.  An optional coarse-to-fine cascade trades that guarantee for speed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .features import FeatureMap, _dot, check_in_bounds, check_same_structure
from .keypoints import KeyPointSet


@dataclass(frozen=True)
class MatchResult:
    location: tuple[int, int]  # (x, y) in the searched map
    template_index: int
    similarity: float


def _query_vectors(fm: FeatureMap, coords: Sequence[tuple[int, int]]) -> list[np.ndarray]:
    """Per layer, the (n, channels) stack of descriptors at full-res coords."""
    out = []
    for li, layer in enumerate(fm.layers):
        d = layer.downsample
        vecs = np.stack([layer.grid[y // d, x // d] for x, y in coords])
        out.append(np.ascontiguousarray(vecs, dtype=np.float64))
    return out


def _layer_cosines(layer, vecs: np.ndarray) -> np.ndarray:
    """Cosine of every cell of a layer against each query vector -> (cells, n)."""
    g, gn = layer.flat_f64()
    dots = np.einsum("ck,nk->cn", g, vecs, optimize=False)
    vn = np.sqrt(_dot(vecs, vecs))
    den = gn[:, None] * vn[None, :]
    return np.divide(dots, den, out=np.zeros_like(dots), where=den != 0.0)


def _full_indices(fm: FeatureMap, layer_index: int) -> np.ndarray:
    """Flat cell index of each full-res pixel in the given layer (row-major)."""
    cache = getattr(fm, "_fullidx", None)
    if cache is None:
        cache = {}
        object.__setattr__(fm, "_fullidx", cache)
    idx = cache.get(layer_index)
    if idx is None:
        layer = fm.layers[layer_index]
        d = layer.downsample
        ys = np.arange(fm.image_height) // d
        xs = np.arange(fm.image_width) // d
        idx = (ys[:, None] * layer.cols + xs[None, :]).ravel()
        cache[layer_index] = idx
    return idx


def similarity_surface(fm: FeatureMap, query: list[np.ndarray]) -> np.ndarray:
    """Aggregated similarity of every full-res pixel of `fm` against each
    query vector: (height*width, n), layers averaged left to right."""
    acc: np.ndarray | None = None
    for li, layer in enumerate(fm.layers):
        cos = _layer_cosines(layer, query[li])
        full = cos[_full_indices(fm, li)]
        acc = full if acc is None else acc + full
    assert acc is not None
    return acc / len(fm.layers)


def match_forward(tmpl: FeatureMap, p_t: tuple[int, int], target: FeatureMap,
                  cascade: bool = False) -> MatchResult:
    """Best target pixel for the template descriptor at p_t."""
    return match_forward_multi([tmpl], [p_t], target, cascade=cascade)


def match_forward_multi(tmpls: Sequence[FeatureMap], pts: Sequence[tuple[int, int]],
                        target: FeatureMap, cascade: bool = False) -> MatchResult:
    """Joint best (template, target pixel) for one landmark's descriptors."""
    if len(tmpls) == 0:
        raise ValidationError("template list must be non-empty")
    if len(pts) != len(tmpls):
        raise ValidationError(f"{len(pts)} coordinates for {len(tmpls)} templates")
    best: MatchResult | None = None
    for m, (tmpl, p) in enumerate(zip(tmpls, pts)):
        check_same_structure(tmpl, target)
        check_in_bounds(tmpl, *p)
        query = _query_vectors(tmpl, [p])
        if cascade:
            flat, sim = _cascade_argmax(target, query)
        else:
            surface = similarity_surface(target, query)[:, 0]
            flat = int(np.argmax(surface))
            sim = float(surface[flat])
        if best is None or sim > best.similarity:
            x, y = flat % target.image_width, flat // target.image_width
            best = MatchResult(location=(x, y), template_index=m, similarity=sim)
    assert best is not None
    return best


def match_reverse(target: FeatureMap, q_k: tuple[int, int], tmpls: Sequence[FeatureMap],
                  cascade: bool = False) -> MatchResult:
    """Best pixel across all templates for the target descriptor at q_k."""
    results = match_reverse_batch(target, [q_k], tmpls, cascade=cascade)
    return results[0]


def match_reverse_batch(target: FeatureMap, kps: KeyPointSet | Sequence[tuple[int, int]],
                        tmpls: Sequence[FeatureMap], cascade: bool = False,
                        jobs: int = 1) -> list[MatchResult]:
    """match_reverse for each keypoint, in order.

    All keypoints share one similarity surface per template, so the batch
    is one vectorized scan instead of K; results are identical either way.
    The optional thread fan-out chunks over keypoints and never reorders.
    """
    coords = kps.coords() if isinstance(kps, KeyPointSet) else [tuple(c) for c in kps]
    if len(tmpls) == 0:
        raise ValidationError("template list must be non-empty")
    for x, y in coords:
        check_in_bounds(target, x, y)
    for tmpl in tmpls:
        check_same_structure(tmpl, target)
    if not coords:
        return []
    if jobs > 1 and len(coords) > 1:
        from .parallel import map_ordered

        chunks = np.array_split(np.arange(len(coords)), min(jobs, len(coords)))
        parts = map_ordered(
            lambda idx: _reverse_block(target, [coords[i] for i in idx], tmpls, cascade),
            [c.tolist() for c in chunks if len(c)],
            jobs,
        )
        return [r for part in parts for r in part]
    return _reverse_block(target, coords, tmpls, cascade)


def _reverse_block(target: FeatureMap, coords: Sequence[tuple[int, int]],
                   tmpls: Sequence[FeatureMap], cascade: bool) -> list[MatchResult]:
    query = _query_vectors(target, coords)
    best: list[MatchResult | None] = [None] * len(coords)
    for m, tmpl in enumerate(tmpls):
        if cascade:
            for i in range(len(coords)):
                flat, sim = _cascade_argmax(tmpl, [q[i : i + 1] for q in query])
                if best[i] is None or sim > best[i].similarity:
                    x, y = flat % tmpl.image_width, flat // tmpl.image_width
                    best[i] = MatchResult(location=(x, y), template_index=m, similarity=sim)
            continue
        surface = similarity_surface(tmpl, query)  # (cells, K)
        flats = np.argmax(surface, axis=0)
        sims = surface[flats, np.arange(len(coords))]
        for i, (flat, sim) in enumerate(zip(flats.tolist(), sims.tolist())):
            if best[i] is None or sim > best[i].similarity:
                x, y = flat % tmpl.image_width, flat // tmpl.image_width
                best[i] = MatchResult(location=(x, y), template_index=m, similarity=sim)
    return [r for r in best if r is not None]


def reverse_max_similarities(target: FeatureMap, coords: Sequence[tuple[int, int]],
                             tmpl: FeatureMap) -> np.ndarray:
    """Per-keypoint maximum similarity against one template (values only).

    Same numbers as `match_reverse_batch` with a single template; used by
    the selection layer, which caches these per (image, template) pair.
    """
    for x, y in coords:
        check_in_bounds(target, x, y)
    check_same_structure(tmpl, target)
    if not coords:
        return np.zeros(0, dtype=np.float64)
    query = _query_vectors(target, coords)
    surface = similarity_surface(tmpl, query)
    return surface.max(axis=0)


# --- opt-in coarse-to-fine cascade (approximate) ----------------------------


def _aggregate_at(fm: FeatureMap, query: list[np.ndarray], flat: np.ndarray) -> np.ndarray:
    """Aggregated similarity at selected full-res pixels only: (len(flat),)."""
    ys, xs = flat // fm.image_width, flat % fm.image_width
    acc: np.ndarray | None = None
    for li, layer in enumerate(fm.layers):
        d = layer.downsample
        cells = (ys // d) * layer.cols + (xs // d)
        g_all, gn_all = layer.flat_f64()
        g, gn = g_all[cells], gn_all[cells]
        vec = query[li][0]
        dots = np.einsum("ck,k->c", g, vec, optimize=False)
        vn = np.sqrt(float(_dot(vec, vec)))
        den = gn * vn
        cos = np.divide(dots, den, out=np.zeros_like(dots), where=den != 0.0)
        acc = cos if acc is None else acc + cos
    assert acc is not None
    return acc / len(fm.layers)


def _cascade_argmax(fm: FeatureMap, query: list[np.ndarray]) -> tuple[int, float]:
    """Search coarsest layer globally, then refine in shrinking windows."""
    h, w = fm.image_height, fm.image_width
    coarsest = fm.layers[-1].downsample
    ys = np.arange(0, h, coarsest)
    xs = np.arange(0, w, coarsest)
    flat = (ys[:, None] * w + xs[None, :]).ravel()
    sims = _aggregate_at(fm, query, flat)
    best_flat = int(flat[np.argmax(sims)])
    for layer in reversed(fm.layers[:-1]):
        d = layer.downsample
        radius = 2 * d
        cy, cx = best_flat // w, best_flat % w
        ys = np.arange(max(0, cy - radius), min(h, cy + radius + 1), d)
        xs = np.arange(max(0, cx - radius), min(w, cx + radius + 1), d)
        flat = (ys[:, None] * w + xs[None, :]).ravel()
        sims = _aggregate_at(fm, query, flat)
        best_flat = int(flat[np.argmax(sims)])
    sim = float(_aggregate_at(fm, query, np.array([best_flat]))[0])
    return best_flat, sim
