"""Salient-point detectors used as label-free substitutes for landmarks.

Three strategies: a difference-of-Gaussians scale-space detector (the
default), a uniform interior grid, and seeded uniform-random pixels.  All
are deterministic given their inputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import CapacityError, SizeError, ValidationError
from .image import Image


class Detector(str, enum.Enum):
    DOG_SIFT = "dog_sift"
    GRID = "grid"
    RANDOM = "random"


@dataclass(frozen=True)
class KeyPoint:
    x: int
    y: int
    response: float
    scale: float

    def __post_init__(self) -> None:
        if self.x < 0 or self.y < 0:
            raise ValidationError("keypoint coordinates must be non-negative")
        if not (np.isfinite(self.response) and self.response >= 0.0):
            raise ValidationError("keypoint response must be finite and >= 0")
        if not (np.isfinite(self.scale) and self.scale > 0.0):
            raise ValidationError("keypoint scale must be positive")


@dataclass(frozen=True)
class KeyPointSet:
    image_id: str
    points: tuple[KeyPoint, ...]
    detector: Detector

    def __post_init__(self) -> None:
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "detector", Detector(self.detector))
        responses = [p.response for p in pts]
        if any(a < b for a, b in zip(responses, responses[1:])):
            raise ValidationError("keypoints must be sorted by descending response")

    def __len__(self) -> int:
        return len(self.points)

    def coords(self) -> list[tuple[int, int]]:
        return [(p.x, p.y) for p in self.points]


@dataclass(frozen=True)
class DogConfig:
    n_octaves: int = 4
    scales_per_octave: int = 3
    sigma: float = 1.6
    contrast_threshold: float = 0.01
    curvature_ratio: float = 10.0
    assumed_blur: float = 0.5

    # an octave below this side length has no usable interior
    min_octave_side: int = 8


def _dog_candidates(pixels: np.ndarray, cfg: DogConfig) -> list[tuple[float, int, int, float]]:
    """(response, x, y, scale) for every accepted scale-space extremum."""
    if min(pixels.shape) < cfg.min_octave_side:
        raise SizeError(
            f"image {pixels.shape[0]}x{pixels.shape[1]} too small for one octave "
            f"(needs {cfg.min_octave_side} px per side)"
        )
    s = cfg.scales_per_octave
    k = 2.0 ** (1.0 / s)
    sigmas = [cfg.sigma * k**i for i in range(s + 3)]
    base_inc = np.sqrt(max(cfg.sigma**2 - cfg.assumed_blur**2, 0.01))
    octave = ndimage.gaussian_filter(pixels.astype(np.float64), base_inc, mode="reflect")
    r = cfg.curvature_ratio
    edge_limit = (r + 1.0) ** 2 / r

    cands: list[tuple[float, int, int, float]] = []
    for o in range(cfg.n_octaves):
        if min(octave.shape) < cfg.min_octave_side:
            break
        gauss = [octave]
        for i in range(1, s + 3):
            inc = np.sqrt(sigmas[i] ** 2 - sigmas[i - 1] ** 2)
            gauss.append(ndimage.gaussian_filter(gauss[-1], inc, mode="reflect"))
        dogs = np.stack([gauss[i + 1] - gauss[i] for i in range(s + 2)])

        for i in range(1, s + 1):
            mid = dogs[i]
            cube = dogs[i - 1 : i + 2]
            is_max = (mid >= ndimage.maximum_filter(cube, size=(3, 3, 3))[1]) & (
                mid > cfg.contrast_threshold
            )
            is_min = (mid <= ndimage.minimum_filter(cube, size=(3, 3, 3))[1]) & (
                mid < -cfg.contrast_threshold
            )
            ys, xs = np.nonzero(is_max | is_min)
            h, w = mid.shape
            for y, x in zip(ys.tolist(), xs.tolist()):
                if not (1 <= y < h - 1 and 1 <= x < w - 1):
                    continue
                dxx = mid[y, x + 1] - 2.0 * mid[y, x] + mid[y, x - 1]
                dyy = mid[y + 1, x] - 2.0 * mid[y, x] + mid[y - 1, x]
                dxy = 0.25 * (
                    mid[y + 1, x + 1] - mid[y + 1, x - 1] - mid[y - 1, x + 1] + mid[y - 1, x - 1]
                )
                det = dxx * dyy - dxy * dxy
                tr = dxx + dyy
                if det <= 0.0 or tr * tr >= edge_limit * det:
                    continue
                cands.append((abs(float(mid[y, x])), x * 2**o, y * 2**o, sigmas[i] * 2**o))
        octave = gauss[s][::2, ::2]
    return cands


def _suppress(
    cands: list[tuple[float, int, int, float]], min_dist: float, k: int, bounds: tuple[int, int]
) -> list[KeyPoint]:
    """Greedy non-maximum suppression by descending response."""
    h, w = bounds
    cands = sorted(cands, key=lambda c: (-c[0], c[2], c[1], c[3]))
    kept: list[tuple[float, int, int, float]] = []
    md2 = min_dist * min_dist
    for resp, x, y, scale in cands:
        if not (0 <= x < w and 0 <= y < h):
            continue
        if any((x - x2) ** 2 + (y - y2) ** 2 < md2 for _, x2, y2, _ in kept):
            continue
        kept.append((resp, x, y, scale))
        if len(kept) >= k:
            break
    return [KeyPoint(x=x, y=y, response=r, scale=s) for r, x, y, s in kept]


def detect_keypoints_dog(
    img: Image, k: int, min_dist: float = 8.0, config: DogConfig = DogConfig()
) -> KeyPointSet:
    """Top-k difference-of-Gaussians extrema after edge and proximity filtering."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    if min_dist < 0:
        raise ValidationError("min_dist must be >= 0")
    cands = _dog_candidates(img.pixels, config)
    points = _suppress(cands, min_dist, k, (img.height, img.width))
    return KeyPointSet(image_id=img.id, points=tuple(points), detector=Detector.DOG_SIFT)


def detect_keypoints_grid(img: Image, k: int) -> KeyPointSet:
    """k points at the cell centers of a ceil(sqrt(k)) interior lattice."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    g = int(np.ceil(np.sqrt(k)))
    points = []
    for row in range(g):
        for col in range(g):
            if len(points) >= k:
                break
            x = (2 * col + 1) * img.width // (2 * g)
            y = (2 * row + 1) * img.height // (2 * g)
            points.append(KeyPoint(x=x, y=y, response=1.0, scale=1.0))
    return KeyPointSet(image_id=img.id, points=tuple(points), detector=Detector.GRID)


def detect_keypoints_random(img: Image, k: int, seed: int) -> KeyPointSet:
    """k distinct uniform-random pixels from a seeded generator."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    n_pixels = img.height * img.width
    if k > n_pixels:
        raise CapacityError(f"k={k} exceeds the {n_pixels} pixels of {img.id!r}")
    rng = np.random.default_rng(seed)
    flat = rng.choice(n_pixels, size=k, replace=False)
    points = tuple(
        KeyPoint(x=int(i % img.width), y=int(i // img.width), response=1.0, scale=1.0)
        for i in flat
    )
    return KeyPointSet(image_id=img.id, points=points, detector=Detector.RANDOM)


# --- line-oriented serialization: "scp-kp v1 <image_id> <detector>" ---------

KP_HEADER = "scp-kp v1"


def write_keypoint_file(kps: KeyPointSet, path: str | Path) -> None:
    lines = [f"{KP_HEADER} {kps.image_id} {kps.detector.value}"]
    for p in kps.points:
        lines.append(f"{p.x} {p.y} {p.response:.6g} {p.scale:.6g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_keypoint_file(path: str | Path) -> KeyPointSet:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty keypoint file")
    head = lines[0].split()
    if len(head) != 4 or " ".join(head[:2]) != KP_HEADER:
        raise ValidationError(f"{path}: bad keypoint header {lines[0]!r}")
    image_id, detector = head[2], head[3]
    points = []
    for ln in lines[1:]:
        if not ln.strip():
            continue
        x, y, resp, scale = ln.split()
        points.append(KeyPoint(x=int(x), y=int(y), response=float(resp), scale=float(scale)))
    return KeyPointSet(image_id=image_id, points=tuple(points), detector=Detector(detector))
