"""Seeded synthetic landmark datasets for desk-scale validation.

Every image renders the same proxy scene: a ring of distinctive blob
patterns joined by smooth ridges.  Per image, each pattern's position,
orientation, size, and contrast are jittered; a fixed fraction of images
gets several times the jitter and plays the outlier role.  Landmarks are
the jittered pattern centers, so representative images are exactly the
ones whose local appearance stays close to the shared scene.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .evaluation import LandmarkSet, write_landmark_file
from .image import Image, write_pgm

OUTLIER_FRACTION = 0.15
OUTLIER_JITTER_FACTOR = 3.5


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    n_images: int = 40
    image_size: int = 64
    n_landmarks: int = 5
    spacing_mm: float = 0.5
    geometry_jitter_px: float = 2.0
    intensity_noise: float = 0.02
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_images < 1 or self.image_size < 16 or self.n_landmarks < 1:
            raise ValidationError("n_images, image_size, n_landmarks must be positive (size >= 16)")
        if self.spacing_mm <= 0 or self.intensity_noise < 0:
            raise ValidationError("spacing_mm must be positive, intensity_noise >= 0")
        if not 0 <= self.geometry_jitter_px < self.image_size / 4:
            raise ValidationError("geometry_jitter_px must lie in [0, image_size/4)")


def _anchors(spec: SyntheticDatasetSpec) -> np.ndarray:
    c = spec.image_size / 2.0
    out = []
    for i in range(spec.n_landmarks):
        ang = 2.0 * np.pi * i / spec.n_landmarks
        out.append((c + 0.30 * spec.image_size * np.cos(ang),
                    c + 0.28 * spec.image_size * np.sin(ang)))
    return np.array(out)


def _render(spec: SyntheticDatasetSpec, params: list[dict], rng: np.random.Generator) -> np.ndarray:
    size = spec.image_size
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.full((size, size), 0.35)
    img += 0.08 * (xx / size) + 0.05 * (yy / size)

    # ridges between consecutive pattern centers give shared context
    centers = [p["center"] for p in params]
    for (ax, ay), (bx, by) in zip(centers, centers[1:] + centers[:1]):
        seg = np.hypot(bx - ax, by - ay) + 1e-9
        tx, ty = (bx - ax) / seg, (by - ay) / seg
        px, py = xx - ax, yy - ay
        t = np.clip(px * tx + py * ty, 0.0, seg)
        d2 = (px - t * tx) ** 2 + (py - t * ty) ** 2
        img += 0.12 * np.exp(-0.5 * d2 / 1.2**2)

    for i, p in enumerate(params):
        cx, cy = p["center"]
        ca, sa = np.cos(p["theta"]), np.sin(p["theta"])
        u = (xx - cx) * ca + (yy - cy) * sa
        v = -(xx - cx) * sa + (yy - cy) * ca
        blob = np.exp(-0.5 * ((u / (p["size"] * p["ratio"])) ** 2 + (v / p["size"]) ** 2))
        img += (p["amp"] if i % 2 == 0 else -p["amp"]) * blob
        # satellite spot makes each pattern orientation-distinct
        ox, oy = 2.0 * p["size"] * ca, 2.0 * p["size"] * sa
        spot = np.exp(-0.5 * (((xx - cx - ox) ** 2 + (yy - cy - oy) ** 2) / (0.6 * p["size"]) ** 2))
        img += 0.5 * p["amp"] * spot

    if spec.intensity_noise > 0:
        img = img + rng.normal(0.0, spec.intensity_noise, img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_synthetic_dataset(spec: SyntheticDatasetSpec) -> list[tuple[Image, LandmarkSet]]:
    rng = np.random.default_rng(spec.seed)
    anchors = _anchors(spec)
    base_theta = [np.pi * i / spec.n_landmarks for i in range(spec.n_landmarks)]
    base_size = [2.0 + 0.3 * (i % 3) for i in range(spec.n_landmarks)]

    n_out = int(round(OUTLIER_FRACTION * spec.n_images))
    outlier = np.zeros(spec.n_images, dtype=bool)
    outlier[rng.permutation(spec.n_images)[:n_out]] = True

    width = len(str(max(spec.n_images - 1, 1)))
    out: list[tuple[Image, LandmarkSet]] = []
    for n in range(spec.n_images):
        dev = OUTLIER_JITTER_FACTOR if outlier[n] else 1.0
        # appearance deviation scales with the same jitter knob, so a zero
        # jitter reproduces one identical scene everywhere
        rel = dev * spec.geometry_jitter_px / 2.0
        params = []
        for i in range(spec.n_landmarks):
            j = spec.geometry_jitter_px * dev
            cx = float(np.clip(anchors[i, 0] + rng.uniform(-j, j), 1.0, spec.image_size - 2.0))
            cy = float(np.clip(anchors[i, 1] + rng.uniform(-j, j), 1.0, spec.image_size - 2.0))
            params.append(
                dict(
                    center=(cx, cy),
                    theta=base_theta[i] + rng.uniform(-0.25, 0.25) * rel,
                    size=base_size[i] * float(np.clip(1.0 + rng.uniform(-0.12, 0.12) * rel, 0.3, 3.0)),
                    ratio=1.8 * float(np.clip(1.0 + rng.uniform(-0.15, 0.15) * rel, 0.3, 3.0)),
                    amp=0.45 * float(np.clip(1.0 + rng.uniform(-0.08, 0.08) * rel, 0.2, 2.0)),
                )
            )
        image_id = f"syn{n:0{width}d}"
        pixels = _render(spec, params, rng)
        img = Image(pixels=pixels, spacing_mm=spec.spacing_mm, id=image_id)
        lms = LandmarkSet(image_id=image_id, points=np.array([p["center"] for p in params]))
        out.append((img, lms))
    return out


def materialize_dataset(spec: SyntheticDatasetSpec, root: str | Path,
                        maxval: int = 65535) -> Path:
    """Render a synthetic dataset to disk as PGM images, landmark files, and
    a manifest; returns the manifest path."""
    from .manifest import DatasetManifest, ManifestEntry, save_manifest

    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "landmarks").mkdir(parents=True, exist_ok=True)
    entries = []
    for img, lms in generate_synthetic_dataset(spec):
        img_rel = f"images/{img.id}.pgm"
        lm_rel = f"landmarks/{img.id}.lm"
        write_pgm(img, root / img_rel, maxval=maxval)
        write_landmark_file(lms, root / lm_rel)
        entries.append(
            ManifestEntry(image_id=img.id, image_path=img_rel, landmark_path=lm_rel)
        )
    manifest = DatasetManifest(root=root, spacing_mm=spec.spacing_mm, entries=tuple(entries))
    path = root / "manifest.scp"
    save_manifest(manifest, path)
    return path
