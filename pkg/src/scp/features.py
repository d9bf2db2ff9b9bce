"""Dense multi-layer feature maps and the cosine similarity primitives.

Every similarity in the package reduces to `_dot`, a single einsum kernel.
einsum accumulates identically whether it is fed one vector pair or a full
grid-against-vectors batch, which keeps the vectorized matchers bit-identical
to naive per-pixel loops.  BLAS matmul does not have that property, so it is
deliberately avoided here.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np
from scipy import ndimage

from .errors import (
    BoundsError,
    ConfigurationError,
    DimensionError,
    SizeError,
    ValidationError,
)
from .image import Image

UNIT_NORM_TOL = 1e-5
ZERO_NORM_EPS = 1e-12


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # shared accumulation kernel; see module docstring
    return np.einsum("...k,...k->...", a, b, optimize=False)


@dataclass(frozen=True)
class FeatureLayer:
    """One resolution level: a [rows][cols][channels] grid of descriptors."""

    downsample: int
    grid: np.ndarray  # float32, C-contiguous

    def __post_init__(self) -> None:
        if self.downsample < 1 or (self.downsample & (self.downsample - 1)) != 0:
            raise ValidationError(f"downsample {self.downsample} is not a positive power of two")
        g = np.array(self.grid, dtype=np.float32, order="C")
        if g.ndim != 3:
            raise ValidationError(f"layer grid must be 3-D, got ndim={g.ndim}")
        if not np.all(np.isfinite(g)):
            raise ValidationError("layer grid contains non-finite values")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)

    @property
    def rows(self) -> int:
        return self.grid.shape[0]

    @property
    def cols(self) -> int:
        return self.grid.shape[1]

    @property
    def channels(self) -> int:
        return self.grid.shape[2]

    def flat_f64(self) -> tuple[np.ndarray, np.ndarray]:
        """(cells, channels) float64 view of the grid plus per-cell norms,
        memoized; the grid is immutable so the cache never goes stale."""
        cached = getattr(self, "_flat64", None)
        if cached is None:
            g = self.grid.reshape(-1, self.channels).astype(np.float64)
            cached = (g, np.sqrt(_dot(g, g)))
            object.__setattr__(self, "_flat64", cached)
        return cached


@dataclass(frozen=True)
class FeatureMap:
    """Stack of per-pixel unit-norm descriptors at halving resolutions.

    Each vector has L2 norm 1 (within 1e-5) or is exactly zero, the
    convention for degenerate patches with no local signal.
    """

    layers: tuple[FeatureLayer, ...]
    source_image_id: str
    extractor_tag: str
    image_height: int
    image_width: int
    spacing_mm: float

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValidationError("feature map needs at least one layer")
        if self.image_height < 1 or self.image_width < 1:
            raise ValidationError("image dimensions must be positive")
        if not (self.spacing_mm > 0.0 and np.isfinite(self.spacing_mm)):
            raise ValidationError("spacing_mm must be positive")
        ch = layers[0].channels
        expected_d = 1
        for layer in layers:
            if layer.downsample != expected_d:
                raise ValidationError(
                    f"layer downsample {layer.downsample} breaks the 1,2,4,... doubling rule"
                )
            if layer.channels != ch:
                raise ValidationError("channel count differs between layers")
            want_r = ceil(self.image_height / layer.downsample)
            want_c = ceil(self.image_width / layer.downsample)
            if (layer.rows, layer.cols) != (want_r, want_c):
                raise ValidationError(
                    f"layer d={layer.downsample}: grid {layer.rows}x{layer.cols}, "
                    f"expected {want_r}x{want_c}"
                )
            _check_norms(layer.grid)
            expected_d *= 2

    @property
    def channels(self) -> int:
        return self.layers[0].channels

    def structure(self) -> tuple[tuple[int, int, int, int], ...]:
        """(downsample, rows, cols, channels) per layer; equal between maps
        that may be matched against each other."""
        return tuple((l.downsample, l.rows, l.cols, l.channels) for l in self.layers)

    def vector_at(self, layer_index: int, x: int, y: int) -> np.ndarray:
        """Descriptor at full-resolution pixel (x, y) in the given layer."""
        layer = self.layers[layer_index]
        return layer.grid[y // layer.downsample, x // layer.downsample]


def _check_norms(grid: np.ndarray) -> None:
    g = grid.astype(np.float64)
    norms = np.sqrt(_dot(g, g))
    zero = norms == 0.0
    if not np.all(zero | (np.abs(norms - 1.0) <= UNIT_NORM_TOL)):
        bad = float(np.abs(norms[~zero] - 1.0).max())
        raise ValidationError(f"descriptor norms deviate from 1 by up to {bad:g}")
    # a "zero" vector must be exactly zero in every component
    if np.any(zero & np.any(grid != 0.0, axis=-1)):
        raise ValidationError("vector with zero norm has nonzero components")


def cosine_similarity(v, w) -> float:
    """Cosine of two feature vectors; 0 when either vector is all-zero."""
    a = np.ascontiguousarray(v, dtype=np.float64)
    b = np.ascontiguousarray(w, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise DimensionError("cosine_similarity expects 1-D vectors")
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"vector lengths differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] == 0:
        raise DimensionError("vectors must have length >= 1")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValidationError("cosine_similarity requires finite inputs")
    na = float(np.sqrt(_dot(a, a)))
    nb = float(np.sqrt(_dot(b, b)))
    den = na * nb
    if den == 0.0:
        return 0.0
    return float(_dot(a, b)) / den


def check_same_structure(fa: FeatureMap, fb: FeatureMap) -> None:
    if fa.structure() != fb.structure():
        raise ConfigurationError(
            f"feature maps have different layer structures: "
            f"{fa.structure()} vs {fb.structure()}"
        )


def check_in_bounds(fm: FeatureMap, x: int, y: int) -> None:
    if not (0 <= x < fm.image_width and 0 <= y < fm.image_height):
        raise BoundsError(
            f"({x}, {y}) outside {fm.image_width}x{fm.image_height} map "
            f"of {fm.source_image_id!r}"
        )


def point_similarity(fa: FeatureMap, pa: tuple[int, int], fb: FeatureMap, pb: tuple[int, int]) -> float:
    """Mean over layers of the cosine between the two maps' descriptors.

    Coordinates are full-resolution (x, y); each layer is addressed by floor
    division with its downsample factor.
    """
    check_same_structure(fa, fb)
    xa, ya = pa
    xb, yb = pb
    check_in_bounds(fa, xa, ya)
    check_in_bounds(fb, xb, yb)
    acc = cosine_similarity(fa.vector_at(0, xa, ya), fb.vector_at(0, xb, yb))
    for li in range(1, len(fa.layers)):
        acc = acc + cosine_similarity(fa.vector_at(li, xa, ya), fb.vector_at(li, xb, yb))
    return acc / len(fa.layers)


# ---------------------------------------------------------------------------
# Built-in label-free descriptor: a bank of zero-DC Gaussian-derivative
# filters applied to a block-mean pyramid.  Purely derivative-based, so
# constant regions yield exact zero vectors and intensity offsets cancel.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DescriptorConfig:
    n_layers: int = 3
    channels: int = 32
    sigmas: tuple[float, ...] = (1.0, 2.0)

    def __post_init__(self) -> None:
        if self.n_layers < 1:
            raise ValidationError("n_layers must be >= 1")
        if not self.sigmas or any(s <= 0 for s in self.sigmas):
            raise ValidationError("sigmas must be positive")
        per = self.channels // len(self.sigmas)
        # per sigma: n oriented first derivatives + gxx, gyy, gxy, LoG
        if per * len(self.sigmas) != self.channels or per < 5:
            raise ValidationError(
                f"channels={self.channels} not divisible into >=5 filters "
                f"per sigma over {len(self.sigmas)} sigmas"
            )

    @property
    def orientations(self) -> int:
        return self.channels // len(self.sigmas) - 4

    def kernel_support(self) -> int:
        return 2 * ceil(3.0 * max(self.sigmas)) + 1


def _gaussian_1d(sigma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r = ceil(3.0 * sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    g /= g.sum()
    env = np.exp(-0.5 * (x / sigma) ** 2)
    g1 = -(x / sigma**2) * env
    g2 = (x**2 / sigma**4 - 1.0 / sigma**2) * env
    return g, g1, g2


def filter_bank(config: DescriptorConfig) -> list[np.ndarray]:
    """2-D kernels, one per channel, each adjusted to exactly zero DC gain."""
    kernels: list[np.ndarray] = []
    for sigma in config.sigmas:
        g, g1, g2 = _gaussian_1d(sigma)
        gx = np.outer(g, g1)
        gy = np.outer(g1, g)
        gxx = np.outer(g, g2)
        gyy = np.outer(g2, g)
        gxy = np.outer(g1, g1)
        for i in range(config.orientations):
            theta = np.pi * i / config.orientations
            kernels.append(np.cos(theta) * gx + np.sin(theta) * gy)
        kernels.extend([gxx, gyy, gxy, gxx + gyy])
    return [k - k.mean() for k in kernels]


def block_mean(pixels: np.ndarray, d: int) -> np.ndarray:
    """Downsample by averaging d x d blocks; edges replicate to fill."""
    if d == 1:
        return np.array(pixels, dtype=np.float64)
    h, w = pixels.shape
    hp, wp = ceil(h / d) * d, ceil(w / d) * d
    padded = np.pad(pixels, ((0, hp - h), (0, wp - w)), mode="edge")
    return padded.reshape(hp // d, d, wp // d, d).mean(axis=(1, 3))


def extract_features_builtin(img: Image, config: DescriptorConfig = DescriptorConfig()) -> FeatureMap:
    """Deterministic dense descriptor from oriented-derivative responses.

    Per-pixel vectors are L2-normalized; raw responses with norm below
    1e-12 (flat patches) become exact zero vectors.
    """
    support = config.kernel_support()
    if min(img.height, img.width) < support:
        raise SizeError(
            f"image {img.id!r} is {img.height}x{img.width}, smaller than the "
            f"largest filter support {support}"
        )
    kernels = filter_bank(config)
    layers = []
    for li in range(config.n_layers):
        d = 2**li
        level = block_mean(img.pixels, d)
        resp = np.stack(
            [ndimage.correlate(level, k, mode="reflect") for k in kernels], axis=-1
        )
        norms = np.sqrt(_dot(resp, resp))
        keep = norms >= ZERO_NORM_EPS
        safe = np.where(keep, norms, 1.0)
        unit = np.where(keep[..., None], resp / safe[..., None], 0.0)
        layers.append(FeatureLayer(downsample=d, grid=unit.astype(np.float32)))
    return FeatureMap(
        layers=tuple(layers),
        source_image_id=img.id,
        extractor_tag="builtin",
        image_height=img.height,
        image_width=img.width,
        spacing_mm=img.spacing_mm,
    )
