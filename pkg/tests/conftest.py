import numpy as np
import pytest

from scp.features import FeatureLayer, FeatureMap
from scp.keypoints import Detector, KeyPoint, KeyPointSet


def unit_grid(rng, rows, cols, channels, zero_prob=0.0):
    """float32 grid of unit-norm vectors, with optional exact-zero patches."""
    g = rng.standard_normal((rows, cols, channels))
    norms = np.sqrt((g * g).sum(axis=-1, keepdims=True))
    norms[norms < 1e-6] = 1.0
    g = (g / norms).astype(np.float32)
    if zero_prob > 0:
        mask = rng.random((rows, cols)) < zero_prob
        g[mask] = 0.0
    return g


def make_feature_map(rng, height, width, n_layers=1, channels=4, zero_prob=0.0,
                     image_id="img", spacing_mm=1.0, tag="builtin"):
    layers = []
    for li in range(n_layers):
        d = 2**li
        rows = -(-height // d)
        cols = -(-width // d)
        layers.append(FeatureLayer(downsample=d, grid=unit_grid(rng, rows, cols, channels, zero_prob)))
    return FeatureMap(
        layers=tuple(layers),
        source_image_id=image_id,
        extractor_tag=tag,
        image_height=height,
        image_width=width,
        spacing_mm=spacing_mm,
    )


def make_keypoint_set(image_id, coords, detector=Detector.GRID):
    pts = tuple(KeyPoint(x=x, y=y, response=1.0, scale=1.0) for x, y in coords)
    return KeyPointSet(image_id=image_id, points=pts, detector=detector)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
