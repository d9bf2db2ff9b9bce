import numpy as np
import pytest

from scp.errors import ValidationError
from scp.synthetic import SyntheticDatasetSpec, generate_synthetic_dataset


class TestGenerator:
    def test_seed_determinism(self):
        spec = SyntheticDatasetSpec(n_images=6, image_size=32, n_landmarks=3, seed=5)
        a = generate_synthetic_dataset(spec)
        b = generate_synthetic_dataset(spec)
        for (ia, la), (ib, lb) in zip(a, b):
            assert np.array_equal(ia.pixels, ib.pixels)
            assert np.array_equal(la.points, lb.points)
            assert ia.id == ib.id

    def test_degenerate_jitter_and_noise(self):
        spec = SyntheticDatasetSpec(
            n_images=5, image_size=32, n_landmarks=3,
            geometry_jitter_px=0.0, intensity_noise=0.0, seed=1,
        )
        data = generate_synthetic_dataset(spec)
        first_img, first_lm = data[0]
        for img, marks in data[1:]:
            assert np.array_equal(img.pixels, first_img.pixels)
            assert np.array_equal(marks.points, first_lm.points)

    def test_landmarks_in_bounds_many_specs(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            size = int(rng.integers(16, 48))
            spec = SyntheticDatasetSpec(
                n_images=int(rng.integers(1, 4)),
                image_size=size,
                n_landmarks=int(rng.integers(1, 7)),
                spacing_mm=float(rng.uniform(0.1, 2.0)),
                geometry_jitter_px=float(rng.uniform(0, size / 4 - 1e-6)),
                intensity_noise=float(rng.uniform(0, 0.1)),
                seed=int(rng.integers(0, 2**31)),
            )
            for img, marks in generate_synthetic_dataset(spec):
                assert np.all(marks.points[:, 0] >= 0)
                assert np.all(marks.points[:, 0] < spec.image_size)
                assert np.all(marks.points[:, 1] >= 0)
                assert np.all(marks.points[:, 1] < spec.image_size)
                assert img.height == img.width == spec.image_size

    def test_landmark_count_and_ids(self):
        spec = SyntheticDatasetSpec(n_images=12, image_size=32, n_landmarks=4, seed=0)
        data = generate_synthetic_dataset(spec)
        assert len(data) == 12
        assert len({img.id for img, _ in data}) == 12
        for img, marks in data:
            assert len(marks) == 4
            assert marks.image_id == img.id

    def test_rejects_oversized_jitter(self):
        with pytest.raises(ValidationError):
            SyntheticDatasetSpec(image_size=32, geometry_jitter_px=8.0)

    def test_rejects_tiny_images(self):
        with pytest.raises(ValidationError):
            SyntheticDatasetSpec(image_size=8)
