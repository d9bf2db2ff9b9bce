import math
from pathlib import Path

import numpy as np
import pytest

from scp.cli import main
from scp.image import read_pgm
from scp.manifest import DatasetManifest, ManifestEntry, load_manifest, save_manifest
from scp.synthetic import SyntheticDatasetSpec, materialize_dataset

SPEC = SyntheticDatasetSpec(
    n_images=6, image_size=32, n_landmarks=3,
    geometry_jitter_px=1.5, intensity_noise=0.01, seed=7,
)


@pytest.fixture
def dataset(tmp_path):
    return materialize_dataset(SPEC, tmp_path)


def run(*argv):
    return main([str(a) for a in argv])


def _tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestManifest:
    def test_round_trip(self, dataset):
        m = load_manifest(dataset)
        assert m.spacing_mm == SPEC.spacing_mm
        assert len(m.entries) == 6
        out = dataset.parent / "copy.scp"
        save_manifest(m, out)
        assert out.read_text() == dataset.read_text()

    def test_rejects_duplicate_ids(self, tmp_path):
        p = tmp_path / "m.scp"
        p.write_text("scp-manifest v1\nspacing_mm 1\na\tx.pgm\t-\t-\t-\na\tx.pgm\t-\t-\t-\n")
        from scp.errors import ManifestError

        with pytest.raises(ManifestError):
            load_manifest(p)

    def test_rejects_missing_referenced_file(self, tmp_path):
        p = tmp_path / "m.scp"
        p.write_text("scp-manifest v1\nspacing_mm 1\na\tmissing.pgm\t-\t-\t-\n")
        from scp.errors import ManifestError

        with pytest.raises(ManifestError):
            load_manifest(p)


class TestExtract:
    def test_writes_one_file_per_image(self, dataset, capsys):
        assert run("extract", "--manifest", dataset) == 0
        root = dataset.parent
        files = sorted((root / "features").glob("*.scpf"))
        assert len(files) == 6
        m = load_manifest(dataset)
        assert all(e.feature_path for e in m.entries)

    def test_idempotent_rerun(self, dataset):
        root = dataset.parent
        assert run("extract", "--manifest", dataset) == 0
        before = _tree_bytes(root)
        assert run("extract", "--manifest", dataset) == 0
        assert _tree_bytes(root) == before

    def test_corrupt_pgm_exits_2_and_names_file(self, dataset, capsys):
        root = dataset.parent
        bad = root / "images" / "syn2.pgm"
        bad.write_bytes(b"P5 garbage")
        code = run("extract", "--manifest", dataset)
        captured = capsys.readouterr()
        assert code == 2
        assert "syn2" in captured.err
        # the remaining images still produced features
        assert len(list((root / "features").glob("*.scpf"))) == 5


class TestKeypoints:
    def test_default_k_is_100(self):
        from scp.cli import build_parser

        args = build_parser().parse_args(["keypoints", "--manifest", "x"])
        assert args.keypoints == 100
        assert args.min_dist == 8.0

    def test_detect_and_rerun_deterministic(self, dataset):
        root = dataset.parent
        assert run("keypoints", "--manifest", dataset, "--detector", "dog_sift") == 0
        before = _tree_bytes(root)
        assert run("keypoints", "--manifest", dataset, "--detector", "dog_sift") == 0
        assert _tree_bytes(root) == before
        m = load_manifest(dataset)
        assert all(e.keypoint_path for e in m.entries)

    def test_unknown_detector_usage_error(self, dataset):
        with pytest.raises(SystemExit) as exc:
            run("keypoints", "--manifest", dataset, "--detector", "surf")
        assert exc.value.code == 64


class TestSelect:
    def test_missing_artifacts_exit_3(self, dataset, capsys):
        code = run("select", "--manifest", dataset, "--m", "1")
        captured = capsys.readouterr()
        assert code == 3
        assert "features" in captured.err and "keypoints" in captured.err

    def test_end_to_end_and_seeded_determinism(self, dataset, capsys):
        root = dataset.parent
        run("extract", "--manifest", dataset)
        run("keypoints", "--manifest", dataset)
        capsys.readouterr()
        assert run("select", "--manifest", dataset, "--m", "2", "--seed", "5",
                   "--out", "sel.report") == 0
        out1 = capsys.readouterr().out
        report1 = (root / "sel.report").read_bytes()
        assert run("select", "--manifest", dataset, "--m", "2", "--seed", "5",
                   "--out", "sel.report") == 0
        assert capsys.readouterr().out == out1
        assert (root / "sel.report").read_bytes() == report1
        chosen = out1.split()
        assert len(chosen) == 2

    def test_exhaustive_mode_reported(self, dataset, capsys):
        root = dataset.parent
        run("extract", "--manifest", dataset)
        run("keypoints", "--manifest", dataset)
        budget = math.comb(6, 1)
        assert run("select", "--manifest", dataset, "--m", "1", "--budget", budget) == 0
        text = (root / "selection.report").read_text()
        assert "mode exhaustive" in text

    def test_duplicate_images_score_one(self, tmp_path, capsys):
        spec = SyntheticDatasetSpec(n_images=3, image_size=32, n_landmarks=2,
                                    geometry_jitter_px=0.0, intensity_noise=0.0, seed=0)
        manifest = materialize_dataset(spec, tmp_path)
        run("extract", "--manifest", manifest)
        run("keypoints", "--manifest", manifest)
        capsys.readouterr()
        assert run("select", "--manifest", manifest, "--m", "1") == 0
        text = (tmp_path / "selection.report").read_text()
        best = [l for l in text.splitlines() if l.startswith("best_score")][0]
        assert float(best.split()[1]) == pytest.approx(1.0, abs=1e-6)


class TestEvaluate:
    def test_missing_features_exit_3(self, dataset, capsys):
        code = run("evaluate", "--manifest", dataset, "--templates", "syn0")
        assert code == 3

    def test_duplicate_images_give_zero_mre(self, tmp_path, capsys):
        spec = SyntheticDatasetSpec(n_images=3, image_size=32, n_landmarks=2,
                                    geometry_jitter_px=0.0, intensity_noise=0.0, seed=0)
        manifest = materialize_dataset(spec, tmp_path)
        # integer ground truth so exact self-matches mean exact predictions
        from scp.evaluation import LandmarkSet, read_landmark_file, write_landmark_file

        for lm_file in (tmp_path / "landmarks").glob("*.lm"):
            marks = read_landmark_file(lm_file)
            rounded = LandmarkSet(image_id=marks.image_id,
                                  points=np.floor(marks.points + 0.5))
            write_landmark_file(rounded, lm_file)
        run("extract", "--manifest", manifest)
        capsys.readouterr()
        assert run("evaluate", "--manifest", manifest, "--templates", "syn0") == 0
        out = capsys.readouterr().out
        assert float(out.split()[1]) <= 1e-9
        text = (tmp_path / "evaluation.report").read_text()
        assert "radius_mm\tsdr" in text

    def test_unknown_template_exit_3(self, dataset):
        assert run("evaluate", "--manifest", dataset, "--templates", "nope") == 3

    def test_default_radii(self):
        from scp.cli import build_parser

        args = build_parser().parse_args(["evaluate", "--manifest", "x", "--templates", "a"])
        assert args.radii == "2,2.5,3,4"


class TestBench:
    def test_seeded_determinism(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["bench", "--n-images", "8", "--size", "32", "--landmarks", "3",
                "--keypoints", "20", "--budget", "50", "--baseline-trials", "10",
                "--seed", "3"]
        assert run(*args, "--out", a) == 0
        assert run(*args, "--out", b) == 0
        capsys.readouterr()
        assert _tree_bytes(a) == _tree_bytes(b)

    def test_degenerate_scene_reports_na(self, tmp_path, capsys):
        out = tmp_path / "d"
        assert run("bench", "--n-images", "5", "--size", "32", "--landmarks", "3",
                   "--jitter", "0", "--noise", "0", "--keypoints", "10",
                   "--budget", "20", "--baseline-trials", "5", "--out", out) == 0
        text = (out / "summary.tsv").read_text()
        assert "cc_keypoint_score_vs_mre\tn/a" in text
        assert "cc_keypoint_vs_landmark_score\tn/a" in text


class TestPgm:
    def test_round_trip_16bit(self, tmp_path, rng):
        from scp.image import Image, write_pgm

        px = rng.integers(0, 65536, (20, 24)).astype(np.float64) / 65535.0
        img = Image(pixels=px, spacing_mm=0.5, id="p")
        path = tmp_path / "x.pgm"
        write_pgm(img, path, maxval=65535)
        back = read_pgm(path, "p", 0.5)
        np.testing.assert_array_equal(back.pixels, img.pixels)

    def test_round_trip_8bit(self, tmp_path, rng):
        from scp.image import Image, write_pgm

        px = rng.integers(0, 256, (16, 16)).astype(np.float64) / 255.0
        img = Image(pixels=px, spacing_mm=1.0, id="p")
        path = tmp_path / "x.pgm"
        write_pgm(img, path, maxval=255)
        back = read_pgm(path, "p", 1.0)
        np.testing.assert_array_equal(back.pixels, img.pixels)

    def test_comment_in_header(self, tmp_path):
        data = b"P5\n# a comment\n16 16\n255\n" + bytes(256)
        p = tmp_path / "c.pgm"
        p.write_bytes(data)
        img = read_pgm(p, "c", 1.0)
        assert img.height == img.width == 16
