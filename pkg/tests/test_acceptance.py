"""Acceptance gate: one test per release criterion, at its stated tolerance.

The statistical criteria share one precomputed sweep per dataset seed
(features, keypoints, per-template scores and errors), built once per
session.  Each test prints a PASS line with its measured numbers.
"""

import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from scp.errors import (
    DimensionOverflowError,
    MagicError,
    StructureError,
    TruncatedError,
    VersionError,
)
from scp.evaluation import oracle_template_sweep, pearson_cc
from scp.features import extract_features_builtin
from scp.keypoints import detect_keypoints_dog
from scp.matching import match_forward_multi, match_reverse
from scp.scpf import read_feature_file, write_feature_file
from scp.selection import random_baseline, representative_score, select_templates
from scp.synthetic import SyntheticDatasetSpec, generate_synthetic_dataset, materialize_dataset

from conftest import make_feature_map, make_keypoint_set
from oracles import naive_forward_multi, naive_representative_score, naive_reverse

N_SEEDS = 10
SWEEP_SPEC = dict(n_images=40, image_size=64, n_landmarks=5, spacing_mm=0.5,
                  geometry_jitter_px=2.0, intensity_noise=0.02)


def _ok(name: str, detail: str) -> None:
    print(f"\nACCEPTANCE PASS {name}: {detail}")


@pytest.fixture(scope="session")
def sweeps():
    """Per seed: (sweep rows, feature/keypoint dataset) for the N=40 scenes,
    plus the wall time the ten sweeps took to build."""
    t0 = time.perf_counter()
    out = []
    for seed in range(N_SEEDS):
        spec = SyntheticDatasetSpec(seed=seed, **SWEEP_SPEC)
        data = generate_synthetic_dataset(spec)
        features = {img.id: extract_features_builtin(img) for img, _ in data}
        keypoints = {img.id: detect_keypoints_dog(img, k=100) for img, _ in data}
        sweep_ds = {img.id: (features[img.id], keypoints[img.id], lms) for img, lms in data}
        rows = oracle_template_sweep(sweep_ds, jobs=2)
        out.append((rows, {i: (features[i], keypoints[i]) for i in features}))
    return out, time.perf_counter() - t0


def test_oracle_equivalence_bitexact():
    """All matching and scoring ops equal naive nested loops, bit-exactly,
    on >= 1000 randomized instances; < 60 s."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240)
    checked = 0
    case = 0
    while checked < 1000:
        case += 1
        h = int(rng.integers(2, 13))
        w = int(rng.integers(2, 13))
        n_layers = int(rng.integers(1, 4))
        while 2 ** (n_layers - 1) > min(h, w):
            n_layers -= 1
        ch = int(rng.integers(1, 5))
        n_tmpl = int(rng.integers(1, 4))
        n_kp = int(rng.integers(1, 5))
        maps = [
            make_feature_map(rng, h, w, n_layers=n_layers, channels=ch,
                             zero_prob=0.1, image_id=f"m{case}-{i}")
            for i in range(n_tmpl + 1)
        ]
        target, tmpls = maps[0], maps[1:]

        q = (int(rng.integers(0, w)), int(rng.integers(0, h)))
        got = match_reverse(target, q, tmpls)
        s, m, x, y = naive_reverse(target, q, tmpls)
        assert (got.similarity, got.template_index, got.location) == (s, m, (x, y))
        checked += 1

        pts = [(int(rng.integers(0, w)), int(rng.integers(0, h))) for _ in tmpls]
        got_f = match_forward_multi(tmpls, pts, target)
        s, m, x, y = naive_forward_multi(tmpls, pts, target)
        assert (got_f.similarity, got_f.template_index, got_f.location) == (s, m, (x, y))
        checked += 1

        if case % 4 == 0:
            dataset = {
                fm.source_image_id: (
                    fm,
                    make_keypoint_set(
                        fm.source_image_id,
                        [(int(rng.integers(0, w)), int(rng.integers(0, h)))
                         for _ in range(n_kp)],
                    ),
                )
                for fm in maps
            }
            tids = [tmpl.source_image_id for tmpl in tmpls]
            got_s = representative_score(tids, dataset).score
            assert got_s == naive_representative_score(tids, dataset)
            checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    _ok("oracle-equivalence", f"{checked} instances bit-exact in {elapsed:.1f}s")


def test_exhaustive_sampled_consistency(rng):
    """For N=10, m in {1,2,3}, budget >= C(N,m): output equals full
    enumeration exactly, across 20 seeds."""
    from conftest import make_feature_map as mk

    dataset = {}
    for i in range(10):
        img_id = f"im{i}"
        fm = mk(rng, 5, 5, channels=3, image_id=img_id)
        coords = [(int(rng.integers(0, 5)), int(rng.integers(0, 5))) for _ in range(3)]
        dataset[img_id] = (fm, make_keypoint_set(img_id, coords))
    checks = 0
    for m in (1, 2, 3):
        budget = math.comb(10, m)
        reference = select_templates(dataset, m=m, budget=budget, seed=0)
        assert reference.search_mode == "exhaustive"
        for seed in range(20):
            got = select_templates(dataset, m=m, budget=budget + 7, seed=seed)
            assert got.search_mode == "exhaustive"
            assert got.best == reference.best
            assert got.trials_evaluated == budget
            checks += 1
    _ok("exhaustive-sampled-consistency", f"{checks} seed/m combinations identical")


def test_selection_beats_random(sweeps):
    """Selected template's oracle mean MRE <= candidate average in >= 8/10
    dataset seeds; runtime (sweeps included) < 5 min total."""
    sweep_list, build_seconds = sweeps
    t0 = time.perf_counter()
    wins = 0
    details = []
    for rows, dataset in sweep_list:
        by_id = {r.template_id: r for r in rows}
        report = select_templates(dataset, m=1, budget=10_000, seed=0)
        chosen = report.best.template_ids[0]
        sel_mre = by_id[chosen].mean_mre_mm
        avg_mre = float(np.mean([r.mean_mre_mm for r in rows]))
        wins += sel_mre <= avg_mre
        details.append(f"{sel_mre:.2f}/{avg_mre:.2f}")
    elapsed = build_seconds + (time.perf_counter() - t0)
    assert wins >= 8, f"selection beat the average in only {wins}/10 seeds ({details})"
    assert elapsed < 300.0, f"10-seed sweep + selection took {elapsed:.0f}s"
    _ok("selection-beats-random",
        f"{wins}/10 seeds in {elapsed:.0f}s (sel/avg mm: {', '.join(details)})")


def test_similarity_mre_anticorrelation(sweeps):
    """Pearson CC between per-template score and oracle mean MRE < -0.3 in
    >= 8/10 seeds."""
    hits = 0
    ccs = []
    for rows, _ in sweeps[0]:
        cc = pearson_cc([r.keypoint_score for r in rows], [r.mean_mre_mm for r in rows])
        ccs.append(cc)
        hits += cc < -0.3
    assert hits >= 8, f"anticorrelation < -0.3 in only {hits}/10 seeds: {ccs}"
    _ok("similarity-mre-anticorrelation",
        f"{hits}/10 seeds, CCs: {', '.join(f'{c:+.3f}' for c in ccs)}")


def test_keypoint_landmark_score_correlation(sweeps):
    """CC between keypoint-based and landmark-based scores > +0.2 in
    >= 8/10 seeds."""
    hits = 0
    ccs = []
    for rows, _ in sweeps[0]:
        cc = pearson_cc([r.keypoint_score for r in rows], [r.landmark_score for r in rows])
        ccs.append(cc)
        hits += cc > 0.2
    assert hits >= 8, f"correlation > 0.2 in only {hits}/10 seeds: {ccs}"
    _ok("keypoint-landmark-correlation",
        f"{hits}/10 seeds, CCs: {', '.join(f'{c:+.3f}' for c in ccs)}")


def test_diminishing_spread(sweeps):
    """std of random-subset scores with 200 trials: std(m=5) < std(m=1) in
    >= 9/10 seeds."""
    hits = 0
    pairs = []
    for _, dataset in sweeps[0]:
        s1 = random_baseline(dataset, m=1, trials=200, seed=0)
        s5 = random_baseline(dataset, m=5, trials=200, seed=0)
        pairs.append((s1.std, s5.std))
        hits += s5.std < s1.std
    assert hits >= 9, f"spread shrank in only {hits}/10 seeds: {pairs}"
    _ok("diminishing-spread",
        f"{hits}/10 seeds, std m=1 -> m=5: "
        + ", ".join(f"{a:.4f}->{b:.4f}" for a, b in pairs))


def test_subset_monotonicity(rng):
    """R(S) <= R(S u {t}) for 500 random draws, up to 1e-9."""
    dataset = {}
    for i in range(8):
        img_id = f"im{i}"
        fm = make_feature_map(rng, 5, 5, channels=3, image_id=img_id)
        coords = [(int(rng.integers(0, 5)), int(rng.integers(0, 5))) for _ in range(3)]
        dataset[img_id] = (fm, make_keypoint_set(img_id, coords))
    ids = list(dataset)
    from scp.selection import ReverseSimCache

    cache = ReverseSimCache.build(dataset)
    worst = 0.0
    for _ in range(500):
        k = int(rng.integers(1, len(ids)))
        subset = list(rng.choice(ids, size=k, replace=False))
        extra = str(rng.choice([i for i in ids if i not in subset]))
        r_sub = representative_score(subset, dataset, cache=cache).score
        r_sup = representative_score(subset + [extra], dataset, cache=cache).score
        worst = max(worst, r_sub - r_sup)
        assert r_sup >= r_sub - 1e-9
    _ok("subset-monotonicity", f"500 draws, worst violation {worst:.2e} (<= 1e-9)")


def test_format_round_trip_and_rejections(tmp_path, rng):
    """SCPF write/read bit-exact over 200 random maps; malformed headers
    rejected with their designated error classes."""
    import struct

    for i in range(200):
        h = int(rng.integers(1, 16))
        w = int(rng.integers(1, 16))
        n_layers = int(rng.integers(1, 4))
        while 2 ** (n_layers - 1) > min(h, w):
            n_layers -= 1
        fm = make_feature_map(rng, h, w, n_layers=n_layers,
                              channels=int(rng.integers(1, 9)),
                              zero_prob=0.2, image_id=f"rt{i}",
                              spacing_mm=float(rng.uniform(0.05, 3.0)))
        path = tmp_path / "rt.scpf"
        write_feature_file(fm, path)
        back = read_feature_file(path)
        assert back.source_image_id == fm.source_image_id
        assert back.spacing_mm == fm.spacing_mm
        for la, lb in zip(fm.layers, back.layers):
            assert lb.grid.dtype == np.float32
            assert np.array_equal(la.grid, lb.grid)

    good = make_feature_map(rng, 6, 6, n_layers=2, channels=2, image_id="x")
    gp = tmp_path / "good.scpf"
    write_feature_file(good, gp)
    raw = gp.read_bytes()

    def expect(data: bytes, err) -> None:
        p = tmp_path / "bad.scpf"
        p.write_bytes(data)
        with pytest.raises(err):
            read_feature_file(p)

    expect(b"XXXX" + raw[4:], MagicError)
    expect(raw[:4] + struct.pack("<H", 2) + raw[6:], VersionError)
    expect(raw[:-3], TruncatedError)
    expect(raw[:10], TruncatedError)
    big = 1 << 20
    expect(
        b"SCPF" + struct.pack("<H", 1) + struct.pack("<H", 1) + b"x"
        + struct.pack("<H", 1) + b"t" + struct.pack("<II", big, big)
        + struct.pack("<d", 1.0) + struct.pack("<BH", 1, 4)
        + struct.pack("<HII", 1, big, big),
        DimensionOverflowError,
    )
    # doubling-rule violation: second layer repeats downsample 1
    grid = np.ascontiguousarray(good.layers[0].grid, "<f4")
    expect(
        b"SCPF" + struct.pack("<H", 1) + struct.pack("<H", 1) + b"x"
        + struct.pack("<H", 1) + b"t" + struct.pack("<II", 6, 6)
        + struct.pack("<d", 1.0) + struct.pack("<BH", 2, 2)
        + struct.pack("<HII", 1, 6, 6) + grid.tobytes()
        + struct.pack("<HII", 1, 6, 6) + grid.tobytes(),
        StructureError,
    )
    _ok("format-round-trip", "200 maps bit-exact; 6 malformed fixtures rejected")


def test_cli_determinism(tmp_path):
    """Every CLI command byte-identical across two runs with the same seed
    and --jobs in {1, 4}."""
    env = {k: v for k, v in os.environ.items() if k != "SCP_JOBS"}

    def run_pipeline(root: Path, jobs: int) -> dict:
        spec = SyntheticDatasetSpec(n_images=6, image_size=32, n_landmarks=3,
                                    geometry_jitter_px=1.5, intensity_noise=0.01, seed=11)
        manifest = materialize_dataset(spec, root)
        outputs = {}
        commands = [
            ["extract", "--manifest", str(manifest), "--jobs", str(jobs)],
            ["keypoints", "--manifest", str(manifest), "--keypoints", "30",
             "--jobs", str(jobs)],
            ["select", "--manifest", str(manifest), "--m", "2", "--seed", "5",
             "--budget", "10", "--jobs", str(jobs)],
            ["evaluate", "--manifest", str(manifest), "--templates", "syn0,syn1",
             "--jobs", str(jobs)],
            ["bench", "--out", str(root / "bench"), "--n-images", "5", "--size", "32",
             "--landmarks", "3", "--keypoints", "15", "--budget", "20",
             "--baseline-trials", "5", "--seed", "2", "--jobs", str(jobs)],
        ]
        for cmd in commands:
            proc = subprocess.run(
                [sys.executable, "-m", "scp.cli", *cmd],
                capture_output=True, env=env, cwd=str(root),
            )
            assert proc.returncode == 0, f"{cmd}: {proc.stderr.decode()}"
            outputs[cmd[0]] = proc.stdout
        files = {
            str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()
        }
        return {"stdout": outputs, "files": files}

    runs = [run_pipeline(tmp_path / f"r{i}", jobs) for i, jobs in enumerate((1, 1, 4))]
    assert runs[0]["stdout"] == runs[1]["stdout"]
    assert runs[0]["files"] == runs[1]["files"]
    assert runs[0]["stdout"] == runs[2]["stdout"]
    assert runs[0]["files"] == runs[2]["files"]
    _ok("cli-determinism", "5 commands byte-identical across reruns and --jobs 1/4")
