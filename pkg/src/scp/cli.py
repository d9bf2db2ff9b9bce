"""Command-line pipeline: extract, keypoints, select, evaluate, bench.

Exit codes: 0 success, 2 I/O failure, 3 missing prerequisite artifacts,
64 usage error.  Every command is deterministic given its flags and seed,
including under --jobs > 1.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import DegenerateVarianceError, ManifestError, ScpError
from .evaluation import (
    LandmarkSet,
    detect_landmarks,
    evaluate,
    oracle_template_sweep,
    pearson_cc,
    read_landmark_file,
)
from .features import DescriptorConfig, extract_features_builtin
from .image import read_pgm
from .keypoints import (
    Detector,
    detect_keypoints_dog,
    detect_keypoints_grid,
    detect_keypoints_random,
    read_keypoint_file,
    write_keypoint_file,
)
from .manifest import DatasetManifest, load_manifest, save_manifest
from .parallel import map_ordered, resolve_jobs
from .scpf import read_feature_file, write_feature_file
from .selection import random_baseline, select_templates, write_report
from .synthetic import SyntheticDatasetSpec, generate_synthetic_dataset

EXIT_OK = 0
EXIT_IO = 2
EXIT_MISSING = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scp", description="Representative-template selection pipeline")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp: argparse.ArgumentParser, manifest: bool = True) -> None:
        if manifest:
            sp.add_argument("--manifest", required=True, help="dataset manifest file")
        sp.add_argument("--seed", type=int, default=0, help="random seed")
        sp.add_argument("--jobs", type=int, default=None,
                        help="worker threads (default: SCP_JOBS or 1)")

    sp = sub.add_parser("extract", help="compute builtin feature maps")
    common(sp)
    sp.add_argument("--out", default="features", help="output directory under the manifest root")
    sp.add_argument("--layers", type=int, default=3)
    sp.add_argument("--channels", type=int, default=32)

    sp = sub.add_parser("keypoints", help="detect salient points")
    common(sp)
    sp.add_argument("--out", default="keypoints", help="output directory under the manifest root")
    sp.add_argument("--detector", choices=[d.value for d in Detector], default=Detector.DOG_SIFT.value)
    sp.add_argument("--keypoints", type=int, default=100, help="points per image")
    sp.add_argument("--min-dist", type=float, default=8.0, help="suppression radius, px")

    sp = sub.add_parser("select", help="search for the best template subset")
    common(sp)
    sp.add_argument("--m", type=int, required=True, help="subset size")
    sp.add_argument("--budget", type=int, default=10_000, help="combinations to evaluate")
    sp.add_argument("--out", default="selection.report", help="report path under the manifest root")

    sp = sub.add_parser("evaluate", help="detect landmarks from templates and score them")
    common(sp)
    sp.add_argument("--templates", required=True, help="comma-separated template ids")
    sp.add_argument("--radii", default="2,2.5,3,4", help="detection radii in mm")
    sp.add_argument("--out", default="evaluation.report", help="report path under the manifest root")

    sp = sub.add_parser("bench", help="synthetic end-to-end sweep with correlations")
    common(sp, manifest=False)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--n-images", type=int, default=40)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--landmarks", type=int, default=5)
    sp.add_argument("--spacing", type=float, default=0.5, help="mm per pixel")
    sp.add_argument("--jitter", type=float, default=2.0, help="landmark jitter, px")
    sp.add_argument("--noise", type=float, default=0.02, help="intensity noise sigma")
    sp.add_argument("--keypoints", type=int, default=100)
    sp.add_argument("--min-dist", type=float, default=8.0)
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--budget", type=int, default=10_000)
    sp.add_argument("--baseline-trials", type=int, default=200)
    return p


def _fail_io(message: str) -> int:
    print(message, file=sys.stderr)
    return EXIT_IO


def _fail_missing(message: str) -> int:
    print(message, file=sys.stderr)
    return EXIT_MISSING


def cmd_extract(args: argparse.Namespace) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except ManifestError as exc:
        return _fail_io(str(exc))
    jobs = resolve_jobs(args.jobs)
    out_dir = manifest.root / args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    config = DescriptorConfig(n_layers=args.layers, channels=args.channels)

    def one(entry):
        try:
            img = read_pgm(manifest.resolve(entry.image_path), entry.image_id, manifest.spacing_mm)
            fm = extract_features_builtin(img, config)
            rel = f"{args.out}/{entry.image_id}.scpf"
            write_feature_file(fm, manifest.root / rel)
            return entry.image_id, rel, None
        except (ScpError, OSError) as exc:
            return entry.image_id, None, str(exc)

    results = map_ordered(one, manifest.entries, jobs)
    failed = [(i, err) for i, rel, err in results if err is not None]
    for image_id, rel, _ in results:
        if rel is not None:
            manifest = manifest.with_paths(image_id, feature_path=rel)
            print(f"{image_id}\t{rel}")
    save_manifest(manifest, args.manifest)
    for image_id, err in failed:
        print(f"extract failed for {image_id}: {err}", file=sys.stderr)
    return EXIT_IO if failed else EXIT_OK


def cmd_keypoints(args: argparse.Namespace) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except ManifestError as exc:
        return _fail_io(str(exc))
    jobs = resolve_jobs(args.jobs)
    out_dir = manifest.root / args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    detector = Detector(args.detector)

    def one(entry):
        try:
            img = read_pgm(manifest.resolve(entry.image_path), entry.image_id, manifest.spacing_mm)
            if detector is Detector.DOG_SIFT:
                kps = detect_keypoints_dog(img, args.keypoints, args.min_dist)
            elif detector is Detector.GRID:
                kps = detect_keypoints_grid(img, args.keypoints)
            else:
                kps = detect_keypoints_random(img, args.keypoints, args.seed)
            rel = f"{args.out}/{entry.image_id}.kp"
            write_keypoint_file(kps, manifest.root / rel)
            return entry.image_id, rel, None
        except (ScpError, OSError) as exc:
            return entry.image_id, None, str(exc)

    results = map_ordered(one, manifest.entries, jobs)
    failed = [(i, err) for i, rel, err in results if err is not None]
    for image_id, rel, _ in results:
        if rel is not None:
            manifest = manifest.with_paths(image_id, keypoint_path=rel)
            print(f"{image_id}\t{rel}")
    save_manifest(manifest, args.manifest)
    for image_id, err in failed:
        print(f"keypoints failed for {image_id}: {err}", file=sys.stderr)
    return EXIT_IO if failed else EXIT_OK


def _load_feature_dataset(manifest: DatasetManifest, need_keypoints: bool,
                          need_landmarks: bool, jobs: int):
    missing = []
    for e in manifest.entries:
        gaps = []
        if e.feature_path is None:
            gaps.append("features")
        if need_keypoints and e.keypoint_path is None:
            gaps.append("keypoints")
        if need_landmarks and e.landmark_path is None:
            gaps.append("landmarks")
        if gaps:
            missing.append(f"{e.image_id}: {', '.join(gaps)}")
    if missing:
        return None, missing

    def one(e):
        fm = read_feature_file(manifest.resolve(e.feature_path))
        kp = read_keypoint_file(manifest.resolve(e.keypoint_path)) if need_keypoints else None
        lm = read_landmark_file(manifest.resolve(e.landmark_path)) if need_landmarks else None
        return e.image_id, fm, kp, lm

    loaded = map_ordered(one, manifest.entries, jobs)
    return loaded, []


def cmd_select(args: argparse.Namespace) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except ManifestError as exc:
        return _fail_io(str(exc))
    jobs = resolve_jobs(args.jobs)
    try:
        loaded, missing = _load_feature_dataset(manifest, need_keypoints=True,
                                                need_landmarks=False, jobs=jobs)
    except (ScpError, OSError) as exc:
        return _fail_io(str(exc))
    if loaded is None:
        return _fail_missing("missing prerequisite artifacts:\n" + "\n".join(missing))
    dataset = {i: (fm, kp) for i, fm, kp, _ in loaded}
    try:
        report = select_templates(dataset, m=args.m, budget=args.budget,
                                  seed=args.seed, jobs=jobs)
    except ScpError as exc:
        return _fail_io(str(exc))
    write_report(report, manifest.root / args.out)
    for tid in report.best.template_ids:
        print(tid)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except ManifestError as exc:
        return _fail_io(str(exc))
    jobs = resolve_jobs(args.jobs)
    template_ids = [t for t in args.templates.split(",") if t]
    unknown = [t for t in template_ids if t not in manifest.ids()]
    if unknown:
        return _fail_missing(f"template ids not in manifest: {', '.join(unknown)}")
    try:
        radii = [float(r) for r in args.radii.split(",")]
    except ValueError:
        return _fail_io(f"bad radii list: {args.radii!r}")
    try:
        loaded, missing = _load_feature_dataset(manifest, need_keypoints=False,
                                                need_landmarks=True, jobs=jobs)
    except (ScpError, OSError) as exc:
        return _fail_io(str(exc))
    if loaded is None:
        return _fail_missing("missing prerequisite artifacts:\n" + "\n".join(missing))

    by_id = {i: (fm, lm) for i, fm, _, lm in loaded}
    tmpls = [(by_id[t][0], by_id[t][1]) for t in template_ids]
    targets = [i for i in manifest.ids() if i not in template_ids]
    if not targets:
        return _fail_missing("no non-template images to evaluate")

    def one(tid: str) -> LandmarkSet:
        return detect_landmarks(tmpls, by_id[tid][0])

    preds = map_ordered(one, targets, jobs)
    gts = [by_id[t][1] for t in targets]
    try:
        report = evaluate(preds, gts, manifest.spacing_mm, radii)
    except ScpError as exc:
        return _fail_io(str(exc))

    lines = [
        f"templates\t{','.join(template_ids)}",
        f"n_images\t{len(targets)}",
        f"n_landmarks\t{len(gts[0])}",
        f"mre_mm\t{report.mre_mm:.9g}",
        "",
        "radius_mm\tsdr",
    ]
    for r in radii:
        lines.append(f"{r:.9g}\t{report.sdr[r]:.9g}")
    lines += ["", "image_id\tlandmark\terror_mm"]
    idx = 0
    for tid, gt in zip(targets, gts):
        for l in range(len(gt)):
            lines.append(f"{tid}\t{l}\t{report.per_landmark_errors_mm[idx]:.9g}")
            idx += 1
    (manifest.root / args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"mre_mm\t{report.mre_mm:.9g}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    jobs = resolve_jobs(args.jobs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = SyntheticDatasetSpec(
        n_images=args.n_images,
        image_size=args.size,
        n_landmarks=args.landmarks,
        spacing_mm=args.spacing,
        geometry_jitter_px=args.jitter,
        intensity_noise=args.noise,
        seed=args.seed,
    )
    try:
        data = generate_synthetic_dataset(spec)
        images = {img.id: img for img, _ in data}
        features = {
            img.id: extract_features_builtin(img) for img, _ in data
        }
        keypoints = {
            img.id: detect_keypoints_dog(img, args.keypoints, args.min_dist) for img, _ in data
        }
        empty = [i for i, kp in keypoints.items() if len(kp) == 0]
        if empty:
            return _fail_io(f"no keypoints detected on: {', '.join(empty)}")
        sweep_data = {
            img.id: (features[img.id], keypoints[img.id], lms) for img, lms in data
        }
        rows = oracle_template_sweep(sweep_data, jobs=jobs)
    except ScpError as exc:
        return _fail_io(str(exc))

    table = ["template_id\tkeypoint_score\tlandmark_score\tmean_mre_mm"]
    for r in rows:
        table.append(
            f"{r.template_id}\t{r.keypoint_score:.9g}\t{r.landmark_score:.9g}\t{r.mean_mre_mm:.9g}"
        )
    (out_dir / "sweep.tsv").write_text("\n".join(table) + "\n", encoding="utf-8")

    kp_scores = [r.keypoint_score for r in rows]
    lm_scores = [r.landmark_score for r in rows]
    mres = [r.mean_mre_mm for r in rows]

    def cc(xs, ys):
        try:
            return f"{pearson_cc(xs, ys):.9g}"
        except (DegenerateVarianceError, ScpError):
            return "n/a"

    dataset = {i: (features[i], keypoints[i]) for i in features}
    sel = select_templates(dataset, m=args.m, budget=args.budget, seed=args.seed, jobs=jobs)
    by_id = {r.template_id: r for r in rows}
    sel_mre = (
        f"{by_id[sel.best.template_ids[0]].mean_mre_mm:.9g}"
        if args.m == 1
        else "n/a"
    )
    base = random_baseline(dataset, m=args.m, trials=args.baseline_trials,
                           seed=args.seed, jobs=jobs)

    summary = [
        f"seed\t{args.seed}",
        f"n_images\t{args.n_images}",
        f"cc_keypoint_score_vs_mre\t{cc(kp_scores, mres)}",
        f"cc_keypoint_vs_landmark_score\t{cc(kp_scores, lm_scores)}",
        f"selected_ids\t{','.join(sel.best.template_ids)}",
        f"selected_score\t{sel.best.score:.9g}",
        f"selected_mean_mre_mm\t{sel_mre}",
        f"candidate_mean_mre_mm\t{np.mean(mres):.9g}",
        f"random_score_mean\t{base.mean:.9g}",
        f"random_score_std\t{base.std:.9g}",
    ]
    (out_dir / "summary.tsv").write_text("\n".join(summary) + "\n", encoding="utf-8")
    for line in summary:
        print(line)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "extract": cmd_extract,
        "keypoints": cmd_keypoints,
        "select": cmd_select,
        "evaluate": cmd_evaluate,
        "bench": cmd_bench,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
