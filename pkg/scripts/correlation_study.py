#!/usr/bin/env python3
"""Multi-seed study of how the label-free representative score tracks
detection quality on synthetic datasets.

For each seed: build features and keypoints, sweep all single-template
candidates, and report the correlation between the keypoint score and
(a) the oracle mean radial error, (b) the landmark-based score, plus
whether the top-scoring template beats the candidate average.
"""

import argparse

import numpy as np

from scp.evaluation import oracle_template_sweep, pearson_cc
from scp.features import extract_features_builtin
from scp.keypoints import detect_keypoints_dog
from scp.selection import select_templates
from scp.synthetic import SyntheticDatasetSpec, generate_synthetic_dataset


def run_seed(seed: int, args) -> tuple[float, float, bool]:
    spec = SyntheticDatasetSpec(
        n_images=args.n_images,
        image_size=args.size,
        n_landmarks=args.landmarks,
        geometry_jitter_px=args.jitter,
        intensity_noise=args.noise,
        seed=seed,
    )
    data = generate_synthetic_dataset(spec)
    features = {img.id: extract_features_builtin(img) for img, _ in data}
    keypoints = {img.id: detect_keypoints_dog(img, k=args.keypoints) for img, _ in data}
    sweep_ds = {img.id: (features[img.id], keypoints[img.id], lms) for img, lms in data}
    rows = oracle_template_sweep(sweep_ds, jobs=args.jobs)

    kp_scores = [r.keypoint_score for r in rows]
    mres = [r.mean_mre_mm for r in rows]
    cc_mre = pearson_cc(kp_scores, mres)
    cc_lm = pearson_cc(kp_scores, [r.landmark_score for r in rows])

    dataset = {i: (features[i], keypoints[i]) for i in features}
    chosen = select_templates(dataset, m=1, budget=args.budget, seed=seed).best.template_ids[0]
    sel_mre = next(r.mean_mre_mm for r in rows if r.template_id == chosen)
    return cc_mre, cc_lm, sel_mre <= float(np.mean(mres))


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--n-images", type=int, default=40)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--landmarks", type=int, default=5)
    p.add_argument("--jitter", type=float, default=2.0)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--keypoints", type=int, default=100)
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--jobs", type=int, default=2)
    args = p.parse_args()

    print("seed\tcc_score_vs_mre\tcc_score_vs_landmark\tselected_beats_average")
    wins = 0
    ccs_mre, ccs_lm = [], []
    for seed in range(args.seeds):
        cc_mre, cc_lm, win = run_seed(seed, args)
        wins += win
        ccs_mre.append(cc_mre)
        ccs_lm.append(cc_lm)
        print(f"{seed}\t{cc_mre:+.3f}\t{cc_lm:+.3f}\t{win}")
    print(f"# median cc(score, MRE) {np.median(ccs_mre):+.3f}, "
          f"median cc(score, landmark score) {np.median(ccs_lm):+.3f}, "
          f"selected beat average in {wins}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
