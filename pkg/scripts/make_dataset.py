#!/usr/bin/env python3
"""Render a seeded synthetic landmark dataset to disk (PGM images, landmark
files, manifest) so the scp CLI can be driven end to end."""

import argparse

from scp.synthetic import SyntheticDatasetSpec, materialize_dataset


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", required=True, help="dataset root directory")
    p.add_argument("--n-images", type=int, default=40)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--landmarks", type=int, default=5)
    p.add_argument("--spacing", type=float, default=0.5)
    p.add_argument("--jitter", type=float, default=2.0)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    spec = SyntheticDatasetSpec(
        n_images=args.n_images,
        image_size=args.size,
        n_landmarks=args.landmarks,
        spacing_mm=args.spacing,
        geometry_jitter_px=args.jitter,
        intensity_noise=args.noise,
        seed=args.seed,
    )
    manifest = materialize_dataset(spec, args.out)
    print(manifest)


if __name__ == "__main__":
    main()
