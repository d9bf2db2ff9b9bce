"""Line-oriented dataset manifests tying image ids to their artifacts.

Format ("scp-manifest v1", tab-separated, paths relative to the manifest's
directory, "-" for absent):

    scp-manifest v1
    spacing_mm 0.5
    <id>\t<image.pgm>\t<features.scpf|->\t<keypoints.kp|->\t<landmarks.lm|->
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ManifestError

HEADER = "scp-manifest v1"


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    image_path: str
    feature_path: str | None = None
    keypoint_path: str | None = None
    landmark_path: str | None = None


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    spacing_mm: float
    entries: tuple[ManifestEntry, ...]

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def ids(self) -> list[str]:
        return [e.image_id for e in self.entries]

    def entry(self, image_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise ManifestError(f"id {image_id!r} not in manifest")

    def with_paths(self, image_id: str, **kwargs: str) -> "DatasetManifest":
        entries = tuple(
            replace(e, **kwargs) if e.image_id == image_id else e for e in self.entries
        )
        return replace(self, entries=entries)


def _opt(token: str) -> str | None:
    return None if token == "-" else token


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    if not lines or lines[0].strip() != HEADER:
        raise ManifestError(f"{path}: missing '{HEADER}' header")
    if len(lines) < 2 or not lines[1].startswith("spacing_mm "):
        raise ManifestError(f"{path}: second line must be 'spacing_mm <value>'")
    try:
        spacing = float(lines[1].split(maxsplit=1)[1])
    except (IndexError, ValueError) as exc:
        raise ManifestError(f"{path}: bad spacing_mm line") from exc
    if spacing <= 0:
        raise ManifestError(f"{path}: spacing_mm must be positive")

    entries = []
    seen = set()
    for ln in lines[2:]:
        if not ln.strip():
            continue
        fields = ln.split("\t")
        if len(fields) != 5:
            raise ManifestError(f"{path}: expected 5 tab-separated fields, got {len(fields)}: {ln!r}")
        image_id = fields[0]
        if image_id in seen:
            raise ManifestError(f"{path}: duplicate id {image_id!r}")
        seen.add(image_id)
        entries.append(
            ManifestEntry(
                image_id=image_id,
                image_path=fields[1],
                feature_path=_opt(fields[2]),
                keypoint_path=_opt(fields[3]),
                landmark_path=_opt(fields[4]),
            )
        )
    manifest = DatasetManifest(root=path.parent, spacing_mm=spacing, entries=tuple(entries))

    missing = []
    for e in manifest.entries:
        for rel in (e.image_path, e.feature_path, e.keypoint_path, e.landmark_path):
            if rel is not None and not manifest.resolve(rel).exists():
                missing.append(f"{e.image_id}: {rel}")
    if missing:
        raise ManifestError(f"{path}: referenced files missing: " + "; ".join(missing))
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    lines = [HEADER, f"spacing_mm {manifest.spacing_mm:.9g}"]
    for e in manifest.entries:
        lines.append(
            "\t".join(
                [
                    e.image_id,
                    e.image_path,
                    e.feature_path or "-",
                    e.keypoint_path or "-",
                    e.landmark_path or "-",
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
