"""SCPF: the binary interchange format for feature maps.

Little-endian layout:

    magic      4 bytes  "SCPF"
    version    u16      currently 1
    image_id   u16 length + UTF-8 bytes
    tag        u16 length + UTF-8 bytes
    height     u32
    width      u32
    spacing    f64      mm per pixel
    n_layers   u8
    channels   u16
    per layer: downsample u16, rows u32, cols u32,
               rows*cols*channels f32 (row-major, channel-fastest)

Grids are stored and held in memory as float32, so a write/read round trip
is bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (
    DimensionOverflowError,
    MagicError,
    StructureError,
    TruncatedError,
    ValidationError,
    VersionError,
)
from .features import FeatureLayer, FeatureMap

MAGIC = b"SCPF"
VERSION = 1

# per-layer element cap; anything above is treated as a corrupt header
MAX_LAYER_ELEMENTS = 1 << 32


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(f"file ends inside {what}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size, what))


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValidationError("string field too long for u16 length prefix")
    return struct.pack("<H", len(raw)) + raw


def write_feature_file(fm: FeatureMap, path: str | Path) -> None:
    parts = [
        MAGIC,
        struct.pack("<H", VERSION),
        _pack_str(fm.source_image_id),
        _pack_str(fm.extractor_tag),
        struct.pack("<II", fm.image_height, fm.image_width),
        struct.pack("<d", fm.spacing_mm),
        struct.pack("<BH", len(fm.layers), fm.channels),
    ]
    for layer in fm.layers:
        if layer.downsample > 0xFFFF:
            raise ValidationError(f"downsample {layer.downsample} does not fit in u16")
        parts.append(struct.pack("<HII", layer.downsample, layer.rows, layer.cols))
        parts.append(np.ascontiguousarray(layer.grid, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_feature_file(path: str | Path) -> FeatureMap:
    r = _Reader(Path(path).read_bytes())
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise MagicError(f"{path}: bad magic {magic!r}")
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise VersionError(f"{path}: unsupported version {version}")

    (id_len,) = r.unpack("<H", "image id length")
    image_id = r.take(id_len, "image id").decode("utf-8")
    (tag_len,) = r.unpack("<H", "extractor tag length")
    tag = r.take(tag_len, "extractor tag").decode("utf-8")
    height, width = r.unpack("<II", "image dimensions")
    (spacing,) = r.unpack("<d", "pixel spacing")
    n_layers, channels = r.unpack("<BH", "layer header")
    if n_layers < 1:
        raise StructureError(f"{path}: layer count must be >= 1")
    if channels < 1:
        raise StructureError(f"{path}: channel count must be >= 1")

    layers = []
    expected_d = 1
    for li in range(n_layers):
        downsample, rows, cols = r.unpack("<HII", f"layer {li} header")
        if downsample != expected_d:
            raise StructureError(
                f"{path}: layer {li} downsample {downsample} breaks doubling rule "
                f"(expected {expected_d})"
            )
        if rows != -(-height // downsample) or cols != -(-width // downsample):
            raise StructureError(
                f"{path}: layer {li} is {rows}x{cols}, inconsistent with image "
                f"{height}x{width} at downsample {downsample}"
            )
        n_elem = rows * cols * channels
        if n_elem > MAX_LAYER_ELEMENTS:
            raise DimensionOverflowError(
                f"{path}: layer {li} declares {n_elem} elements (cap {MAX_LAYER_ELEMENTS})"
            )
        raw = r.take(4 * n_elem, f"layer {li} payload")
        grid = np.frombuffer(raw, dtype="<f4").reshape(rows, cols, channels)
        layers.append((downsample, grid))
        expected_d *= 2

    if r.pos != len(r.data):
        raise StructureError(f"{path}: {len(r.data) - r.pos} trailing bytes after payload")

    try:
        return FeatureMap(
            layers=tuple(FeatureLayer(downsample=d, grid=g) for d, g in layers),
            source_image_id=image_id,
            extractor_tag=tag,
            image_height=height,
            image_width=width,
            spacing_mm=spacing,
        )
    except ValidationError as exc:
        raise StructureError(f"{path}: {exc}") from exc
