"""Grayscale images with physical pixel spacing, plus binary PGM I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

MIN_SIDE = 16


@dataclass(frozen=True)
class Image:
    """A 2-D intensity grid normalized to [0, 1] with isotropic spacing."""

    pixels: np.ndarray
    spacing_mm: float
    id: str

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise ValidationError(f"image {self.id!r}: pixels must be 2-D, got ndim={px.ndim}")
        h, w = px.shape
        if h < MIN_SIDE or w < MIN_SIDE:
            raise ValidationError(f"image {self.id!r}: {h}x{w} below minimum {MIN_SIDE}x{MIN_SIDE}")
        if not np.all(np.isfinite(px)):
            raise ValidationError(f"image {self.id!r}: non-finite intensities")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValidationError(f"image {self.id!r}: intensities outside [0, 1]")
        if not (self.spacing_mm > 0.0 and np.isfinite(self.spacing_mm)):
            raise ValidationError(f"image {self.id!r}: spacing_mm must be positive")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def read_pgm(path: str | Path, image_id: str, spacing_mm: float) -> Image:
    """Read a binary (P5) PGM file, 8- or 16-bit, into an Image."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise ValidationError(f"{path}: not a binary PGM (P5) file")

    # Header tokens: width, height, maxval; '#' comments run to end of line.
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        if pos >= len(data):
            raise ValidationError(f"{path}: truncated PGM header")
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif c.isspace():
            pos += 1
        elif c.isdigit():
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            tokens.append(int(data[pos:end]))
            pos = end
        else:
            raise ValidationError(f"{path}: unexpected byte {c!r} in PGM header")
    pos += 1  # single whitespace separates header from raster

    width, height, maxval = tokens
    if not (0 < maxval < 65536):
        raise ValidationError(f"{path}: PGM maxval {maxval} out of range")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    raster = data[pos : pos + need]
    if len(raster) < need:
        raise ValidationError(f"{path}: PGM raster truncated")
    raw = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    pixels = raw.astype(np.float64) / float(maxval)
    return Image(pixels=pixels, spacing_mm=spacing_mm, id=image_id)


def write_pgm(img: Image, path: str | Path, maxval: int = 255) -> None:
    """Write an Image as binary (P5) PGM; 16-bit when maxval > 255."""
    if not (0 < maxval < 65536):
        raise ValidationError(f"maxval {maxval} out of range")
    quant = np.floor(img.pixels * maxval + 0.5).astype(np.uint32)
    quant = np.minimum(quant, maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + quant.astype(dtype).tobytes())
