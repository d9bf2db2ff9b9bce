import * as fs from "fs";
import { Rng, gaussian } from "./rng";

/** Grayscale image with intensities in [0, 1]. */
export interface GrayImage {
  id: string;
  width: number;
  height: number;
  /** row-major, length width*height */
  pixels: Float32Array;
}

/** Read a binary (P5) PGM file, 8- or 16-bit big-endian. */
export function readPgm(path: string, id: string): GrayImage {
  const data = fs.readFileSync(path);
  if (data.length < 2 || data.toString("ascii", 0, 2) !== "P5") {
    throw new Error(`${path}: not a binary PGM (P5) file`);
  }
  const tokens: number[] = [];
  let pos = 2;
  while (tokens.length < 3) {
    if (pos >= data.length) throw new Error(`${path}: truncated PGM header`);
    const c = data[pos];
    if (c === 0x23) {
      // '#' comment to end of line
      while (pos < data.length && data[pos] !== 0x0a) pos++;
      pos++;
    } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
      pos++;
    } else if (c >= 0x30 && c <= 0x39) {
      let end = pos;
      while (end < data.length && data[end] >= 0x30 && data[end] <= 0x39) end++;
      tokens.push(Number(data.toString("ascii", pos, end)));
      pos = end;
    } else {
      throw new Error(`${path}: unexpected byte in PGM header`);
    }
  }
  pos += 1; // single whitespace before the raster
  const [width, height, maxval] = tokens;
  const wide = maxval > 255;
  const need = width * height * (wide ? 2 : 1);
  if (data.length - pos < need) throw new Error(`${path}: PGM raster truncated`);
  const pixels = new Float32Array(width * height);
  for (let i = 0; i < width * height; i++) {
    const raw = wide ? data.readUInt16BE(pos + 2 * i) : data[pos + i];
    pixels[i] = raw / maxval;
  }
  return { id, width, height, pixels };
}

/**
 * Seeded toy scenes for self-contained training: a flat background with a
 * few blobs of distinct size and polarity, so patches fall into clearly
 * separable appearance classes.
 */
export function makeToyImages(n: number, size: number, rng: Rng): GrayImage[] {
  const kinds = [
    { sigma: 1.6, amp: 0.55 },
    { sigma: 3.2, amp: -0.28 },
    { sigma: 2.2, amp: 0.4 },
  ];
  const images: GrayImage[] = [];
  for (let i = 0; i < n; i++) {
    const pixels = new Float32Array(size * size).fill(0.3);
    const blobs = kinds.map((k) => ({
      cx: 6 + rng() * (size - 12),
      cy: 6 + rng() * (size - 12),
      ...k,
    }));
    for (let y = 0; y < size; y++) {
      for (let x = 0; x < size; x++) {
        let v = pixels[y * size + x];
        for (const b of blobs) {
          v += b.amp * Math.exp(-0.5 * (((x - b.cx) ** 2 + (y - b.cy) ** 2) / (b.sigma * b.sigma)));
        }
        pixels[y * size + x] = Math.min(1, Math.max(0, v));
      }
    }
    images.push({ id: `toy${String(i).padStart(2, "0")}`, width: size, height: size, pixels });
  }
  return images;
}

/** Augmented view: integer shift, intensity scale, additive Gaussian noise. */
export function augment(
  img: GrayImage,
  dx: number,
  dy: number,
  scale: number,
  noiseSigma: number,
  rng: Rng,
): GrayImage {
  const { width, height, pixels } = img;
  const out = new Float32Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const sx = Math.min(width - 1, Math.max(0, x - dx));
      const sy = Math.min(height - 1, Math.max(0, y - dy));
      let v = pixels[sy * width + sx] * scale;
      if (noiseSigma > 0) v += noiseSigma * gaussian(rng);
      out[y * width + x] = Math.min(1, Math.max(0, v));
    }
  }
  return { id: `${img.id}+aug`, width, height, pixels: out };
}

/** Pixels ranked by gradient magnitude; anchors come from the top of this list. */
export function topGradientPixels(img: GrayImage, count: number): Array<[number, number]> {
  const { width, height, pixels } = img;
  const mag = new Float32Array(width * height);
  for (let y = 1; y < height - 1; y++) {
    for (let x = 1; x < width - 1; x++) {
      const gx = pixels[y * width + x + 1] - pixels[y * width + x - 1];
      const gy = pixels[(y + 1) * width + x] - pixels[(y - 1) * width + x];
      mag[y * width + x] = Math.hypot(gx, gy);
    }
  }
  return Array.from(mag.keys())
    .sort((a, b) => mag[b] - mag[a])
    .slice(0, count)
    .map((i) => [i % width, Math.floor(i / width)] as [number, number]);
}
