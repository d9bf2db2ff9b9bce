import * as tf from "@tensorflow/tfjs";
import * as fs from "fs";
import * as path from "path";
import { GrayImage } from "./images";
import { EncoderWeights, forward } from "./model";
import { ScpfMap, writeScpf } from "./scpf";

const ZERO_NORM_EPS = 1e-12;

/**
 * Run the encoder on one image and pack the three feature grids as an
 * SCPF map.  Vectors are L2-normalized in double precision; raw vectors
 * with norm below 1e-12 become exact zeros, the format's convention for
 * degenerate patches.
 */
export function encodeImage(
  enc: EncoderWeights,
  img: GrayImage,
  spacingMm: number,
): ScpfMap {
  const channels = enc.config.channels;
  const grids = tf.tidy(() => {
    const xT = tf.tensor(img.pixels, [img.height, img.width, 1]) as tf.Tensor3D;
    return forward(enc, xT).map((t) => ({
      rows: t.shape[0],
      cols: t.shape[1],
      values: t.dataSync() as Float32Array,
    }));
  });
  const layers = grids.map((g, li) => {
    const out = new Float32Array(g.values.length);
    for (let cell = 0; cell < g.rows * g.cols; cell++) {
      let sq = 0;
      for (let c = 0; c < channels; c++) {
        const v = g.values[cell * channels + c];
        sq += v * v;
      }
      const norm = Math.sqrt(sq);
      if (norm >= ZERO_NORM_EPS) {
        for (let c = 0; c < channels; c++) {
          out[cell * channels + c] = g.values[cell * channels + c] / norm;
        }
      }
    }
    return { downsample: 1 << li, rows: g.rows, cols: g.cols, values: out };
  });
  return {
    imageId: img.id,
    extractorTag: "imported",
    height: img.height,
    width: img.width,
    spacingMm,
    channels,
    layers,
  };
}

/** Write one SCPF file per image into outDir; returns image id -> file path. */
export function exportFeatures(
  enc: EncoderWeights,
  images: GrayImage[],
  outDir: string,
  spacingMm: number,
): Map<string, string> {
  fs.mkdirSync(outDir, { recursive: true });
  const written = new Map<string, string>();
  for (const img of images) {
    const file = path.join(outDir, `${img.id}.scpf`);
    writeScpf(encodeImage(enc, img, spacingMm), file);
    written.set(img.id, file);
  }
  return written;
}

/**
 * Point a selection-engine manifest's feature column at freshly exported
 * files.  featureDir must be relative to the manifest's directory.
 */
export function patchManifestFeatures(manifestPath: string, featureDir: string): void {
  const lines = fs.readFileSync(manifestPath, "utf-8").split("\n");
  if (lines[0] !== "scp-manifest v1") {
    throw new Error(`${manifestPath}: not an scp-manifest v1 file`);
  }
  const out = lines.map((line, i) => {
    if (i < 2 || !line.trim()) return line;
    const fields = line.split("\t");
    if (fields.length !== 5) throw new Error(`${manifestPath}: bad row: ${line}`);
    fields[2] = `${featureDir}/${fields[0]}.scpf`;
    return fields.join("\t");
  });
  fs.writeFileSync(manifestPath, out.join("\n"));
}
