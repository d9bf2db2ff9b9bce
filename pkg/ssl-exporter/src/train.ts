import * as tf from "@tensorflow/tfjs";
import { infoNceLossTensor } from "./infonce";
import { GrayImage, augment, topGradientPixels } from "./images";
import { Checkpoint, EncoderWeights, buildEncoder, forward, toCheckpoint, unitNormalize } from "./model";
import { mulberry32, randInt } from "./rng";

export interface TrainConfig {
  iterations: number;
  lr: number;
  /** learning rate after the first 40% of iterations */
  lrLate: number;
  seed: number;
  channels: number;
  trunk: number;
  /** images per optimizer step */
  batchImages: number;
  /** positive pixel pairs per image */
  positives: number;
  /** negatives per positive, sampled from the same image */
  negatives: number;
  /** minimum pixel distance between an anchor and its negatives (>= 4) */
  minNegDist: number;
  /** max augmentation shift in pixels */
  shiftMax: number;
  scaleJitter: number;
  noiseSigma: number;
  /**
   * similarity scale 1/tau applied to the logits (tau = 0.2); raw cosine
   * logits are capped at +-1 and stall the loss near its starting value
   */
  temperature: number;
}

export const DEFAULT_TRAIN: TrainConfig = {
  iterations: 100,
  lr: 0.015,
  lrLate: 0.008,
  seed: 42,
  channels: 32,
  trunk: 16,
  batchImages: 2,
  positives: 24,
  negatives: 16,
  minNegDist: 8,
  shiftMax: 3,
  scaleJitter: 0.15,
  noiseSigma: 0.01,
  temperature: 0.2,
};

/** One training sample: augmented view plus matched positive/negative pixels. */
export interface ContrastiveBatch {
  image: GrayImage;
  augmented: GrayImage;
  /** [x, y, xAug, yAug] per positive pair */
  positives: Array<[number, number, number, number]>;
  /** per positive: [x, y] same-image negatives, all >= minNegDist away */
  negatives: Array<Array<[number, number]>>;
}

export function sampleBatch(
  img: GrayImage,
  anchors: Array<[number, number]>,
  cfg: TrainConfig,
  rng: () => number,
): ContrastiveBatch {
  const { width, height } = img;
  const dx = randInt(rng, 2 * cfg.shiftMax + 1) - cfg.shiftMax;
  const dy = randInt(rng, 2 * cfg.shiftMax + 1) - cfg.shiftMax;
  const scale = 1 - cfg.scaleJitter + 2 * cfg.scaleJitter * rng();
  const augmented = augment(img, dx, dy, scale, cfg.noiseSigma, rng);
  const positives: ContrastiveBatch["positives"] = [];
  for (const [x, y] of anchors) {
    if (positives.length >= cfg.positives) break;
    const x2 = x + dx;
    const y2 = y + dy;
    if (x2 >= 0 && x2 < width && y2 >= 0 && y2 < height) positives.push([x, y, x2, y2]);
  }
  const negatives = positives.map(([x, y]) => {
    const list: Array<[number, number]> = [];
    while (list.length < cfg.negatives) {
      const qx = randInt(rng, width);
      const qy = randInt(rng, height);
      if (Math.hypot(qx - x, qy - y) >= cfg.minNegDist) list.push([qx, qy]);
    }
    return list;
  });
  return { image: img, augmented, positives, negatives };
}

/** Differentiable row selection; gather lacks a wasm gradient kernel. */
function pickRows(flat: tf.Tensor2D, indices: number[]): tf.Tensor2D {
  const oneHot = tf.oneHot(tf.tensor1d(indices, "int32"), flat.shape[0]) as tf.Tensor2D;
  return tf.matMul(oneHot, flat);
}

function batchLoss(enc: EncoderWeights, batches: ContrastiveBatch[], cfg: TrainConfig): tf.Scalar {
  return tf.tidy(() => {
    const invT = 1 / cfg.temperature;
    let total: tf.Scalar | null = null;
    let count = 0;
    for (const batch of batches) {
      const { image, augmented, positives, negatives } = batch;
      const xT = tf.tensor(image.pixels, [image.height, image.width, 1]) as tf.Tensor3D;
      const aT = tf.tensor(augmented.pixels, [image.height, image.width, 1]) as tf.Tensor3D;
      const outsX = forward(enc, xT);
      const outsA = forward(enc, aT);
      for (let li = 0; li < outsX.length; li++) {
        const d = 1 << li;
        const fx = unitNormalize(outsX[li]);
        const fa = unitNormalize(outsA[li]);
        const cols = fx.shape[1];
        const fxFlat = fx.reshape([fx.shape[0] * fx.shape[1], cfg.channels]) as tf.Tensor2D;
        const faFlat = fa.reshape([fa.shape[0] * fa.shape[1], cfg.channels]) as tf.Tensor2D;
        const p = positives.length;
        const anchorIdx = positives.map(([x, y]) => Math.floor(y / d) * cols + Math.floor(x / d));
        const posIdx = positives.map(([, , x2, y2]) => Math.floor(y2 / d) * cols + Math.floor(x2 / d));
        const va = pickRows(fxFlat, anchorIdx);
        const vp = pickRows(faFlat, posIdx);
        const alpha = tf.sum(tf.mul(va, vp), -1) as tf.Tensor1D;
        const negIdx: number[] = [];
        for (const list of negatives) {
          for (const [qx, qy] of list) negIdx.push(Math.floor(qy / d) * cols + Math.floor(qx / d));
        }
        const vn = pickRows(fxFlat, negIdx).reshape([p, cfg.negatives, cfg.channels]);
        const alphaNeg = tf.sum(tf.mul(va.expandDims(1), vn), -1) as tf.Tensor2D;
        const loss = infoNceLossTensor(
          tf.mul(alpha, invT) as tf.Tensor1D,
          tf.mul(alphaNeg, invT) as tf.Tensor2D,
        );
        total = total === null ? loss : (tf.add(total, loss) as tf.Scalar);
        count += 1;
      }
    }
    return tf.div(total!, count) as tf.Scalar;
  });
}

export interface TrainResult {
  encoder: EncoderWeights;
  checkpoint: Checkpoint;
}

/**
 * Train the toy encoder with the pixel-wise contrastive objective.
 * Deterministic given the seed; aborts if the loss turns non-finite.
 */
export function trainToyExtractor(images: GrayImage[], cfg: TrainConfig = DEFAULT_TRAIN): TrainResult {
  if (images.length < 8) {
    throw new Error(`need at least 8 images, got ${images.length}`);
  }
  const rng = mulberry32(cfg.seed);
  const anchors = images.map((img) => topGradientPixels(img, 2 * cfg.positives));
  const enc = buildEncoder({ channels: cfg.channels, trunk: cfg.trunk, seed: cfg.seed + 1 });
  const opt = tf.train.adam(cfg.lr);
  const lossCurve: number[] = [];
  const switchAt = Math.floor(cfg.iterations * 0.4);
  for (let it = 0; it < cfg.iterations; it++) {
    // two-phase schedule; the setter is protected in the typings only
    (opt as unknown as { learningRate: number }).learningRate =
      it < switchAt ? cfg.lr : cfg.lrLate;
    const batches: ContrastiveBatch[] = [];
    for (let b = 0; b < cfg.batchImages; b++) {
      const idx = randInt(rng, images.length);
      batches.push(sampleBatch(images[idx], anchors[idx], cfg, rng));
    }
    const lossVal = opt.minimize(() => batchLoss(enc, batches, cfg), true)!;
    const loss = lossVal.dataSync()[0];
    lossVal.dispose();
    if (!Number.isFinite(loss)) {
      throw new Error(`training diverged: loss is ${loss} at iteration ${it}`);
    }
    lossCurve.push(loss);
  }
  return { encoder: enc, checkpoint: toCheckpoint(enc, lossCurve) };
}
