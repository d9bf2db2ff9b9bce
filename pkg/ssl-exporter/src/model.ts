import * as tf from "@tensorflow/tfjs";
import { mulberry32 } from "./rng";

/**
 * Tiny convolutional encoder emitting per-pixel features at three
 * resolutions (full, 1/2, 1/4).  Convolutions are built from pad/slice/
 * matmul primitives instead of conv2d so every op in the backward pass is
 * available on the wasm backend.
 */
export interface EncoderConfig {
  channels: number; // feature channels per output layer
  trunk: number; // width of the first stage
  seed: number;
}

export const DEFAULT_ENCODER: EncoderConfig = { channels: 32, trunk: 16, seed: 1 };

export interface EncoderWeights {
  config: EncoderConfig;
  vars: { [name: string]: tf.Variable };
}

function glorot(rng: () => number, fanIn: number, fanOut: number, shape: number[]): tf.Variable {
  const limit = Math.sqrt(6 / (fanIn + fanOut));
  const n = shape.reduce((a, b) => a * b, 1);
  const vals = new Float32Array(n);
  for (let i = 0; i < n; i++) vals[i] = (2 * rng() - 1) * limit;
  return tf.variable(tf.tensor(vals, shape));
}

export function buildEncoder(config: EncoderConfig = DEFAULT_ENCODER): EncoderWeights {
  const rng = mulberry32(config.seed);
  const t = config.trunk;
  const c = config.channels;
  const zeros = (n: number) => tf.variable(tf.zeros([n]));
  return {
    config,
    vars: {
      w1: glorot(rng, 9, t, [9, t]),
      b1: zeros(t),
      w1b: glorot(rng, 9 * t, t, [9 * t, t]),
      b1b: zeros(t),
      w2: glorot(rng, 9 * t, 2 * t, [9 * t, 2 * t]),
      b2: zeros(2 * t),
      w3: glorot(rng, 18 * t, 2 * t, [18 * t, 2 * t]),
      b3: zeros(2 * t),
      h1: glorot(rng, t, c, [t, c]),
      h2: glorot(rng, 2 * t, c, [2 * t, c]),
      h3: glorot(rng, 2 * t, c, [2 * t, c]),
    },
  };
}

/** 3x3 same-padding convolution as nine shifted slices and one matmul. */
function conv3x3(x: tf.Tensor3D, weight: tf.Tensor2D): tf.Tensor3D {
  const [h, w, cin] = x.shape;
  const padded = tf.pad(x, [
    [1, 1],
    [1, 1],
    [0, 0],
  ]);
  const shifts: tf.Tensor3D[] = [];
  for (let dy = 0; dy < 3; dy++) {
    for (let dx = 0; dx < 3; dx++) {
      shifts.push(tf.slice(padded, [dy, dx, 0], [h, w, cin]));
    }
  }
  const patches = tf.concat(shifts, -1).reshape([h * w, 9 * cin]) as tf.Tensor2D;
  return tf.matMul(patches, weight).reshape([h, w, weight.shape[1]]) as tf.Tensor3D;
}

/** Halve resolution with ceil semantics: edge-pad odd dims, keep every 2nd pixel. */
function halve(x: tf.Tensor3D): tf.Tensor3D {
  let [h, w, c] = x.shape;
  if (h % 2 === 1) {
    x = tf.concat([x, tf.slice(x, [h - 1, 0, 0], [1, w, c])], 0);
    h += 1;
  }
  if (w % 2 === 1) {
    x = tf.concat([x, tf.slice(x, [0, w - 1, 0], [h, 1, c])], 1);
    w += 1;
  }
  return x
    .reshape([h / 2, 2, w / 2, 2, c])
    .slice([0, 0, 0, 0, 0], [h / 2, 1, w / 2, 1, c])
    .reshape([h / 2, w / 2, c]) as tf.Tensor3D;
}

/** Per-pixel L2 normalization; the epsilon keeps the gradient finite at 0. */
export function unitNormalize(t: tf.Tensor3D): tf.Tensor3D {
  return tf.div(t, tf.sqrt(tf.add(tf.sum(tf.square(t), -1, true), 1e-12)));
}

/**
 * Forward pass: (H, W, 1) image tensor to three feature grids at
 * downsample 1, 2, 4 with ceil-divided spatial dims.  Outputs are NOT
 * normalized; callers normalize where they need unit vectors.
 */
export function forward(enc: EncoderWeights, img: tf.Tensor3D): [tf.Tensor3D, tf.Tensor3D, tf.Tensor3D] {
  const v = enc.vars;
  const head = (s: tf.Tensor3D, hw: tf.Variable): tf.Tensor3D => {
    const [h, w, c] = s.shape;
    return tf
      .matMul(s.reshape([h * w, c]) as tf.Tensor2D, hw as unknown as tf.Tensor2D)
      .reshape([h, w, hw.shape[1] as number]) as tf.Tensor3D;
  };
  const s1a = tf.tanh(tf.add(conv3x3(img, v.w1 as unknown as tf.Tensor2D), v.b1)) as tf.Tensor3D;
  const s1 = tf.tanh(tf.add(conv3x3(s1a, v.w1b as unknown as tf.Tensor2D), v.b1b)) as tf.Tensor3D;
  const s2 = tf.tanh(tf.add(conv3x3(halve(s1), v.w2 as unknown as tf.Tensor2D), v.b2)) as tf.Tensor3D;
  const s3 = tf.tanh(tf.add(conv3x3(halve(s2), v.w3 as unknown as tf.Tensor2D), v.b3)) as tf.Tensor3D;
  return [head(s1, v.h1), head(s2, v.h2), head(s3, v.h3)];
}

export interface Checkpoint {
  config: EncoderConfig;
  weights: { [name: string]: { shape: number[]; values: number[] } };
  lossCurve: number[];
}

export function toCheckpoint(enc: EncoderWeights, lossCurve: number[]): Checkpoint {
  const weights: Checkpoint["weights"] = {};
  for (const [name, v] of Object.entries(enc.vars)) {
    weights[name] = { shape: v.shape.slice(), values: Array.from(v.dataSync()) };
  }
  return { config: enc.config, weights, lossCurve };
}

export function fromCheckpoint(ck: Checkpoint): EncoderWeights {
  const vars: EncoderWeights["vars"] = {};
  for (const [name, w] of Object.entries(ck.weights)) {
    vars[name] = tf.variable(tf.tensor(w.values, w.shape));
  }
  return { config: ck.config, vars };
}
