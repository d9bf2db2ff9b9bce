import * as tf from "@tensorflow/tfjs";

/**
 * Contrastive loss for one positive similarity against a set of negative
 * similarities: -log( exp(p) / (exp(p) + sum exp(n)) ), computed via
 * log-sum-exp so large inputs cannot overflow.
 *
 * With no negatives the ratio is 1 and the loss is exactly 0.
 */
export function infoNceLoss(posSim: number, negSims: number[]): number {
  if (!Number.isFinite(posSim) || negSims.some((s) => !Number.isFinite(s))) {
    throw new Error("infoNceLoss requires finite similarities");
  }
  if (negSims.length === 0) return 0;
  const m = Math.max(posSim, ...negSims);
  let sum = Math.exp(posSim - m);
  for (const s of negSims) sum += Math.exp(s - m);
  return Math.log(sum) + m - posSim;
}

/**
 * Tensor variant used inside the training graph.
 * pos: (P,) positive similarities; negs: (P, N) negative similarities.
 * Returns the mean loss over the P anchors.
 */
export function infoNceLossTensor(pos: tf.Tensor1D, negs: tf.Tensor2D): tf.Scalar {
  return tf.tidy(() => {
    const logits = tf.concat([pos.expandDims(1), negs], 1);
    return tf.sub(tf.logSumExp(logits, 1), pos).mean() as tf.Scalar;
  });
}
