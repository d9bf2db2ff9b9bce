export { infoNceLoss, infoNceLossTensor } from "./infonce";
export { GrayImage, augment, makeToyImages, readPgm, topGradientPixels } from "./images";
export {
  Checkpoint,
  DEFAULT_ENCODER,
  EncoderConfig,
  EncoderWeights,
  buildEncoder,
  forward,
  fromCheckpoint,
  toCheckpoint,
  unitNormalize,
} from "./model";
export { ContrastiveBatch, DEFAULT_TRAIN, TrainConfig, sampleBatch, trainToyExtractor } from "./train";
export { encodeImage, exportFeatures, patchManifestFeatures } from "./export";
export { ScpfLayer, ScpfMap, readScpf, writeScpf } from "./scpf";
export { mulberry32 } from "./rng";
