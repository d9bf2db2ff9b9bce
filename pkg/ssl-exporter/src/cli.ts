#!/usr/bin/env node
/**
 * Train the toy contrastive encoder and export SCPF feature maps.
 *
 *   ssl-export --toy 16 --out features/                     self-contained run
 *   ssl-export --manifest ds/manifest.scp --out features    train on a dataset's
 *                                                           PGMs and rewrite its
 *                                                           feature column
 */
import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";
import "@tensorflow/tfjs-backend-wasm";
import { GrayImage, makeToyImages, readPgm } from "./images";
import { fromCheckpoint } from "./model";
import { DEFAULT_TRAIN, trainToyExtractor } from "./train";
import { exportFeatures, patchManifestFeatures } from "./export";
import { mulberry32 } from "./rng";

interface Args {
  [key: string]: string;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {};
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`bad argument list near ${argv[i]}`);
    }
    args[argv[i].slice(2)] = argv[i + 1];
  }
  return args;
}

function loadManifestImages(manifestPath: string): { images: GrayImage[]; spacing: number } {
  const lines = fs.readFileSync(manifestPath, "utf-8").split("\n");
  if (lines[0] !== "scp-manifest v1") {
    throw new Error(`${manifestPath}: not an scp-manifest v1 file`);
  }
  const spacing = Number(lines[1].split(" ")[1]);
  const root = path.dirname(manifestPath);
  const images: GrayImage[] = [];
  for (const line of lines.slice(2)) {
    if (!line.trim()) continue;
    const [id, imageRel] = line.split("\t");
    images.push(readPgm(path.join(root, imageRel), id));
  }
  return { images, spacing };
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  await tf.setBackend("wasm");

  const seed = Number(args.seed ?? DEFAULT_TRAIN.seed);
  const cfg = {
    ...DEFAULT_TRAIN,
    seed,
    iterations: Number(args.iterations ?? DEFAULT_TRAIN.iterations),
    lr: Number(args.lr ?? DEFAULT_TRAIN.lr),
    lrLate: Number(args["lr-late"] ?? DEFAULT_TRAIN.lrLate),
    channels: Number(args.channels ?? DEFAULT_TRAIN.channels),
  };

  let images: GrayImage[];
  let spacing = Number(args.spacing ?? 1.0);
  if (args.manifest) {
    const loaded = loadManifestImages(args.manifest);
    images = loaded.images;
    spacing = loaded.spacing;
  } else {
    const n = Number(args.toy ?? 16);
    images = makeToyImages(n, Number(args["toy-size"] ?? 32), mulberry32(seed + 7));
  }

  const outDir = args.out ?? "features";
  let encoder;
  if (args["from-checkpoint"]) {
    encoder = fromCheckpoint(JSON.parse(fs.readFileSync(args["from-checkpoint"], "utf-8")));
  } else {
    const result = trainToyExtractor(images, cfg);
    encoder = result.encoder;
    const ckPath = args.checkpoint ?? path.join(outDir, "checkpoint.json");
    fs.mkdirSync(path.dirname(ckPath), { recursive: true });
    fs.writeFileSync(ckPath, JSON.stringify(result.checkpoint));
    const lossLog = result.checkpoint.lossCurve
      .map((l, i) => `${i}\t${l.toPrecision(6)}`)
      .join("\n");
    fs.writeFileSync(path.join(path.dirname(ckPath), "loss_curve.tsv"), `iteration\tloss\n${lossLog}\n`);
    const first = result.checkpoint.lossCurve[0];
    const last = result.checkpoint.lossCurve[result.checkpoint.lossCurve.length - 1];
    console.log(`trained ${cfg.iterations} iterations: loss ${first.toFixed(4)} -> ${last.toFixed(4)}`);
  }

  const base = args.manifest ? path.dirname(args.manifest) : ".";
  const outAbs = path.isAbsolute(outDir) ? outDir : path.join(base, outDir);
  const written = exportFeatures(encoder, images, outAbs, spacing);
  console.log(`exported ${written.size} feature maps to ${outAbs}`);
  if (args.manifest) {
    patchManifestFeatures(args.manifest, outDir);
    console.log(`manifest feature column now points at ${outDir}/`);
  }
}

main().catch((err) => {
  console.error(err.message ?? err);
  process.exit(1);
});
