import * as fs from "fs";

/**
 * Writer (and a reader used by tests) for the SCPF binary feature-map
 * format consumed by the selection engine: little-endian, magic "SCPF",
 * version 1, id/tag strings, image dims, spacing, then per layer the
 * downsample factor, grid dims, and float32 values channel-fastest.
 */
export interface ScpfLayer {
  downsample: number;
  rows: number;
  cols: number;
  /** length rows*cols*channels, row-major channel-fastest */
  values: Float32Array;
}

export interface ScpfMap {
  imageId: string;
  extractorTag: string;
  height: number;
  width: number;
  spacingMm: number;
  channels: number;
  layers: ScpfLayer[];
}

export function writeScpf(map: ScpfMap, path: string): void {
  const idBytes = Buffer.from(map.imageId, "utf-8");
  const tagBytes = Buffer.from(map.extractorTag, "utf-8");
  let size = 4 + 2 + 2 + idBytes.length + 2 + tagBytes.length + 4 + 4 + 8 + 1 + 2;
  for (const layer of map.layers) size += 2 + 4 + 4 + 4 * layer.values.length;

  const buf = Buffer.alloc(size);
  let pos = 0;
  buf.write("SCPF", pos, "ascii"); pos += 4;
  pos = buf.writeUInt16LE(1, pos);
  pos = buf.writeUInt16LE(idBytes.length, pos);
  pos += idBytes.copy(buf, pos);
  pos = buf.writeUInt16LE(tagBytes.length, pos);
  pos += tagBytes.copy(buf, pos);
  pos = buf.writeUInt32LE(map.height, pos);
  pos = buf.writeUInt32LE(map.width, pos);
  pos = buf.writeDoubleLE(map.spacingMm, pos);
  pos = buf.writeUInt8(map.layers.length, pos);
  pos = buf.writeUInt16LE(map.channels, pos);
  for (const layer of map.layers) {
    if (layer.values.length !== layer.rows * layer.cols * map.channels) {
      throw new Error(`layer d=${layer.downsample}: value count does not match dims`);
    }
    pos = buf.writeUInt16LE(layer.downsample, pos);
    pos = buf.writeUInt32LE(layer.rows, pos);
    pos = buf.writeUInt32LE(layer.cols, pos);
    for (const v of layer.values) pos = buf.writeFloatLE(v, pos);
  }
  fs.writeFileSync(path, buf);
}

export function readScpf(path: string): ScpfMap {
  const buf = fs.readFileSync(path);
  let pos = 0;
  if (buf.toString("ascii", 0, 4) !== "SCPF") throw new Error(`${path}: bad magic`);
  pos = 4;
  const version = buf.readUInt16LE(pos); pos += 2;
  if (version !== 1) throw new Error(`${path}: unsupported version ${version}`);
  const idLen = buf.readUInt16LE(pos); pos += 2;
  const imageId = buf.toString("utf-8", pos, pos + idLen); pos += idLen;
  const tagLen = buf.readUInt16LE(pos); pos += 2;
  const extractorTag = buf.toString("utf-8", pos, pos + tagLen); pos += tagLen;
  const height = buf.readUInt32LE(pos); pos += 4;
  const width = buf.readUInt32LE(pos); pos += 4;
  const spacingMm = buf.readDoubleLE(pos); pos += 8;
  const nLayers = buf.readUInt8(pos); pos += 1;
  const channels = buf.readUInt16LE(pos); pos += 2;
  const layers: ScpfLayer[] = [];
  for (let li = 0; li < nLayers; li++) {
    const downsample = buf.readUInt16LE(pos); pos += 2;
    const rows = buf.readUInt32LE(pos); pos += 4;
    const cols = buf.readUInt32LE(pos); pos += 4;
    const n = rows * cols * channels;
    const values = new Float32Array(n);
    for (let i = 0; i < n; i++) values[i] = buf.readFloatLE(pos + 4 * i);
    pos += 4 * n;
    layers.push({ downsample, rows, cols, values });
  }
  if (pos !== buf.length) throw new Error(`${path}: trailing bytes`);
  return { imageId, extractorTag, height, width, spacingMm, channels, layers };
}
