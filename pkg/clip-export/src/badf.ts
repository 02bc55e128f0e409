/**
 * BADF container writer/reader, byte-compatible with the protoadapt loader.
 *
 * Layout (little-endian): magic "BADF", u32 version=1, u32 N, u32 D, u32 C,
 * u8 flags (bit 0: rows already l2-normalized), 3 zero pad bytes,
 * f32[N*D] features row-major, u32[N] labels, f32[C*D] prototypes
 * row-major, then optional sections (5-byte ASCII tag, u64 length, payload).
 */

export const FLAG_NORMALIZED = 0x01;

export interface BadfData {
  features: Float32Array; // N*D row-major
  labels: Uint32Array; // length N
  prototypes: Float32Array; // C*D row-major
  n: number;
  d: number;
  c: number;
  normalized: boolean;
}

export function encodeBadf(data: BadfData): Buffer {
  const { features, labels, prototypes, n, d, c } = data;
  if (features.length !== n * d) throw new Error("feature length mismatch");
  if (labels.length !== n) throw new Error("label length mismatch");
  if (prototypes.length !== c * d) throw new Error("prototype length mismatch");
  for (const label of labels) {
    if (label >= c) throw new Error(`label ${label} >= class count ${c}`);
  }
  const size = 24 + 4 * (n * d + n + c * d);
  const buf = Buffer.alloc(size);
  buf.write("BADF", 0, "ascii");
  buf.writeUInt32LE(1, 4);
  buf.writeUInt32LE(n, 8);
  buf.writeUInt32LE(d, 12);
  buf.writeUInt32LE(c, 16);
  buf.writeUInt8(data.normalized ? FLAG_NORMALIZED : 0, 20);
  let off = 24;
  for (const v of features) {
    buf.writeFloatLE(v, off);
    off += 4;
  }
  for (const v of labels) {
    buf.writeUInt32LE(v, off);
    off += 4;
  }
  for (const v of prototypes) {
    buf.writeFloatLE(v, off);
    off += 4;
  }
  return buf;
}

export function decodeBadf(buf: Buffer): BadfData {
  if (buf.length < 24) throw new Error("truncated header");
  if (buf.toString("ascii", 0, 4) !== "BADF") throw new Error("bad magic");
  if (buf.readUInt32LE(4) !== 1) throw new Error("unsupported version");
  const n = buf.readUInt32LE(8);
  const d = buf.readUInt32LE(12);
  const c = buf.readUInt32LE(16);
  const flags = buf.readUInt8(20);
  let off = 24;
  const need = off + 4 * (n * d + n + c * d);
  if (buf.length < need) throw new Error("truncated payload");
  const features = new Float32Array(n * d);
  for (let i = 0; i < n * d; i++, off += 4) features[i] = buf.readFloatLE(off);
  const labels = new Uint32Array(n);
  for (let i = 0; i < n; i++, off += 4) labels[i] = buf.readUInt32LE(off);
  const prototypes = new Float32Array(c * d);
  for (let i = 0; i < c * d; i++, off += 4) prototypes[i] = buf.readFloatLE(off);
  return {
    features,
    labels,
    prototypes,
    n,
    d,
    c,
    normalized: (flags & FLAG_NORMALIZED) !== 0,
  };
}

export function l2NormalizeRows(a: Float32Array, rows: number, dim: number): void {
  for (let r = 0; r < rows; r++) {
    let sum = 0;
    for (let j = 0; j < dim; j++) sum += a[r * dim + j] * a[r * dim + j];
    const norm = Math.sqrt(sum);
    if (norm === 0) throw new Error(`row ${r} has zero norm`);
    for (let j = 0; j < dim; j++) a[r * dim + j] /= norm;
  }
}
