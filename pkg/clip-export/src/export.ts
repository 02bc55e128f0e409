/**
 * Dataset export: walk a folder-per-class image tree, embed every image
 * and one prompt per class through a backbone, l2-normalize, and write a
 * BADF file plus a JSON manifest.
 *
 * Optional augmentations are emitted as additional feature rows with
 * duplicated labels (seeded flip / crop / brightness jitter), keeping all
 * augmentation out of the numerical core that consumes the file.
 */

import { readdirSync, readFileSync, statSync, writeFileSync } from "node:fs";
import { basename, join } from "node:path";

import { BadfData, encodeBadf, l2NormalizeRows } from "./badf.js";
import { Backbone } from "./backbone.js";
import { decodePpm, Image } from "./ppm.js";

export interface ExportConfig {
  dataset: string;
  backbone: Backbone;
  template: string; // must contain the [cls] placeholder
  augmentations: number; // extra rows per sample
  normalize: boolean;
  seed: number;
  out: string;
  manifest?: string;
}

export interface ExportSummary {
  classes: string[];
  nImages: number;
  nRows: number;
  dim: number;
}

const IMAGE_EXTENSIONS = [".ppm", ".pgm"];

export function listDataset(root: string): Map<string, string[]> {
  const classes = readdirSync(root)
    .filter((name) => statSync(join(root, name)).isDirectory())
    .sort();
  if (classes.length < 2) {
    throw new Error(`dataset needs at least 2 class folders, found ${classes.length}`);
  }
  const byClass = new Map<string, string[]>();
  for (const cls of classes) {
    const files = readdirSync(join(root, cls))
      .filter((f) => IMAGE_EXTENSIONS.some((ext) => f.toLowerCase().endsWith(ext)))
      .sort()
      .map((f) => join(root, cls, f));
    if (files.length === 0) throw new Error(`class folder "${cls}" has no images`);
    byClass.set(cls, files);
  }
  return byClass;
}

/** splitmix32; deterministic across platforms. */
function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x9e3779b9) >>> 0;
    let z = state;
    z ^= z >>> 16;
    z = Math.imul(z, 0x21f0aaad) >>> 0;
    z ^= z >>> 15;
    z = Math.imul(z, 0x735a2d97) >>> 0;
    z ^= z >>> 15;
    return z / 0x100000000;
  };
}

export function augment(img: Image, rng: () => number): Image {
  let { width, height } = img;
  let pixels = img.pixels;

  if (rng() < 0.5) {
    const flipped = new Uint8Array(pixels.length);
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        const src = 3 * (y * width + x);
        const dst = 3 * (y * width + (width - 1 - x));
        flipped[dst] = pixels[src];
        flipped[dst + 1] = pixels[src + 1];
        flipped[dst + 2] = pixels[src + 2];
      }
    }
    pixels = flipped;
  }

  // Crop to 80-100% of each side.
  const cw = Math.max(1, Math.round(width * (0.8 + 0.2 * rng())));
  const ch = Math.max(1, Math.round(height * (0.8 + 0.2 * rng())));
  const x0 = Math.floor(rng() * (width - cw + 1));
  const y0 = Math.floor(rng() * (height - ch + 1));
  const cropped = new Uint8Array(cw * ch * 3);
  for (let y = 0; y < ch; y++) {
    for (let x = 0; x < cw; x++) {
      const src = 3 * ((y0 + y) * width + (x0 + x));
      const dst = 3 * (y * cw + x);
      cropped[dst] = pixels[src];
      cropped[dst + 1] = pixels[src + 1];
      cropped[dst + 2] = pixels[src + 2];
    }
  }

  // Brightness jitter of +/-10%.
  const gain = 0.9 + 0.2 * rng();
  for (let i = 0; i < cropped.length; i++) {
    cropped[i] = Math.max(0, Math.min(255, Math.round(cropped[i] * gain)));
  }
  return { width: cw, height: ch, pixels: cropped };
}

export function renderPrompt(template: string, className: string): string {
  if (!template.includes("[cls]")) {
    throw new Error('prompt template must contain the "[cls]" placeholder');
  }
  return template.replaceAll("[cls]", className);
}

export function exportFeatures(cfg: ExportConfig): ExportSummary {
  const byClass = listDataset(cfg.dataset);
  const classes = [...byClass.keys()];
  const dim = cfg.backbone.dim;
  const rng = makeRng(cfg.seed);

  const rows: Float64Array[] = [];
  const labels: number[] = [];
  let nImages = 0;
  classes.forEach((cls, label) => {
    for (const path of byClass.get(cls)!) {
      const img = decodePpm(readFileSync(path));
      nImages++;
      rows.push(cfg.backbone.embedImage(img));
      labels.push(label);
      for (let a = 0; a < cfg.augmentations; a++) {
        rows.push(cfg.backbone.embedImage(augment(img, rng)));
        labels.push(label);
      }
    }
  });

  const features = new Float32Array(rows.length * dim);
  rows.forEach((row, i) => features.set(Float32Array.from(row), i * dim));
  const prototypes = new Float32Array(classes.length * dim);
  classes.forEach((cls, i) => {
    const emb = cfg.backbone.embedText(renderPrompt(cfg.template, cls), cls);
    prototypes.set(Float32Array.from(emb), i * dim);
  });

  if (cfg.normalize) {
    l2NormalizeRows(features, rows.length, dim);
    l2NormalizeRows(prototypes, classes.length, dim);
  }

  const data: BadfData = {
    features,
    labels: Uint32Array.from(labels),
    prototypes,
    n: rows.length,
    d: dim,
    c: classes.length,
    normalized: cfg.normalize,
  };
  writeFileSync(cfg.out, encodeBadf(data));

  const manifestPath = cfg.manifest ?? `${cfg.out}.manifest.json`;
  const manifest = {
    schema: "clip-export-manifest/1",
    backbone: cfg.backbone.id,
    template: cfg.template,
    dataset: basename(cfg.dataset),
    classes,
    n_images: nImages,
    n_rows: rows.length,
    augmentations_per_sample: cfg.augmentations,
    dim,
    normalized: cfg.normalize,
    seed: cfg.seed,
  };
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");

  return { classes, nImages, nRows: rows.length, dim };
}
