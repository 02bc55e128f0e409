import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { encodePpm, Image } from "../src/ppm.js";

/** Deterministic LCG for pixel noise in the toy dataset. */
export function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (Math.imul(s, 1664525) + 1013904223) >>> 0;
    return s / 0x100000000;
  };
}

export function noisyColorImage(
  rgb: [number, number, number],
  size: number,
  rand: () => number,
): Image {
  const pixels = new Uint8Array(size * size * 3);
  for (let i = 0; i < size * size; i++) {
    for (let ch = 0; ch < 3; ch++) {
      const noise = (rand() - 0.5) * 60;
      pixels[3 * i + ch] = Math.max(0, Math.min(255, Math.round(255 * rgb[ch] + noise)));
    }
  }
  return { width: size, height: size, pixels };
}

/** Folder-per-class toy dataset of noisy solid-color images. */
export function writeToyDataset(
  root: string,
  perClass = 4,
  seed = 7,
): Record<string, [number, number, number]> {
  const classes: Record<string, [number, number, number]> = {
    blue: [0.1, 0.12, 0.85],
    green: [0.08, 0.75, 0.1],
    red: [0.85, 0.08, 0.08],
  };
  const rand = lcg(seed);
  for (const [name, rgb] of Object.entries(classes)) {
    mkdirSync(join(root, name), { recursive: true });
    for (let i = 0; i < perClass; i++) {
      const img = noisyColorImage(rgb, 12, rand);
      writeFileSync(join(root, name, `img${i}.ppm`), encodePpm(img));
    }
  }
  return classes;
}
