/**
 * Embedding backbones. A backbone turns images and class prompts into
 * vectors in one shared space, so cosine similarity between an image
 * embedding and a class-prompt embedding is meaningful.
 *
 * The built-in "micro" backbone needs no downloads and is fully
 * deterministic: images embed through fixed color/layout statistics, and a
 * class prompt embeds by rendering the named color (from a small built-in
 * vocabulary) through the same statistics. That grounds text and vision in
 * one space by construction, which is all the offline test path needs.
 * Class names outside the vocabulary get a deterministic hashed direction;
 * those are still valid prototypes but carry no visual alignment.
 */

import { Image } from "./ppm.js";

export interface Backbone {
  readonly id: string;
  readonly dim: number;
  embedImage(img: Image): Float64Array;
  embedText(prompt: string, className: string): Float64Array;
}

const COLOR_ANCHORS: Record<string, [number, number, number]> = {
  red: [0.85, 0.08, 0.08],
  green: [0.08, 0.75, 0.1],
  blue: [0.1, 0.12, 0.85],
  yellow: [0.9, 0.85, 0.1],
  cyan: [0.1, 0.8, 0.85],
  magenta: [0.85, 0.1, 0.8],
  orange: [0.95, 0.55, 0.1],
  purple: [0.5, 0.12, 0.7],
  white: [0.95, 0.95, 0.95],
  gray: [0.5, 0.5, 0.5],
  black: [0.05, 0.05, 0.05],
  brown: [0.45, 0.28, 0.12],
};

/** Color and coarse-layout statistics, 8 dims, roughly zero-centered. */
function imageStats(img: Image): Float64Array {
  const { width, height, pixels } = img;
  const n = width * height;
  let r = 0;
  let g = 0;
  let b = 0;
  for (let i = 0; i < n; i++) {
    r += pixels[3 * i];
    g += pixels[3 * i + 1];
    b += pixels[3 * i + 2];
  }
  r /= 255 * n;
  g /= 255 * n;
  b /= 255 * n;
  const brightness = (r + g + b) / 3;
  const saturation = Math.max(r, g, b) - Math.min(r, g, b);

  // Left/right and top/bottom brightness imbalance.
  let left = 0;
  let top = 0;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = y * width + x;
      const lum = (pixels[3 * i] + pixels[3 * i + 1] + pixels[3 * i + 2]) / (3 * 255);
      if (x < width / 2) left += lum;
      if (y < height / 2) top += lum;
    }
  }
  const horiz = (2 * left) / n - brightness;
  const vert = (2 * top) / n - brightness;

  return Float64Array.from([
    r - 0.5,
    g - 0.5,
    b - 0.5,
    brightness - 0.5,
    saturation - 0.25,
    horiz,
    vert,
    0.15, // constant component keeps zero-stat images off the origin
  ]);
}

function solidImage(rgb: [number, number, number], size = 8): Image {
  const pixels = new Uint8Array(size * size * 3);
  for (let i = 0; i < size * size; i++) {
    pixels[3 * i] = Math.round(255 * rgb[0]);
    pixels[3 * i + 1] = Math.round(255 * rgb[1]);
    pixels[3 * i + 2] = Math.round(255 * rgb[2]);
  }
  return { width: size, height: size, pixels };
}

/** FNV-1a, for stable fallback directions of unknown class names. */
function hash32(s: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

class MicroBackbone implements Backbone {
  readonly id = "micro";
  readonly dim = 8;

  embedImage(img: Image): Float64Array {
    return imageStats(img);
  }

  embedText(_prompt: string, className: string): Float64Array {
    const key = className.trim().toLowerCase();
    const anchor = COLOR_ANCHORS[key];
    if (anchor) return imageStats(solidImage(anchor));
    // Deterministic unit-ish direction for names without a visual anchor.
    const out = new Float64Array(this.dim);
    let h = hash32(key);
    for (let i = 0; i < this.dim; i++) {
      h = (Math.imul(h, 1664525) + 1013904223) >>> 0;
      out[i] = h / 0xffffffff - 0.5;
    }
    return out;
  }
}

export function loadBackbone(id: string): Backbone {
  if (id === "micro") return new MicroBackbone();
  throw new Error(
    `backbone "${id}" is not available offline; the built-in choice is "micro". ` +
      "Pretrained vision-language backbones require network access to fetch weights.",
  );
}
