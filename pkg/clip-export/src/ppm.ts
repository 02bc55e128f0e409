/** Minimal binary PPM/PGM decoder (P6 color, P5 grayscale, maxval <= 255). */

export interface Image {
  width: number;
  height: number;
  pixels: Uint8Array; // RGB triples, row-major
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;
}

export function decodePpm(buf: Buffer): Image {
  let pos = 0;
  const token = (): string => {
    // Skip whitespace and '#' comments between header fields.
    for (;;) {
      while (pos < buf.length && isSpace(buf[pos])) pos++;
      if (buf[pos] === 0x23) {
        while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < buf.length && !isSpace(buf[pos])) pos++;
    return buf.toString("ascii", start, pos);
  };

  const magic = token();
  if (magic !== "P6" && magic !== "P5") {
    throw new Error(`unsupported image format "${magic}"`);
  }
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0 && height > 0)) throw new Error("bad image dimensions");
  if (!(maxval > 0 && maxval <= 255)) throw new Error("unsupported maxval");
  pos++; // single whitespace byte after maxval

  const channels = magic === "P6" ? 3 : 1;
  const need = width * height * channels;
  if (buf.length < pos + need) throw new Error("truncated pixel data");
  const raw = buf.subarray(pos, pos + need);
  const pixels = new Uint8Array(width * height * 3);
  if (channels === 3) {
    pixels.set(raw);
  } else {
    for (let i = 0; i < width * height; i++) {
      pixels[3 * i] = pixels[3 * i + 1] = pixels[3 * i + 2] = raw[i];
    }
  }
  return { width, height, pixels };
}

export function encodePpm(img: Image): Buffer {
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(img.pixels)]);
}
