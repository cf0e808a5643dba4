/** Binary PGM (P5) decoding for 8- and 16-bit grayscale images. */
import { readFileSync } from "node:fs";

export interface GrayImage {
  width: number;
  height: number;
  /** row-major intensities scaled to [0, 1] by the max representable value */
  pixels: Float32Array;
}

export function decodePgm(buffer: Buffer): GrayImage {
  // header: "P5", width, height, maxval as whitespace-separated tokens,
  // with '#' comments; pixel data starts after the single whitespace byte
  // following maxval
  let pos = 0;
  const tokens: string[] = [];
  while (tokens.length < 4) {
    if (pos >= buffer.length) throw new Error("truncated PGM header");
    const byte = buffer[pos];
    if (byte === 0x23) {
      // comment until end of line
      while (pos < buffer.length && buffer[pos] !== 0x0a) pos++;
      pos++;
      continue;
    }
    if (byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d) {
      pos++;
      continue;
    }
    let end = pos;
    while (end < buffer.length && !/[\s#]/.test(String.fromCharCode(buffer[end]))) end++;
    tokens.push(buffer.subarray(pos, end).toString("ascii"));
    pos = end;
  }
  pos++; // single whitespace after maxval
  if (tokens[0] !== "P5") throw new Error(`not a binary PGM (magic ${tokens[0]})`);
  const width = Number(tokens[1]);
  const height = Number(tokens[2]);
  const maxval = Number(tokens[3]);
  if (!(width > 0) || !(height > 0) || !(maxval > 0)) {
    throw new Error("bad PGM dimensions");
  }
  const pixels = new Float32Array(width * height);
  if (maxval < 256) {
    if (buffer.length - pos < width * height) throw new Error("truncated PGM data");
    for (let i = 0; i < pixels.length; i++) pixels[i] = buffer[pos + i] / maxval;
  } else {
    if (buffer.length - pos < 2 * width * height) throw new Error("truncated PGM data");
    for (let i = 0; i < pixels.length; i++) {
      pixels[i] = buffer.readUInt16BE(pos + 2 * i) / maxval;
    }
  }
  return { width, height, pixels };
}

export function readPgm(path: string): GrayImage {
  return decodePgm(readFileSync(path));
}
