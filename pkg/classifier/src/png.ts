/**
 * Grayscale PNG helpers on top of pngjs. Pixels travel as Float32Array
 * luma planes in [0, 1]; RGB input collapses through Rec. 601 weights,
 * matching the attack toolkit's convention.
 */

import * as fs from 'fs';
import { PNG } from 'pngjs';

export interface GrayImage {
  width: number;
  height: number;
  /** row-major luma values in [0, 1] */
  values: Float32Array;
}

export function decodeGrayPng(buffer: Buffer): GrayImage {
  const png = PNG.sync.read(buffer);
  const values = new Float32Array(png.width * png.height);
  for (let i = 0; i < png.width * png.height; i++) {
    const r = png.data[4 * i];
    const g = png.data[4 * i + 1];
    const b = png.data[4 * i + 2];
    values[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255;
  }
  return { width: png.width, height: png.height, values };
}

export function readGrayPng(path: string): GrayImage {
  return decodeGrayPng(fs.readFileSync(path));
}

export function encodeGrayPng(img: GrayImage): Buffer {
  const png = new PNG({ width: img.width, height: img.height, colorType: 0 });
  for (let i = 0; i < img.width * img.height; i++) {
    const v = Math.max(0, Math.min(255, Math.floor(img.values[i] * 255 + 0.5)));
    png.data[4 * i] = v;
    png.data[4 * i + 1] = v;
    png.data[4 * i + 2] = v;
    png.data[4 * i + 3] = 255;
  }
  return PNG.sync.write(png, { colorType: 0 });
}

export function writeGrayPng(path: string, img: GrayImage): void {
  fs.writeFileSync(path, encodeGrayPng(img));
}
