/**
 * Synthetic two-class fixture: oriented stripes vs isotropic blobs.
 * Linear texture makes the smoothing attack's effect on decisions visible
 * at desk scale. Generation is deterministic under a fixed seed.
 *
 * Labels follow sorted class-directory names (blobs = 0, stripes = 1),
 * the same convention the attack toolkit's dataset loader uses.
 */

import * as fs from 'fs';
import * as path from 'path';
import { GrayImage, readGrayPng, writeGrayPng } from './png';

export const SIDE = 32;

/** mulberry32: tiny deterministic PRNG, good enough for fixture layout */
export function makeRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function pick<T>(rng: () => number, options: T[]): T {
  return options[Math.floor(rng() * options.length) % options.length];
}

export function stripeImage(rng: () => number): GrayImage {
  const angle = pick(rng, [0, 30, 45, 60, 90, 120, 150]) * (Math.PI / 180);
  const period = pick(rng, [3, 4, 5, 6]);
  const amplitude = 0.15 + 0.15 * rng();
  const phase = rng() * 2 * Math.PI;
  const values = new Float32Array(SIDE * SIDE);
  for (let y = 0; y < SIDE; y++) {
    for (let x = 0; x < SIDE; x++) {
      const coord = x * Math.sin(angle) + y * Math.cos(angle);
      const v = 0.5 + amplitude * Math.sin((2 * Math.PI * coord) / period + phase);
      values[y * SIDE + x] = Math.max(0, Math.min(1, v));
    }
  }
  return { width: SIDE, height: SIDE, values };
}

export function blobImage(rng: () => number): GrayImage {
  const values = new Float32Array(SIDE * SIDE).fill(0.35);
  const bumps = 2 + Math.floor(rng() * 3);
  const centers: Array<[number, number, number, number]> = [];
  for (let i = 0; i < bumps; i++) {
    centers.push([4 + rng() * 24, 4 + rng() * 24, 3 + rng() * 4, 0.25 + rng() * 0.3]);
  }
  for (let y = 0; y < SIDE; y++) {
    for (let x = 0; x < SIDE; x++) {
      let v = values[y * SIDE + x];
      for (const [cx, cy, width, amp] of centers) {
        const d2 = (x - cx) ** 2 + (y - cy) ** 2;
        v += amp * Math.exp(-d2 / (2 * width * width));
      }
      values[y * SIDE + x] = Math.max(0, Math.min(1, v));
    }
  }
  return { width: SIDE, height: SIDE, values };
}

export function generateDataset(root: string, perClass: number, seed: number): void {
  const rng = makeRng(seed);
  const classes: Array<[string, (r: () => number) => GrayImage]> = [
    ['blobs', blobImage],
    ['stripes', stripeImage],
  ];
  for (const [name, make] of classes) {
    const dir = path.join(root, name);
    fs.mkdirSync(dir, { recursive: true });
    for (let i = 0; i < perClass; i++) {
      const suffix = String(i).padStart(3, '0');
      writeGrayPng(path.join(dir, `${name}_${suffix}.png`), make(rng));
    }
  }
}

export interface Sample {
  values: Float32Array;
  label: number;
  path: string;
}

export class DatasetError extends Error {}

export function loadDataset(root: string): { samples: Sample[]; classes: string[] } {
  if (!fs.existsSync(root)) {
    throw new DatasetError(`dataset directory missing: ${root}`);
  }
  const classDirs = fs
    .readdirSync(root, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (classDirs.length < 2) {
    throw new DatasetError(`need at least 2 class directories under ${root}`);
  }
  const samples: Sample[] = [];
  classDirs.forEach((name, label) => {
    const dir = path.join(root, name);
    for (const file of fs.readdirSync(dir).filter((f) => f.endsWith('.png')).sort()) {
      const img = readGrayPng(path.join(dir, file));
      if (img.width !== SIDE || img.height !== SIDE) {
        throw new DatasetError(`${file}: expected ${SIDE}x${SIDE}, got ${img.width}x${img.height}`);
      }
      samples.push({ values: img.values, label, path: path.join(dir, file) });
    }
  });
  if (samples.length < 4) {
    throw new DatasetError(`too few samples under ${root}: ${samples.length}`);
  }
  return { samples, classes: classDirs };
}
