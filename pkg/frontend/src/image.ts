// PNG loading and model-input tensor preparation for the dump tool.
//
// The tensor layout matches the runtime contract: 1x3x640x640 float32, RGB
// channel order, values scaled to [0, 1], letterbox padding filled with
// gray 114. Resampling here is nearest-neighbor; the consumer never re-runs
// inference on these pixels (it replays the dumped tensors), so the choice
// only shapes the fixture content.

import * as fs from 'node:fs';
import { PNG } from 'pngjs';
import { letterboxPlan } from './geometry';

export interface RgbImage {
  width: number;
  height: number;
  data: Uint8Array; // RGB, row-major, 3 bytes per pixel
}

export function readPng(path: string): RgbImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const data = new Uint8Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    data[i * 3] = png.data[i * 4];
    data[i * 3 + 1] = png.data[i * 4 + 1];
    data[i * 3 + 2] = png.data[i * 4 + 2];
  }
  return { width: png.width, height: png.height, data };
}

export function writePng(path: string, image: RgbImage): void {
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0; i < image.width * image.height; i++) {
    png.data[i * 4] = image.data[i * 3];
    png.data[i * 4 + 1] = image.data[i * 3 + 1];
    png.data[i * 4 + 2] = image.data[i * 3 + 2];
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png));
}

export const PAD_GRAY = 114;

// Letterbox into a side x side square and emit a CHW float32 tensor in
// [0, 1]. Nearest-neighbor sampling; padding is PAD_GRAY / 255.
export function toInputTensor(image: RgbImage, side: number): Float32Array {
  const { scale, padX, padY } = letterboxPlan(image.width, image.height, side);
  const out = new Float32Array(3 * side * side).fill(PAD_GRAY / 255);
  const scaledW = Math.round(image.width * scale);
  const scaledH = Math.round(image.height * scale);
  const x0 = Math.round(padX);
  const y0 = Math.round(padY);
  for (let y = 0; y < scaledH; y++) {
    const srcY = Math.min(image.height - 1, Math.floor(y / scale));
    for (let x = 0; x < scaledW; x++) {
      const srcX = Math.min(image.width - 1, Math.floor(x / scale));
      const src = (srcY * image.width + srcX) * 3;
      const dst = (y0 + y) * side + (x0 + x);
      out[dst] = image.data[src] / 255;
      out[side * side + dst] = image.data[src + 1] / 255;
      out[2 * side * side + dst] = image.data[src + 2] / 255;
    }
  }
  return out;
}
