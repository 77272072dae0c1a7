import * as fs from 'node:fs';
import * as path from 'node:path';
import { PNG } from 'pngjs';
import jpeg from 'jpeg-js';

export interface RgbImage {
  width: number;
  height: number;
  /** Row-major RGB triples in [0, 1]. */
  data: Float64Array;
}

const IMAGE_EXTENSIONS = new Set(['.png', '.jpg', '.jpeg']);

export function isImageFile(name: string): boolean {
  return IMAGE_EXTENSIONS.has(path.extname(name).toLowerCase());
}

export function listFrameFiles(dir: string): string[] {
  return fs
    .readdirSync(dir)
    .filter(isImageFile)
    .sort((a, b) => {
      const sa = path.parse(a).name;
      const sb = path.parse(b).name;
      const na = Number(sa);
      const nb = Number(sb);
      if (Number.isInteger(na) && Number.isInteger(nb)) return na - nb;
      return sa < sb ? -1 : sa > sb ? 1 : 0;
    });
}

export function decodeImage(filePath: string): RgbImage {
  const raw = fs.readFileSync(filePath);
  const ext = path.extname(filePath).toLowerCase();
  let width: number;
  let height: number;
  let rgba: Uint8Array;
  if (ext === '.png') {
    const png = PNG.sync.read(raw);
    width = png.width;
    height = png.height;
    rgba = png.data;
  } else {
    const decoded = jpeg.decode(raw, { useTArray: true });
    width = decoded.width;
    height = decoded.height;
    rgba = decoded.data;
  }
  const data = new Float64Array(width * height * 3);
  for (let p = 0; p < width * height; p++) {
    data[p * 3] = rgba[p * 4] / 255;
    data[p * 3 + 1] = rgba[p * 4 + 1] / 255;
    data[p * 3 + 2] = rgba[p * 4 + 2] / 255;
  }
  return { width, height, data };
}

export function encodePng(image: RgbImage): Buffer {
  const png = new PNG({ width: image.width, height: image.height });
  for (let p = 0; p < image.width * image.height; p++) {
    png.data[p * 4] = Math.round(image.data[p * 3] * 255);
    png.data[p * 4 + 1] = Math.round(image.data[p * 3 + 1] * 255);
    png.data[p * 4 + 2] = Math.round(image.data[p * 3 + 2] * 255);
    png.data[p * 4 + 3] = 255;
  }
  return PNG.sync.write(png);
}
