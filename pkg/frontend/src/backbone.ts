import type { RgbImage } from './image.js';

/**
 * Deterministic perceptual backbone: three 3x3 stride-2 convolution stages
 * (3 -> 16 -> 32 -> 64 channels) with ReLU, weights drawn once from a seeded
 * generator and made spatially zero-mean so flat patches produce no response.
 * The distance follows the LPIPS recipe: channel-unit-normalize the features
 * at every position, take the squared L2 difference, average over positions,
 * and sum the three layer averages.
 *
 * A pretrained network cannot be bundled offline, so the backbone identity
 * is recorded in the output's meta line instead.
 */

export const BACKBONE_NAME = 'randconv3-ts-v1';
export const BACKBONE_SEED = 77;

const LAYER_CHANNELS: Array<[number, number]> = [
  [3, 16],
  [16, 32],
  [32, 64],
];

/** splitmix64-style integer mixer feeding a [0,1) stream. */
function makeRng(seed: number): () => number {
  let state = BigInt(seed) & 0xffffffffffffffffn;
  return () => {
    state = (state + 0x9e3779b97f4a7c15n) & 0xffffffffffffffffn;
    let z = state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & 0xffffffffffffffffn;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & 0xffffffffffffffffn;
    z = z ^ (z >> 31n);
    return Number(z >> 11n) / 2 ** 53;
  };
}

/** Box-Muller standard normal from the seeded stream. */
function makeGaussian(rng: () => number): () => number {
  let spare: number | null = null;
  return () => {
    if (spare !== null) {
      const value = spare;
      spare = null;
      return value;
    }
    let u = 0;
    while (u === 0) u = rng();
    const v = rng();
    const r = Math.sqrt(-2 * Math.log(u));
    spare = r * Math.sin(2 * Math.PI * v);
    return r * Math.cos(2 * Math.PI * v);
  };
}

interface FeatureMap {
  channels: number;
  height: number;
  width: number;
  /** layout: channel-major, data[c * h * w + y * w + x] */
  data: Float64Array;
}

export class PerceptualBackbone {
  private weights: Float64Array[] = [];

  constructor(seed: number = BACKBONE_SEED) {
    const gauss = makeGaussian(makeRng(seed));
    for (const [inCh, outCh] of LAYER_CHANNELS) {
      const w = new Float64Array(outCh * inCh * 9);
      for (let i = 0; i < w.length; i++) w[i] = gauss();
      // zero-mean over each 3x3 spatial support
      for (let f = 0; f < outCh * inCh; f++) {
        let mean = 0;
        for (let k = 0; k < 9; k++) mean += w[f * 9 + k];
        mean /= 9;
        for (let k = 0; k < 9; k++) w[f * 9 + k] -= mean;
      }
      this.weights.push(w);
    }
  }

  private convRelu(input: FeatureMap, layer: number): FeatureMap {
    const [inCh, outCh] = LAYER_CHANNELS[layer];
    const w = this.weights[layer];
    const outH = Math.ceil(input.height / 2);
    const outW = Math.ceil(input.width / 2);
    const out = new Float64Array(outCh * outH * outW);
    for (let oc = 0; oc < outCh; oc++) {
      for (let oy = 0; oy < outH; oy++) {
        for (let ox = 0; ox < outW; ox++) {
          let acc = 0;
          const cy = oy * 2;
          const cx = ox * 2;
          for (let ic = 0; ic < inCh; ic++) {
            const base = (oc * inCh + ic) * 9;
            const plane = ic * input.height * input.width;
            for (let ky = -1; ky <= 1; ky++) {
              const y = cy + ky;
              if (y < 0 || y >= input.height) continue;
              for (let kx = -1; kx <= 1; kx++) {
                const x = cx + kx;
                if (x < 0 || x >= input.width) continue;
                acc += w[base + (ky + 1) * 3 + (kx + 1)] * input.data[plane + y * input.width + x];
              }
            }
          }
          out[oc * outH * outW + oy * outW + ox] = acc > 0 ? acc : 0;
        }
      }
    }
    return { channels: outCh, height: outH, width: outW, data: out };
  }

  features(image: RgbImage): FeatureMap[] {
    let current: FeatureMap = {
      channels: 3,
      height: image.height,
      width: image.width,
      data: toChannelMajor(image),
    };
    const maps: FeatureMap[] = [];
    for (let layer = 0; layer < LAYER_CHANNELS.length; layer++) {
      current = this.convRelu(current, layer);
      maps.push(current);
    }
    return maps;
  }

  distance(a: RgbImage, b: RgbImage): number {
    if (a.width !== b.width || a.height !== b.height) {
      throw new Error(`image shape mismatch: ${a.width}x${a.height} vs ${b.width}x${b.height}`);
    }
    const fa = this.features(a);
    const fb = this.features(b);
    let total = 0;
    for (let layer = 0; layer < fa.length; layer++) {
      total += normalizedSquaredDiff(fa[layer], fb[layer]);
    }
    return total;
  }
}

function toChannelMajor(image: RgbImage): Float64Array {
  const { width, height, data } = image;
  const out = new Float64Array(3 * height * width);
  for (let p = 0; p < width * height; p++) {
    out[p] = data[p * 3];
    out[height * width + p] = data[p * 3 + 1];
    out[2 * height * width + p] = data[p * 3 + 2];
  }
  return out;
}

function normalizedSquaredDiff(a: FeatureMap, b: FeatureMap): number {
  const positions = a.height * a.width;
  let sum = 0;
  for (let p = 0; p < positions; p++) {
    let na = 0;
    let nb = 0;
    for (let c = 0; c < a.channels; c++) {
      const va = a.data[c * positions + p];
      const vb = b.data[c * positions + p];
      na += va * va;
      nb += vb * vb;
    }
    na = Math.sqrt(na) + 1e-10;
    nb = Math.sqrt(nb) + 1e-10;
    let d = 0;
    for (let c = 0; c < a.channels; c++) {
      const diff = a.data[c * positions + p] / na - b.data[c * positions + p] / nb;
      d += diff * diff;
    }
    sum += d;
  }
  return sum / positions;
}

export function lpipsQuality(distance: number): number {
  return Math.min(Math.max(1 - distance, 0), 1);
}
