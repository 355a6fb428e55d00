// Deterministic synthetic scenes for fixture dumping: bright rectangles on
// a dark noisy background. Pooled cell brightness drives the head model, so
// rectangle placement directly controls which anchors fire and how much the
// resulting boxes overlap.

import { RgbImage } from './image';

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export interface SceneRect {
  x: number;
  y: number;
  w: number;
  h: number;
  level: number; // 0-255 brightness
}

export interface Scene {
  key: string;
  width: number;
  height: number;
  rects: SceneRect[];
  baseLevel: number;
}

export const DEFAULT_SEED = 20250814;

export function makeScenes(count: number, seed: number = DEFAULT_SEED): Scene[] {
  const rand = mulberry32(seed);
  const scenes: Scene[] = [];
  for (let i = 0; i < count; i++) {
    const key = `lpr_${String(i + 1).padStart(4, '0')}`;
    // A few deliberate extremes: one blank scene, one saturated scene, and
    // two non-square frames that exercise the letterbox path.
    let width = 640;
    let height = 640;
    if (i % 12 === 6) {
      width = 800;
      height = 500;
    } else if (i % 12 === 10) {
      width = 512;
      height = 384;
    }
    const rects: SceneRect[] = [];
    if (i % 8 === 4) {
      // blank: background only, nothing should clear the thresholds
    } else if (i % 8 === 7) {
      rects.push({ x: 0, y: 0, w: width, h: height, level: 235 });
    } else {
      const n = 2 + Math.floor(rand() * 4);
      for (let r = 0; r < n; r++) {
        const w = 60 + Math.floor(rand() * 160);
        const h = 40 + Math.floor(rand() * 120);
        rects.push({
          x: Math.floor(rand() * Math.max(1, width - w)),
          y: Math.floor(rand() * Math.max(1, height - h)),
          w,
          h,
          level: 150 + Math.floor(rand() * 90),
        });
      }
    }
    scenes.push({ key, width, height, rects, baseLevel: 16 + Math.floor(rand() * 10) });
  }
  return scenes;
}

export function renderScene(scene: Scene, seed: number = DEFAULT_SEED): RgbImage {
  const rand = mulberry32(seed ^ hashKey(scene.key));
  const data = new Uint8Array(scene.width * scene.height * 3);
  for (let i = 0; i < scene.width * scene.height; i++) {
    const noise = Math.floor(rand() * 8);
    data[i * 3] = scene.baseLevel + noise;
    data[i * 3 + 1] = scene.baseLevel + noise;
    data[i * 3 + 2] = scene.baseLevel + Math.floor(noise / 2);
  }
  for (const rect of scene.rects) {
    for (let y = rect.y; y < Math.min(scene.height, rect.y + rect.h); y++) {
      for (let x = rect.x; x < Math.min(scene.width, rect.x + rect.w); x++) {
        const i = (y * scene.width + x) * 3;
        const jitter = Math.floor(rand() * 10);
        data[i] = Math.min(255, rect.level + jitter);
        data[i + 1] = Math.min(255, rect.level + jitter);
        data[i + 2] = Math.min(255, rect.level);
      }
    }
  }
  return { width: scene.width, height: scene.height, data };
}

function hashKey(key: string): number {
  let h = 2166136261;
  for (let i = 0; i < key.length; i++) {
    h ^= key.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  return h >>> 0;
}
