// Reference decode + greedy NMS over a raw head tensor. This is the
// runtime-side half of the cross-implementation check: detections computed
// here are written next to the dumped tensors and must be reproduced by the
// consumer's own postprocessing.
//
// Conventions (shared contract):
//   - rows 0-3 of the head are cx, cy, w, h in model-input pixels; the
//     remaining rows are per-class scores in [0, 1]
//   - per anchor column the best class wins, first index on ties
//   - a candidate is kept iff its score >= confThreshold (inclusive)
//   - candidates with w <= 0 or h <= 0 are dropped
//   - NMS visits candidates by (-confidence, x1, y1, classId) and suppresses
//     iff IoU with a kept detection (same class when classAware) is strictly
//     greater than the threshold

import { Box, iou } from './geometry';
import { RawHead } from './rawhead';

export interface Detection {
  box: Box;
  classId: number;
  confidence: number;
}

export function decode(head: RawHead, confThreshold: number): Detection[] {
  if (!(confThreshold >= 0 && confThreshold <= 1)) {
    throw new Error(`confThreshold ${confThreshold} outside [0,1]`);
  }
  const { rows, cols, data } = head;
  for (let col = 0; col < cols; col++) {
    for (let r = 0; r < rows; r++) {
      if (!Number.isFinite(data[r * cols + col])) {
        throw new Error(`non-finite value in raw head column ${col}`);
      }
    }
  }
  const numClasses = rows - 4;
  const out: Detection[] = [];
  for (let col = 0; col < cols; col++) {
    let best = 0;
    let bestScore = data[4 * cols + col];
    for (let k = 1; k < numClasses; k++) {
      const s = data[(4 + k) * cols + col];
      if (s > bestScore) {
        bestScore = s;
        best = k;
      }
    }
    if (bestScore < confThreshold) continue;
    if (bestScore > 1 || bestScore < 0) {
      throw new Error(`class score ${bestScore} outside [0,1] in raw head column ${col}`);
    }
    const cx = data[col];
    const cy = data[cols + col];
    const w = data[2 * cols + col];
    const h = data[3 * cols + col];
    if (w <= 0 || h <= 0) continue;
    out.push({
      box: { x1: cx - w / 2, y1: cy - h / 2, x2: cx + w / 2, y2: cy + h / 2 },
      classId: best,
      confidence: bestScore,
    });
  }
  return out;
}

function orderCmp(a: Detection, b: Detection): number {
  if (a.confidence !== b.confidence) return b.confidence - a.confidence;
  if (a.box.x1 !== b.box.x1) return a.box.x1 - b.box.x1;
  if (a.box.y1 !== b.box.y1) return a.box.y1 - b.box.y1;
  return a.classId - b.classId;
}

export function nms(dets: Detection[], iouThreshold: number, classAware: boolean): Detection[] {
  if (!(iouThreshold >= 0 && iouThreshold <= 1)) {
    throw new Error(`iouThreshold ${iouThreshold} outside [0,1]`);
  }
  const ordered = [...dets].sort(orderCmp);
  const kept: Detection[] = [];
  for (const cand of ordered) {
    let suppressed = false;
    for (const keeper of kept) {
      if (classAware && keeper.classId !== cand.classId) continue;
      if (iou(keeper.box, cand.box) > iouThreshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push(cand);
  }
  return kept;
}
