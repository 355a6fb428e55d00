// Box algebra shared by the reference decode+NMS. Boxes are continuous
// pixel corners (x1, y1, x2, y2), top-left origin, area (x2-x1)*(y2-y1).

export interface Box {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export function area(b: Box): number {
  return (b.x2 - b.x1) * (b.y2 - b.y1);
}

// IoU with the same conventions as the pipeline: 0 when disjoint,
// edge-touching, or degenerate.
export function iou(a: Box, b: Box): number {
  const ix = Math.min(a.x2, b.x2) - Math.max(a.x1, b.x1);
  const iy = Math.min(a.y2, b.y2) - Math.max(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0.0;
  const inter = ix * iy;
  const union = area(a) + area(b) - inter;
  if (union <= 0) return 0.0;
  return inter / union;
}

export interface LetterboxPlan {
  scale: number;
  padX: number;
  padY: number;
}

// Aspect-preserving fit of (srcW, srcH) into a dst square; padding centers
// the scaled content. model = source * scale + pad, per axis.
export function letterboxPlan(srcW: number, srcH: number, dst: number): LetterboxPlan {
  if (srcW <= 0 || srcH <= 0) throw new Error(`source dimensions must be positive, got ${srcW}x${srcH}`);
  const scale = Math.min(dst / srcW, dst / srcH);
  return { scale, padX: (dst - scale * srcW) / 2, padY: (dst - scale * srcH) / 2 };
}
