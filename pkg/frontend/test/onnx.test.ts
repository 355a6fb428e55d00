import * as ort from 'onnxruntime-node';
import { describe, expect, it } from 'vitest';
import { buildHeadModel, descriptorFor, INPUT_SIDE, NUM_ANCHORS, scoreParams } from '../src/onnx';

async function runOn(role: 'plate' | 'character', fill: number): Promise<Float32Array> {
  const desc = descriptorFor(role);
  const session = await ort.InferenceSession.create(buildHeadModel(role));
  const input = new Float32Array(3 * INPUT_SIDE * INPUT_SIDE).fill(fill);
  const out = await session.run({ images: new ort.Tensor('float32', input, desc.inputShape) });
  expect(Array.from(out.head.dims)).toEqual([desc.rows, NUM_ANCHORS]);
  return out.head.data as Float32Array;
}

describe('head model export', () => {
  it('plate model has 5 output rows', () => {
    const desc = descriptorFor('plate');
    expect(desc.rows).toBe(5);
    expect(desc.classes).toBe(1);
  });

  it('character model has 40 output rows', () => {
    const desc = descriptorFor('character');
    expect(desc.rows).toBe(40);
    expect(desc.classes).toBe(36);
  });

  it('re-export of the same role is byte-identical', () => {
    expect(buildHeadModel('plate').equals(buildHeadModel('plate'))).toBe(true);
    expect(buildHeadModel('character').equals(buildHeadModel('character'))).toBe(true);
  });

  it('loads under the runtime and matches the documented arithmetic', async () => {
    const b = 0.5;
    const data = await runOn('plate', b);
    // cx = grid + 9b, cy = grid + 7b, w = 34 + 55b, h = 18 + 28b.
    expect(data[0]).toBeCloseTo(16 + 9 * b, 4);
    expect(data[NUM_ANCHORS]).toBeCloseTo(16 + 7 * b, 4);
    expect(data[2 * NUM_ANCHORS]).toBeCloseTo(34 + 55 * b, 4);
    expect(data[3 * NUM_ANCHORS]).toBeCloseTo(18 + 28 * b, 4);
    // Last grid cell center is 624 on both axes.
    expect(data[NUM_ANCHORS - 1]).toBeCloseTo(624 + 9 * b, 4);
    const { alpha, beta } = scoreParams(1);
    const want = 1 / (1 + Math.exp(-alpha[0] * (b - beta[0])));
    expect(data[4 * NUM_ANCHORS]).toBeCloseTo(want, 5);
  });

  it('keeps every class score strictly inside [0, 1]', async () => {
    for (const fill of [0, 1]) {
      const data = await runOn('character', fill);
      const scores = data.subarray(4 * NUM_ANCHORS);
      for (const s of scores) {
        expect(s).toBeGreaterThanOrEqual(0);
        expect(s).toBeLessThanOrEqual(1);
      }
    }
  });

  it('is deterministic across sessions', async () => {
    const a = await runOn('character', 0.37);
    const b = await runOn('character', 0.37);
    expect(Buffer.from(a.buffer, a.byteOffset, a.byteLength).equals(
      Buffer.from(b.buffer, b.byteOffset, b.byteLength),
    )).toBe(true);
  });

  it('brighter input raises the plate score', async () => {
    const dark = await runOn('plate', 0.1);
    const bright = await runOn('plate', 0.9);
    expect(bright[4 * NUM_ANCHORS]).toBeGreaterThan(dark[4 * NUM_ANCHORS]);
  });
});
