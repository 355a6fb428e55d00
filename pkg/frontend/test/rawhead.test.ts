import { describe, expect, it } from 'vitest';
import { decodeRawHead, encodeRawHead, RAWHEAD_MAGIC } from '../src/rawhead';

function sampleHead() {
  const data = new Float32Array(5 * 3);
  for (let i = 0; i < data.length; i++) data[i] = i + 0.5;
  return { rows: 5, cols: 3, data };
}

describe('rawhead format', () => {
  it('round-trips rows, cols, and payload', () => {
    const head = sampleHead();
    const back = decodeRawHead(encodeRawHead(head));
    expect(back.rows).toBe(5);
    expect(back.cols).toBe(3);
    expect(Array.from(back.data)).toEqual(Array.from(head.data));
  });

  it('writes the documented byte layout', () => {
    const buf = encodeRawHead(sampleHead());
    expect(buf.toString('ascii', 0, 4)).toBe(RAWHEAD_MAGIC);
    expect(buf.readUInt32LE(4)).toBe(5);
    expect(buf.readUInt32LE(8)).toBe(3);
    expect(buf.readUInt32LE(12)).toBe(0);
    expect(buf.length).toBe(16 + 5 * 3 * 4);
    expect(buf.readFloatLE(16)).toBeCloseTo(0.5, 6);
  });

  it('rejects bad magic', () => {
    const buf = encodeRawHead(sampleHead());
    buf.write('XXXX', 0, 'ascii');
    expect(() => decodeRawHead(buf)).toThrow(/bad magic/);
  });

  it('rejects size mismatch', () => {
    const buf = encodeRawHead(sampleHead());
    expect(() => decodeRawHead(buf.subarray(0, buf.length - 4))).toThrow(/expected .* bytes/);
  });

  it('rejects heads with fewer than 5 rows', () => {
    expect(() => encodeRawHead({ rows: 4, cols: 2, data: new Float32Array(8) })).toThrow(/at least 5 rows/);
  });

  it('rejects payload length mismatch at encode time', () => {
    expect(() => encodeRawHead({ rows: 5, cols: 2, data: new Float32Array(9) })).toThrow(/does not match/);
  });
});
