// The .rawhead fixture tensor format:
//   bytes 0-3    magic "RHD0"
//   bytes 4-7    u32 LE row count (4 + num_classes)
//   bytes 8-11   u32 LE column count (num_anchors)
//   bytes 12-15  u32 reserved, written as 0
//   bytes 16-    rows*cols float32 LE, row-major

export const RAWHEAD_MAGIC = 'RHD0';
const HEADER_SIZE = 16;

export interface RawHead {
  rows: number;
  cols: number;
  data: Float32Array; // row-major, length rows*cols
}

export function encodeRawHead(head: RawHead): Buffer {
  if (head.rows < 5) throw new Error(`raw head needs at least 5 rows, got ${head.rows}`);
  if (head.cols < 1) throw new Error('raw head needs at least one anchor column');
  if (head.data.length !== head.rows * head.cols) {
    throw new Error(`payload length ${head.data.length} does not match ${head.rows}x${head.cols}`);
  }
  const buf = Buffer.alloc(HEADER_SIZE + head.data.length * 4);
  buf.write(RAWHEAD_MAGIC, 0, 'ascii');
  buf.writeUInt32LE(head.rows, 4);
  buf.writeUInt32LE(head.cols, 8);
  buf.writeUInt32LE(0, 12);
  for (let i = 0; i < head.data.length; i++) buf.writeFloatLE(head.data[i], HEADER_SIZE + i * 4);
  return buf;
}

export function decodeRawHead(buf: Buffer): RawHead {
  if (buf.length < HEADER_SIZE) throw new Error(`truncated header (${buf.length} bytes)`);
  const magic = buf.toString('ascii', 0, 4);
  if (magic !== RAWHEAD_MAGIC) throw new Error(`bad magic ${JSON.stringify(magic)}, expected ${RAWHEAD_MAGIC}`);
  const rows = buf.readUInt32LE(4);
  const cols = buf.readUInt32LE(8);
  const expected = HEADER_SIZE + rows * cols * 4;
  if (buf.length !== expected) {
    throw new Error(`expected ${expected} bytes for ${rows}x${cols}, found ${buf.length}`);
  }
  const data = new Float32Array(rows * cols);
  for (let i = 0; i < data.length; i++) data[i] = buf.readFloatLE(HEADER_SIZE + i * 4);
  return { rows, cols, data };
}
