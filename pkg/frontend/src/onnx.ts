// Builds the interchange (ONNX) detector-head models used for fixture
// dumping. The graph maps an image tensor deterministically to a
// (4 + numClasses) x numAnchors head: the image is average-pooled to a
// 20x20 brightness grid, box centers sit on the grid with a
// brightness-dependent offset, sizes grow with brightness, and each class
// score is a sigmoid of an affine function of brightness. Scores therefore
// stay strictly inside (0, 1) and every column carries a positive-size box,
// which is exactly the contract the consumer's decoder validates.
//
// Field numbers follow onnx.proto3 (ModelProto et al.), opset 13.

import { ProtoWriter } from './proto';

export const INPUT_SIDE = 640;
export const GRID = 20; // 640 / 32 pooling
export const NUM_ANCHORS = GRID * GRID;
export const OPSET = 13;

export type ModelRole = 'plate' | 'character';

export interface ModelDescriptor {
  role: ModelRole;
  classes: number;
  rows: number;
  anchors: number;
  inputName: string;
  outputName: string;
  inputShape: number[];
  opset: number;
}

export function descriptorFor(role: ModelRole): ModelDescriptor {
  const classes = role === 'plate' ? 1 : 36;
  return {
    role,
    classes,
    rows: 4 + classes,
    anchors: NUM_ANCHORS,
    inputName: 'images',
    outputName: 'head',
    inputShape: [1, 3, INPUT_SIDE, INPUT_SIDE],
    opset: OPSET,
  };
}

// Per-class score response: score_k = sigmoid(alpha_k * (b - beta_k)) where
// b is cell brightness in [0, 1]. Spread alpha/beta so different brightness
// levels favor different classes.
export function scoreParams(classes: number): { alpha: number[]; beta: number[] } {
  const alpha: number[] = [];
  const beta: number[] = [];
  for (let k = 0; k < classes; k++) {
    alpha.push(8 + 0.25 * k);
    beta.push(0.35 + 0.012 * k);
  }
  return { alpha, beta };
}

const FLOAT = 1;
const INT64 = 7;

function floatTensor(name: string, dims: number[], values: number[]): ProtoWriter {
  const raw = Buffer.alloc(values.length * 4);
  values.forEach((v, i) => raw.writeFloatLE(v, i * 4));
  const w = new ProtoWriter();
  for (const d of dims) w.varint(1, d);
  w.varint(2, FLOAT);
  w.string(8, name);
  w.bytes(9, raw);
  return w;
}

function int64Tensor(name: string, dims: number[], values: number[]): ProtoWriter {
  const raw = Buffer.alloc(values.length * 8);
  values.forEach((v, i) => raw.writeBigInt64LE(BigInt(v), i * 8));
  const w = new ProtoWriter();
  for (const d of dims) w.varint(1, d);
  w.varint(2, INT64);
  w.string(8, name);
  w.bytes(9, raw);
  return w;
}

function attrInts(name: string, values: number[]): ProtoWriter {
  const w = new ProtoWriter();
  w.string(1, name);
  for (const v of values) w.varint(8, v);
  w.varint(20, 7); // INTS
  return w;
}

function attrInt(name: string, value: number): ProtoWriter {
  const w = new ProtoWriter();
  w.string(1, name);
  w.varint(3, value);
  w.varint(20, 2); // INT
  return w;
}

function node(opType: string, inputs: string[], outputs: string[], attrs: ProtoWriter[] = []): ProtoWriter {
  const w = new ProtoWriter();
  for (const i of inputs) w.string(1, i);
  for (const o of outputs) w.string(2, o);
  w.string(3, `${opType}_${outputs[0]}`);
  w.string(4, opType);
  for (const a of attrs) w.message(5, a);
  return w;
}

function tensorValueInfo(name: string, dims: number[]): ProtoWriter {
  const shape = new ProtoWriter();
  for (const d of dims) {
    const dim = new ProtoWriter();
    dim.varint(1, d);
    shape.message(1, dim);
  }
  const tensorType = new ProtoWriter();
  tensorType.varint(1, FLOAT);
  tensorType.message(2, shape);
  const type = new ProtoWriter();
  type.message(1, tensorType);
  const w = new ProtoWriter();
  w.string(1, name);
  w.message(2, type);
  return w;
}

export function buildHeadModel(role: ModelRole): Buffer {
  const desc = descriptorFor(role);
  const nc = desc.classes;
  const { alpha, beta } = scoreParams(nc);

  const gridX: number[] = [];
  const gridY: number[] = [];
  for (let i = 0; i < NUM_ANCHORS; i++) {
    gridX.push(16 + 32 * (i % GRID));
    gridY.push(16 + 32 * Math.floor(i / GRID));
  }

  const graph = new ProtoWriter();
  const nodes: ProtoWriter[] = [
    node('AveragePool', ['images'], ['pooled'], [attrInts('kernel_shape', [32, 32]), attrInts('strides', [32, 32])]),
    node('ReduceMean', ['pooled'], ['bmap'], [attrInts('axes', [1]), attrInt('keepdims', 0)]),
    node('Reshape', ['bmap', 'row_shape'], ['b']),
    node('Mul', ['b', 'jitter_x'], ['bx']),
    node('Add', ['bx', 'grid_x'], ['cx']),
    node('Mul', ['b', 'jitter_y'], ['by']),
    node('Add', ['by', 'grid_y'], ['cy']),
    node('Mul', ['b', 'w_gain'], ['bw']),
    node('Add', ['bw', 'w_base'], ['w']),
    node('Mul', ['b', 'h_gain'], ['bh']),
    node('Add', ['bh', 'h_base'], ['h']),
    node('Sub', ['b', 'beta'], ['centered']),
    node('Mul', ['centered', 'alpha'], ['logits']),
    node('Sigmoid', ['logits'], ['scores']),
    node('Concat', ['cx', 'cy', 'w', 'h', 'scores'], ['head'], [attrInt('axis', 0)]),
  ];
  for (const n of nodes) graph.message(1, n);
  graph.string(2, `${role}_head`);

  const initializers: ProtoWriter[] = [
    floatTensor('grid_x', [1, NUM_ANCHORS], gridX),
    floatTensor('grid_y', [1, NUM_ANCHORS], gridY),
    floatTensor('jitter_x', [1], [9.0]),
    floatTensor('jitter_y', [1], [7.0]),
    floatTensor('w_gain', [1], [55.0]),
    floatTensor('w_base', [1], [34.0]),
    floatTensor('h_gain', [1], [28.0]),
    floatTensor('h_base', [1], [18.0]),
    floatTensor('alpha', [nc, 1], alpha),
    floatTensor('beta', [nc, 1], beta),
    int64Tensor('row_shape', [2], [1, NUM_ANCHORS]),
  ];
  for (const t of initializers) graph.message(5, t);

  graph.message(11, tensorValueInfo('images', desc.inputShape));
  graph.message(12, tensorValueInfo('head', [desc.rows, NUM_ANCHORS]));

  const opset = new ProtoWriter();
  opset.string(1, '');
  opset.varint(2, OPSET);

  const model = new ProtoWriter();
  model.varint(1, 8); // ir_version
  model.string(2, 'plateflow-tools');
  model.string(3, '0.1.0');
  model.message(7, graph);
  model.message(8, opset);
  return model.finish();
}
