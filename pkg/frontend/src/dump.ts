// Fixture dumping: run a head model over an image directory under the
// reference runtime and emit, per image, the raw head tensor as a .rawhead
// file plus the reference detections computed by the decode+NMS in this
// package. Thresholds are frozen into the provenance record so consumers
// replay identical settings.

import * as fs from 'node:fs';
import * as path from 'node:path';
import * as ort from 'onnxruntime-node';
import { INPUT_SIDE, ModelDescriptor } from './onnx';
import { readPng, toInputTensor } from './image';
import { encodeRawHead, decodeRawHead } from './rawhead';
import { decode, nms, Detection } from './postprocess';

export interface Thresholds {
  conf: number;
  iou: number;
}

export const DEFAULT_THRESHOLDS: Thresholds = { conf: 0.25, iou: 0.45 };

export interface FixtureBundle {
  image: string;
  tensorFile: string;
  detections: Detection[];
}

export interface DumpFailure {
  image: string;
  error: string;
}

export interface DumpResult {
  bundles: FixtureBundle[];
  failures: DumpFailure[];
}

export function detectionRecord(image: string, detections: Detection[]): object {
  return {
    schema: 'plateflow/bridge/1',
    image,
    detections: detections.map((d) => ({
      box: [d.box.x1, d.box.y1, d.box.x2, d.box.y2],
      class_id: d.classId,
      confidence: d.confidence,
    })),
  };
}

// One bundle per PNG in imageDir. Reference detections are decoded from the
// bytes written to disk (not the in-memory tensor), so they are guaranteed
// to describe exactly what a consumer of the file will see. Per-image
// failures are recorded and the batch continues.
export async function dumpFixtures(
  modelBytes: Uint8Array,
  descriptor: ModelDescriptor,
  imageDir: string,
  outDir: string,
  thresholds: Thresholds = DEFAULT_THRESHOLDS,
  classAware: boolean = descriptor.role === 'plate',
): Promise<DumpResult> {
  const session = await ort.InferenceSession.create(modelBytes);
  fs.mkdirSync(outDir, { recursive: true });
  const bundles: FixtureBundle[] = [];
  const failures: DumpFailure[] = [];
  const images = fs
    .readdirSync(imageDir)
    .filter((f) => f.toLowerCase().endsWith('.png'))
    .sort();
  for (const file of images) {
    const key = file.replace(/\.png$/i, '');
    try {
      const image = readPng(path.join(imageDir, file));
      const tensor = toInputTensor(image, INPUT_SIDE);
      const feeds = {
        [descriptor.inputName]: new ort.Tensor('float32', tensor, descriptor.inputShape),
      };
      const output = (await session.run(feeds))[descriptor.outputName];
      const [rows, cols] = output.dims;
      if (rows !== descriptor.rows || cols !== descriptor.anchors) {
        throw new Error(`head shape ${rows}x${cols} does not match descriptor ${descriptor.rows}x${descriptor.anchors}`);
      }
      const tensorFile = path.join(outDir, `${key}.rawhead`);
      fs.writeFileSync(tensorFile, encodeRawHead({ rows, cols, data: output.data as Float32Array }));
      const replayed = decodeRawHead(fs.readFileSync(tensorFile));
      const detections = nms(decode(replayed, thresholds.conf), thresholds.iou, classAware);
      bundles.push({ image: key, tensorFile, detections });
    } catch (err) {
      failures.push({ image: key, error: err instanceof Error ? err.message : String(err) });
    }
  }
  return { bundles, failures };
}

export function writeDetectionsJsonl(outPath: string, bundles: FixtureBundle[]): void {
  const lines = bundles.map((b) => JSON.stringify(detectionRecord(b.image, b.detections)));
  fs.writeFileSync(outPath, lines.join('\n') + (lines.length ? '\n' : ''));
}
