// Command-line entry for the export tools.
//
//   export-model   --role plate|character --out <dir>
//   gen-images     --out <dir> [--count N] [--seed S]
//   dump-fixtures  --model <file> --role plate|character --images <dir>
//                  --out <dir> [--conf C] [--iou I]
//   emit-manifest  --dataset <root> --out <file>
//   make-bridge    --out <dir> [--count N] [--seed S]
//
// make-bridge is the one-shot path behind the cross-implementation check:
// synthetic images, both head models, both fixture dumps, reference
// detections, and a provenance file with the frozen thresholds.

import * as fs from 'node:fs';
import * as path from 'node:path';
import { buildHeadModel, descriptorFor, ModelRole, OPSET } from './onnx';
import { makeScenes, renderScene, DEFAULT_SEED } from './scenes';
import { writePng } from './image';
import { dumpFixtures, writeDetectionsJsonl, DEFAULT_THRESHOLDS, Thresholds } from './dump';
import { emitManifest } from './manifest';

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`bad arguments near ${JSON.stringify(key)}: expected --flag value pairs`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const v = flags.get(name);
  if (v === undefined) throw new Error(`missing required flag --${name}`);
  return v;
}

function roleOf(value: string): ModelRole {
  if (value !== 'plate' && value !== 'character') throw new Error(`--role must be plate or character, got ${value}`);
  return value;
}

function writeModel(role: ModelRole, dir: string): { modelPath: string; descriptorPath: string } {
  fs.mkdirSync(dir, { recursive: true });
  const desc = descriptorFor(role);
  const modelPath = path.join(dir, `${role}_head.onnx`);
  const descriptorPath = path.join(dir, `${role}_head.descriptor.json`);
  fs.writeFileSync(modelPath, buildHeadModel(role));
  fs.writeFileSync(descriptorPath, JSON.stringify(desc, null, 2) + '\n');
  return { modelPath, descriptorPath };
}

function genImages(dir: string, count: number, seed: number): string[] {
  fs.mkdirSync(dir, { recursive: true });
  const keys: string[] = [];
  for (const scene of makeScenes(count, seed)) {
    writePng(path.join(dir, `${scene.key}.png`), renderScene(scene, seed));
    keys.push(scene.key);
  }
  return keys;
}

async function makeBridge(out: string, count: number, seed: number): Promise<void> {
  const imagesDir = path.join(out, 'images');
  genImages(imagesDir, count, seed);
  console.log(`wrote ${count} images to ${imagesDir}`);
  const modelsDir = path.join(out, 'models');
  const thresholds = DEFAULT_THRESHOLDS;
  const stages: Record<string, object> = {};
  for (const role of ['plate', 'character'] as ModelRole[]) {
    const { modelPath } = writeModel(role, modelsDir);
    const desc = descriptorFor(role);
    const stageDir = path.join(out, role === 'plate' ? 'plate' : 'char');
    const result = await dumpFixtures(fs.readFileSync(modelPath), desc, imagesDir, stageDir, thresholds);
    if (result.failures.length) {
      for (const f of result.failures) console.error(`  ${f.image}: ${f.error}`);
      throw new Error(`${result.failures.length} image(s) failed during ${role} dump`);
    }
    const expectedDir = path.join(out, 'expected');
    fs.mkdirSync(expectedDir, { recursive: true });
    const jsonl = path.join(expectedDir, role === 'plate' ? 'plate_detections.jsonl' : 'char_detections.jsonl');
    writeDetectionsJsonl(jsonl, result.bundles);
    const total = result.bundles.reduce((n, b) => n + b.detections.length, 0);
    console.log(`dumped ${result.bundles.length} ${role} tensors, ${total} reference detections`);
    stages[role] = {
      model: path.relative(out, modelPath),
      rows: desc.rows,
      classes: desc.classes,
      class_aware: role === 'plate',
      tensors: path.relative(out, stageDir),
      expected: path.relative(out, jsonl),
    };
  }
  const provenance = {
    schema: 'plateflow/bridge-provenance/1',
    generator: 'plateflow-tools 0.1.0',
    opset: OPSET,
    seed,
    images: count,
    thresholds: { conf: thresholds.conf, iou: thresholds.iou },
    stages,
  };
  fs.writeFileSync(path.join(out, 'provenance.json'), JSON.stringify(provenance, null, 2) + '\n');
  console.log(`bridge fixture set complete under ${out}`);
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  if (!command) {
    console.error('usage: cli <export-model|gen-images|dump-fixtures|emit-manifest|make-bridge> [flags]');
    return 2;
  }
  try {
    const flags = parseFlags(rest);
    switch (command) {
      case 'export-model': {
        const role = roleOf(required(flags, 'role'));
        const { modelPath, descriptorPath } = writeModel(role, required(flags, 'out'));
        console.log(`wrote ${modelPath} and ${descriptorPath}`);
        return 0;
      }
      case 'gen-images': {
        const count = Number(flags.get('count') ?? 24);
        const seed = Number(flags.get('seed') ?? DEFAULT_SEED);
        const keys = genImages(required(flags, 'out'), count, seed);
        console.log(`wrote ${keys.length} images`);
        return 0;
      }
      case 'dump-fixtures': {
        const role = roleOf(required(flags, 'role'));
        const thresholds: Thresholds = {
          conf: Number(flags.get('conf') ?? DEFAULT_THRESHOLDS.conf),
          iou: Number(flags.get('iou') ?? DEFAULT_THRESHOLDS.iou),
        };
        const out = required(flags, 'out');
        const result = await dumpFixtures(
          fs.readFileSync(required(flags, 'model')),
          descriptorFor(role),
          required(flags, 'images'),
          out,
          thresholds,
        );
        for (const f of result.failures) console.error(`  ${f.image}: ${f.error}`);
        writeDetectionsJsonl(path.join(out, 'detections.jsonl'), result.bundles);
        console.log(`dumped ${result.bundles.length} tensors (${result.failures.length} failures)`);
        return result.failures.length ? 1 : 0;
      }
      case 'emit-manifest': {
        const names = emitManifest(required(flags, 'dataset'), required(flags, 'out'));
        console.log(`wrote manifest with ${names.length} name(s)`);
        return 0;
      }
      case 'make-bridge': {
        const count = Number(flags.get('count') ?? 24);
        const seed = Number(flags.get('seed') ?? DEFAULT_SEED);
        await makeBridge(required(flags, 'out'), count, seed);
        return 0;
      }
      default:
        console.error(`unknown command ${JSON.stringify(command)}`);
        return 2;
    }
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
