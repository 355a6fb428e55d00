// Class-manifest emission. Scans the YOLO label files under a dataset root
// and writes the ordered names manifest the evaluation tooling consumes:
// one name for a plate dataset, the 36 glyph names 0-9 A-Z for a character
// dataset. Any other class-id range is an error.

import * as fs from 'node:fs';
import * as path from 'node:path';

export const GLYPHS = '0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ';

export function scanMaxClassId(datasetRoot: string): number {
  if (!fs.existsSync(datasetRoot)) throw new Error(`dataset root not found: ${datasetRoot}`);
  let maxId = -1;
  let sawLabels = false;
  for (const split of fs.readdirSync(datasetRoot).sort()) {
    const labels = path.join(datasetRoot, split, 'labels');
    if (!fs.existsSync(labels) || !fs.statSync(labels).isDirectory()) continue;
    for (const file of fs.readdirSync(labels).sort()) {
      if (!file.endsWith('.txt')) continue;
      sawLabels = true;
      const text = fs.readFileSync(path.join(labels, file), 'utf8');
      for (const line of text.split('\n')) {
        const trimmed = line.trim();
        if (!trimmed) continue;
        const id = Number(trimmed.split(/\s+/)[0]);
        if (!Number.isInteger(id) || id < 0) {
          throw new Error(`${path.join(labels, file)}: bad class id in line ${JSON.stringify(trimmed)}`);
        }
        if (id > maxId) maxId = id;
      }
    }
  }
  if (!sawLabels) throw new Error(`no label files under ${datasetRoot}`);
  return maxId;
}

export function manifestNames(maxClassId: number): string[] {
  if (maxClassId === 0) return ['plate'];
  if (maxClassId >= 1 && maxClassId <= 35) return GLYPHS.split('');
  throw new Error(`cannot infer a manifest for max class id ${maxClassId} (expected 0 or 1-35)`);
}

export function emitManifest(datasetRoot: string, outPath: string): string[] {
  const names = manifestNames(scanMaxClassId(datasetRoot));
  const lines = ['names:', ...names.map((n) => `  - "${n}"`)];
  fs.writeFileSync(outPath, lines.join('\n') + '\n');
  return names;
}
