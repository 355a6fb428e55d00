export { Box, area, iou, letterboxPlan, LetterboxPlan } from './geometry';
export { RawHead, RAWHEAD_MAGIC, encodeRawHead, decodeRawHead } from './rawhead';
export { Detection, decode, nms } from './postprocess';
export {
  ModelRole,
  ModelDescriptor,
  INPUT_SIDE,
  GRID,
  NUM_ANCHORS,
  OPSET,
  buildHeadModel,
  descriptorFor,
  scoreParams,
} from './onnx';
export { RgbImage, PAD_GRAY, readPng, writePng, toInputTensor } from './image';
export { Scene, SceneRect, DEFAULT_SEED, makeScenes, renderScene, mulberry32 } from './scenes';
export { GLYPHS, emitManifest, manifestNames, scanMaxClassId } from './manifest';
export {
  Thresholds,
  DEFAULT_THRESHOLDS,
  FixtureBundle,
  DumpResult,
  dumpFixtures,
  detectionRecord,
  writeDetectionsJsonl,
} from './dump';
