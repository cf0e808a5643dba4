/**
 * Export job orchestration: read the corpus through the pipeline's file
 * contracts, train the convolutional concept backbone, and emit the score
 * exchange file.
 */
import * as tf from "@tensorflow/tfjs";

import { ManifestRow, ScoreRow, conceptBits, readAnnotations, readManifest, writeScores } from "./csv.js";
import { Lexicon, loadLexicon, targetNames, toClusterBits } from "./lexicon.js";
import { DEFAULT_CONFIG, TrainConfig, buildModel, predictScores, trainModel } from "./model.js";
import { readPgm } from "./pgm.js";

export type TargetSpace = "Concepts28" | "Clusters6";

export interface ExportJob {
  manifestPath: string;
  annotationsPath: string;
  lexiconPath: string;
  space: TargetSpace;
  outPath: string;
  /** optional separate manifest whose rows get scored; defaults to the training manifest */
  exportManifestPath?: string;
  config: TrainConfig;
}

function imageTensor(rows: ManifestRow[], side: number): tf.Tensor4D {
  const data = new Float32Array(rows.length * side * side);
  rows.forEach((row, index) => {
    const image = readPgm(row.imagePath);
    const resized = tf.tidy(() => {
      const t = tf.tensor3d(image.pixels, [image.height, image.width, 1]);
      const small = tf.image.resizeBilinear(t, [side, side]);
      const lo = small.min();
      const hi = small.max();
      const range = hi.sub(lo);
      const normalized = tf.where(
        range.greater(0),
        small.sub(lo).div(range.add(tf.scalar(1e-12))),
        tf.zerosLike(small),
      );
      return normalized as tf.Tensor3D;
    });
    data.set(resized.dataSync(), index * side * side);
    resized.dispose();
  });
  return tf.tensor4d(data, [rows.length, side, side, 1]);
}

function targetMatrix(
  lexicon: Lexicon,
  rows: ManifestRow[],
  annotationsPath: string,
  space: TargetSpace,
): tf.Tensor2D {
  const annotations = readAnnotations(annotationsPath);
  const matrix = rows.map((row) => {
    const pairs = annotations.get(row.id);
    if (!pairs) throw new Error(`no annotations for manifest row ${row.id}`);
    const bits = conceptBits(lexicon, pairs);
    return space === "Clusters6" ? toClusterBits(lexicon, bits) : bits;
  });
  return tf.tensor2d(matrix);
}

export interface ExportResult {
  rows: number;
  targets: number;
  finalLoss: number;
  lexiconHash: string;
}

export async function trainAndExport(job: ExportJob): Promise<ExportResult> {
  const lexicon = loadLexicon(job.lexiconPath);
  const names = targetNames(lexicon, job.space);
  const trainRows = readManifest(job.manifestPath);
  if (trainRows.length === 0) throw new Error("empty training manifest");
  const exportRows = job.exportManifestPath ? readManifest(job.exportManifestPath) : trainRows;

  const xsTrain = imageTensor(trainRows, job.config.imageSide);
  const ysTrain = targetMatrix(lexicon, trainRows, job.annotationsPath, job.space);
  const model = buildModel(job.config, names.length);
  const finalLoss = await trainModel(model, xsTrain, ysTrain, job.config);
  xsTrain.dispose();
  ysTrain.dispose();

  const xsExport = imageTensor(exportRows, job.config.imageSide);
  const scores = predictScores(model, xsExport);
  xsExport.dispose();

  const scoreRows: ScoreRow[] = exportRows.map((row, i) => ({ id: row.id, scores: scores[i] }));
  writeScores(job.outPath, lexicon.contentHash, job.space, names, scoreRows);
  return {
    rows: scoreRows.length,
    targets: names.length,
    finalLoss,
    lexiconHash: lexicon.contentHash,
  };
}

export { DEFAULT_CONFIG };
