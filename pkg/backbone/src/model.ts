/**
 * Small convolutional multi-label model: conv-pool-conv-pool-dense with
 * per-target sigmoid outputs, binary cross-entropy loss, Adam at the
 * pipeline's training defaults (batch 16, learning rate 1e-4).
 */
import * as tf from "@tensorflow/tfjs";

export interface TrainConfig {
  epochs: number;
  batchSize: number;
  learningRate: number;
  imageSide: number;
  seed: number;
}

export const DEFAULT_CONFIG: TrainConfig = {
  epochs: 8,
  batchSize: 16,
  learningRate: 1e-4,
  imageSide: 32,
  seed: 0,
};

export function buildModel(config: TrainConfig, nTargets: number): tf.Sequential {
  const model = tf.sequential();
  model.add(
    tf.layers.conv2d({
      inputShape: [config.imageSide, config.imageSide, 1],
      filters: 8,
      kernelSize: 3,
      activation: "relu",
      padding: "same",
      kernelInitializer: tf.initializers.heNormal({ seed: config.seed }),
    }),
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      activation: "relu",
      padding: "same",
      kernelInitializer: tf.initializers.heNormal({ seed: config.seed + 1 }),
    }),
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(tf.layers.flatten());
  model.add(
    tf.layers.dense({
      units: 32,
      activation: "relu",
      kernelInitializer: tf.initializers.heNormal({ seed: config.seed + 2 }),
    }),
  );
  model.add(
    tf.layers.dense({
      units: nTargets,
      activation: "sigmoid",
      kernelInitializer: tf.initializers.glorotUniform({ seed: config.seed + 3 }),
    }),
  );
  model.compile({
    optimizer: tf.train.adam(config.learningRate),
    loss: "binaryCrossentropy",
  });
  return model;
}

export async function trainModel(
  model: tf.Sequential,
  xs: tf.Tensor4D,
  ys: tf.Tensor2D,
  config: TrainConfig,
): Promise<number> {
  const history = await model.fit(xs, ys, {
    batchSize: config.batchSize,
    epochs: config.epochs,
    shuffle: true,
    verbose: 0,
  });
  const losses = history.history.loss as number[];
  const finalLoss = losses[losses.length - 1];
  if (!Number.isFinite(finalLoss)) {
    throw new Error(`training diverged: final loss ${finalLoss}`);
  }
  return finalLoss;
}

export function predictScores(model: tf.Sequential, xs: tf.Tensor4D): number[][] {
  const out = model.predict(xs) as tf.Tensor2D;
  const data = out.arraySync();
  out.dispose();
  // sigmoid outputs are already in (0, 1); clamp for float safety
  return data.map((row) => row.map((v) => Math.min(1, Math.max(0, v))));
}
