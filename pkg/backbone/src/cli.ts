/** Command line for the concept backbone exporter. */
import { DEFAULT_CONFIG, ExportJob, TargetSpace, trainAndExport } from "./exporter.js";

const USAGE = `usage: backbone-export --manifest <csv> --annotations <csv> --lexicon <file> \\
    --out <scores.csv> [--space Concepts28|Clusters6] [--export-manifest <csv>] \\
    [--epochs N] [--batch-size N] [--learning-rate F] [--image-side N] [--seed N]`;

function parseArgs(argv: string[]): ExportJob {
  const values = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`bad argument ${key}\n${USAGE}`);
    }
    values.set(key.slice(2), argv[i + 1]);
  }
  const required = (name: string): string => {
    const value = values.get(name);
    if (!value) throw new Error(`missing --${name}\n${USAGE}`);
    return value;
  };
  const space = (values.get("space") ?? "Clusters6") as TargetSpace;
  if (space !== "Concepts28" && space !== "Clusters6") {
    throw new Error(`unknown target space ${space}`);
  }
  const numeric = (name: string, fallback: number): number => {
    const value = values.get(name);
    if (value === undefined) return fallback;
    const parsed = Number(value);
    if (!Number.isFinite(parsed)) throw new Error(`bad numeric value for --${name}: ${value}`);
    return parsed;
  };
  return {
    manifestPath: required("manifest"),
    annotationsPath: required("annotations"),
    lexiconPath: required("lexicon"),
    space,
    outPath: required("out"),
    exportManifestPath: values.get("export-manifest"),
    config: {
      epochs: numeric("epochs", DEFAULT_CONFIG.epochs),
      batchSize: numeric("batch-size", DEFAULT_CONFIG.batchSize),
      learningRate: numeric("learning-rate", DEFAULT_CONFIG.learningRate),
      imageSide: numeric("image-side", DEFAULT_CONFIG.imageSide),
      seed: numeric("seed", DEFAULT_CONFIG.seed),
    },
  };
}

async function main(): Promise<number> {
  try {
    const job = parseArgs(process.argv.slice(2));
    const result = await trainAndExport(job);
    console.log(
      `exported ${result.rows} rows x ${result.targets} targets ` +
        `(lexicon ${result.lexiconHash}, final loss ${result.finalLoss.toFixed(4)}) -> ${job.outPath}`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
