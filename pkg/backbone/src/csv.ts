/**
 * Readers and writers for the file contracts shared with the classification
 * pipeline: manifest CSV, annotations CSV, and the score exchange file.
 */
import { readFileSync, writeFileSync } from "node:fs";
import { dirname, isAbsolute, resolve } from "node:path";

import { Lexicon, conceptIndex } from "./lexicon.js";

export interface ManifestRow {
  id: string;
  imagePath: string;
  reportPath: string;
  label: string;
  view: string;
}

const MANIFEST_HEADER = "id,image_path,report_path,label,view";

export function readManifest(path: string): ManifestRow[] {
  const lines = readFileSync(path, "utf8").split(/\r?\n/).filter((l) => l.length > 0);
  if (lines[0] !== MANIFEST_HEADER) {
    throw new Error(`manifest header must be '${MANIFEST_HEADER}'`);
  }
  const base = dirname(resolve(path));
  const toAbsolute = (p: string) => (isAbsolute(p) ? p : resolve(base, p));
  return lines.slice(1).map((line, i) => {
    const parts = line.split(",");
    if (parts.length !== 5) throw new Error(`manifest line ${i + 2}: expected 5 fields`);
    const [id, imagePath, reportPath, label, view] = parts;
    return { id, imagePath: toAbsolute(imagePath), reportPath: toAbsolute(reportPath), label, view };
  });
}

/** Annotations file: one `<report-id>,<concept-name>,<0|1>` record per line. */
export function readAnnotations(path: string): Map<string, Map<string, number>> {
  const out = new Map<string, Map<string, number>>();
  const lines = readFileSync(path, "utf8").split(/\r?\n/);
  lines.forEach((raw, i) => {
    const line = raw.trim();
    if (!line || line.startsWith("#")) return;
    const parts = line.split(",");
    if (parts.length !== 3) throw new Error(`annotations line ${i + 1}: expected 3 fields`);
    const bit = Number(parts[2]);
    if (bit !== 0 && bit !== 1) throw new Error(`annotations line ${i + 1}: bit must be 0 or 1`);
    if (!out.has(parts[0])) out.set(parts[0], new Map());
    out.get(parts[0])!.set(parts[1], bit);
  });
  return out;
}

export function conceptBits(lexicon: Lexicon, pairs: Map<string, number>): number[] {
  const bits = lexicon.concepts.map(() => 0);
  for (const [name, bit] of pairs) {
    bits[conceptIndex(lexicon, name)] = bit;
  }
  return bits;
}

export interface ScoreRow {
  id: string;
  scores: number[];
}

/**
 * Score exchange file: `# lexicon=<hash> space=<...>`, then `id,<names>`,
 * then one row per image with >= 12 significant digits per score.
 */
export function writeScores(
  path: string,
  lexiconHash: string,
  space: "Concepts28" | "Clusters6",
  names: string[],
  rows: ScoreRow[],
): void {
  const lines = [`# lexicon=${lexiconHash} space=${space}`, `id,${names.join(",")}`];
  for (const row of rows) {
    if (row.scores.length !== names.length) {
      throw new Error(`row ${row.id}: expected ${names.length} scores, got ${row.scores.length}`);
    }
    for (const s of row.scores) {
      if (!Number.isFinite(s) || s < 0 || s > 1) {
        throw new Error(`row ${row.id}: score ${s} outside [0, 1]`);
      }
    }
    lines.push(`${row.id},${row.scores.map((s) => s.toPrecision(17)).join(",")}`);
  }
  writeFileSync(path, lines.join("\n") + "\n", "utf8");
}
