/**
 * Lexicon file parsing and the content hash shared with the Python side.
 *
 * Hash contract: sha256 (first 16 hex chars) of the canonical serialization,
 * one line per concept in file order: `name|polarity|cluster|p1;p2`, fields
 * whitespace-normalized, lines joined with "\n".
 */
import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

export type Polarity = "Cancer" | "Healthy";

export interface Concept {
  id: number;
  name: string;
  phrases: string[];
  polarity: Polarity;
  cluster: string;
}

export interface Lexicon {
  concepts: Concept[];
  clusters: string[];
  contentHash: string;
}

export const CANONICAL_CLUSTERS = [
  "Mass",
  "Nodule",
  "Irregular Hilum",
  "Irregular Lung Parenchyma",
  "Irregular Mediastinum",
  "Unremarkable",
] as const;

const squeeze = (s: string) => s.trim().split(/\s+/).join(" ");

export function parseLexicon(text: string): Lexicon {
  const concepts: Concept[] = [];
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line || line.startsWith("#")) continue;
    const parts = line.split("|").map((p) => p.trim());
    if (parts.length !== 4) {
      throw new Error(`lexicon line ${i + 1}: expected 4 '|'-separated fields`);
    }
    const [name, polarity, cluster, phrases] = parts;
    if (polarity !== "Cancer" && polarity !== "Healthy") {
      throw new Error(`lexicon line ${i + 1}: unknown polarity ${polarity}`);
    }
    if (!(CANONICAL_CLUSTERS as readonly string[]).includes(cluster)) {
      throw new Error(`lexicon line ${i + 1}: unknown cluster ${cluster}`);
    }
    const phraseList = phrases
      .split(";")
      .map((p) => p.trim())
      .filter((p) => p.length > 0);
    if (phraseList.length === 0) {
      throw new Error(`lexicon line ${i + 1}: empty phrase list`);
    }
    concepts.push({ id: concepts.length, name, phrases: phraseList, polarity, cluster });
  }
  const referenced = new Set(concepts.map((c) => c.cluster));
  const clusters = CANONICAL_CLUSTERS.filter((c) => referenced.has(c));
  const canonical = concepts
    .map(
      (c) =>
        `${squeeze(c.name)}|${c.polarity}|${squeeze(c.cluster)}|${c.phrases
          .map(squeeze)
          .join(";")}`,
    )
    .join("\n");
  const contentHash = createHash("sha256").update(canonical, "utf8").digest("hex").slice(0, 16);
  return { concepts, clusters, contentHash };
}

export function loadLexicon(path: string): Lexicon {
  return parseLexicon(readFileSync(path, "utf8"));
}

export function conceptIndex(lexicon: Lexicon, name: string): number {
  const wanted = name.toLowerCase();
  const found = lexicon.concepts.find((c) => c.name.toLowerCase() === wanted);
  if (!found) throw new Error(`unknown concept name ${name}`);
  return found.id;
}

/** Cluster bits as the OR over each cluster's member-concept bits. */
export function toClusterBits(lexicon: Lexicon, conceptBits: number[]): number[] {
  if (conceptBits.length !== lexicon.concepts.length) {
    throw new Error("concept bit vector length does not match the lexicon");
  }
  const bits = lexicon.clusters.map(() => 0);
  for (const concept of lexicon.concepts) {
    if (conceptBits[concept.id]) {
      bits[lexicon.clusters.indexOf(concept.cluster)] = 1;
    }
  }
  return bits;
}

export function targetNames(lexicon: Lexicon, space: "Concepts28" | "Clusters6"): string[] {
  return space === "Clusters6" ? [...lexicon.clusters] : lexicon.concepts.map((c) => c.name);
}
