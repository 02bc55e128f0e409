/**
 * Exporter round trip through the primary toolkit (criterion A9): export a
 * 3-class toy image folder, then have the protoadapt CLI validate the BADF
 * and report zero-shot accuracy above chance.
 *
 * Requires the protoadapt Python package to be importable (pip install -e
 * in the repository root).
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { loadBackbone } from "../src/backbone.js";
import { exportFeatures } from "../src/export.js";
import { writeToyDataset } from "./helpers.js";

const PYTHON = process.env.PYTHON ?? "python3";

function havePrimary(): boolean {
  return spawnSync(PYTHON, ["-c", "import protoadapt"]).status === 0;
}

describe("round trip into the primary toolkit", () => {
  it.skipIf(!havePrimary())(
    "zero-shot eval on an exported toy dataset beats chance",
    () => {
      const root = mkdtempSync(join(tmpdir(), "clip-export-rt-"));
      writeToyDataset(join(root, "toy"), 6);
      const badf = join(root, "toy.badf");
      exportFeatures({
        dataset: join(root, "toy"),
        out: badf,
        backbone: loadBackbone("micro"),
        template: "An image of a [cls]",
        augmentations: 0,
        normalize: true,
        seed: 0,
      });

      const report = join(root, "report.json");
      const proc = spawnSync(
        PYTHON,
        [
          "-m", "protoadapt", "eval", "--method", "zeroshot",
          "--input", badf, "--report", report,
        ],
        { encoding: "utf-8" },
      );
      expect(proc.status, proc.stderr).toBe(0);

      const payload = JSON.parse(readFileSync(report, "utf-8"));
      expect(payload.method).toBe("zeroshot");
      expect(payload.n_evaluated).toBe(18);
      expect(payload.accuracy).toBeGreaterThan(1 / 3);
    },
  );

  it.skipIf(!havePrimary())("an augmented export trains end to end", () => {
    const root = mkdtempSync(join(tmpdir(), "clip-export-rt2-"));
    writeToyDataset(join(root, "toy"), 6);
    const badf = join(root, "toy.badf");
    exportFeatures({
      dataset: join(root, "toy"),
      out: badf,
      backbone: loadBackbone("micro"),
      template: "An image of a [cls]",
      augmentations: 3,
      normalize: true,
      seed: 1,
    });
    const outDir = join(root, "cmp");
    const proc = spawnSync(
      PYTHON,
      [
        "-m", "protoadapt", "compare", "--input", badf,
        "--out-dir", outDir, "--shots", "8", "--seed", "0",
        "--epochs", "40", "--batch-size", "64",
      ],
      { encoding: "utf-8" },
    );
    expect(proc.status, proc.stderr).toBe(0);
    const payload = JSON.parse(
      readFileSync(join(outDir, "compare-report.json"), "utf-8"),
    );
    expect(payload.methods.bayes.accuracy).toBeGreaterThan(1 / 3);
  });
});
