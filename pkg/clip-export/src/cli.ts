#!/usr/bin/env node
/**
 * clip-export: turn a folder-per-class image dataset into a BADF file the
 * protoadapt CLI can train on and evaluate.
 *
 *   clip-export --dataset toy/ --out toy.badf
 *   clip-export --dataset toy/ --out toy.badf --augmentations 20 --seed 1
 */

import { parseArgs } from "node:util";

import { loadBackbone } from "./backbone.js";
import { exportFeatures } from "./export.js";

export function main(argv: string[]): number {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        dataset: { type: "string" },
        out: { type: "string" },
        backbone: { type: "string", default: "micro" },
        template: { type: "string", default: "An image of a [cls]" },
        augmentations: { type: "string", default: "0" },
        seed: { type: "string", default: "0" },
        manifest: { type: "string" },
        "no-normalize": { type: "boolean", default: false },
        help: { type: "boolean", default: false },
      },
    }));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  if (values.help || !values.dataset || !values.out) {
    console.error(
      "usage: clip-export --dataset <dir> --out <file.badf> " +
        "[--backbone micro] [--template 'An image of a [cls]'] " +
        "[--augmentations N] [--seed N] [--manifest <file>] [--no-normalize]",
    );
    return values.help ? 0 : 2;
  }
  const augmentations = Number(values.augmentations);
  if (!Number.isInteger(augmentations) || augmentations < 0) {
    console.error("error: --augmentations must be a non-negative integer");
    return 2;
  }

  try {
    const summary = exportFeatures({
      dataset: values.dataset,
      out: values.out,
      backbone: loadBackbone(values.backbone!),
      template: values.template!,
      augmentations,
      normalize: !values["no-normalize"],
      seed: Number(values.seed),
      manifest: values.manifest,
    });
    console.log(
      `wrote ${values.out}: ${summary.nRows} rows (${summary.nImages} images), ` +
        `${summary.classes.length} classes, dim ${summary.dim}`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
