/**
 * CLI: regenerate one figure from a capiset artifact.
 *
 *   node dist/main.js partition-map   tree.json   out.svg
 *   node dist/main.js level-contour   tree.json   out.svg [--levels a,b,c] [--bold g]
 *   node dist/main.js gamma-curve     sweep.csv   out.svg
 *   node dist/main.js erg-timeseries  traj.csv    out.svg
 */

import { readFileSync, writeFileSync } from "fs";
import { FigureError } from "./csv.js";
import {
  renderErgTimeseries,
  renderGammaCurve,
  renderLevelContour,
  renderPartitionMap,
} from "./figures.js";

function run(argv: string[]): number {
  const [kind, input, output, ...rest] = argv;
  if (!kind || !input || !output) {
    process.stderr.write(
      "usage: main.js <partition-map|level-contour|gamma-curve|erg-timeseries> <input> <output.svg>\n");
    return 1;
  }
  let levels: number[] | undefined;
  let bold: number | undefined;
  for (let i = 0; i < rest.length; i++) {
    if (rest[i] === "--levels") levels = rest[++i].split(",").map(Number);
    else if (rest[i] === "--bold") bold = Number(rest[++i]);
  }
  const text = readFileSync(input, "utf8");
  let svg: string;
  switch (kind) {
    case "partition-map":
      svg = renderPartitionMap(text);
      break;
    case "level-contour":
      svg = renderLevelContour(text, levels, bold);
      break;
    case "gamma-curve":
      svg = renderGammaCurve(text);
      break;
    case "erg-timeseries":
      svg = renderErgTimeseries(text);
      break;
    default:
      process.stderr.write(`unknown figure kind: ${kind}\n`);
      return 1;
  }
  writeFileSync(output, svg);
  process.stdout.write(`${output}\n`);
  return 0;
}

try {
  process.exit(run(process.argv.slice(2)));
} catch (err) {
  if (err instanceof FigureError) {
    process.stderr.write(`figure error: ${err.message}\n`);
  } else {
    process.stderr.write(String(err) + "\n");
  }
  process.exit(1);
}
