#!/usr/bin/env node
// ingest --dataset {tol|is} --root PATH --out PATH [--subjects 1,2,...]
// ingest verify --out PATH

import { parseArgs } from "node:util";

import { convert, DatasetKind, MissingSession, TimingMismatch, UnknownLabel } from "./convert.js";
import { verify } from "./verify.js";

function runConvert(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      dataset: { type: "string" },
      root: { type: "string" },
      out: { type: "string" },
      subjects: { type: "string" },
    },
  });
  if (values.dataset !== "tol" && values.dataset !== "is") {
    console.error("--dataset must be 'tol' or 'is'");
    return 2;
  }
  if (!values.root || !values.out) {
    console.error("--root and --out are required");
    return 2;
  }
  const subjects = values.subjects === undefined
    ? undefined
    : values.subjects.split(",").map((s) => s.trim()).filter((s) => s.length > 0);
  const manifest = convert(
    { dataset: values.dataset as DatasetKind, root: values.root, subjects },
    values.out,
  );
  for (const entry of manifest.subjects) {
    console.log(`${entry.subject}: ${entry.n_epochs} epochs -> ${entry.base}`);
  }
  console.log(`converted ${manifest.subjects.length} subject(s)`);
  return 0;
}

function runVerify(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: { out: { type: "string" } },
  });
  if (!values.out) {
    console.error("--out is required");
    return 2;
  }
  const report = verify(values.out);
  for (const subject of report.subjects) {
    if (subject.problems.length === 0) {
      console.log(`${subject.subject}: OK`);
    } else {
      for (const problem of subject.problems) {
        console.log(`${subject.subject}: ${problem}`);
      }
    }
  }
  console.log(report.ok ? "verify: clean" : "verify: problems found");
  return report.ok ? 0 : 1;
}

export function main(argv: string[]): number {
  try {
    if (argv[0] === "verify") {
      return runVerify(argv.slice(1));
    }
    return runConvert(argv);
  } catch (err) {
    if (err instanceof MissingSession || err instanceof UnknownLabel ||
        err instanceof TimingMismatch) {
      console.error(`${err.constructor.name}: ${err.message}`);
      return 3;
    }
    console.error((err as Error).message);
    return 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
