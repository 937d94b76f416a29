// Cross-checks a conversion output directory against its manifest: files
// present, header internally consistent, tensor byte count right, label
// histogram matching the recorded class counts. Report only, never throws
// on bad data.

import * as fs from "node:fs";
import * as path from "node:path";

import { Manifest, SubjectManifest } from "./convert.js";

export interface SubjectReport {
  subject: string;
  problems: string[];
}

export interface VerifyReport {
  ok: boolean;
  subjects: SubjectReport[];
}

function checkSubject(outDir: string, entry: SubjectManifest): string[] {
  const problems: string[] = [];
  const base = path.join(outDir, entry.base);

  if (!fs.existsSync(base + ".json")) {
    problems.push(`missing file ${entry.base}.json`);
  }
  if (!fs.existsSync(base + ".f32")) {
    problems.push(`missing file ${entry.base}.f32`);
  }
  if (problems.length > 0) return problems;

  let header: Record<string, unknown>;
  try {
    header = JSON.parse(fs.readFileSync(base + ".json", "utf-8"));
  } catch (err) {
    return [`unreadable header: ${(err as Error).message}`];
  }

  const nEpochs = header.n_epochs as number;
  const nChannels = header.n_channels as number;
  const nTimesteps = header.n_timesteps as number;
  if (nEpochs !== entry.n_epochs) {
    problems.push(`header n_epochs ${nEpochs} != manifest ${entry.n_epochs}`);
  }
  if (nChannels !== entry.n_channels) {
    problems.push(`header n_channels ${nChannels} != manifest ${entry.n_channels}`);
  }

  const expectedBytes = nEpochs * nChannels * nTimesteps * 4;
  const actualBytes = fs.statSync(base + ".f32").size;
  if (actualBytes !== expectedBytes) {
    problems.push(`tensor is ${actualBytes} bytes, expected ${expectedBytes}`);
  }

  const labels = header.labels as number[];
  const classNames = header.class_names as string[];
  if (!Array.isArray(labels) || labels.length !== nEpochs) {
    problems.push("header labels do not match n_epochs");
  } else {
    const histogram: Record<string, number> = {};
    for (const name of classNames) histogram[name] = 0;
    for (const label of labels) histogram[classNames[label]] += 1;
    for (const [name, count] of Object.entries(entry.class_counts)) {
      if (histogram[name] !== count) {
        problems.push(
          `class '${name}': ${histogram[name] ?? 0} epochs, manifest says ${count}`,
        );
      }
    }
  }
  return problems;
}

export function verify(outDir: string): VerifyReport {
  const manifestPath = path.join(outDir, "manifest.json");
  if (!fs.existsSync(manifestPath)) {
    return { ok: false, subjects: [{ subject: "", problems: ["missing manifest.json"] }] };
  }
  const manifest: Manifest = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  const subjects = manifest.subjects.map((entry) => ({
    subject: entry.subject,
    problems: checkSubject(outDir, entry),
  }));
  return { ok: subjects.every((s) => s.problems.length === 0), subjects };
}
