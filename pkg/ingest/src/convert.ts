// One-shot converters from the two published dataset layouts into canonical
// epoch files. The cue-timed recordings (BDF sessions with events.tsv) are
// epoched on the 2.5 s task-execution interval that starts 1.0 s after each
// trial onset (0.5 s concentration + 0.5 s visual cue precede it). The
// six-word MAT recordings arrive pre-epoched, one trial per matrix row.

import * as fs from "node:fs";
import * as path from "node:path";

import { parseBdf } from "./bdf.js";
import { parseEventsTsv, UnknownLabel } from "./events.js";
import { parseMat } from "./mat5.js";
import { EpochSet, makeChannels, saveEpochSet } from "./epochset.js";

export { UnknownLabel };

export class MissingSession extends Error {}
export class TimingMismatch extends Error {}

export type DatasetKind = "tol" | "is";

export interface SourceDescriptor {
  dataset: DatasetKind;
  root: string;
  /** subject ids to convert; undefined = all found, empty = none */
  subjects?: string[];
  /** inner/imagined trials only; the only supported condition */
  condition?: "inner" | "imagined";
}

export interface SubjectManifest {
  subject: string;
  base: string;
  n_epochs: number;
  n_channels: number;
  n_timesteps: number;
  sampling_rate_hz: number;
  class_names: string[];
  class_counts: Record<string, number>;
  sources: string[];
}

export interface Manifest {
  dataset: DatasetKind;
  subjects: SubjectManifest[];
}

const TOL_WORDS: Record<string, string> = {
  arriba: "up",
  abajo: "down",
  derecha: "right",
  izquierda: "left",
  up: "up",
  down: "down",
  right: "right",
  left: "left",
};
const TOL_CLASSES = ["up", "down", "right", "left"];
const TOL_SESSIONS = ["ses-01", "ses-02", "ses-03"];
const TOL_ACTION_OFFSET_S = 1.0;
const TOL_ACTION_LENGTH_S = 2.5;

const IS_CLASSES = ["up", "down", "right", "left", "forward", "backward"];
const IS_CHANNELS = ["F3", "F4", "C3", "C4", "P3", "P4"];
const IS_SAMPLING_RATE_HZ = 1024;
const IS_METADATA_COLUMNS = 3; // modality, stimulus, session
const IS_MODALITY_IMAGINED = 1;
const IS_FIRST_WORD_STIMULUS = 6; // 1..5 are the vowels

const AUX_LABEL = /^(EXG|EOG|EMG|Status|Trig)/i;

function classCounts(classNames: string[], labels: number[]): Record<string, number> {
  const counts: Record<string, number> = {};
  for (const name of classNames) counts[name] = 0;
  for (const label of labels) counts[classNames[label]] += 1;
  return counts;
}

function writeSubject(
  outDir: string,
  subject: string,
  set: EpochSet,
  sources: string[],
): SubjectManifest {
  const base = path.join(outDir, `${subject}_${set.condition}`);
  saveEpochSet(set, base);
  return {
    subject,
    base: path.basename(base),
    n_epochs: set.epochs.length,
    n_channels: set.channels.length,
    n_timesteps: set.epochs.length > 0 ? set.epochs[0][0].length : 0,
    sampling_rate_hz: set.samplingRateHz,
    class_names: set.classNames,
    class_counts: classCounts(set.classNames, set.labels),
    sources,
  };
}

function listTolSubjects(root: string): string[] {
  return fs
    .readdirSync(root)
    .filter((name) => /^sub-\d+$/.test(name))
    .sort();
}

function convertTolSubject(root: string, subject: string): { set: EpochSet; sources: string[] } {
  const epochs: Float32Array[][] = [];
  const labels: number[] = [];
  const sources: string[] = [];
  let channelNames: string[] | null = null;
  let samplingRate = 0;

  for (const session of TOL_SESSIONS) {
    const eegDir = path.join(root, subject, session, "eeg");
    if (!fs.existsSync(eegDir)) {
      throw new MissingSession(`${subject}: missing ${session}`);
    }
    const bdfName = fs.readdirSync(eegDir).find((f) => f.endsWith(".bdf"));
    if (!bdfName) {
      throw new MissingSession(`${subject}/${session}: no .bdf recording`);
    }
    const eventsName = bdfName.replace(/_eeg\.bdf$/, "_events.tsv");
    const eventsPath = path.join(eegDir, eventsName);
    if (!fs.existsSync(eventsPath)) {
      throw new MissingSession(`${subject}/${session}: no events.tsv`);
    }

    const recording = parseBdf(fs.readFileSync(path.join(eegDir, bdfName)));
    const keep = recording.header.signals
      .map((s, i) => ({ label: s.label, index: i }))
      .filter((s) => !AUX_LABEL.test(s.label));
    if (keep.length === 0) {
      throw new TimingMismatch(`${subject}/${session}: no EEG channels`);
    }
    const rates = new Set(keep.map((s) => recording.samplingRates[s.index]));
    if (rates.size !== 1) {
      throw new TimingMismatch(`${subject}/${session}: mixed EEG sampling rates`);
    }
    const fs_hz = recording.samplingRates[keep[0].index];
    const names = keep.map((s) => s.label);
    if (channelNames === null) {
      channelNames = names;
      samplingRate = fs_hz;
    } else if (
      names.length !== channelNames.length ||
      names.some((n, i) => n !== channelNames![i]) ||
      fs_hz !== samplingRate
    ) {
      throw new TimingMismatch(`${subject}/${session}: montage differs across sessions`);
    }

    const nSamples = Math.round(TOL_ACTION_LENGTH_S * fs_hz);
    const recorded = recording.signals[keep[0].index].length;
    for (const event of parseEventsTsv(fs.readFileSync(eventsPath, "utf-8"))) {
      if (event.condition !== "inner") continue;
      const word = TOL_WORDS[event.trialType.toLowerCase()];
      if (word === undefined) {
        throw new UnknownLabel(`${subject}/${session}: unknown cue '${event.trialType}'`);
      }
      const start = Math.round((event.onsetS + TOL_ACTION_OFFSET_S) * fs_hz);
      if (start < 0 || start + nSamples > recorded) {
        throw new TimingMismatch(
          `${subject}/${session}: action interval at ${event.onsetS}s ` +
          `extends past the recording`,
        );
      }
      const epoch = keep.map((s) => {
        const signal = recording.signals[s.index];
        return Float32Array.from(signal.subarray(start, start + nSamples));
      });
      epochs.push(epoch);
      labels.push(TOL_CLASSES.indexOf(word));
    }
    sources.push(path.join(subject, session, "eeg", bdfName));
  }

  const set: EpochSet = {
    epochs,
    labels,
    samplingRateHz: samplingRate,
    classNames: TOL_CLASSES,
    channels: makeChannels(channelNames ?? []),
    subjectId: subject,
    condition: "inner",
  };
  return { set, sources };
}

function listIsSubjects(root: string): string[] {
  return fs
    .readdirSync(root)
    .filter((name) => /^S\d+\.mat$/i.test(name))
    .map((name) => name.replace(/\.mat$/i, ""))
    .sort();
}

function convertIsSubject(root: string, subject: string): { set: EpochSet; sources: string[] } {
  const fileName = `${subject}.mat`;
  const matrices = parseMat(fs.readFileSync(path.join(root, fileName)));
  const eeg = matrices.get("EEG");
  if (!eeg) {
    throw new MissingSession(`${subject}: no 'EEG' matrix in ${fileName}`);
  }
  if (eeg.dims.length !== 2) {
    throw new TimingMismatch(`${subject}: 'EEG' must be 2-D, got ${eeg.dims.length}-D`);
  }
  const [nTrials, nColumns] = eeg.dims;
  const signalColumns = nColumns - IS_METADATA_COLUMNS;
  if (signalColumns <= 0 || signalColumns % IS_CHANNELS.length !== 0) {
    throw new TimingMismatch(
      `${subject}: ${signalColumns} signal columns not divisible by ` +
      `${IS_CHANNELS.length} channels`,
    );
  }
  const nSamples = signalColumns / IS_CHANNELS.length;

  // column-major: element (row, col) lives at row + col * nTrials
  const cell = (row: number, col: number) => eeg.data[row + col * nTrials];

  const epochs: Float32Array[][] = [];
  const labels: number[] = [];
  for (let trial = 0; trial < nTrials; trial++) {
    const modality = cell(trial, signalColumns);
    const stimulus = cell(trial, signalColumns + 1);
    if (modality !== IS_MODALITY_IMAGINED) continue;
    if (stimulus < IS_FIRST_WORD_STIMULUS) continue; // vowel trials are out of scope
    const label = stimulus - IS_FIRST_WORD_STIMULUS;
    if (!Number.isInteger(label) || label >= IS_CLASSES.length) {
      throw new UnknownLabel(`${subject}: unknown stimulus code ${stimulus}`);
    }
    const epoch = IS_CHANNELS.map((_, ch) => {
      const samples = new Float32Array(nSamples);
      for (let t = 0; t < nSamples; t++) {
        samples[t] = cell(trial, ch * nSamples + t);
      }
      return samples;
    });
    epochs.push(epoch);
    labels.push(label);
  }

  const set: EpochSet = {
    epochs,
    labels,
    samplingRateHz: IS_SAMPLING_RATE_HZ,
    classNames: IS_CLASSES,
    channels: makeChannels(IS_CHANNELS),
    subjectId: subject,
    condition: "imagined",
  };
  return { set, sources: [fileName] };
}

export function convert(descriptor: SourceDescriptor, outDir: string): Manifest {
  const all =
    descriptor.dataset === "tol"
      ? listTolSubjects(descriptor.root)
      : listIsSubjects(descriptor.root);
  const subjects =
    descriptor.subjects === undefined
      ? all
      : all.filter((s) => descriptor.subjects!.includes(s));

  fs.mkdirSync(outDir, { recursive: true });
  const manifest: Manifest = { dataset: descriptor.dataset, subjects: [] };
  for (const subject of subjects) {
    const { set, sources } =
      descriptor.dataset === "tol"
        ? convertTolSubject(descriptor.root, subject)
        : convertIsSubject(descriptor.root, subject);
    manifest.subjects.push(writeSubject(outDir, subject, set, sources));
  }
  fs.writeFileSync(
    path.join(outDir, "manifest.json"),
    JSON.stringify(manifest, null, 2) + "\n",
    "utf-8",
  );
  return manifest;
}
