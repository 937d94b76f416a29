// Writer for the canonical epoch file pair: <base>.json header plus
// <base>.f32 little-endian float32 tensor (epoch-major, then channel-major,
// then time). The layout matches what the analysis toolkit reads; the two
// packages share nothing but these bytes.

import * as fs from "node:fs";
import * as path from "node:path";

export const FORMAT_VERSION = 1;

export type Hemisphere = "left" | "right" | "midline" | "unknown";

export interface ChannelInfo {
  name: string;
  hemisphere: Hemisphere;
  index: number;
}

export interface EpochSet {
  /** [epoch][channel][sample], microvolts */
  epochs: Float32Array[][];
  samplingRateHz: number;
  classNames: string[];
  labels: number[];
  channels: ChannelInfo[];
  subjectId: string;
  condition: string;
}

/** 10-20 style label -> hemisphere: odd trailing digit left, even right, z midline. */
export function hemisphereOf(name: string): Hemisphere {
  const tail = name.trim();
  if (tail.length === 0) return "unknown";
  const last = tail[tail.length - 1];
  if (last === "z" || last === "Z") return "midline";
  if (last >= "0" && last <= "9") {
    return Number(last) % 2 === 1 ? "left" : "right";
  }
  return "unknown";
}

export function makeChannels(names: string[]): ChannelInfo[] {
  if (new Set(names).size !== names.length) {
    throw new Error("channel names must be unique");
  }
  return names.map((name, index) => ({ name, hemisphere: hemisphereOf(name), index }));
}

/** Serialize with sorted keys and no whitespace so identical sets give identical bytes. */
function canonicalJson(value: unknown): string {
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => JSON.stringify(k) + ":" + canonicalJson(v));
    return "{" + entries.join(",") + "}";
  }
  return JSON.stringify(value);
}

export function saveEpochSet(set: EpochSet, basePath: string): void {
  const nEpochs = set.epochs.length;
  const nChannels = set.channels.length;
  const nTimesteps = nEpochs > 0 ? set.epochs[0][0].length : 0;
  if (set.labels.length !== nEpochs) {
    throw new Error(`labels length ${set.labels.length} != n_epochs ${nEpochs}`);
  }
  for (const epoch of set.epochs) {
    if (epoch.length !== nChannels) {
      throw new Error(`epoch has ${epoch.length} channels, set declares ${nChannels}`);
    }
    for (const channel of epoch) {
      if (channel.length !== nTimesteps) {
        throw new Error("epochs must share a common sample count");
      }
    }
  }
  for (const label of set.labels) {
    if (!Number.isInteger(label) || label < 0 || label >= set.classNames.length) {
      throw new Error(`label ${label} outside class table`);
    }
  }

  const header = {
    format_version: FORMAT_VERSION,
    n_epochs: nEpochs,
    n_channels: nChannels,
    n_timesteps: nTimesteps,
    sampling_rate_hz: set.samplingRateHz,
    class_names: set.classNames,
    labels: set.labels,
    channels: set.channels.map((c) => ({
      name: c.name,
      hemisphere: c.hemisphere,
      index: c.index,
    })),
    subject_id: set.subjectId,
    condition: set.condition,
  };

  const tensor = Buffer.alloc(nEpochs * nChannels * nTimesteps * 4);
  let offset = 0;
  for (const epoch of set.epochs) {
    for (const channel of epoch) {
      for (let t = 0; t < nTimesteps; t++) {
        tensor.writeFloatLE(channel[t], offset);
        offset += 4;
      }
    }
  }

  fs.mkdirSync(path.dirname(basePath), { recursive: true });
  fs.writeFileSync(basePath + ".json", canonicalJson(header), "utf-8");
  fs.writeFileSync(basePath + ".f32", tensor);
}
