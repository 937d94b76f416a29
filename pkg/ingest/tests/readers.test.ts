// Low-level reader tests against fixtures written by scripts/make_fixtures.py,
// whose expected.json values are computed outside this package.

import * as fs from "node:fs";
import { fileURLToPath } from "node:url";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import { parseBdf, parseBdfHeader } from "../src/bdf";
import { matGet, parseMat } from "../src/mat5";

const FIXTURES = fileURLToPath(new URL("./fixtures", import.meta.url));
const expected = JSON.parse(
  fs.readFileSync(path.join(FIXTURES, "expected.json"), "utf-8"),
);

const BDF_PATH = path.join(
  FIXTURES, "tol", "sub-01", "ses-01", "eeg",
  "sub-01_ses-01_task-inner_eeg.bdf",
);

describe("bdf", () => {
  it("parses the header fields", () => {
    const header = parseBdfHeader(fs.readFileSync(BDF_PATH));
    expect(header.signalCount).toBe(5);
    expect(header.signals.map((s) => s.label)).toEqual(
      ["F3", "F4", "C3", "C4", "Status"],
    );
    expect(header.recordDurationS).toBe(1);
    expect(header.signals[0].samplesPerRecord).toBe(expected.tol.sampling_rate_hz);
    expect(header.signals[0].physicalDimension).toBe("uV");
    expect(header.signals[0].digitalMin).toBe(-8388608);
    expect(header.signals[0].digitalMax).toBe(8388607);
  });

  it("decodes 24-bit samples to physical units", () => {
    const recording = parseBdf(fs.readFileSync(BDF_PATH));
    expect(recording.samplingRates[0]).toBe(expected.tol.sampling_rate_hz);
    const first = expected.tol.subjects["sub-01"].first_trial;
    const fsHz = expected.tol.sampling_rate_hz;
    // first inner trial: onset 1.0 s, action starts 1.0 s later
    const start = Math.round(2.0 * fsHz);
    for (let i = 0; i < first.channel0_head.length; i++) {
      expect(recording.signals[0][start + i]).toBeCloseTo(first.channel0_head[i], 6);
    }
  });

  it("covers negative sample values", () => {
    const recording = parseBdf(fs.readFileSync(BDF_PATH));
    const f3 = recording.signals[0];
    expect(Math.min(...Array.from(f3.subarray(0, 1000)))).toBeLessThan(0);
  });

  it("rejects non-BDF input", () => {
    const junk = Buffer.alloc(512);
    expect(() => parseBdfHeader(junk)).toThrow(/BIOSEMI/);
  });

  it("rejects truncated data", () => {
    const whole = fs.readFileSync(BDF_PATH);
    const cut = whole.subarray(0, whole.length - 10);
    expect(() => parseBdf(cut)).toThrow(/truncated/);
  });
});

describe("mat5", () => {
  const matBuffer = fs.readFileSync(path.join(FIXTURES, "is", "S01.mat"));

  it("reads the trial matrix with MATLAB index order", () => {
    const matrices = parseMat(matBuffer);
    const eeg = matrices.get("EEG");
    expect(eeg).toBeDefined();
    expect(eeg!.dims.length).toBe(2);
    const check = expected.is.raw_check;
    expect(matGet(eeg!, check.row, check.col)).toBeCloseTo(check.value, 10);
  });

  it("rejects out-of-range indices", () => {
    const eeg = parseMat(matBuffer).get("EEG")!;
    expect(() => matGet(eeg, eeg.dims[0], 0)).toThrow(/out of range/);
  });

  it("rejects files without the IM endian marker", () => {
    const junk = Buffer.alloc(256);
    expect(() => parseMat(junk)).toThrow(/endian/);
  });
});
