// Reader for BioSemi Data Format (BDF) files: the EDF header layout with
// 24-bit little-endian signed samples. Only what the converters need is
// implemented; annotations and discontinuous recordings are out of scope.

export interface BdfSignalInfo {
  label: string;
  transducer: string;
  physicalDimension: string;
  physicalMin: number;
  physicalMax: number;
  digitalMin: number;
  digitalMax: number;
  prefiltering: string;
  samplesPerRecord: number;
}

export interface BdfHeader {
  patientId: string;
  recordingId: string;
  startDate: string;
  startTime: string;
  headerBytes: number;
  recordCount: number;
  recordDurationS: number;
  signalCount: number;
  signals: BdfSignalInfo[];
}

export interface BdfRecording {
  header: BdfHeader;
  /** [signal][sample], physical units, all records concatenated */
  signals: Float64Array[];
  /** per signal, in Hz */
  samplingRates: number[];
}

function ascii(buffer: Buffer, offset: number, length: number): string {
  return buffer.toString("ascii", offset, offset + length).trim();
}

export function parseBdfHeader(buffer: Buffer): BdfHeader {
  if (buffer.length < 256) {
    throw new Error("file too short for a BDF header");
  }
  if (buffer[0] !== 0xff || ascii(buffer, 1, 7) !== "BIOSEMI") {
    throw new Error("not a BDF file (missing BIOSEMI identification)");
  }
  const patientId = ascii(buffer, 8, 80);
  const recordingId = ascii(buffer, 88, 80);
  const startDate = ascii(buffer, 168, 8);
  const startTime = ascii(buffer, 176, 8);
  const headerBytes = parseInt(ascii(buffer, 184, 8), 10);
  const recordCount = parseInt(ascii(buffer, 236, 8), 10);
  const recordDurationS = parseFloat(ascii(buffer, 244, 8));
  const signalCount = parseInt(ascii(buffer, 252, 4), 10);
  if (!Number.isFinite(signalCount) || signalCount <= 0) {
    throw new Error("BDF header declares no signals");
  }
  if (headerBytes !== 256 * (1 + signalCount)) {
    throw new Error(
      `BDF header size ${headerBytes} inconsistent with ${signalCount} signals`,
    );
  }
  if (buffer.length < headerBytes) {
    throw new Error("file truncated inside the signal header");
  }

  // Per-signal header: one field array after another, each field fixed-width.
  let offset = 256;
  const readField = (width: number): string[] => {
    const values: string[] = [];
    for (let i = 0; i < signalCount; i++) {
      values.push(ascii(buffer, offset, width));
      offset += width;
    }
    return values;
  };
  const labels = readField(16);
  const transducers = readField(80);
  const dimensions = readField(8);
  const physicalMins = readField(8).map(Number);
  const physicalMaxs = readField(8).map(Number);
  const digitalMins = readField(8).map(Number);
  const digitalMaxs = readField(8).map(Number);
  const prefilterings = readField(80);
  const samplesPerRecord = readField(8).map((s) => parseInt(s, 10));

  const signals: BdfSignalInfo[] = labels.map((label, i) => ({
    label,
    transducer: transducers[i],
    physicalDimension: dimensions[i],
    physicalMin: physicalMins[i],
    physicalMax: physicalMaxs[i],
    digitalMin: digitalMins[i],
    digitalMax: digitalMaxs[i],
    prefiltering: prefilterings[i],
    samplesPerRecord: samplesPerRecord[i],
  }));
  for (const s of signals) {
    if (s.digitalMax === s.digitalMin) {
      throw new Error(`signal ${s.label}: digital min equals digital max`);
    }
    if (!Number.isFinite(s.samplesPerRecord) || s.samplesPerRecord <= 0) {
      throw new Error(`signal ${s.label}: bad samples-per-record`);
    }
  }

  return {
    patientId,
    recordingId,
    startDate,
    startTime,
    headerBytes,
    recordCount,
    recordDurationS,
    signalCount,
    signals,
  };
}

function readInt24LE(buffer: Buffer, offset: number): number {
  const raw = buffer[offset] | (buffer[offset + 1] << 8) | (buffer[offset + 2] << 16);
  return raw >= 0x800000 ? raw - 0x1000000 : raw;
}

export function parseBdf(buffer: Buffer): BdfRecording {
  const header = parseBdfHeader(buffer);
  const recordBytes = header.signals.reduce((n, s) => n + 3 * s.samplesPerRecord, 0);
  const expected = header.headerBytes + header.recordCount * recordBytes;
  if (buffer.length < expected) {
    throw new Error(
      `BDF data truncated: ${buffer.length} bytes, expected ${expected}`,
    );
  }

  const signals = header.signals.map(
    (s) => new Float64Array(s.samplesPerRecord * header.recordCount),
  );
  const gains = header.signals.map(
    (s) => (s.physicalMax - s.physicalMin) / (s.digitalMax - s.digitalMin),
  );
  let offset = header.headerBytes;
  for (let record = 0; record < header.recordCount; record++) {
    for (let sig = 0; sig < header.signalCount; sig++) {
      const info = header.signals[sig];
      const out = signals[sig];
      const base = record * info.samplesPerRecord;
      for (let i = 0; i < info.samplesPerRecord; i++) {
        const digital = readInt24LE(buffer, offset);
        out[base + i] = (digital - info.digitalMin) * gains[sig] + info.physicalMin;
        offset += 3;
      }
    }
  }

  const samplingRates = header.signals.map(
    (s) => s.samplesPerRecord / header.recordDurationS,
  );
  return { header, signals, samplingRates };
}
