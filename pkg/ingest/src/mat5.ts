// Minimal reader for MATLAB Level-5 MAT files: uncompressed, little-endian,
// numeric arrays only. Enough to load the published per-subject trial
// matrices; cell arrays, structs, sparse and compressed elements are
// rejected with a clear error.

const MI_INT8 = 1;
const MI_UINT8 = 2;
const MI_INT16 = 3;
const MI_UINT16 = 4;
const MI_INT32 = 5;
const MI_UINT32 = 6;
const MI_SINGLE = 7;
const MI_DOUBLE = 9;
const MI_INT64 = 12;
const MI_UINT64 = 13;
const MI_MATRIX = 14;
const MI_COMPRESSED = 15;

const NUMERIC_CLASSES = new Set([6, 7, 8, 9, 10, 11, 12, 13, 14, 15]); // mxDOUBLE..mxUINT64

export interface MatMatrix {
  /** MATLAB dimensions, e.g. [rows, cols] or [d0, d1, d2] */
  dims: number[];
  /** column-major (first dimension fastest), converted to float64 */
  data: Float64Array;
}

/** Element accessor with MATLAB (column-major) index order. */
export function matGet(m: MatMatrix, ...index: number[]): number {
  if (index.length !== m.dims.length) {
    throw new Error(`expected ${m.dims.length} indices, got ${index.length}`);
  }
  let flat = 0;
  let stride = 1;
  for (let d = 0; d < m.dims.length; d++) {
    if (index[d] < 0 || index[d] >= m.dims[d]) {
      throw new Error(`index ${index[d]} out of range for dimension ${d}`);
    }
    flat += index[d] * stride;
    stride *= m.dims[d];
  }
  return m.data[flat];
}

function readNumericData(
  buffer: Buffer,
  offset: number,
  type: number,
  numBytes: number,
): Float64Array {
  const readers: Record<number, [number, (o: number) => number]> = {
    [MI_INT8]: [1, (o) => buffer.readInt8(o)],
    [MI_UINT8]: [1, (o) => buffer.readUInt8(o)],
    [MI_INT16]: [2, (o) => buffer.readInt16LE(o)],
    [MI_UINT16]: [2, (o) => buffer.readUInt16LE(o)],
    [MI_INT32]: [4, (o) => buffer.readInt32LE(o)],
    [MI_UINT32]: [4, (o) => buffer.readUInt32LE(o)],
    [MI_SINGLE]: [4, (o) => buffer.readFloatLE(o)],
    [MI_DOUBLE]: [8, (o) => buffer.readDoubleLE(o)],
    [MI_INT64]: [8, (o) => Number(buffer.readBigInt64LE(o))],
    [MI_UINT64]: [8, (o) => Number(buffer.readBigUInt64LE(o))],
  };
  const entry = readers[type];
  if (!entry) {
    throw new Error(`unsupported MAT data type ${type}`);
  }
  const [width, read] = entry;
  const count = numBytes / width;
  const out = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = read(offset + i * width);
  }
  return out;
}

interface Tag {
  type: number;
  numBytes: number;
  dataOffset: number;
  nextOffset: number;
}

function readTag(buffer: Buffer, offset: number): Tag {
  const word = buffer.readUInt32LE(offset);
  const small = word >>> 16;
  if (small !== 0) {
    // small data element: type and length packed into one word
    return {
      type: word & 0xffff,
      numBytes: small,
      dataOffset: offset + 4,
      nextOffset: offset + 8,
    };
  }
  const numBytes = buffer.readUInt32LE(offset + 4);
  const aligned = Math.ceil(numBytes / 8) * 8;
  return {
    type: word,
    numBytes,
    dataOffset: offset + 8,
    nextOffset: offset + 8 + aligned,
  };
}

function parseMatrix(buffer: Buffer, tag: Tag): { name: string; matrix: MatMatrix } {
  let offset = tag.dataOffset;

  const flagsTag = readTag(buffer, offset);
  if (flagsTag.type !== MI_UINT32 || flagsTag.numBytes !== 8) {
    throw new Error("malformed array flags element");
  }
  const flags = buffer.readUInt32LE(flagsTag.dataOffset);
  const arrayClass = flags & 0xff;
  const complex = (flags & 0x0800) !== 0;
  if (!NUMERIC_CLASSES.has(arrayClass)) {
    throw new Error(`unsupported MAT array class ${arrayClass} (numeric arrays only)`);
  }
  if (complex) {
    throw new Error("complex MAT arrays not supported");
  }
  offset = flagsTag.nextOffset;

  const dimsTag = readTag(buffer, offset);
  if (dimsTag.type !== MI_INT32) {
    throw new Error("malformed dimensions element");
  }
  const dims: number[] = [];
  for (let i = 0; i < dimsTag.numBytes / 4; i++) {
    dims.push(buffer.readInt32LE(dimsTag.dataOffset + i * 4));
  }
  offset = dimsTag.nextOffset;

  const nameTag = readTag(buffer, offset);
  if (nameTag.type !== MI_INT8) {
    throw new Error("malformed array name element");
  }
  const name = buffer.toString("ascii", nameTag.dataOffset, nameTag.dataOffset + nameTag.numBytes);
  offset = nameTag.nextOffset;

  const dataTag = readTag(buffer, offset);
  const data = readNumericData(buffer, dataTag.dataOffset, dataTag.type, dataTag.numBytes);
  const expected = dims.reduce((a, b) => a * b, 1);
  if (data.length !== expected) {
    throw new Error(`matrix ${name}: ${data.length} values for dims [${dims.join(",")}]`);
  }
  return { name, matrix: { dims, data } };
}

/** Parse an uncompressed little-endian Level-5 MAT file into named matrices. */
export function parseMat(buffer: Buffer): Map<string, MatMatrix> {
  if (buffer.length < 128) {
    throw new Error("file too short for a MAT header");
  }
  const endian = buffer.toString("ascii", 126, 128);
  if (endian !== "IM") {
    throw new Error("big-endian MAT files not supported");
  }
  const version = buffer.readUInt16LE(124);
  if (version !== 0x0100) {
    throw new Error(`unsupported MAT version 0x${version.toString(16)}`);
  }

  const matrices = new Map<string, MatMatrix>();
  let offset = 128;
  while (offset + 8 <= buffer.length) {
    const tag = readTag(buffer, offset);
    if (tag.type === MI_COMPRESSED) {
      throw new Error("compressed MAT elements not supported; save without compression");
    }
    if (tag.type !== MI_MATRIX) {
      throw new Error(`unexpected top-level MAT element type ${tag.type}`);
    }
    const { name, matrix } = parseMatrix(buffer, tag);
    matrices.set(name, matrix);
    offset = tag.nextOffset;
  }
  return matrices;
}
