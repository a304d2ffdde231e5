// Section-table binary container (magic "GAVA"), the same layout the
// Python side writes; see docs/format.md at the repository root.

export class ContainerError extends Error {
  constructor(message: string, readonly section?: string) {
    super(section ? `${section}: ${message}` : message);
    this.name = "ContainerError";
  }
}

const MAGIC = 0x41564147; // "GAVA" little-endian
const VERSION = 1;
const HEADER_SIZE = 16;
const ENTRY_SIZE = 96;

export type Section = {
  dtype: "<f4" | "<f8" | "<i4" | "<i8" | "|u1";
  shape: number[];
  data: Float32Array | Float64Array | Int32Array | BigInt64Array | Uint8Array;
};

function decodeName(bytes: Uint8Array): string {
  let end = bytes.indexOf(0);
  if (end < 0) end = bytes.length;
  return new TextDecoder().decode(bytes.subarray(0, end));
}

export function parseContainer(buffer: ArrayBuffer): Map<string, Section> {
  if (buffer.byteLength < HEADER_SIZE) {
    throw new ContainerError("file shorter than container header");
  }
  const view = new DataView(buffer);
  if (view.getUint32(0, true) !== MAGIC) {
    throw new ContainerError("bad magic, not a GAVA container");
  }
  const version = view.getUint16(4, true);
  if (version !== VERSION) {
    throw new ContainerError(`unsupported container version ${version}`);
  }
  const count = view.getUint32(8, true);
  if (buffer.byteLength < HEADER_SIZE + count * ENTRY_SIZE) {
    throw new ContainerError("section table extends past end of file", "<table>");
  }

  const sections = new Map<string, Section>();
  const bytes = new Uint8Array(buffer);
  for (let i = 0; i < count; i++) {
    const base = HEADER_SIZE + i * ENTRY_SIZE;
    const name = decodeName(bytes.subarray(base, base + 32));
    const dtype = decodeName(bytes.subarray(base + 32, base + 40)) as Section["dtype"];
    const ndim = view.getUint32(base + 40, true);
    if (ndim > 4) throw new ContainerError(`ndim ${ndim} out of range`, name);
    const shape: number[] = [];
    for (let d = 0; d < ndim; d++) {
      shape.push(Number(view.getBigUint64(base + 48 + 8 * d, true)));
    }
    const offset = Number(view.getBigUint64(base + 80, true));
    const nbytes = Number(view.getBigUint64(base + 88, true));
    if (offset + nbytes > buffer.byteLength) {
      throw new ContainerError("section extends past end of file", name);
    }
    const elements = shape.reduce((a, b) => a * b, 1);
    const data = makeArray(dtype, buffer, offset, nbytes, elements, name);
    sections.set(name, { dtype, shape, data });
  }
  return sections;
}

function makeArray(
  dtype: Section["dtype"],
  buffer: ArrayBuffer,
  offset: number,
  nbytes: number,
  elements: number,
  name: string,
): Section["data"] {
  const check = (itemsize: number) => {
    if (nbytes !== elements * itemsize) {
      throw new ContainerError(
        `byte length ${nbytes} does not match shape product ${elements * itemsize}`,
        name,
      );
    }
  };
  // sections are 64-byte aligned in the file, so typed-array views are safe
  switch (dtype) {
    case "<f4":
      check(4);
      return new Float32Array(buffer, offset, elements);
    case "<f8":
      check(8);
      return new Float64Array(buffer, offset, elements);
    case "<i4":
      check(4);
      return new Int32Array(buffer, offset, elements);
    case "<i8":
      check(8);
      return new BigInt64Array(buffer, offset, elements);
    case "|u1":
      check(1);
      return new Uint8Array(buffer, offset, elements);
    default:
      throw new ContainerError(`unknown dtype tag ${dtype}`, name);
  }
}
