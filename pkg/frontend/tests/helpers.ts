import { execFileSync } from "node:child_process";
import { existsSync, readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

export const FIXTURE_DIR = join(dirname(fileURLToPath(import.meta.url)), ".generated");

let generated = false;

/** Build the cross-check fixtures once per test run via the Python CLI. */
export function ensureFixtures(): void {
  if (generated && existsSync(join(FIXTURE_DIR, "meta.json"))) return;
  execFileSync(
    "python3",
    [join(dirname(fileURLToPath(import.meta.url)), "fixtures", "make_fixtures.py"), FIXTURE_DIR],
    { stdio: "pipe" },
  );
  generated = true;
}

export function readFixture(name: string): Buffer {
  return readFileSync(join(FIXTURE_DIR, name));
}

export function fixtureArrayBuffer(name: string): ArrayBuffer {
  const buf = readFixture(name);
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
}

/** Parse a binary P6 PPM into width/height and raw RGB bytes. */
export function parsePPM(buf: Buffer): { width: number; height: number; rgb: Uint8Array } {
  const header = buf.subarray(0, 64).toString("latin1");
  const match = header.match(/^P6\s+(\d+)\s+(\d+)\s+255\s/);
  if (!match) throw new Error("not a P6 PPM");
  const width = Number(match[1]);
  const height = Number(match[2]);
  const offset = match[0].length;
  return { width, height, rgb: new Uint8Array(buf.subarray(offset, offset + width * height * 3)) };
}
