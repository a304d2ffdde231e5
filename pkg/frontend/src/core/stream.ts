// JSON Lines driving stream: one {theta, phi, camera} object per line.

import { Camera } from "./camera.js";

export class StreamParseError extends Error {
  constructor(readonly lineNumber: number, message: string) {
    super(`line ${lineNumber}: ${message}`);
    this.name = "StreamParseError";
  }
}

export interface DrivingFrame {
  theta: Float64Array;
  phi: Float64Array;
  camera: Camera;
}

export function parseDrivingStream(
  text: string,
  width: number,
  height: number,
): DrivingFrame[] {
  const frames: DrivingFrame[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let obj: any;
    try {
      obj = JSON.parse(line);
    } catch (e) {
      throw new StreamParseError(i + 1, (e as Error).message);
    }
    try {
      const cam = obj.camera;
      const w2c = Float64Array.from(cam.w2c as number[]);
      if (w2c.length !== 16) throw new Error("camera.w2c must hold 16 floats");
      frames.push({
        theta: Float64Array.from(obj.theta as number[]),
        phi: Float64Array.from(obj.phi as number[]),
        camera: {
          fx: Number(cam.fx), fy: Number(cam.fy),
          cx: Number(cam.cx), cy: Number(cam.cy),
          w2c, width, height,
        },
      });
    } catch (e) {
      throw new StreamParseError(i + 1, (e as Error).message);
    }
  }
  return frames;
}
