// Viewer session logic, kept free of DOM so it can be tested headlessly.
// All animation math lives in ../core; this module only decides, per
// display frame, which parameters and camera the core should run with.
// Parameter updates coalesce latest-wins and exactly one render job is
// handed out per tick.

import { Avatar, parseAvatar } from "../core/avatar.js";
import { Camera, Orbit, orbitCamera } from "../core/camera.js";
import { DrivingFrame, parseDrivingStream, StreamParseError } from "../core/stream.js";

export const EXPR_RANGE: [number, number] = [-3, 3];
export const POSE_RANGE: [number, number] = [-0.5, 0.5];

export interface RenderJob {
  theta: Float64Array;
  phi: Float64Array;
  camera: Camera;
  playbackFrame: number | null;
}

export interface Playback {
  frames: DrivingFrame[];
  playing: boolean;
  fpsTarget: number;
  cursor: number;
  startedAtMs: number | null; // wall time corresponding to cursor when playing
}

const clamp = (v: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, v));

export class ViewerSession {
  avatar: Avatar | null = null;
  error: string | null = null;
  notice: string | null = null;
  theta = new Float64Array(0);
  phi = new Float64Array(0);
  orbit: Orbit = { azimuth: 0, elevation: 0, distance: 0.8 };
  playback: Playback | null = null;
  viewWidth: number;
  viewHeight: number;
  fps = 0;

  private dirty = false;
  private inFlight = false;
  private lastFrameDoneMs: number | null = null;
  private displayedPlaybackFrame = -1;

  constructor(viewWidth = 384, viewHeight = 384) {
    this.viewWidth = viewWidth;
    this.viewHeight = viewHeight;
  }

  loadAsset(buffer: ArrayBuffer): boolean {
    try {
      this.avatar = parseAvatar(buffer);
    } catch (e) {
      this.avatar = null;
      this.error = `asset rejected: ${(e as Error).message}`;
      return false;
    }
    this.error = null;
    this.notice = `loaded ${this.avatar.numPoints} points, ` +
      `${this.avatar.nExpr} expression / ${3 * this.avatar.numJoints} pose coefficients`;
    this.theta = new Float64Array(3 * this.avatar.numJoints);
    this.phi = new Float64Array(this.avatar.nExpr);
    this.playback = null;
    this.dirty = true;
    return true;
  }

  setExpression(index: number, value: number): void {
    if (!this.avatar || index < 0 || index >= this.phi.length) return;
    this.phi[index] = clamp(value, EXPR_RANGE[0], EXPR_RANGE[1]);
    this.dirty = true;
  }

  setPose(index: number, value: number): void {
    if (!this.avatar || index < 0 || index >= this.theta.length) return;
    this.theta[index] = clamp(value, POSE_RANGE[0], POSE_RANGE[1]);
    this.dirty = true;
  }

  setOrbit(orbit: Partial<Orbit>): void {
    this.orbit = {
      azimuth: orbit.azimuth ?? this.orbit.azimuth,
      elevation: orbit.elevation ?? this.orbit.elevation,
      distance: Math.max(orbit.distance ?? this.orbit.distance, 1e-3),
    };
    this.dirty = true;
  }

  loadSequence(text: string, fpsTarget = 25): boolean {
    if (!this.avatar) {
      this.error = "load an asset before a driving stream";
      return false;
    }
    let frames: DrivingFrame[];
    try {
      frames = parseDrivingStream(text, this.viewWidth, this.viewHeight);
    } catch (e) {
      if (e instanceof StreamParseError) {
        this.error = `driving stream rejected: ${e.message}`;
      } else {
        this.error = `driving stream rejected: ${(e as Error).message}`;
      }
      return false;
    }
    if (frames.length === 0) {
      this.notice = "driving stream is empty; nothing to play";
      return false;
    }
    const f = frames[0];
    if (f.theta.length !== this.theta.length || f.phi.length !== this.phi.length) {
      this.error =
        `driving stream rejected: frame parameters (${f.theta.length} pose, ` +
        `${f.phi.length} expression) do not match the asset`;
      return false;
    }
    this.error = null;
    this.notice = `loaded ${frames.length} driving frames`;
    this.playback = {
      frames, playing: false, fpsTarget, cursor: 0, startedAtMs: null,
    };
    this.displayedPlaybackFrame = -1;
    this.dirty = true;
    return true;
  }

  play(nowMs: number): void {
    if (!this.playback) return;
    this.playback.playing = true;
    this.playback.startedAtMs = nowMs - (this.playback.cursor / this.playback.fpsTarget) * 1000;
  }

  pause(): void {
    if (!this.playback) return;
    this.playback.playing = false;
    this.playback.startedAtMs = null;
  }

  /** Deterministic scrub: cursor = frame index, clamped into range. */
  seek(frame: number, nowMs: number): void {
    if (!this.playback) return;
    this.playback.cursor = clamp(Math.round(frame), 0, this.playback.frames.length - 1);
    if (this.playback.playing) this.play(nowMs);
    this.dirty = true;
  }

  /**
   * Hand out at most one render job per display frame. Slider mode renders
   * only when parameters changed; playback mode advances the cursor on the
   * wall clock (frame f shows at f / fpsTarget seconds).
   */
  tick(nowMs: number): RenderJob | null {
    if (!this.avatar || this.inFlight) return null;
    if (this.playback && this.playback.playing) {
      const pb = this.playback;
      const elapsed = (nowMs - (pb.startedAtMs ?? nowMs)) / 1000;
      let target = Math.floor(elapsed * pb.fpsTarget);
      if (target >= pb.frames.length) {
        this.pause();
        target = pb.frames.length - 1;
      }
      pb.cursor = target;
      if (pb.cursor === this.displayedPlaybackFrame && !this.dirty) {
        return null; // current frame already displayed
      }
      this.dirty = false;
      this.inFlight = true;
      this.displayedPlaybackFrame = pb.cursor;
      const frame = pb.frames[pb.cursor];
      return {
        theta: frame.theta, phi: frame.phi, camera: frame.camera,
        playbackFrame: pb.cursor,
      };
    }
    if (this.playback && !this.playback.playing && this.dirty) {
      // paused: show the scrubbed frame
      const frame = this.playback.frames[this.playback.cursor];
      this.dirty = false;
      this.inFlight = true;
      this.displayedPlaybackFrame = this.playback.cursor;
      return {
        theta: frame.theta, phi: frame.phi, camera: frame.camera,
        playbackFrame: this.playback.cursor,
      };
    }
    if (!this.dirty) return null;
    this.dirty = false;
    this.inFlight = true;
    return {
      theta: this.theta, phi: this.phi,
      camera: orbitCamera(this.orbit, this.viewWidth, this.viewHeight),
      playbackFrame: null,
    };
  }

  /** Mark the handed-out job as displayed; updates the fps readout. */
  completeFrame(nowMs: number): void {
    this.inFlight = false;
    if (this.lastFrameDoneMs !== null) {
      const dt = (nowMs - this.lastFrameDoneMs) / 1000;
      if (dt > 0) {
        const inst = 1 / dt;
        this.fps = this.fps === 0 ? inst : 0.9 * this.fps + 0.1 * inst;
      }
    }
    this.lastFrameDoneMs = nowMs;
  }
}
