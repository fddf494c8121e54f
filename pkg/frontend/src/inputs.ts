import type { InputMessage, ModMethod } from "./types";

export interface InputMapperConfig {
  /** Emission ceiling in samples per second. */
  maxHz: number;
  /** Pointer-spread metres per screen pixel for the gesture analog. */
  spreadScalePerPx: number;
  /** Which stick side drives the joystick method. */
  joystickSide: "left" | "right";
  /** Stick deflections below this emit zero tilt. */
  stickDeadzone: number;
  /** Bounded queue capacity; oldest samples drop on overflow. */
  queueCapacity: number;
}

export const DEFAULT_INPUT_CONFIG: InputMapperConfig = {
  maxHz: 90,
  spreadScalePerPx: 0.002,
  joystickSide: "right",
  stickDeadzone: 0.05,
  queueCapacity: 256,
};

/**
 * Maps raw device events onto the service's input-sample schema.
 *
 * Only events matching the active trial's method are emitted; everything else
 * is dropped client-side. Emission is rate-limited to maxHz and buffered in a
 * bounded drop-oldest queue so rendering and network I/O stay decoupled.
 */
export class InputMapper {
  private readonly cfg: InputMapperConfig;
  private method: ModMethod | null = null;
  private queue: InputMessage[] = [];
  private lastEmitT = -Infinity;
  private lastSpread: { t: number; px: number } | null = null;
  dropped = 0;

  constructor(config: Partial<InputMapperConfig> = {}) {
    this.cfg = { ...DEFAULT_INPUT_CONFIG, ...config };
  }

  setActiveMethod(method: ModMethod | null): void {
    this.method = method;
    this.lastSpread = null;
  }

  /** Gamepad poll: vertical stick axis in [-1, 1], up = heavier. */
  onGamepad(t: number, stickY: number): void {
    if (this.method !== "joystick") return;
    const tilt = Math.abs(stickY) < this.cfg.stickDeadzone
      ? 0
      : Math.max(-1, Math.min(1, stickY));
    this.emit({
      type: "input", t, method: "joystick",
      side: this.cfg.joystickSide, tilt,
    });
  }

  /** Two-pointer gesture: distance between pointers in pixels. */
  onPointerSpread(t: number, distancePx: number, triggersPressed: boolean): void {
    if (this.method !== "gesture") return;
    const prev = this.lastSpread;
    this.lastSpread = { t, px: distancePx };
    if (prev === null || t <= prev.t) return;
    const rate = ((distancePx - prev.px) / (t - prev.t)) * this.cfg.spreadScalePerPx;
    this.emit({
      type: "input", t, method: "gesture",
      triggers: triggersPressed, rate,
    });
  }

  /** Held on-screen plus/minus button; null while nothing is held. */
  onContactButton(t: number, touching: "plus" | "minus" | null): void {
    if (this.method !== "objects") return;
    this.emit({ type: "input", t, method: "objects", touching });
  }

  /** Samples ready to send; clears the queue. */
  drain(): InputMessage[] {
    const out = this.queue;
    this.queue = [];
    return out;
  }

  get queued(): number {
    return this.queue.length;
  }

  private emit(sample: InputMessage): void {
    // small slack so device polls at exactly maxHz are not halved by rounding
    if (sample.t - this.lastEmitT < 1 / this.cfg.maxHz - 1e-9) return;
    this.lastEmitT = sample.t;
    this.queue.push(sample);
    while (this.queue.length > this.cfg.queueCapacity) {
      this.queue.shift();
      this.dropped++;
    }
  }
}
