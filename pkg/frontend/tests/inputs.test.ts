import { describe, expect, test } from "vitest";
import { InputMapper } from "../src/inputs";

describe("InputMapper", () => {
  test("full stick deflection emits a tilt 1.0 joystick sample", () => {
    const mapper = new InputMapper({ joystickSide: "right" });
    mapper.setActiveMethod("joystick");
    mapper.onGamepad(0.1, 1.0);
    expect(mapper.drain()).toEqual([
      { type: "input", t: 0.1, method: "joystick", side: "right", tilt: 1.0 },
    ]);
  });

  test("stick inside the deadzone emits zero tilt", () => {
    const mapper = new InputMapper({ stickDeadzone: 0.05 });
    mapper.setActiveMethod("joystick");
    mapper.onGamepad(0.1, 0.03);
    expect(mapper.drain()[0].tilt).toBe(0);
  });

  test("no input produces no samples", () => {
    const mapper = new InputMapper();
    mapper.setActiveMethod("gesture");
    expect(mapper.drain()).toEqual([]);
  });

  test("events for an inactive method are dropped", () => {
    const mapper = new InputMapper();
    mapper.setActiveMethod("gesture");
    mapper.onGamepad(0.1, 1.0);
    mapper.onContactButton(0.2, "plus");
    expect(mapper.drain()).toEqual([]);
    mapper.setActiveMethod(null);
    mapper.onPointerSpread(0.3, 100, true);
    mapper.onPointerSpread(0.4, 120, true);
    expect(mapper.drain()).toEqual([]);
  });

  test("pointer spread rate converts pixels per second to metres per second", () => {
    const mapper = new InputMapper({ spreadScalePerPx: 0.002 });
    mapper.setActiveMethod("gesture");
    mapper.onPointerSpread(0.0, 100, true);
    mapper.onPointerSpread(0.1, 150, true);   // +500 px/s
    const samples = mapper.drain();
    expect(samples).toHaveLength(1);
    expect(samples[0].method).toBe("gesture");
    expect(samples[0].triggers).toBe(true);
    expect(samples[0].rate).toBeCloseTo(1.0, 9);
  });

  test("pinching emits a negative rate", () => {
    const mapper = new InputMapper({ spreadScalePerPx: 0.002 });
    mapper.setActiveMethod("gesture");
    mapper.onPointerSpread(0.0, 150, true);
    mapper.onPointerSpread(0.1, 100, true);
    expect(mapper.drain()[0].rate).toBeLessThan(0);
  });

  test("held plus button for 2 s yields monotone timestamps of contact", () => {
    const mapper = new InputMapper({ maxHz: 90, queueCapacity: 400 });
    mapper.setActiveMethod("objects");
    for (let i = 0; i <= 180; i++) mapper.onContactButton(i / 90, "plus");
    const samples = mapper.drain();
    expect(samples.length).toBeGreaterThan(150);
    for (const s of samples) expect(s.touching).toBe("plus");
    for (let i = 1; i < samples.length; i++) {
      expect(samples[i].t).toBeGreaterThan(samples[i - 1].t);
    }
  });

  test("emission never exceeds the configured rate", () => {
    const mapper = new InputMapper({ maxHz: 90, queueCapacity: 10_000 });
    mapper.setActiveMethod("joystick");
    for (let i = 0; i < 2000; i++) mapper.onGamepad(i / 1000, 0.5); // 1 kHz poll
    const samples = mapper.drain();
    expect(samples.length).toBeLessThanOrEqual(2 * 90 + 1);
    for (let i = 1; i < samples.length; i++) {
      expect(samples[i].t - samples[i - 1].t).toBeGreaterThanOrEqual(1 / 90 - 1e-6);
    }
  });

  test("bounded queue drops the oldest samples on overflow", () => {
    const mapper = new InputMapper({ queueCapacity: 5, maxHz: 1000 });
    mapper.setActiveMethod("joystick");
    for (let i = 0; i < 12; i++) mapper.onGamepad(i * 0.01, 0.5);
    const samples = mapper.drain();
    expect(samples).toHaveLength(5);
    expect(mapper.dropped).toBe(7);
    expect(samples[0].t).toBeCloseTo(0.07, 12);
  });
});
