import { SessionClient } from "./client";
import type { InputMessage, ModMethod, MorphPayload, TrialDescriptor } from "./types";

export interface PlanEntry {
  kind: "pet" | "amt";
  method: ModMethod | null;
  level: number;
}

/**
 * Experimenter-side controls. These calls are intentionally not part of the
 * participant client's history: the experimenter chooses which body to
 * present, and only the resulting morph blend is forwarded to the client.
 */
export class Proctor {
  constructor(private readonly baseUrl: string) {}

  async plan(sessionId: string): Promise<PlanEntry[]> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/log`);
    if (!resp.ok) throw new Error(`log fetch failed: ${resp.status}`);
    const header = JSON.parse((await resp.text()).split("\n")[0]) as {
      plan: PlanEntry[];
    };
    return header.plan;
  }

  async presentLevel(sessionId: string, t: number, level: number): Promise<MorphPayload> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/level`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ t, level }),
    });
    const data = await resp.json();
    if (!resp.ok) throw new Error((data as { error?: string }).error ?? "level failed");
    return data as MorphPayload;
  }

  async resultsText(sessionId: string): Promise<string> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/results`);
    const text = await resp.text();
    if (!resp.ok) throw new Error(text);
    return text;
  }

  async logText(sessionId: string): Promise<string> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/log`);
    if (!resp.ok) throw new Error(`log fetch failed: ${resp.status}`);
    return await resp.text();
  }

  /** Latest event timestamp in the session log; 0 for a fresh session. */
  async lastTimestamp(sessionId: string): Promise<number> {
    let last = 0;
    for (const line of (await this.logText(sessionId)).split("\n")) {
      if (!line.trim()) continue;
      const t = (JSON.parse(line) as { t?: number }).t;
      if (typeof t === "number" && t > last) last = t;
    }
    return last;
  }
}

/**
 * What the participant's trial screen may show. There is deliberately no
 * field for accuracy or error feedback, and passive trials carry no number.
 */
export interface TrialView {
  kind: "pet" | "amt";
  trialIndex: number;
  trialCount: number;
  showEstimateField: boolean;
  targetKg: number | null;
  method: ModMethod | null;
}

export function trialViewModel(trial: TrialDescriptor): TrialView | null {
  if (trial.status !== "running" || !trial.kind) return null;
  return {
    kind: trial.kind,
    trialIndex: trial.trial_index,
    trialCount: trial.trial_count,
    showEstimateField: trial.kind === "pet" ? trial.presented === true : true,
    targetKg: trial.kind === "amt" ? trial.target_kg ?? null : null,
    method: (trial.method ?? null) as ModMethod | null,
  };
}

export interface TrialFlowScript {
  /** Participant's weight guess for a passive trial. */
  petEstimate(trialIndex: number): number;
  /** Steering stops once the live weight is this close to the target. */
  amtToleranceKg: number;
}

export interface FlowOptions {
  /** Seconds between emitted input samples while steering. */
  inputDt?: number;
  maxStepsPerTrial?: number;
}

function steeringSample(t: number, method: ModMethod, direction: number): InputMessage {
  if (method === "joystick") {
    return { type: "input", t, method, side: "right", tilt: 0.6 * direction };
  }
  if (method === "gesture") {
    return { type: "input", t, method, triggers: true, rate: 0.4 * direction };
  }
  return { type: "input", t, method, touching: direction >= 0 ? "plus" : "minus" };
}

export interface CompletedTrial {
  trialIndex: number;
  kind: "pet" | "amt";
  method: ModMethod | null;
  /** What the participant submitted. */
  estimateKg: number;
  /** Last authoritative weight tick before confirming (active trials). */
  finalTickKg: number | null;
}

export interface TrialFlowResult {
  final: TrialDescriptor;
  completed: CompletedTrial[];
}

/**
 * Drives a session to completion: passive trials are presented by the
 * experimenter and answered from the script; active trials are steered over
 * the stream until the live weight sits within tolerance of the target.
 * Session timestamps are strictly increasing across the whole run.
 */
export async function runTrialFlow(
  client: SessionClient,
  proctor: Proctor,
  script: TrialFlowScript,
  options: FlowOptions = {},
): Promise<TrialFlowResult> {
  const dt = options.inputDt ?? 1 / 90;
  const maxSteps = options.maxStepsPerTrial ?? 20000;
  const sessionId = client.sessionId;
  if (!sessionId) throw new Error("no session attached");
  const plan = await proctor.plan(sessionId);

  // resume-safe: session timestamps must stay strictly increasing
  let clock = await proctor.lastTimestamp(sessionId);
  const tick = () => { clock += dt; return clock; };

  const completed: CompletedTrial[] = [];
  let trial = await client.refreshTrial();
  while (trial.status === "running") {
    const entry = plan[trial.trial_index];
    const index = trial.trial_index;
    if (trial.kind === "pet") {
      const payload = await proctor.presentLevel(sessionId, tick(), entry.level);
      client.receiveMorph(payload);
      const estimate = script.petEstimate(index);
      trial = await client.submitEstimate(tick(), estimate);
      completed.push({
        trialIndex: index, kind: "pet", method: null,
        estimateKg: estimate, finalTickKg: null,
      });
    } else {
      if (!client.connected) await client.connect();
      const target = trial.target_kg!;
      let current = trial.current_kg!;
      let lastTick: number | null = null;
      let steps = 0;
      while (Math.abs(current - target) > script.amtToleranceKg) {
        if (++steps > maxSteps) {
          throw new Error(`trial ${index}: target not reached`);
        }
        const sample = steeringSample(
          tick(), trial.method as ModMethod, Math.sign(target - current));
        lastTick = (await client.sendInput(sample)).kg;
        current = lastTick;
      }
      const method = trial.method as ModMethod;
      trial = await client.submitEstimate(tick(), current);
      completed.push({
        trialIndex: index, kind: "amt", method,
        estimateKg: current, finalTickKg: lastTick ?? current,
      });
    }
  }
  client.disconnect();
  return { final: trial, completed };
}
