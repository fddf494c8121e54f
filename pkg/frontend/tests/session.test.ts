import { describe, expect, inject, test } from "vitest";
import { SessionClient } from "../src/client";
import { buildResultsView } from "../src/results";
import {
  Proctor, runTrialFlow, trialViewModel, type TrialFlowScript,
} from "../src/trialflow";
import { wsFactory } from "./helpers";

const script: TrialFlowScript = {
  petEstimate: (trialIndex) => 70 + trialIndex,
  amtToleranceKg: 0.1,
};

interface LoggedRecord {
  kind: string;
  method: string | null;
  trial: number;
  level_pct: number;
  shown_kg: number;
  response_kg: number;
}

function recordsFromLog(log: string): LoggedRecord[] {
  return log.split("\n")
    .filter((line) => line.trim())
    .map((line) => JSON.parse(line) as { type: string; record?: LoggedRecord })
    .filter((event) => event.type === "estimate")
    .map((event) => event.record!);
}

describe("full session against a live service", () => {
  test("scripted driver completes all trials and server records match", async () => {
    const baseUrl = inject("baseUrl");
    const client = new SessionClient(baseUrl, wsFactory);
    const proctor = new Proctor(baseUrl);
    await client.createSession({
      participant: 3, base_weight: 60.0, model_id: "default",
      protocol: "full", seed: 42,
    });

    const { final, completed } = await runTrialFlow(client, proctor, script);
    expect(final.status).toBe("completed");
    expect(final.trial_count).toBe(45);
    expect(completed).toHaveLength(45);

    const records = recordsFromLog(await proctor.logText(client.sessionId!));
    expect(records).toHaveLength(45);
    for (const done of completed) {
      const record = records[done.trialIndex];
      expect(record.kind).toBe(done.kind);
      if (done.kind === "pet") {
        // the server stored exactly the estimate the participant typed
        expect(record.response_kg).toBe(done.estimateKg);
      } else {
        expect(record.method).toBe(done.method);
        // displayed final weight came from server ticks and was echoed back
        expect(done.finalTickKg).toBe(done.estimateKg);
        expect(record.response_kg).toBe(done.finalTickKg);
        // steering stopped within tolerance of the shown target
        expect(Math.abs(record.response_kg - record.shown_kg))
          .toBeLessThanOrEqual(script.amtToleranceKg);
      }
    }

    // every presentation reaching the client is a pure grid blend
    const morphs = client.history
      .filter((m) => m.text.includes('"morph"'))
      .map((m) => JSON.parse(m.text) as Record<string, unknown>);
    expect(morphs.length).toBe(18);
    for (const payload of morphs) {
      expect(Object.keys(payload).sort()).toEqual(["alpha", "hi", "lo", "t", "type"]);
    }

    // the results screen echoes the server report verbatim
    const raw = await client.fetchResultsText();
    const view = buildResultsView(raw);
    expect(view.raw).toBe(raw);
    expect(view.report.n_records).toBe(45);
    expect(view.perMethod).toHaveLength(3);
    for (const row of view.perMethod) {
      const server = view.report.amt_by_method![row.method];
      expect(row.n).toBe(server.n);
      expect(row.meanSignedPct).toBe(server.mean_signed_pct);
      expect(row.meanAbsolutePct).toBe(server.mean_absolute_pct);
    }
  });
});

describe("passive-trial weight secrecy", () => {
  test("presented weights never appear in the client message history", async () => {
    const baseUrl = inject("baseUrl");
    const base = 77.7;
    const client = new SessionClient(baseUrl, wsFactory);
    const proctor = new Proctor(baseUrl);
    await client.createSession({
      participant: 1, base_weight: base, model_id: "default",
      protocol: "pet", seed: 9,
    });
    const plan = await proctor.plan(client.sessionId!);
    const { final } = await runTrialFlow(client, proctor, script);
    expect(final.status).toBe("completed");

    const history = client.historyText();
    for (const entry of plan) {
      // level 0 presents the base body, whose weight the client sent itself
      if (entry.level === 0) continue;
      const presented = base * (1 + entry.level / 100);
      for (const form of [String(presented), presented.toFixed(3),
                          presented.toFixed(2), presented.toFixed(1)]) {
        expect(history).not.toContain(form);
      }
    }
    // nothing streamed or fetched during a passive session carries a weight key
    for (const message of client.history.filter((m) => m.direction === "received")) {
      expect(message.text).not.toContain('"kg"');
      expect(message.text).not.toContain("shown");
    }
  });
});

describe("reconnect and resume", () => {
  test("a fresh client resumes mid-session at the same trial", async () => {
    const baseUrl = inject("baseUrl");
    const proctor = new Proctor(baseUrl);
    const first = new SessionClient(baseUrl, wsFactory);
    await first.createSession({
      participant: 2, base_weight: 80.0, model_id: "default",
      protocol: "pet", seed: 4,
    });
    const sessionId = first.sessionId!;
    const plan = await proctor.plan(sessionId);

    let t = 0;
    for (let i = 0; i < 3; i++) {
      const payload = await proctor.presentLevel(sessionId, ++t, plan[i].level);
      first.receiveMorph(payload);
      await first.submitEstimate(++t, script.petEstimate(i));
    }
    first.disconnect();   // simulated crash: drop this client entirely

    const second = new SessionClient(baseUrl, wsFactory);
    const resumed = await second.resume(sessionId);
    expect(resumed.status).toBe("running");
    expect(resumed.trial_index).toBe(3);

    const { final, completed } = await runTrialFlow(second, proctor, script);
    expect(final.status).toBe("completed");
    expect(completed.map((c) => c.trialIndex)).toEqual([3, 4, 5, 6, 7, 8]);
    const records = recordsFromLog(await proctor.logText(sessionId));
    expect(records).toHaveLength(9);
  });
});

describe("trial screen model", () => {
  test("never exposes feedback or the passively presented weight", () => {
    const view = trialViewModel({
      status: "running", trial_index: 0, trial_count: 9,
      kind: "pet", method: null, presented: true,
    });
    expect(view).not.toBeNull();
    expect(Object.keys(view!).sort()).toEqual(
      ["kind", "method", "showEstimateField", "targetKg", "trialCount", "trialIndex"]);
    expect(view!.targetKg).toBeNull();
    const text = JSON.stringify(view);
    for (const banned of ["feedback", "error", "accuracy", "shown", "presented_kg"]) {
      expect(text).not.toContain(banned);
    }
  });

  test("active trials show the numeric target", () => {
    const view = trialViewModel({
      status: "running", trial_index: 10, trial_count: 45,
      kind: "amt", method: "joystick", target_kg: 66.0, current_kg: 60.0,
    });
    expect(view!.targetKg).toBe(66.0);
    expect(view!.showEstimateField).toBe(true);
  });
});
