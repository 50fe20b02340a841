import { describe, expect, it } from "vitest";

import { phoneConfig, phoneNoReaimConfig, pcConfig } from "../src/config.js";
import { MockBackend } from "../src/mockBackend.js";
import { runScriptedSession } from "../src/scripted.js";
import { GOLDEN_DEVICES } from "../src/emitSample.js";

const DEVICES = GOLDEN_DEVICES;

function phoneBackend(failUploads = 0) {
  return new MockBackend({
    kind: "phone",
    threshold: 3,
    devices: DEVICES,
    failUploads,
  });
}

describe("scripted whole sessions", () => {
  it("a NoResize session is rejected and never reaches pointing", async () => {
    const backend = phoneBackend();
    const outcome = await runScriptedSession({
      config: phoneConfig({ devices: DEVICES }),
      participantId: "noresize",
      seed: 5,
      fetchImpl: backend.fetch,
      resolution: { w: 393, h: 852 },
      pretask: "noresize",
    });
    expect(outcome.gate.decision).toBe("reject");
    expect(outcome.session.phase).toBe("rejected");
    expect(outcome.session.trialCount()).toBe(0);
    expect(outcome.upload).toBeNull();
    expect(backend.storedSessions.size).toBe(0);
    // The recorded outcome itself is never dropped.
    expect(outcome.session.pretask.outcome().adjustments[0].op_time).toBe(0);
  });

  it("a conforming phone session is admitted and uploads 360 main trials", async () => {
    const backend = phoneBackend();
    const outcome = await runScriptedSession({
      config: phoneConfig({ devices: DEVICES }),
      participantId: "ok",
      seed: 6,
      fetchImpl: backend.fetch,
      resolution: { w: 393, h: 852 },
      pretask: "conforming",
    });
    expect(outcome.gate.decision).toBe("admit");
    expect(outcome.session.phase).toBe("done");
    expect(outcome.upload?.status).toBe("stored");
    const stored = JSON.parse(backend.storedSessions.get("ok")!);
    const main = stored.trials.filter(
      (t: { condition: { instruction: string } }) =>
        t.condition.instruction !== "Practice",
    );
    expect(main).toHaveLength(360);
    expect(stored.trials).toHaveLength(450); // incl. the practice block
    expect(stored.runner_seed).toBe(6);
  });

  it("a conforming pc session uploads 60 main trials", async () => {
    const backend = new MockBackend({ kind: "pc", threshold: 20 });
    const outcome = await runScriptedSession({
      config: pcConfig(),
      participantId: "pc-ok",
      seed: 7,
      fetchImpl: backend.fetch,
      resolution: null,
      pretask: "conforming",
    });
    expect(outcome.gate.decision).toBe("admit");
    const stored = JSON.parse(backend.storedSessions.get("pc-ok")!);
    const main = stored.trials.filter(
      (t: { condition: { instruction: string } }) =>
        t.condition.instruction !== "Practice",
    );
    expect(main).toHaveLength(60);
  });

  it("no-reaim sessions record first-attempt failures", async () => {
    const backend = phoneBackend();
    const outcome = await runScriptedSession({
      config: phoneNoReaimConfig({ devices: DEVICES }),
      participantId: "nr",
      seed: 8,
      fetchImpl: backend.fetch,
      resolution: { w: 393, h: 852 },
      pretask: "conforming",
      missEvery: 10,
    });
    const stored = JSON.parse(backend.storedSessions.get("nr")!);
    const failures = stored.trials.filter((t: { success: boolean }) => !t.success);
    expect(failures.length).toBeGreaterThan(0);
    for (const trial of stored.trials) {
      expect(trial.reaim_count).toBe(0);
    }
  });

  it("re-aim sessions always end successful with first-attempt endpoints", async () => {
    const backend = phoneBackend();
    const outcome = await runScriptedSession({
      config: phoneConfig({ devices: DEVICES }),
      participantId: "ra",
      seed: 9,
      fetchImpl: backend.fetch,
      resolution: { w: 393, h: 852 },
      pretask: "conforming",
      missEvery: 12,
    });
    const stored = JSON.parse(backend.storedSessions.get("ra")!);
    const reaimed = stored.trials.filter(
      (t: { reaim_count: number }) => t.reaim_count > 0,
    );
    expect(reaimed.length).toBeGreaterThan(0);
    for (const trial of stored.trials) {
      expect(trial.success).toBe(true);
    }
    // Forced misses aim one unit past the band edge; the recorded
    // endpoint must be that first (missed) attempt.
    for (const trial of reaimed) {
      const offset = Math.abs(trial.endpoint[1] - trial.target_center[1]);
      expect(offset).toBeCloseTo(trial.condition.width_W / 2 + 1, 6);
    }
  });

  it("duplicate upload acknowledges idempotently", async () => {
    const backend = phoneBackend();
    const outcome = await runScriptedSession({
      config: phoneConfig({ devices: DEVICES }),
      participantId: "dup",
      seed: 10,
      fetchImpl: backend.fetch,
      resolution: { w: 393, h: 852 },
      pretask: "conforming",
    });
    expect(outcome.upload?.status).toBe("stored");
    const again = await runScriptedSession({
      config: phoneConfig({ devices: DEVICES }),
      participantId: "dup",
      seed: 10,
      fetchImpl: backend.fetch,
      resolution: { w: 393, h: 852 },
      pretask: "conforming",
    });
    expect(again.upload?.status).toBe("duplicate");
    expect(backend.storedSessions.size).toBe(1);
  });

  it("aborting mid-session uploads a partial-flagged log", async () => {
    const backend = phoneBackend();
    const outcome = await runScriptedSession({
      config: phoneConfig({ devices: DEVICES }),
      participantId: "abort",
      seed: 11,
      fetchImpl: backend.fetch,
      resolution: { w: 393, h: 852 },
      pretask: "conforming",
      upload: false,
    });
    // Simulate a later abort-and-upload of the completed-but-unsent session.
    const result = await outcome.session.abortAndUpload();
    expect(result.ok).toBe(true);
    const stored = JSON.parse(backend.storedSessions.get("abort")!);
    expect(stored.partial).toBe(true);
  });

  it("identical seeds reproduce identical session logs", async () => {
    const run = async () => {
      const backend = phoneBackend();
      const outcome = await runScriptedSession({
        config: phoneConfig({ devices: DEVICES }),
        participantId: "det",
        seed: 12,
        fetchImpl: backend.fetch,
        resolution: { w: 393, h: 852 },
        pretask: "conforming",
      });
      return JSON.stringify(outcome.session.buildSessionLog());
    };
    expect(await run()).toBe(await run());
  });
});
