/**
 * Scripted whole-session runs: a deterministic simulated participant
 * drives the controllers through the same code paths a human would.
 * Used by the test suite and by the golden-sample emitter.
 */

import { mmPerLogicalPx, type RunnerConfig } from "./config.js";
import { GateClient, type FetchLike } from "./gateClient.js";
import type { Point } from "./pointing.js";
import type { Clock } from "./pretask.js";
import { SeededRng } from "./rng.js";
import { SessionController } from "./session.js";
import type { GateResponse } from "./schema.js";
import { SessionUploader, type UploadResult } from "./uploader.js";

export interface FakeClock {
  now: Clock;
  advance(ms: number): void;
}

export function makeClock(start = 0): FakeClock {
  let t = start;
  return {
    now: () => t,
    advance: (ms: number) => {
      t += ms;
    },
  };
}

export interface ScriptOptions {
  config: RunnerConfig;
  participantId: string;
  seed: number;
  fetchImpl: FetchLike;
  resolution: { w: number; h: number } | null;
  pretask: "conforming" | "noresize";
  /** Force a first-attempt miss on every k-th trial (0 = never). */
  missEvery?: number;
  clock?: FakeClock;
  upload?: boolean;
}

export interface ScriptedOutcome {
  session: SessionController;
  gate: GateResponse;
  upload: UploadResult | null;
  clock: FakeClock;
}

function conformingPretaskPx(config: RunnerConfig, round: number): number {
  if (config.session_kind === "PhoneSingleTrial") {
    // 0.5 mm over the card short side on the bundled reference device.
    return ((53.98 + 0.5) * 460) / (25.4 * 3);
  }
  return round === 0 ? 352 : 357; // both in range, 5 px apart
}

export async function runScriptedSession(
  options: ScriptOptions,
): Promise<ScriptedOutcome> {
  const clock = options.clock ?? makeClock(1_000);
  const gate = new GateClient(options.config.gate_endpoint, options.fetchImpl);
  const uploader = new SessionUploader(
    options.config.sessions_endpoint,
    options.fetchImpl,
    async () => {},
  );
  const session = new SessionController(
    options.participantId,
    options.config,
    options.seed,
    clock.now,
    gate,
    uploader,
    options.resolution,
  );
  const script = new SeededRng(options.seed ^ 0x5f3759df);

  // Pre-task rounds.
  const pretask = session.pretask;
  let round = 0;
  while (!pretask.complete) {
    pretask.startRound();
    if (options.pretask === "conforming") {
      clock.advance(900);
      pretask.setSize(conformingPretaskPx(options.config, round));
      clock.advance(7_100); // about eight seconds of adjustment
    }
    pretask.submitRound();
    round += 1;
  }

  const gateResponse = await session.submitPretask();
  if (gateResponse.decision !== "admit") {
    return { session, gate: gateResponse, upload: null, clock };
  }

  const phone = options.config.session_kind === "PhoneSingleTrial";
  const scale =
    phone && options.resolution
      ? mmPerLogicalPx(options.config.devices, options.resolution)!
      : 1;
  const totalBlocks = options.config.main_blocks + 1;
  let globalTrial = 0;
  for (let blockIndex = 0; blockIndex < totalBlocks; blockIndex++) {
    const block = session.currentBlock();
    clock.advance(1_500);
    block.tapStart();
    while (!block.done) {
      const target = block.currentTarget();
      globalTrial += 1;
      const forceMiss =
        (options.missEvery ?? 0) > 0 && globalTrial % options.missEvery! === 0;
      const hitOffset: Point = {
        x: script.normal(0, target.width / 8),
        y: script.normal(0, target.width / 8),
      };
      const clamp = (v: number) =>
        Math.max(Math.min(v, target.width * 0.45), -target.width * 0.45);
      const aim: Point = forceMiss
        ? { x: 0, y: target.width / 2 + 1 }
        : { x: clamp(hitOffset.x), y: clamp(hitOffset.y) };
      clock.advance(350 + script.int(250));
      const taskPoint: Point = {
        x: target.center.x + aim.x,
        y: target.center.y + aim.y,
      };
      session.tapPx({ x: taskPoint.x / scale, y: taskPoint.y / scale });
      if (forceMiss && options.config.reaim_policy === "ReaimUntilSuccess") {
        // Re-aim to the center until the trial completes.
        clock.advance(200);
        session.tapPx({
          x: target.center.x / scale,
          y: target.center.y / scale,
        });
      }
    }
  }

  let upload: UploadResult | null = null;
  if (options.upload !== false) {
    upload = await session.uploadSession();
  }
  return { session, gate: gateResponse, upload, clock };
}
