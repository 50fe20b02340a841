/**
 * Whole-session orchestration: pre-task rounds, the gate decision,
 * practice, the main pointing blocks, and the final upload. A rejected
 * gate decision ends the session at the thanks screen; the pointing
 * task is never constructed.
 */

import { mmPerLogicalPx, type RunnerConfig } from "./config.js";
import { GateClient } from "./gateClient.js";
import { PointingBlockController, type Point } from "./pointing.js";
import { PretaskController, type Clock } from "./pretask.js";
import { SeededRng } from "./rng.js";
import { buildSchedule, pretaskInitialSizes, type BlockSpec } from "./schedule.js";
import type { GateResponse, PointingTrial, SessionLog } from "./schema.js";
import { SessionUploader, type UploadResult } from "./uploader.js";

export type Phase =
  | "pretask"
  | "awaiting-gate"
  | "practice"
  | "main"
  | "uploading"
  | "done"
  | "rejected";

export class SessionController {
  readonly pretask: PretaskController;
  private readonly rng: SeededRng;
  private readonly schedule: BlockSpec[];
  private readonly trials: PointingTrial[] = [];
  private readonly annotations: string[] = [];
  private block: PointingBlockController | null = null;
  private blockCursor = 0;
  private phase_: Phase = "pretask";
  private gateResponse: GateResponse | null = null;
  private taskMmPerPx = 1;

  constructor(
    private readonly participantId: string,
    private readonly config: RunnerConfig,
    private readonly seed: number,
    private readonly now: Clock,
    private readonly gate: GateClient,
    private readonly uploader: SessionUploader,
    private readonly resolution: { w: number; h: number } | null,
  ) {
    this.rng = new SeededRng(seed);
    this.schedule = buildSchedule(config, this.rng);
    this.pretask = new PretaskController(
      participantId,
      config.session_kind,
      pretaskInitialSizes(config, this.rng),
      now,
    );
  }

  get phase(): Phase {
    return this.phase_;
  }

  get lastGateResponse(): GateResponse | null {
    return this.gateResponse;
  }

  /** Submit the completed pre-task to the gate; retryable on failure. */
  async submitPretask(): Promise<GateResponse> {
    if (!this.pretask.complete) throw new Error("pre-task not complete");
    this.phase_ = "awaiting-gate";
    const response = await this.gate.submit(
      this.pretask.gatePayload(this.resolution),
    );
    this.gateResponse = response;
    if (response.decision !== "admit") {
      this.phase_ = "rejected";
      return response;
    }
    if (this.config.session_kind === "PhoneSingleTrial") {
      const scale = this.resolution
        ? mmPerLogicalPx(this.config.devices, this.resolution)
        : null;
      // An admitted phone session implies the backend resolved the
      // device, so the served table must resolve it too.
      if (scale === null) throw new Error("device table cannot scale this device");
      this.taskMmPerPx = scale;
    }
    this.startNextBlock();
    return response;
  }

  private startNextBlock(): void {
    const spec = this.schedule[this.blockCursor];
    this.block = new PointingBlockController(
      this.participantId,
      this.config,
      spec,
      this.rng,
      this.now,
      this.config.session_kind === "PhoneSingleTrial" ? this.taskMmPerPx : 1,
    );
    this.phase_ = spec.is_practice ? "practice" : "main";
  }

  currentBlock(): PointingBlockController {
    if (this.block === null) throw new Error("no active block");
    return this.block;
  }

  currentBlockSpec(): BlockSpec {
    if (this.blockCursor >= this.schedule.length) throw new Error("no active block");
    return this.schedule[this.blockCursor];
  }

  /** Serialized session still awaiting upload, for manual export. */
  exportPending(): string | null {
    return this.uploader.pendingExport();
  }

  /** Route one tap (logical px) to the active block; advances blocks. */
  tapPx(point: Point): void {
    const block = this.currentBlock();
    block.tapPx(point);
    if (block.done) {
      this.trials.push(...block.collected());
      this.annotations.push(...block.blockAnnotations());
      this.blockCursor += 1;
      if (this.blockCursor < this.schedule.length) {
        this.startNextBlock();
      } else {
        this.block = null;
        this.phase_ = "uploading";
      }
    }
  }

  buildSessionLog(partial = false): SessionLog {
    const log: SessionLog = {
      schema_version: "1",
      participant_id: this.participantId,
      device: this.resolution,
      reaim_policy: this.config.reaim_policy,
      pretask: this.pretask.outcome(),
      trials: this.trials.slice(),
      runner_seed: this.seed,
    };
    if (partial) log.partial = true;
    if (this.annotations.length > 0) log.block_annotations = this.annotations.slice();
    return log;
  }

  async uploadSession(): Promise<UploadResult> {
    if (this.phase_ !== "uploading") throw new Error(`cannot upload in phase ${this.phase_}`);
    const result = await this.uploader.upload(this.buildSessionLog());
    if (result.ok) this.phase_ = "done";
    return result;
  }

  /** Abort mid-session; uploads whatever exists flagged partial. */
  async abortAndUpload(): Promise<UploadResult> {
    if (this.block !== null) {
      this.trials.push(...this.block.collected());
      this.block = null;
    }
    this.phase_ = "uploading";
    const result = await this.uploader.upload(this.buildSessionLog(true));
    if (result.ok) this.phase_ = "done";
    return result;
  }

  trialCount(): number {
    return this.trials.length;
  }
}
