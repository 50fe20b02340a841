/**
 * Size-adjustment pre-task. One round per initial size: the participant
 * resizes the on-screen card (corner drag on PC, slider on phone) and
 * submits. Operation time runs from the first size change to submit;
 * submitting untouched records 0 s, never dropping the outcome.
 */

import type { Adjustment, GatePayload, PreTaskOutcome, SessionKind } from "./schema.js";

export type Clock = () => number; // milliseconds

export class PretaskController {
  private readonly adjustments: Adjustment[] = [];
  private currentInitial: number | null = null;
  private currentSize = 0;
  private firstTouch: number | null = null;

  constructor(
    private readonly participantId: string,
    private readonly sessionKind: SessionKind,
    private readonly initialSizes: number[],
    private readonly now: Clock,
  ) {}

  get roundsRemaining(): number {
    return this.initialSizes.length - this.adjustments.length - (this.currentInitial !== null ? 1 : 0);
  }

  startRound(): number {
    if (this.currentInitial !== null) throw new Error("round already active");
    const index = this.adjustments.length;
    if (index >= this.initialSizes.length) throw new Error("all rounds done");
    this.currentInitial = this.initialSizes[index];
    this.currentSize = this.currentInitial;
    this.firstTouch = null;
    return this.currentInitial;
  }

  setSize(px: number): void {
    if (this.currentInitial === null) throw new Error("no active round");
    if (px <= 0) throw new Error("size must be positive");
    if (this.firstTouch === null) this.firstTouch = this.now();
    this.currentSize = px;
  }

  submitRound(): Adjustment {
    if (this.currentInitial === null) throw new Error("no active round");
    const opTime = this.firstTouch === null ? 0 : (this.now() - this.firstTouch) / 1000;
    const adjustment: Adjustment = {
      final_size: this.currentSize,
      op_time: opTime,
      initial_size: this.currentInitial,
    };
    this.adjustments.push(adjustment);
    this.currentInitial = null;
    return adjustment;
  }

  get complete(): boolean {
    return (
      this.adjustments.length === this.initialSizes.length && this.currentInitial === null
    );
  }

  outcome(): PreTaskOutcome {
    if (!this.complete) throw new Error("pre-task not complete");
    return {
      participant_id: this.participantId,
      session_kind: this.sessionKind,
      adjustments: this.adjustments.slice(),
    };
  }

  gatePayload(resolution: { w: number; h: number } | null): GatePayload {
    const payload: GatePayload = { ...this.outcome() };
    if (resolution) payload.device = resolution;
    return payload;
  }
}
