/**
 * Pointing block state machine.
 *
 * Movement time runs from the previous successful selection (the Start
 * tap for a block's first trial) to the FIRST attempt of the current
 * trial, and the recorded endpoint is always that first attempt. Under
 * ReaimUntilSuccess a miss keeps the trial open until a hit; under
 * NoReaim the next trial begins immediately.
 *
 * PC sessions work in logical px with circular targets at random
 * positions a fixed distance away. Phone sessions work in mm (converted
 * from logical px via the device scale) with two full-width bands at
 * fixed vertical positions, alternating top and bottom; the top band is
 * the start button.
 */

import type { RunnerConfig } from "./config.js";
import type { BlockSpec } from "./schedule.js";
import type { PointingTrial } from "./schema.js";
import type { SeededRng } from "./rng.js";
import type { Clock } from "./pretask.js";

export interface Point {
  x: number;
  y: number;
}

export interface TargetView {
  center: Point; // task units (px on PC, mm on phone)
  width: number;
  shape: "circle" | "band";
}

interface Geometry {
  nextTarget(prev: Point, width: number, trialIndex: number): Point;
  startCenter(): Point;
  isHit(tap: Point, target: Point, width: number): boolean;
  shape: "circle" | "band";
}

class PcGeometry implements Geometry {
  readonly shape = "circle" as const;

  constructor(
    private readonly amplitude: number,
    private readonly area: [number, number],
    private readonly rng: SeededRng,
  ) {}

  startCenter(): Point {
    return { x: this.area[0] / 2, y: this.area[1] / 2 };
  }

  nextTarget(prev: Point, width: number): Point {
    const margin = width / 2 + 2;
    for (let attempt = 0; attempt < 1000; attempt++) {
      const angle = this.rng.uniform(0, 2 * Math.PI);
      const x = prev.x + this.amplitude * Math.cos(angle);
      const y = prev.y + this.amplitude * Math.sin(angle);
      if (
        x >= margin &&
        x <= this.area[0] - margin &&
        y >= margin &&
        y <= this.area[1] - margin
      ) {
        return { x, y };
      }
    }
    throw new Error("amplitude does not fit the task area");
  }

  isHit(tap: Point, target: Point, width: number): boolean {
    return Math.hypot(tap.x - target.x, tap.y - target.y) <= width / 2;
  }
}

class PhoneGeometry implements Geometry {
  readonly shape = "band" as const;
  private readonly top: Point;
  private readonly bottom: Point;

  constructor(amplitude: number, centerX: number, topY: number) {
    this.top = { x: centerX, y: topY };
    this.bottom = { x: centerX, y: topY + amplitude };
  }

  startCenter(): Point {
    return this.top;
  }

  nextTarget(_prev: Point, _width: number, trialIndex: number): Point {
    return trialIndex % 2 === 0 ? this.bottom : this.top;
  }

  isHit(tap: Point, target: Point, width: number): boolean {
    return Math.abs(tap.y - target.y) <= width / 2;
  }
}

export class PointingBlockController {
  private readonly geometry: Geometry;
  private readonly trials: PointingTrial[] = [];
  private readonly annotations: string[] = [];
  private prevCenter: Point;
  private trialStart: number | null = null; // set when the block starts
  private target: Point | null = null;
  private trialIndex = 0;
  private firstAttempt: { point: Point; time: number } | null = null;
  private reaims = 0;

  /**
   * mmPerPx converts incoming logical-px taps into task units; pass 1
   * for PC sessions (or pre-converted coordinates in tests).
   */
  constructor(
    private readonly participantId: string,
    private readonly config: RunnerConfig,
    private readonly block: BlockSpec,
    rng: SeededRng,
    private readonly now: Clock,
    private readonly mmPerPx: number = 1,
  ) {
    if (config.session_kind === "PcTwoTrial") {
      this.geometry = new PcGeometry(config.amplitude, config.pc_area, rng);
    } else {
      // Bands are horizontally centered; the top band sits amplitude/2
      // above the vertical middle of a nominal 2:1 portrait screen.
      this.geometry = new PhoneGeometry(config.amplitude, 30, 40);
    }
    this.prevCenter = this.geometry.startCenter();
  }

  /** The Start control; tapping it begins trial 0's clock. */
  startTarget(): TargetView {
    return {
      center: this.geometry.startCenter(),
      width: this.config.session_kind === "PcTwoTrial" ? 60 : this.block.widths[0],
      shape: this.geometry.shape,
    };
  }

  tapStart(): void {
    if (this.trialStart !== null) throw new Error("block already started");
    this.trialStart = this.now();
    this.target = this.geometry.nextTarget(
      this.prevCenter,
      this.block.widths[0],
      0,
    );
  }

  currentTarget(): TargetView {
    if (this.target === null) throw new Error("block not started");
    return {
      center: this.target,
      width: this.block.widths[this.trialIndex],
      shape: this.geometry.shape,
    };
  }

  get done(): boolean {
    return this.trials.length === this.block.widths.length;
  }

  collected(): PointingTrial[] {
    return this.trials.slice();
  }

  blockAnnotations(): string[] {
    return this.annotations.slice();
  }

  /** Visibility loss or other interruption, recorded but non-fatal. */
  annotate(note: string): void {
    this.annotations.push(note);
  }

  /** Handle one tap at logical-px coordinates. */
  tapPx(pxPoint: Point): void {
    this.tap({ x: pxPoint.x * this.mmPerPx, y: pxPoint.y * this.mmPerPx });
  }

  /** Handle one tap already expressed in task units. */
  tap(point: Point): void {
    if (this.trialStart === null || this.target === null) {
      throw new Error("block not started");
    }
    if (this.done) throw new Error("block already complete");
    const width = this.block.widths[this.trialIndex];
    const time = this.now();
    if (this.firstAttempt === null) {
      this.firstAttempt = { point, time };
    }
    const hit = this.geometry.isHit(point, this.target, width);
    if (!hit && this.config.reaim_policy === "ReaimUntilSuccess") {
      this.reaims += 1;
      return; // stay on this trial; endpoint and MT remain first-attempt
    }
    this.finishTrial(hit, time);
  }

  private finishTrial(hit: boolean, time: number): void {
    const width = this.block.widths[this.trialIndex];
    const first = this.firstAttempt!;
    const success = this.config.reaim_policy === "ReaimUntilSuccess" ? true : hit;
    this.trials.push({
      participant_id: this.participantId,
      block_index: this.block.block_index,
      trial_index: this.trialIndex,
      condition: {
        instruction: this.block.instruction,
        amplitude_A: this.config.amplitude,
        width_W: width,
      },
      prev_center: [this.prevCenter.x, this.prevCenter.y],
      target_center: [this.target!.x, this.target!.y],
      endpoint: [first.point.x, first.point.y],
      movement_time_MT: first.time - this.trialStart!,
      success,
      reaim_count: this.config.reaim_policy === "ReaimUntilSuccess" ? this.reaims : 0,
    });
    this.prevCenter = this.target!;
    this.trialIndex += 1;
    this.firstAttempt = null;
    this.reaims = 0;
    // Next trial's clock starts at the selection that ended this one.
    this.trialStart = time;
    if (!this.done) {
      this.target = this.geometry.nextTarget(
        this.prevCenter,
        this.block.widths[this.trialIndex],
        this.trialIndex,
      );
    } else {
      this.target = null;
    }
  }
}
