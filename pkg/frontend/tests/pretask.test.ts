import { describe, expect, it } from "vitest";

import { PretaskController } from "../src/pretask.js";
import { makeClock } from "../src/scripted.js";

describe("PretaskController", () => {
  it("records adjustment with positive op_time when touched", () => {
    const clock = makeClock(0);
    const pretask = new PretaskController("p1", "PhoneSingleTrial", [50], clock.now);
    pretask.startRound();
    clock.advance(1_000);
    pretask.setSize(120);
    clock.advance(6_500);
    pretask.setSize(326);
    clock.advance(500);
    const adjustment = pretask.submitRound();
    expect(adjustment).toEqual({ final_size: 326, op_time: 7.0, initial_size: 50 });
    expect(pretask.complete).toBe(true);
  });

  it("immediate submit keeps the initial size with zero op_time", () => {
    const clock = makeClock(0);
    const pretask = new PretaskController("p1", "PhoneSingleTrial", [50], clock.now);
    pretask.startRound();
    clock.advance(3_000); // looking, never touching
    const adjustment = pretask.submitRound();
    expect(adjustment).toEqual({ final_size: 50, op_time: 0, initial_size: 50 });
  });

  it("pc runs two rounds with their own initial sizes", () => {
    const clock = makeClock(0);
    const pretask = new PretaskController("p1", "PcTwoTrial", [900, 100], clock.now);
    pretask.startRound();
    pretask.setSize(360);
    clock.advance(4_000);
    pretask.submitRound();
    expect(pretask.complete).toBe(false);
    pretask.startRound();
    pretask.setSize(352);
    clock.advance(2_000);
    pretask.submitRound();
    const outcome = pretask.outcome();
    expect(outcome.adjustments.map((a) => a.initial_size)).toEqual([900, 100]);
    expect(outcome.session_kind).toBe("PcTwoTrial");
  });

  it("gate payload carries the resolution when present", () => {
    const clock = makeClock(0);
    const pretask = new PretaskController("p1", "PhoneSingleTrial", [50], clock.now);
    pretask.startRound();
    pretask.submitRound();
    expect(pretask.gatePayload({ w: 393, h: 852 }).device).toEqual({ w: 393, h: 852 });
    expect(pretask.gatePayload(null).device).toBeUndefined();
  });

  it("rejects invalid sizes and double rounds", () => {
    const clock = makeClock(0);
    const pretask = new PretaskController("p1", "PhoneSingleTrial", [50], clock.now);
    pretask.startRound();
    expect(() => pretask.startRound()).toThrow();
    expect(() => pretask.setSize(0)).toThrow();
  });
});
