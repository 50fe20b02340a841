import { describe, expect, it } from "vitest";

import { pcConfig, phoneConfig, INSTRUCTION_WORDING } from "../src/config.js";
import { SeededRng } from "../src/rng.js";
import { buildSchedule, pretaskInitialSizes } from "../src/schedule.js";

describe("buildSchedule", () => {
  it("pc schedule: practice + 4 main blocks of 15, each W five times", () => {
    const schedule = buildSchedule(pcConfig(), new SeededRng(1));
    expect(schedule).toHaveLength(5);
    expect(schedule[0].is_practice).toBe(true);
    expect(schedule[0].instruction).toBe("Practice");
    const mainTrials = schedule.slice(1).reduce((sum, b) => sum + b.widths.length, 0);
    expect(mainTrials).toBe(60);
    for (const block of schedule) {
      expect(block.widths).toHaveLength(15);
      for (const width of [8, 38, 78]) {
        expect(block.widths.filter((w) => w === width)).toHaveLength(5);
      }
    }
  });

  it("phone schedule: 4 main blocks of 90, each W ten times per block", () => {
    const schedule = buildSchedule(phoneConfig(), new SeededRng(2));
    const main = schedule.filter((b) => !b.is_practice);
    expect(main).toHaveLength(4);
    expect(main.reduce((sum, b) => sum + b.widths.length, 0)).toBe(360);
    for (const block of main) {
      expect(block.widths).toHaveLength(90);
      for (const width of phoneConfig().widths) {
        expect(block.widths.filter((w) => w === width)).toHaveLength(10);
      }
    }
  });

  it("both instructions appear exactly twice among main blocks", () => {
    for (let seed = 0; seed < 20; seed++) {
      const schedule = buildSchedule(phoneConfig(), new SeededRng(seed));
      const instructions = schedule.filter((b) => !b.is_practice).map((b) => b.instruction);
      expect(instructions.filter((i) => i === "Fast")).toHaveLength(2);
      expect(instructions.filter((i) => i === "Accurate")).toHaveLength(2);
    }
  });

  it("block order is seed-deterministic and varies across seeds", () => {
    const a = buildSchedule(phoneConfig(), new SeededRng(7));
    const b = buildSchedule(phoneConfig(), new SeededRng(7));
    expect(a).toEqual(b);
    const orders = new Set<string>();
    for (let seed = 0; seed < 30; seed++) {
      orders.add(
        buildSchedule(phoneConfig(), new SeededRng(seed))
          .map((x) => x.instruction)
          .join(","),
      );
    }
    expect(orders.size).toBeGreaterThan(1);
  });

  it("pc pre-task initial sizes are 100 and 900 in some order", () => {
    const seen = new Set<string>();
    for (let seed = 0; seed < 10; seed++) {
      const sizes = pretaskInitialSizes(pcConfig(), new SeededRng(seed));
      expect([...sizes].sort((x, y) => x - y)).toEqual([100, 900]);
      seen.add(sizes.join(","));
    }
    expect(seen.size).toBe(2); // both orders occur
  });

  it("phone pre-task uses the single 50 px initial size", () => {
    expect(pretaskInitialSizes(phoneConfig(), new SeededRng(0))).toEqual([50]);
  });

  it("instruction wordings are the documented strings", () => {
    expect(INSTRUCTION_WORDING.Fast).toContain("as quickly as you can");
    expect(INSTRUCTION_WORDING.Accurate).toContain("Avoid errors");
    expect(INSTRUCTION_WORDING.Practice).toContain("fast and accurately");
  });
});
