/**
 * Block schedule: one practice block, then the main blocks with each of
 * the two instructions appearing twice in random order. Within a block
 * every width level appears exactly trials_per_width_per_block times,
 * in random order.
 */

import type { RunnerConfig } from "./config.js";
import type { Instruction } from "./schema.js";
import type { SeededRng } from "./rng.js";

export interface BlockSpec {
  block_index: number;
  instruction: Instruction;
  widths: number[];
  is_practice: boolean;
}

export function buildSchedule(config: RunnerConfig, rng: SeededRng): BlockSpec[] {
  const perInstruction = config.main_blocks / 2;
  const mainInstructions: Instruction[] = rng.shuffle([
    ...Array<Instruction>(perInstruction).fill("Fast"),
    ...Array<Instruction>(config.main_blocks - perInstruction).fill("Accurate"),
  ]);
  const blocks: BlockSpec[] = [];
  const widthBag = config.widths.flatMap((w) =>
    Array<number>(config.trials_per_width_per_block).fill(w),
  );
  blocks.push({
    block_index: 0,
    instruction: "Practice",
    widths: rng.shuffle(widthBag),
    is_practice: true,
  });
  mainInstructions.forEach((instruction, index) => {
    blocks.push({
      block_index: index + 1,
      instruction,
      widths: rng.shuffle(widthBag),
      is_practice: false,
    });
  });
  return blocks;
}

export function pretaskInitialSizes(config: RunnerConfig, rng: SeededRng): number[] {
  const sizes = config.pretask_initial_sizes_px.slice();
  return sizes.length > 1 ? rng.shuffle(sizes) : sizes;
}
