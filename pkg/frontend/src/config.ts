/**
 * Runner configuration: geometry, schedules, instruction wordings, and
 * backend endpoints. Presets match the three experiment shapes; a
 * config document fetched from the backend at session start may
 * override endpoints and carry the device table for mm rendering.
 */

import type { ReaimPolicy, SessionKind } from "./schema.js";

export interface DeviceRow {
  width_px: number;
  height_px: number;
  ppi: number;
  scale_factor: number;
}

export interface RunnerConfig {
  session_kind: SessionKind;
  /** Pre-task initial sizes; PC uses both in random order, phone the one. */
  pretask_initial_sizes_px: number[];
  amplitude: number; // px (PC) or mm (phone)
  widths: number[]; // px (PC) or mm (phone)
  trials_per_width_per_block: number;
  main_blocks: number;
  reaim_policy: ReaimPolicy;
  pc_area: [number, number];
  gate_endpoint: string;
  sessions_endpoint: string;
  devices: DeviceRow[];
}

/** Verbatim instruction wordings shown to participants. */
export const INSTRUCTION_WORDING = {
  Practice:
    "Perform the task as fast and accurately as possible.",
  Fast:
    "Click the target as quickly as you can after it appears, but do not act more carelessly than necessary such as clicking without aiming.",
  Accurate:
    "Avoid errors (clicks outside the target), but do not spend more time than necessary.",
} as const;

const ENDPOINT_DEFAULTS = {
  gate_endpoint: "/gate",
  sessions_endpoint: "/sessions",
};

export function pcConfig(overrides: Partial<RunnerConfig> = {}): RunnerConfig {
  return {
    session_kind: "PcTwoTrial",
    pretask_initial_sizes_px: [100, 900],
    amplitude: 510,
    widths: [8, 38, 78],
    trials_per_width_per_block: 5,
    main_blocks: 4,
    reaim_policy: "ReaimUntilSuccess",
    pc_area: [1280, 720],
    devices: [],
    ...ENDPOINT_DEFAULTS,
    ...overrides,
  };
}

export function phoneConfig(overrides: Partial<RunnerConfig> = {}): RunnerConfig {
  return {
    session_kind: "PhoneSingleTrial",
    pretask_initial_sizes_px: [50],
    amplitude: 30,
    widths: [2, 2.8, 3.6, 4.4, 5.2, 6, 6.8, 7.6, 8.4],
    trials_per_width_per_block: 10,
    main_blocks: 4,
    reaim_policy: "ReaimUntilSuccess",
    pc_area: [1280, 720],
    devices: [],
    ...ENDPOINT_DEFAULTS,
    ...overrides,
  };
}

export function phoneNoReaimConfig(
  overrides: Partial<RunnerConfig> = {},
): RunnerConfig {
  return phoneConfig({ reaim_policy: "NoReaim", ...overrides });
}

/** mm per logical px for a reported resolution, either orientation. */
export function mmPerLogicalPx(
  devices: DeviceRow[],
  resolution: { w: number; h: number },
): number | null {
  const matches = devices.filter(
    (row) =>
      (row.width_px === resolution.w && row.height_px === resolution.h) ||
      (row.width_px === resolution.h && row.height_px === resolution.w),
  );
  if (matches.length !== 1) return null;
  return (25.4 * matches[0].scale_factor) / matches[0].ppi;
}
