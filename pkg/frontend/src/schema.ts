/**
 * Session-log schema (version 1), mirroring the backend's line format.
 * One JSON object per line; field names are part of the wire contract.
 */

export const SCHEMA_VERSION = "1";

export type Instruction = "Fast" | "Accurate" | "Practice";
export type SessionKind = "PcTwoTrial" | "PhoneSingleTrial";
export type ReaimPolicy = "ReaimUntilSuccess" | "NoReaim";

export interface ConditionKey {
  instruction: Instruction;
  amplitude_A: number;
  width_W: number;
}

export interface PointingTrial {
  participant_id: string;
  block_index: number;
  trial_index: number;
  condition: ConditionKey;
  prev_center: [number, number];
  target_center: [number, number];
  endpoint: [number, number];
  movement_time_MT: number;
  success: boolean;
  reaim_count: number;
}

export interface Adjustment {
  final_size: number;
  op_time: number;
  initial_size: number;
}

export interface PreTaskOutcome {
  participant_id: string;
  session_kind: SessionKind;
  adjustments: Adjustment[];
}

export interface SessionLog {
  schema_version: string;
  participant_id: string;
  device: { w: number; h: number } | null;
  reaim_policy: ReaimPolicy;
  pretask: PreTaskOutcome;
  trials: PointingTrial[];
  /** Extra provenance; the backend ignores unknown fields. */
  runner_seed?: number;
  partial?: boolean;
  block_annotations?: string[];
}

export interface GatePayload extends PreTaskOutcome {
  device?: { w: number; h: number };
}

export interface GateResponse {
  decision: "admit" | "reject";
  metric: number | null;
  reason?: string;
}

/** Stable serialization: keys sorted at every level, compact JSON. */
export function stableStringify(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return `[${value.map(stableStringify).join(",")}]`;
  }
  const entries = Object.entries(value as Record<string, unknown>)
    .filter(([, v]) => v !== undefined)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([k, v]) => `${JSON.stringify(k)}:${stableStringify(v)}`);
  return `{${entries.join(",")}}`;
}

export function sessionToJsonLine(session: SessionLog): string {
  return stableStringify(session);
}
