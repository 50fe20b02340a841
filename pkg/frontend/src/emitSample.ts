/**
 * Emit the committed golden session logs under sample/. The scripted
 * runs are fully deterministic, so re-running this script must
 * reproduce the files byte for byte (the test suite enforces that).
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { pcConfig, phoneConfig, type DeviceRow } from "./config.js";
import { MockBackend } from "./mockBackend.js";
import { runScriptedSession } from "./scripted.js";
import { sessionToJsonLine } from "./schema.js";

export const GOLDEN_DEVICES: DeviceRow[] = [
  { width_px: 393, height_px: 852, ppi: 460, scale_factor: 3 },
];

export const GOLDEN_PHONE_SEED = 1001;
export const GOLDEN_PC_SEED = 1002;

export async function buildGoldenLines(): Promise<{ phone: string; pc: string }> {
  const phoneBackend = new MockBackend({
    kind: "phone",
    threshold: 3,
    devices: GOLDEN_DEVICES,
  });
  const phone = await runScriptedSession({
    config: phoneConfig({ devices: GOLDEN_DEVICES }),
    participantId: "golden-phone",
    seed: GOLDEN_PHONE_SEED,
    fetchImpl: phoneBackend.fetch,
    resolution: { w: 393, h: 852 },
    pretask: "conforming",
    missEvery: 17,
  });
  if (phone.upload?.status !== "stored") throw new Error("phone upload failed");

  const pcBackend = new MockBackend({ kind: "pc", threshold: 20 });
  const pc = await runScriptedSession({
    config: pcConfig(),
    participantId: "golden-pc",
    seed: GOLDEN_PC_SEED,
    fetchImpl: pcBackend.fetch,
    resolution: null,
    pretask: "conforming",
    missEvery: 13,
  });
  if (pc.upload?.status !== "stored") throw new Error("pc upload failed");

  return {
    phone: sessionToJsonLine(phone.session.buildSessionLog()) + "\n",
    pc: sessionToJsonLine(pc.session.buildSessionLog()) + "\n",
  };
}

const isMain =
  typeof process !== "undefined" &&
  process.argv[1] !== undefined &&
  fileURLToPath(import.meta.url) === process.argv[1];

if (isMain) {
  buildGoldenLines().then(({ phone, pc }) => {
    const sampleDir = join(dirname(fileURLToPath(import.meta.url)), "..", "sample");
    mkdirSync(sampleDir, { recursive: true });
    writeFileSync(join(sampleDir, "session-phone.log"), phone, "utf-8");
    writeFileSync(join(sampleDir, "session-pc.log"), pc, "utf-8");
    console.log(`wrote golden samples to ${sampleDir}`);
  });
}
