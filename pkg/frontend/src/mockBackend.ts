/**
 * In-memory backend implementing the gate and upload contracts, for
 * offline demos and unit tests. The live service is authoritative; the
 * integration suite checks parity against it over real HTTP.
 */

import type { DeviceRow } from "./config.js";
import type { FetchLike } from "./gateClient.js";
import type { GatePayload } from "./schema.js";

const CARD_SHORT_MM = 53.98;

export interface MockBackendOptions {
  kind: "pc" | "phone";
  threshold: number;
  devices?: DeviceRow[];
  rangeMin?: number;
  rangeMax?: number;
  failUploads?: number; // initial upload attempts to fail, for retry tests
}

export class MockBackend {
  readonly storedSessions = new Map<string, string>();
  uploadAttempts = 0;
  private failRemaining: number;

  constructor(private readonly options: MockBackendOptions) {
    this.failRemaining = options.failUploads ?? 0;
  }

  private gateDecision(payload: GatePayload): { status: number; body: unknown } {
    if (this.options.kind === "phone") {
      const device = payload.device;
      const row = device
        ? (this.options.devices ?? []).find(
            (r) =>
              (r.width_px === device.w && r.height_px === device.h) ||
              (r.width_px === device.h && r.height_px === device.w),
          )
        : undefined;
      if (!row) {
        return {
          status: 200,
          body: { decision: "reject", metric: null, reason: "UnresolvableDevice" },
        };
      }
      const mm =
        payload.adjustments[0].final_size * ((25.4 * row.scale_factor) / row.ppi);
      const metric = Math.abs(mm - CARD_SHORT_MM);
      const passed = metric < this.options.threshold;
      return {
        status: 200,
        body: {
          decision: passed ? "admit" : "reject",
          metric,
          ...(passed ? {} : { reason: "FailedScreening" }),
        },
      };
    }
    const [first, second] = payload.adjustments.map((a) => a.final_size);
    const lo = this.options.rangeMin ?? 200;
    const hi = this.options.rangeMax ?? 600;
    const inRange = first >= lo && first <= hi && second >= lo && second <= hi;
    const metric = Math.abs(first - second);
    const passed = inRange && metric < this.options.threshold;
    return {
      status: 200,
      body: {
        decision: passed ? "admit" : "reject",
        metric,
        ...(passed ? {} : { reason: "FailedScreening" }),
      },
    };
  }

  private handleUpload(body: string): { status: number; body: unknown } {
    this.uploadAttempts += 1;
    if (this.failRemaining > 0) {
      this.failRemaining -= 1;
      return { status: 503, body: { error: "unavailable" } };
    }
    const record = JSON.parse(body) as { participant_id?: string };
    const pid = record.participant_id ?? "";
    if (this.storedSessions.has(pid)) {
      return { status: 200, body: { status: "duplicate", participant_id: pid } };
    }
    this.storedSessions.set(pid, body);
    return { status: 200, body: { status: "stored", participant_id: pid } };
  }

  fetch: FetchLike = async (url, init) => {
    const body = init?.body ?? "";
    let result: { status: number; body: unknown };
    if (url.endsWith("/gate")) {
      result = this.gateDecision(JSON.parse(body) as GatePayload);
    } else if (url.endsWith("/sessions")) {
      result = this.handleUpload(body);
    } else {
      result = { status: 404, body: { error: `unknown path ${url}` } };
    }
    return {
      status: result.status,
      json: async () => result.body,
    };
  };
}
