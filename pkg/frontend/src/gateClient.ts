/**
 * Gate endpoint client. A recorded pre-task outcome is never dropped:
 * transport failures surface as retryable errors while the payload
 * stays with the caller.
 */

import type { GatePayload, GateResponse } from "./schema.js";
import { stableStringify } from "./schema.js";

export interface HttpResponse {
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; body?: string; headers?: Record<string, string> },
) => Promise<HttpResponse>;

export class GateUnavailable extends Error {}

export class GateClient {
  constructor(
    private readonly endpoint: string,
    private readonly fetchImpl: FetchLike,
  ) {}

  async submit(payload: GatePayload): Promise<GateResponse> {
    let response: HttpResponse;
    try {
      response = await this.fetchImpl(this.endpoint, {
        method: "POST",
        body: stableStringify(payload),
        headers: { "Content-Type": "application/json" },
      });
    } catch (error) {
      throw new GateUnavailable(String(error));
    }
    if (response.status !== 200) {
      throw new GateUnavailable(`gate returned ${response.status}`);
    }
    const body = (await response.json()) as GateResponse;
    if (body.decision !== "admit" && body.decision !== "reject") {
      throw new GateUnavailable("gate returned malformed decision");
    }
    return body;
  }
}
