/**
 * Session upload with exponential backoff and a local buffer. The
 * server acknowledges duplicates idempotently, so retrying after an
 * ambiguous failure is safe. When retries are exhausted the serialized
 * session stays available for manual export.
 */

import type { FetchLike } from "./gateClient.js";
import type { SessionLog } from "./schema.js";
import { sessionToJsonLine } from "./schema.js";

export type Sleeper = (ms: number) => Promise<void>;

export interface UploadResult {
  ok: boolean;
  status?: "stored" | "duplicate";
  attempts: number;
}

export class SessionUploader {
  private buffered: string | null = null;

  constructor(
    private readonly endpoint: string,
    private readonly fetchImpl: FetchLike,
    private readonly sleep: Sleeper,
    private readonly maxAttempts = 5,
    private readonly baseDelayMs = 1000,
  ) {}

  /** The serialized session awaiting upload, if any (exportable copy). */
  pendingExport(): string | null {
    return this.buffered;
  }

  async upload(session: SessionLog): Promise<UploadResult> {
    const line = sessionToJsonLine(session);
    this.buffered = line;
    for (let attempt = 1; attempt <= this.maxAttempts; attempt++) {
      try {
        const response = await this.fetchImpl(this.endpoint, {
          method: "POST",
          body: line,
          headers: { "Content-Type": "application/json" },
        });
        if (response.status === 200) {
          const body = (await response.json()) as { status?: string };
          if (body.status === "stored" || body.status === "duplicate") {
            this.buffered = null;
            return { ok: true, status: body.status, attempts: attempt };
          }
        }
        if (response.status === 400) {
          // Schema rejection: retrying cannot help; keep the export copy.
          return { ok: false, attempts: attempt };
        }
      } catch {
        // transport failure: fall through to backoff
      }
      if (attempt < this.maxAttempts) {
        await this.sleep(this.baseDelayMs * 2 ** (attempt - 1));
      }
    }
    return { ok: false, attempts: this.maxAttempts };
  }
}
