/**
 * Browser entry point: fetch the runner configuration, build the
 * session (seeded for reproducible randomization), and hand off to the
 * DOM layer. The worker id arrives as an opaque query parameter.
 */

import { pcConfig, phoneConfig, phoneNoReaimConfig, type RunnerConfig } from "./config.js";
import { DomRunner } from "./dom.js";
import { GateClient } from "./gateClient.js";
import { SessionController } from "./session.js";
import { SessionUploader } from "./uploader.js";

async function fetchConfig(): Promise<RunnerConfig> {
  const response = await fetch("/config");
  const document = (await response.json()) as Record<string, unknown>;
  const kind = document["session_kind"];
  const overrides: Partial<RunnerConfig> = {};
  if (Array.isArray(document["devices"])) {
    overrides.devices = document["devices"] as RunnerConfig["devices"];
  }
  if (kind === "PcTwoTrial") return pcConfig(overrides);
  if (document["reaim_policy"] === "NoReaim") return phoneNoReaimConfig(overrides);
  return phoneConfig(overrides);
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const participantId = params.get("worker") ?? `anon-${Date.now()}`;
  const seed = Number(params.get("seed") ?? Date.now() % 2 ** 31);
  const config = await fetchConfig();
  const resolution =
    config.session_kind === "PhoneSingleTrial"
      ? { w: window.screen.width, h: window.screen.height }
      : null;
  const adaptedFetch = async (
    url: string,
    init?: { method?: string; body?: string; headers?: Record<string, string> },
  ) => {
    const response = await fetch(url, init);
    return { status: response.status, json: () => response.json() };
  };
  const session = new SessionController(
    participantId,
    config,
    seed,
    () => performance.now(),
    new GateClient(config.gate_endpoint, adaptedFetch),
    new SessionUploader(
      config.sessions_endpoint,
      adaptedFetch,
      (ms) => new Promise((resolve) => setTimeout(resolve, ms)),
    ),
    resolution,
  );
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app root");
  new DomRunner(session, config, root).start();
}

void boot();
