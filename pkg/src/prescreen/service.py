"""Live gate service: screening decisions and session upload over HTTP.

Endpoints (bodies are single JSON records, the session-log line encoding):

  POST /gate      pre-task payload -> {"decision", "metric", "reason"?}
  POST /sessions  one session line -> {"status": "stored" | "duplicate"}
  GET  /config    the runner configuration document
  GET  /health    liveness probe

Every gate decision is appended to a single-writer decision log with the
rule snapshot embedded, so offline replay reproduces each admit/reject.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .core import (
    DeviceTable,
    SchemaError,
    SessionLog,
    session_from_dict,
    session_to_json_line,
)
from .screening import (
    GateDecision,
    MalformedPayload,
    ScreeningRule,
    decision_to_json_line,
    gate_decision,
)


class _AppendLog:
    """Lock-guarded append-only line writer; concurrent requests serialize here."""

    def __init__(self, path: Path | None):
        self._path = path
        self._lock = threading.Lock()
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, line: str) -> None:
        if self._path is None:
            return
        with self._lock:
            with self._path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")


@dataclass
class GateApp:
    """Request handling, separated from HTTP plumbing for direct testing."""

    rule: ScreeningRule
    devices: DeviceTable | None
    decision_log: _AppendLog
    session_log: _AppendLog
    config_document: dict
    _seen_sessions: set[str] | None = None
    _seen_lock: threading.Lock | None = None

    def __post_init__(self) -> None:
        self._seen_sessions = set()
        self._seen_lock = threading.Lock()

    def handle_gate(self, body: bytes) -> tuple[int, dict]:
        try:
            payload = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return 400, {"error": "invalid JSON payload"}
        try:
            decision: GateDecision = gate_decision(payload, self.rule, self.devices)
        except MalformedPayload as exc:
            return 400, {"error": str(exc)}
        self.decision_log.append(decision_to_json_line(decision))
        return 200, decision.to_response()

    def handle_session_upload(self, body: bytes) -> tuple[int, dict]:
        try:
            record = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return 400, {"error": "invalid JSON payload"}
        try:
            session: SessionLog = session_from_dict(record)
        except SchemaError as exc:
            return 400, {"error": str(exc)}
        with self._seen_lock:
            if session.participant_id in self._seen_sessions:
                return 200, {"status": "duplicate", "participant_id": session.participant_id}
            self._seen_sessions.add(session.participant_id)
        self.session_log.append(session_to_json_line(session))
        return 200, {"status": "stored", "participant_id": session.participant_id}

    def handle_config(self) -> tuple[int, dict]:
        return 200, self.config_document


class _GateHandler(BaseHTTPRequestHandler):
    app: GateApp  # set by make_server

    def _reply(self, status: int, body: dict) -> None:
        data = json.dumps(body, separators=(",", ":"), sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length", "0"))
        return self.rfile.read(length)

    def do_POST(self) -> None:  # noqa: N802 (http.server API)
        if self.path == "/gate":
            self._reply(*self.app.handle_gate(self._read_body()))
        elif self.path == "/sessions":
            self._reply(*self.app.handle_session_upload(self._read_body()))
        else:
            self._reply(404, {"error": f"unknown path {self.path}"})

    def do_GET(self) -> None:  # noqa: N802
        if self.path == "/config":
            self._reply(*self.app.handle_config())
        elif self.path == "/health":
            self._reply(200, {"status": "ok"})
        else:
            self._reply(404, {"error": f"unknown path {self.path}"})

    def log_message(self, fmt: str, *args) -> None:
        pass  # quiet; decisions are logged to the decision log


def make_server(
    app: GateApp, host: str = "127.0.0.1", port: int = 0
) -> ThreadingHTTPServer:
    handler = type("BoundGateHandler", (_GateHandler,), {"app": app})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(
    rule: ScreeningRule,
    devices: DeviceTable | None,
    decision_log_path: Path | None,
    session_log_path: Path | None,
    config_document: dict,
    host: str = "127.0.0.1",
    port: int = 8787,
) -> None:
    app = GateApp(
        rule=rule,
        devices=devices,
        decision_log=_AppendLog(decision_log_path),
        session_log=_AppendLog(session_log_path),
        config_document=config_document,
    )
    server = make_server(app, host, port)
    actual_port = server.server_address[1]
    print(f"gate service listening on {host}:{actual_port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
