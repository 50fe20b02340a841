"""Domain types, session-log ingestion, device tables, and unit conversion.

Session logs are UTF-8 line-delimited: one JSON session object per line,
field names matching the dataclasses below. Lines starting with ``#`` are
provenance comments and are skipped. The device table is a plain CSV with
header ``width_px,height_px,ppi,scale_factor`` (no quoting).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

SCHEMA_VERSION = "1"

#: ISO/IEC 7810 ID-1 card dimensions in millimeters.
CARD_SHORT_MM = 53.98
CARD_LONG_MM = 85.60

#: Tolerance between the recorded amplitude and the recomputed
#: prev->target center distance (sub-pixel browser layout rounding).
AMPLITUDE_TOLERANCE = 0.5


class Instruction(str, Enum):
    FAST = "Fast"
    ACCURATE = "Accurate"
    PRACTICE = "Practice"


class SessionKind(str, Enum):
    PC_TWO_TRIAL = "PcTwoTrial"
    PHONE_SINGLE_TRIAL = "PhoneSingleTrial"


class ReaimPolicy(str, Enum):
    REAIM_UNTIL_SUCCESS = "ReaimUntilSuccess"
    NO_REAIM = "NoReaim"


class SchemaError(ValueError):
    """A record violates the session-log schema or a type invariant."""


class DuplicateParticipant(ValueError):
    """The same participant_id occurred twice within one file."""


class UnknownSchemaVersion(ValueError):
    """ingest_sessions was asked for a schema version it does not know."""


class NoMatch(LookupError):
    """No device-table row matches the reported resolution."""


class AmbiguousMatch(LookupError):
    """More than one device-table row matches the reported resolution."""


@dataclass(frozen=True)
class ConditionKey:
    """One task condition: instruction crossed with target geometry.

    Lengths are logical px for PC sessions and mm for phone sessions; the
    unit system is uniform within a session.
    """

    instruction: Instruction
    amplitude_A: float
    width_W: float

    def __post_init__(self) -> None:
        if not self.width_W > 0:
            raise SchemaError(f"nonpositive width_W {self.width_W!r}")
        if not self.amplitude_A > 0:
            raise SchemaError(f"nonpositive amplitude_A {self.amplitude_A!r}")


@dataclass(frozen=True)
class PointingTrial:
    """One tap/click attempt: geometry, first-attempt endpoint, timing."""

    participant_id: str
    block_index: int
    trial_index: int
    condition: ConditionKey
    prev_center: tuple[float, float]
    target_center: tuple[float, float]
    endpoint: tuple[float, float]
    movement_time_MT: float
    success: bool
    reaim_count: int

    def __post_init__(self) -> None:
        if not self.movement_time_MT > 0:
            raise SchemaError("nonpositive MT")
        if self.reaim_count < 0:
            raise SchemaError(f"negative reaim_count {self.reaim_count}")
        dist = math.dist(self.prev_center, self.target_center)
        if abs(dist - self.condition.amplitude_A) > AMPLITUDE_TOLERANCE:
            raise SchemaError(
                "center distance %.3f does not match amplitude_A %.3f"
                % (dist, self.condition.amplitude_A)
            )

    def first_attempt_error(self) -> bool:
        """True when the first attempt missed, under either re-aim policy."""
        return (not self.success) or self.reaim_count > 0


@dataclass(frozen=True)
class Adjustment:
    final_size: float
    op_time: float
    initial_size: float

    def __post_init__(self) -> None:
        if not self.final_size > 0:
            raise SchemaError(f"nonpositive final_size {self.final_size!r}")
        if self.op_time < 0:
            raise SchemaError(f"negative op_time {self.op_time!r}")


@dataclass(frozen=True)
class PreTaskOutcome:
    """A participant's size-adjustment result(s) from the pre-task."""

    participant_id: str
    adjustments: tuple[Adjustment, ...]
    session_kind: SessionKind

    def __post_init__(self) -> None:
        expected = 2 if self.session_kind is SessionKind.PC_TWO_TRIAL else 1
        if len(self.adjustments) != expected:
            raise SchemaError(
                f"{self.session_kind.value} requires {expected} adjustment(s), "
                f"got {len(self.adjustments)}"
            )


@dataclass(frozen=True)
class DeviceProfile:
    """Screen resolution to physical scale mapping for px<->mm conversion."""

    logical_resolution: tuple[int, int]
    ppi: float
    scale_factor: int

    def __post_init__(self) -> None:
        if not self.ppi > 0:
            raise SchemaError(f"nonpositive ppi {self.ppi!r}")
        if self.scale_factor not in (1, 2, 3):
            raise SchemaError(f"scale_factor must be 1, 2 or 3, got {self.scale_factor!r}")

    @property
    def mm_per_logical_px(self) -> float:
        return 25.4 * self.scale_factor / self.ppi


@dataclass(frozen=True)
class SessionLog:
    """One participant's full session: pre-task outcome plus pointing trials."""

    participant_id: str
    device: tuple[int, int] | None
    pretask: PreTaskOutcome
    trials: tuple[PointingTrial, ...]
    reaim_policy: ReaimPolicy

    def __post_init__(self) -> None:
        if self.pretask.participant_id != self.participant_id:
            raise SchemaError("pretask participant_id does not match session")
        last: dict[int, int] = {}
        for trial in self.trials:
            if trial.participant_id != self.participant_id:
                raise SchemaError(
                    f"trial participant_id {trial.participant_id!r} does not match session"
                )
            if self.reaim_policy is ReaimPolicy.REAIM_UNTIL_SUCCESS and not trial.success:
                raise SchemaError("ReaimUntilSuccess session contains success=false trial")
            prev = last.get(trial.block_index)
            if prev is not None and trial.trial_index <= prev:
                raise SchemaError(
                    f"trial ordering not strictly increasing in block {trial.block_index}"
                )
            last[trial.block_index] = trial.trial_index

    def main_trials(self) -> tuple[PointingTrial, ...]:
        """Trials outside practice blocks; all analysis runs on these."""
        return tuple(
            t for t in self.trials if t.condition.instruction is not Instruction.PRACTICE
        )


# -- JSON (de)serialization -------------------------------------------------


def _point(value: object, name: str) -> tuple[float, float]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise SchemaError(f"{name} must be a [x, y] pair")
    return (float(value[0]), float(value[1]))


def _number(obj: dict, key: str) -> float:
    value = obj.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaError(f"missing or non-numeric {key}")
    return float(value)


def _string(obj: dict, key: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise SchemaError(f"missing or non-string {key}")
    return value


def _enum(obj: dict, key: str, enum_cls):
    raw = _string(obj, key)
    try:
        return enum_cls(raw)
    except ValueError:
        raise SchemaError(f"unknown {key} {raw!r}") from None


def session_from_dict(obj: dict) -> SessionLog:
    """Build a validated SessionLog from one decoded record."""
    if not isinstance(obj, dict):
        raise SchemaError("record is not an object")
    participant_id = _string(obj, "participant_id")

    device = None
    raw_device = obj.get("device")
    if raw_device is not None:
        if not isinstance(raw_device, dict):
            raise SchemaError("device must be an object with w and h")
        device = (int(_number(raw_device, "w")), int(_number(raw_device, "h")))

    raw_pretask = obj.get("pretask")
    if not isinstance(raw_pretask, dict):
        raise SchemaError("missing pretask")
    raw_adjustments = raw_pretask.get("adjustments")
    if not isinstance(raw_adjustments, list):
        raise SchemaError("pretask.adjustments must be a list")
    adjustments = []
    for adj in raw_adjustments:
        if not isinstance(adj, dict):
            raise SchemaError("adjustment entries must be objects")
        adjustments.append(
            Adjustment(
                final_size=_number(adj, "final_size"),
                op_time=_number(adj, "op_time"),
                initial_size=_number(adj, "initial_size"),
            )
        )
    adjustments = tuple(adjustments)
    pretask = PreTaskOutcome(
        participant_id=_string(raw_pretask, "participant_id"),
        adjustments=adjustments,
        session_kind=_enum(raw_pretask, "session_kind", SessionKind),
    )

    raw_trials = obj.get("trials")
    if not isinstance(raw_trials, list):
        raise SchemaError("trials must be a list")
    trials = []
    for raw in raw_trials:
        if not isinstance(raw, dict):
            raise SchemaError("trial entries must be objects")
        raw_cond = raw.get("condition")
        if not isinstance(raw_cond, dict):
            raise SchemaError("missing trial condition")
        condition = ConditionKey(
            instruction=_enum(raw_cond, "instruction", Instruction),
            amplitude_A=_number(raw_cond, "amplitude_A"),
            width_W=_number(raw_cond, "width_W"),
        )
        success = raw.get("success")
        if not isinstance(success, bool):
            raise SchemaError("missing or non-boolean success")
        trials.append(
            PointingTrial(
                participant_id=_string(raw, "participant_id"),
                block_index=int(_number(raw, "block_index")),
                trial_index=int(_number(raw, "trial_index")),
                condition=condition,
                prev_center=_point(raw.get("prev_center"), "prev_center"),
                target_center=_point(raw.get("target_center"), "target_center"),
                endpoint=_point(raw.get("endpoint"), "endpoint"),
                movement_time_MT=_number(raw, "movement_time_MT"),
                success=success,
                reaim_count=int(_number(raw, "reaim_count")),
            )
        )

    return SessionLog(
        participant_id=participant_id,
        device=device,
        pretask=pretask,
        trials=tuple(trials),
        reaim_policy=_enum(obj, "reaim_policy", ReaimPolicy),
    )


def session_to_dict(session: SessionLog) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "participant_id": session.participant_id,
        "device": (
            None
            if session.device is None
            else {"w": session.device[0], "h": session.device[1]}
        ),
        "reaim_policy": session.reaim_policy.value,
        "pretask": {
            "participant_id": session.pretask.participant_id,
            "session_kind": session.pretask.session_kind.value,
            "adjustments": [
                {
                    "final_size": adj.final_size,
                    "op_time": adj.op_time,
                    "initial_size": adj.initial_size,
                }
                for adj in session.pretask.adjustments
            ],
        },
        "trials": [
            {
                "participant_id": t.participant_id,
                "block_index": t.block_index,
                "trial_index": t.trial_index,
                "condition": {
                    "instruction": t.condition.instruction.value,
                    "amplitude_A": t.condition.amplitude_A,
                    "width_W": t.condition.width_W,
                },
                "prev_center": list(t.prev_center),
                "target_center": list(t.target_center),
                "endpoint": list(t.endpoint),
                "movement_time_MT": t.movement_time_MT,
                "success": t.success,
                "reaim_count": t.reaim_count,
            }
            for t in session.trials
        ],
    }


def session_to_json_line(session: SessionLog) -> str:
    return json.dumps(session_to_dict(session), separators=(",", ":"), sort_keys=True)


# -- Ingestion ----------------------------------------------------------------


@dataclass(frozen=True)
class Rejection:
    line_number: int
    reason: str


@dataclass
class IngestResult:
    sessions: list[SessionLog] = field(default_factory=list)
    rejections: list[Rejection] = field(default_factory=list)


def ingest_sessions(path: str | Path, schema_version: str = SCHEMA_VERSION) -> IngestResult:
    """Read a line-delimited session log; every line is accepted or rejected.

    Rejections carry the 1-based line number and a reason. A duplicate
    participant_id within one file is a hard error, not a rejection.
    """
    if schema_version != SCHEMA_VERSION:
        raise UnknownSchemaVersion(f"unknown schema_version {schema_version!r}")
    path = Path(path)
    result = IngestResult()
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                result.rejections.append(Rejection(line_number, f"invalid JSON: {exc.msg}"))
                continue
            if isinstance(obj, dict):
                line_version = obj.get("schema_version")
                if line_version != schema_version:
                    result.rejections.append(
                        Rejection(line_number, f"schema_version {line_version!r} != {schema_version!r}")
                    )
                    continue
            try:
                session = session_from_dict(obj)
            except SchemaError as exc:
                result.rejections.append(Rejection(line_number, str(exc)))
                continue
            if session.participant_id in seen:
                raise DuplicateParticipant(
                    f"line {line_number}: duplicate participant_id {session.participant_id!r}"
                )
            seen.add(session.participant_id)
            result.sessions.append(session)
    return result


def write_sessions(
    path: str | Path, sessions: Iterable[SessionLog], header_comments: Iterable[str] = ()
) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for comment in header_comments:
            handle.write(f"# {comment}\n")
        for session in sessions:
            handle.write(session_to_json_line(session) + "\n")


# -- Device table and unit conversion ----------------------------------------


@dataclass(frozen=True)
class DeviceTable:
    profiles: tuple[DeviceProfile, ...]

    def lookup(self, resolution: tuple[int, int]) -> DeviceProfile:
        return lookup_device(resolution, self)


def load_device_table(path: str | Path) -> DeviceTable:
    """Load a device CSV with header width_px,height_px,ppi,scale_factor."""
    path = Path(path)
    profiles = []
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        expected = ["width_px", "height_px", "ppi", "scale_factor"]
        if reader.fieldnames != expected:
            raise SchemaError(
                f"device table header must be {','.join(expected)}, got {reader.fieldnames}"
            )
        for row in reader:
            profiles.append(
                DeviceProfile(
                    logical_resolution=(int(row["width_px"]), int(row["height_px"])),
                    ppi=float(row["ppi"]),
                    scale_factor=int(row["scale_factor"]),
                )
            )
    return DeviceTable(profiles=tuple(profiles))


def default_device_table() -> DeviceTable:
    """The device table shipped with the package."""
    from importlib import resources

    with resources.as_file(resources.files("prescreen").joinpath("data/devices.csv")) as path:
        return load_device_table(path)


def lookup_device(resolution: tuple[int, int], table: DeviceTable) -> DeviceProfile:
    """Resolve a reported resolution against the table, either orientation."""
    w, h = resolution
    matches = [
        p
        for p in table.profiles
        if p.logical_resolution in ((w, h), (h, w))
    ]
    if not matches:
        raise NoMatch(f"no device profile for resolution {w}x{h}")
    if len(matches) > 1:
        raise AmbiguousMatch(f"{len(matches)} device profiles match resolution {w}x{h}")
    return matches[0]


def px_to_mm(length: float, profile: DeviceProfile) -> float:
    """Convert a logical-px length to millimeters via the device profile."""
    if length < 0:
        raise ValueError(f"negative length {length!r}")
    return length * profile.mm_per_logical_px


def mm_to_px(length_mm: float, profile: DeviceProfile) -> float:
    if length_mm < 0:
        raise ValueError(f"negative length {length_mm!r}")
    return length_mm / profile.mm_per_logical_px
