"""Participant screening rules, verdicts, partitioning, and gate decisions.

PC sessions pass when both adjusted sizes land inside the plausible range
(inclusive) and the absolute discrepancy between the two adjustments is
strictly below the threshold. Phone sessions pass when the absolute
millimeter error of the single adjustment against the ID-1 card short
side is strictly below the threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone

from .core import (
    CARD_SHORT_MM,
    DeviceProfile,
    DeviceTable,
    DuplicateParticipant,
    AmbiguousMatch,
    NoMatch,
    PreTaskOutcome,
    SchemaError,
    SessionKind,
    lookup_device,
    px_to_mm,
)


class WrongSessionKind(TypeError):
    pass


class MalformedPayload(ValueError):
    pass


@dataclass(frozen=True)
class PcRangeAndDiscrepancy:
    """Both adjusted sizes in [range_min, range_max] px and |s1 - s2| < T px."""

    T: float
    range_min: float = 200.0
    range_max: float = 600.0

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if not self.range_min < self.range_max:
            raise ValueError("range_min must be below range_max")

    def describe(self) -> dict:
        return {
            "kind": "pc",
            "T": self.T,
            "range_min": self.range_min,
            "range_max": self.range_max,
        }


@dataclass(frozen=True)
class PhoneAbsError:
    """Absolute mm error against the physical card short side, < T mm."""

    T: float
    card_short_side: float = CARD_SHORT_MM

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")

    def describe(self) -> dict:
        return {"kind": "phone", "T": self.T, "card_short_side": self.card_short_side}


ScreeningRule = PcRangeAndDiscrepancy | PhoneAbsError


@dataclass(frozen=True)
class ScreeningVerdict:
    participant_id: str
    passed: bool
    metric: float
    rule_used: ScreeningRule


def classify_pc(outcome: PreTaskOutcome, rule: PcRangeAndDiscrepancy) -> ScreeningVerdict:
    if outcome.session_kind is not SessionKind.PC_TWO_TRIAL:
        raise WrongSessionKind(f"expected PcTwoTrial, got {outcome.session_kind.value}")
    first, second = (adj.final_size for adj in outcome.adjustments)
    in_range = (
        rule.range_min <= first <= rule.range_max
        and rule.range_min <= second <= rule.range_max
    )
    metric = abs(first - second)
    return ScreeningVerdict(
        participant_id=outcome.participant_id,
        passed=in_range and metric < rule.T,
        metric=metric,
        rule_used=rule,
    )


def classify_phone(
    outcome: PreTaskOutcome, profile: DeviceProfile, rule: PhoneAbsError
) -> ScreeningVerdict:
    if outcome.session_kind is not SessionKind.PHONE_SINGLE_TRIAL:
        raise WrongSessionKind(
            f"expected PhoneSingleTrial, got {outcome.session_kind.value}"
        )
    adjusted_mm = px_to_mm(outcome.adjustments[0].final_size, profile)
    metric = abs(adjusted_mm - rule.card_short_side)
    return ScreeningVerdict(
        participant_id=outcome.participant_id,
        passed=metric < rule.T,
        metric=metric,
        rule_used=rule,
    )


def classify(
    outcome: PreTaskOutcome,
    rule: ScreeningRule,
    profile: DeviceProfile | None = None,
) -> ScreeningVerdict:
    if isinstance(rule, PcRangeAndDiscrepancy):
        return classify_pc(outcome, rule)
    if profile is None:
        raise ValueError("phone rule requires a device profile")
    return classify_phone(outcome, profile, rule)


def screen_sessions(
    sessions: list,
    rule: ScreeningRule,
    devices: DeviceTable | None = None,
) -> tuple[list[ScreeningVerdict], list[str]]:
    """Classify every session's pre-task outcome under one rule.

    Phone-rule sessions whose resolution cannot be resolved produce no
    verdict; their ids are returned separately (they are excluded from
    analysis, the same way unidentifiable-PPI participants were).
    """
    verdicts: list[ScreeningVerdict] = []
    unresolved: list[str] = []
    for session in sessions:
        if isinstance(rule, PhoneAbsError):
            if session.device is None or devices is None:
                unresolved.append(session.participant_id)
                continue
            try:
                profile = lookup_device(session.device, devices)
            except (NoMatch, AmbiguousMatch):
                unresolved.append(session.participant_id)
                continue
            verdicts.append(classify_phone(session.pretask, profile, rule))
        else:
            verdicts.append(classify_pc(session.pretask, rule))
    return verdicts, unresolved


def partition(verdicts: list[ScreeningVerdict]) -> tuple[set[str], set[str]]:
    """Split verdicts into disjoint exhaustive (passing, non-passing) id sets."""
    passing: set[str] = set()
    non_passing: set[str] = set()
    for verdict in verdicts:
        if verdict.participant_id in passing or verdict.participant_id in non_passing:
            raise DuplicateParticipant(
                f"duplicate verdict for participant {verdict.participant_id!r}"
            )
        (passing if verdict.passed else non_passing).add(verdict.participant_id)
    return passing, non_passing


# -- Live gate ------------------------------------------------------------------


@dataclass(frozen=True)
class GateDecision:
    participant_id: str
    decision: str  # "admit" | "reject"
    metric: float | None
    reason: str | None
    timestamp: str
    rule: dict

    def to_response(self) -> dict:
        body: dict = {"decision": self.decision, "metric": self.metric}
        if self.reason is not None:
            body["reason"] = self.reason
        return body

    def to_record(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "participant_id": self.participant_id,
            "decision": self.decision,
            "metric": self.metric,
            "reason": self.reason,
            "rule": self.rule,
        }


def pretask_from_payload(payload: dict) -> tuple[PreTaskOutcome, tuple[int, int] | None]:
    """Parse a gate request body: a PreTaskOutcome record plus raw resolution."""
    from .core import _enum, _number, _string  # shared field validators

    if not isinstance(payload, dict):
        raise MalformedPayload("payload is not an object")
    try:
        from .core import Adjustment

        raw_adjustments = payload.get("adjustments")
        if not isinstance(raw_adjustments, list):
            raise SchemaError("adjustments must be a list")
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
        outcome = PreTaskOutcome(
            participant_id=_string(payload, "participant_id"),
            adjustments=tuple(adjustments),
            session_kind=_enum(payload, "session_kind", SessionKind),
        )
        device = None
        raw_device = payload.get("device")
        if raw_device is not None:
            if not isinstance(raw_device, dict):
                raise SchemaError("device must be an object with w and h")
            device = (int(_number(raw_device, "w")), int(_number(raw_device, "h")))
    except SchemaError as exc:
        raise MalformedPayload(str(exc)) from None
    return outcome, device


def gate_decision(
    payload: dict,
    rule: ScreeningRule,
    devices: DeviceTable | None = None,
    now: datetime | None = None,
) -> GateDecision:
    """Apply the screening rule to a live pre-task payload.

    Admission mirrors offline classification exactly; a phone payload
    whose resolution cannot be resolved is rejected with the
    UnresolvableDevice reason code.
    """
    outcome, resolution = pretask_from_payload(payload)
    stamp = (now or datetime.now(timezone.utc)).isoformat()
    if isinstance(rule, PhoneAbsError):
        if resolution is None or devices is None:
            return GateDecision(
                participant_id=outcome.participant_id,
                decision="reject",
                metric=None,
                reason="UnresolvableDevice",
                timestamp=stamp,
                rule=rule.describe(),
            )
        try:
            profile = lookup_device(resolution, devices)
        except (NoMatch, AmbiguousMatch):
            return GateDecision(
                participant_id=outcome.participant_id,
                decision="reject",
                metric=None,
                reason="UnresolvableDevice",
                timestamp=stamp,
                rule=rule.describe(),
            )
        try:
            verdict = classify_phone(outcome, profile, rule)
        except WrongSessionKind as exc:
            raise MalformedPayload(str(exc)) from None
    else:
        try:
            verdict = classify_pc(outcome, rule)
        except WrongSessionKind as exc:
            raise MalformedPayload(str(exc)) from None
    return GateDecision(
        participant_id=outcome.participant_id,
        decision="admit" if verdict.passed else "reject",
        metric=verdict.metric,
        reason=None if verdict.passed else "FailedScreening",
        timestamp=stamp,
        rule=rule.describe(),
    )


def decision_to_json_line(decision: GateDecision) -> str:
    return json.dumps(decision.to_record(), separators=(",", ":"), sort_keys=True)
