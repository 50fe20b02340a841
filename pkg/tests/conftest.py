"""Shared fixture builders for hand-constructed sessions and datasets."""

from __future__ import annotations

import math
from dataclasses import replace

import pytest

from prescreen.core import (
    Adjustment,
    ConditionKey,
    DeviceProfile,
    Instruction,
    PointingTrial,
    PreTaskOutcome,
    ReaimPolicy,
    SessionKind,
    SessionLog,
)
from prescreen.preprocess import (
    CleanDataset,
    ExclusionReport,
    project_endpoint,
    project_endpoint_band,
)

PHONE_DEVICE = DeviceProfile(logical_resolution=(393, 852), ppi=460.0, scale_factor=3)
PHONE_TOP = (30.0, 40.0)
PHONE_BOTTOM = (30.0, 70.0)
PC_START = (640.0, 360.0)


def phone_pretask(pid: str, final_size: float = 325.9, op_time: float = 8.0) -> PreTaskOutcome:
    # 325.9 px * 25.4 * 3 / 460 = 53.98 mm: a perfect adjustment by default.
    return PreTaskOutcome(
        participant_id=pid,
        adjustments=(Adjustment(final_size=final_size, op_time=op_time, initial_size=50.0),),
        session_kind=SessionKind.PHONE_SINGLE_TRIAL,
    )


def pc_pretask(pid: str, sizes: tuple[float, float] = (355.0, 360.0)) -> PreTaskOutcome:
    return PreTaskOutcome(
        participant_id=pid,
        adjustments=(
            Adjustment(final_size=sizes[0], op_time=7.5, initial_size=100.0),
            Adjustment(final_size=sizes[1], op_time=6.0, initial_size=900.0),
        ),
        session_kind=SessionKind.PC_TWO_TRIAL,
    )


def phone_session(
    pid: str,
    per_condition: dict[tuple[Instruction, float], list[tuple[float, float]]],
    policy: ReaimPolicy = ReaimPolicy.REAIM_UNTIL_SUCCESS,
    pretask: PreTaskOutcome | None = None,
    amplitude: float = 30.0,
) -> SessionLog:
    """One block per instruction; values are (y_offset, MT) per trial."""
    trials = []
    instructions = sorted({key[0] for key in per_condition}, key=lambda i: i.value)
    for block_index, instruction in enumerate(instructions):
        trial_index = 0
        for (instr, width), values in sorted(
            per_condition.items(), key=lambda kv: (kv[0][0].value, kv[0][1])
        ):
            if instr is not instruction:
                continue
            for y_offset, mt in values:
                prev = PHONE_TOP if trial_index % 2 == 0 else PHONE_BOTTOM
                target = PHONE_BOTTOM if trial_index % 2 == 0 else PHONE_TOP
                hit = abs(y_offset) <= width / 2.0
                if policy is ReaimPolicy.REAIM_UNTIL_SUCCESS:
                    success, reaim = True, (0 if hit else 1)
                else:
                    success, reaim = hit, 0
                trials.append(
                    PointingTrial(
                        participant_id=pid,
                        block_index=block_index,
                        trial_index=trial_index,
                        condition=ConditionKey(
                            instruction=instruction, amplitude_A=amplitude, width_W=width
                        ),
                        prev_center=prev,
                        target_center=target,
                        endpoint=(target[0], target[1] + y_offset),
                        movement_time_MT=mt,
                        success=success,
                        reaim_count=reaim,
                    )
                )
                trial_index += 1
    return SessionLog(
        participant_id=pid,
        device=PHONE_DEVICE.logical_resolution,
        pretask=pretask or phone_pretask(pid),
        trials=tuple(trials),
        reaim_policy=policy,
    )


def pc_session(
    pid: str,
    per_condition: dict[tuple[Instruction, float], list[tuple[float, float, float]]],
    policy: ReaimPolicy = ReaimPolicy.REAIM_UNTIL_SUCCESS,
    pretask: PreTaskOutcome | None = None,
    amplitude: float = 510.0,
) -> SessionLog:
    """One block per instruction; values are (along, ortho, MT) per trial.

    Targets ping-pong horizontally at the fixed amplitude; offsets are
    expressed in the rotated task frame and mapped back to the screen.
    """
    trials = []
    instructions = sorted({key[0] for key in per_condition}, key=lambda i: i.value)
    left = (PC_START[0] - amplitude, PC_START[1])
    for block_index, instruction in enumerate(instructions):
        trial_index = 0
        for (instr, width), values in sorted(
            per_condition.items(), key=lambda kv: (kv[0][0].value, kv[0][1])
        ):
            if instr is not instruction:
                continue
            for along, ortho, mt in values:
                prev = PC_START if trial_index % 2 == 0 else left
                target = left if trial_index % 2 == 0 else PC_START
                ux = (target[0] - prev[0]) / amplitude
                uy = (target[1] - prev[1]) / amplitude
                endpoint = (
                    target[0] + along * ux - ortho * uy,
                    target[1] + along * uy + ortho * ux,
                )
                hit = math.hypot(along, ortho) <= width / 2.0
                if policy is ReaimPolicy.REAIM_UNTIL_SUCCESS:
                    success, reaim = True, (0 if hit else 1)
                else:
                    success, reaim = hit, 0
                trials.append(
                    PointingTrial(
                        participant_id=pid,
                        block_index=block_index,
                        trial_index=trial_index,
                        condition=ConditionKey(
                            instruction=instruction, amplitude_A=amplitude, width_W=width
                        ),
                        prev_center=prev,
                        target_center=target,
                        endpoint=endpoint,
                        movement_time_MT=mt,
                        success=success,
                        reaim_count=reaim,
                    )
                )
                trial_index += 1
    return SessionLog(
        participant_id=pid,
        device=None,
        pretask=pretask or pc_pretask(pid),
        trials=tuple(trials),
        reaim_policy=policy,
    )


def as_clean(sessions: list[SessionLog], kind: SessionKind) -> CleanDataset:
    """Wrap sessions as a CleanDataset without running any exclusion."""
    projections = {}
    clean_sessions = []
    total = 0
    for session in sessions:
        main = session.main_trials()
        total += len(main)
        clean_sessions.append(replace(session, trials=main))
        for trial in main:
            ref = (trial.participant_id, trial.block_index, trial.trial_index)
            if kind is SessionKind.PC_TWO_TRIAL:
                projections[ref] = project_endpoint(trial)
            else:
                projections[ref] = project_endpoint_band(trial)
    report = ExclusionReport(
        excluded_coord_trials=0,
        excluded_mt_trials=0,
        excluded_participants=0,
        retained_trials=total,
        input_trials=total,
        details=(),
    )
    return CleanDataset(
        session_kind=kind,
        sessions=tuple(clean_sessions),
        projections=projections,
        report=report,
    )


def exact_spread_values(target_sd: float, n: int) -> list[float]:
    """Alternating +/-s sequence whose sample sd is exactly target_sd."""
    assert n % 2 == 0
    s = target_sd * math.sqrt((n - 1) / n)
    return [s if i % 2 == 0 else -s for i in range(n)]


@pytest.fixture
def phone_device() -> DeviceProfile:
    return PHONE_DEVICE
