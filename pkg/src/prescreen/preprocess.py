"""Endpoint projection and the three-stage 3-sigma outlier-exclusion pipeline.

Stage 1 clips each participant's per-condition projection coordinate
(PC sessions: the along-axis coordinate; phone sessions: the vertical
offset from the band center). Stage 2 clips per-condition movement times.
Both stages are judged independently on the full per-condition samples, so
one trial can satisfy both criteria; the union is excluded. Stage 3 clips
participants on their mean MT over trials surviving stages 1 and 2.
Each stage runs exactly once (no iteration).
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass

from .core import Instruction, PointingTrial, SessionKind, SessionLog

TrialRef = tuple[str, int, int]


class DegenerateAxis(ValueError):
    """prev_center equals target_center; no task axis exists."""


class EmptyCondition(ValueError):
    """A participant has no analyzable main trials."""


@dataclass(frozen=True)
class SignedProjection:
    """Endpoint coordinates relative to the target center.

    PC sessions use the rotated task frame: ``x_along`` is positive when
    the click overshot the target center along the prev->target axis.
    Phone sessions keep the screen frame: ``y_ortho`` is the vertical
    offset, positive below the band center (screen y grows downward).
    """

    trial_ref: TrialRef
    x_along: float
    y_ortho: float


def project_endpoint(trial: PointingTrial) -> SignedProjection:
    """Rotate the plane so prev->target is the positive task axis.

    The target center maps to (0, 0); overshoot is positive ``x_along``.
    The orthogonal axis is the counterclockwise perpendicular.
    """
    px, py = trial.prev_center
    tx, ty = trial.target_center
    ax, ay = tx - px, ty - py
    norm = math.hypot(ax, ay)
    if norm == 0.0:
        raise DegenerateAxis(f"prev_center equals target_center for trial {trial.trial_index}")
    ux, uy = ax / norm, ay / norm
    dx, dy = trial.endpoint[0] - tx, trial.endpoint[1] - ty
    return SignedProjection(
        trial_ref=(trial.participant_id, trial.block_index, trial.trial_index),
        x_along=dx * ux + dy * uy,
        y_ortho=-dx * uy + dy * ux,
    )


def project_endpoint_band(trial: PointingTrial) -> SignedProjection:
    """Screen-frame projection for full-width band targets.

    ``y_ortho`` is positive when the tap landed below the band center,
    ``x_along`` is the horizontal offset; distances are preserved.
    """
    tx, ty = trial.target_center
    return SignedProjection(
        trial_ref=(trial.participant_id, trial.block_index, trial.trial_index),
        x_along=trial.endpoint[0] - tx,
        y_ortho=trial.endpoint[1] - ty,
    )


def sigma_clip(values: list[float], k: float = 3.0) -> list[int]:
    """Indices within k sample standard deviations of the mean.

    Single pass, never iterated; the mean and sd (n-1 denominator) come
    from the full input. Zero (or undefined) sd keeps everything.
    """
    if not values:
        raise ValueError("sigma_clip requires nonempty values")
    if len(values) == 1:
        return [0]
    mean = statistics.fmean(values)
    sd = statistics.stdev(values)
    if sd == 0.0:
        return list(range(len(values)))
    limit = k * sd
    return [i for i, v in enumerate(values) if abs(v - mean) <= limit]


@dataclass(frozen=True)
class ParticipantExclusionDetail:
    participant_id: str
    input_trials: int
    coord_flagged: int
    mt_flagged: int
    participant_excluded: bool
    retained: int


@dataclass(frozen=True)
class ExclusionReport:
    """Counts per exclusion criterion; criteria are not mutually exclusive."""

    excluded_coord_trials: int
    excluded_mt_trials: int
    excluded_participants: int
    retained_trials: int
    input_trials: int
    details: tuple[ParticipantExclusionDetail, ...]

    def to_record(self) -> dict:
        return {
            "excluded_coord_trials": self.excluded_coord_trials,
            "excluded_mt_trials": self.excluded_mt_trials,
            "excluded_participants": self.excluded_participants,
            "retained_trials": self.retained_trials,
            "input_trials": self.input_trials,
            "details": [
                {
                    "participant_id": d.participant_id,
                    "input_trials": d.input_trials,
                    "coord_flagged": d.coord_flagged,
                    "mt_flagged": d.mt_flagged,
                    "participant_excluded": d.participant_excluded,
                    "retained": d.retained,
                }
                for d in self.details
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"), sort_keys=True)

    def to_text(self) -> str:
        lines = [
            f"input main trials:      {self.input_trials}",
            f"coordinate outliers:    {self.excluded_coord_trials}",
            f"MT outliers:            {self.excluded_mt_trials}",
            f"excluded participants:  {self.excluded_participants}",
            f"retained trials:        {self.retained_trials}",
            "(criterion counts are not mutually exclusive)",
        ]
        return "\n".join(lines)


@dataclass(frozen=True)
class CleanDataset:
    """Sessions with outlier trials removed plus analysis projections."""

    session_kind: SessionKind
    sessions: tuple[SessionLog, ...]
    projections: dict[TrialRef, SignedProjection]
    report: ExclusionReport

    def retained_trials(self) -> list[PointingTrial]:
        return [t for s in self.sessions for t in s.trials]


def _project(trial: PointingTrial, kind: SessionKind) -> SignedProjection:
    if kind is SessionKind.PC_TWO_TRIAL:
        return project_endpoint(trial)
    return project_endpoint_band(trial)


def clean_dataset(sessions: list[SessionLog], policy: SessionKind) -> CleanDataset:
    """Run the three-stage exclusion pipeline over validated sessions.

    Practice-instruction trials are dropped before any clipping and are
    not counted in the report. The clipped coordinate is ``x_along`` for
    PC sessions and ``y_ortho`` for phone sessions.
    """
    per_participant_retained: dict[str, list[PointingTrial]] = {}
    details: dict[str, dict] = {}
    projections: dict[TrialRef, SignedProjection] = {}
    input_trials = 0
    total_coord = 0
    total_mt = 0

    for session in sessions:
        main = session.main_trials()
        if not main:
            raise EmptyCondition(f"participant {session.participant_id!r} has no main trials")
        input_trials += len(main)

        by_condition: dict[tuple[Instruction, float, float], list[PointingTrial]] = {}
        for trial in main:
            key = (
                trial.condition.instruction,
                trial.condition.amplitude_A,
                trial.condition.width_W,
            )
            by_condition.setdefault(key, []).append(trial)

        flagged: set[TrialRef] = set()
        coord_flagged = 0
        mt_flagged = 0
        for trials in by_condition.values():
            projs = [_project(t, policy) for t in trials]
            for proj in projs:
                projections[proj.trial_ref] = proj
            coords = [
                p.x_along if policy is SessionKind.PC_TWO_TRIAL else p.y_ortho for p in projs
            ]
            kept_coord = set(sigma_clip(coords))
            kept_mt = set(sigma_clip([t.movement_time_MT for t in trials]))
            for i, trial in enumerate(trials):
                ref = (trial.participant_id, trial.block_index, trial.trial_index)
                if i not in kept_coord:
                    coord_flagged += 1
                    flagged.add(ref)
                if i not in kept_mt:
                    mt_flagged += 1
                    flagged.add(ref)

        survivors = [
            t for t in main if (t.participant_id, t.block_index, t.trial_index) not in flagged
        ]
        per_participant_retained[session.participant_id] = survivors
        total_coord += coord_flagged
        total_mt += mt_flagged
        details[session.participant_id] = {
            "input": len(main),
            "coord": coord_flagged,
            "mt": mt_flagged,
            "excluded": False,
        }

    # Stage 3: clip participants on mean MT over surviving trials.
    ids = [s.participant_id for s in sessions]
    means = []
    for pid in ids:
        survivors = per_participant_retained[pid]
        if not survivors:
            # Everything clipped at stages 1-2; treat as an excluded participant.
            means.append(math.nan)
        else:
            means.append(statistics.fmean(t.movement_time_MT for t in survivors))
    finite = [(i, m) for i, m in enumerate(means) if not math.isnan(m)]
    kept_positions = {finite[j][0] for j in sigma_clip([m for _, m in finite])} if finite else set()
    excluded_participants = [
        pid for i, pid in enumerate(ids) if i not in kept_positions or math.isnan(means[i])
    ]

    clean_sessions = []
    retained_total = 0
    for session in sessions:
        pid = session.participant_id
        if pid in excluded_participants:
            details[pid]["excluded"] = True
            continue
        survivors = tuple(per_participant_retained[pid])
        retained_total += len(survivors)
        clean_sessions.append(
            SessionLog(
                participant_id=pid,
                device=session.device,
                pretask=session.pretask,
                trials=survivors,
                reaim_policy=session.reaim_policy,
            )
        )

    detail_rows = tuple(
        ParticipantExclusionDetail(
            participant_id=pid,
            input_trials=details[pid]["input"],
            coord_flagged=details[pid]["coord"],
            mt_flagged=details[pid]["mt"],
            participant_excluded=details[pid]["excluded"],
            retained=0 if details[pid]["excluded"] else len(per_participant_retained[pid]),
        )
        for pid in ids
    )
    report = ExclusionReport(
        excluded_coord_trials=total_coord,
        excluded_mt_trials=total_mt,
        excluded_participants=len(excluded_participants),
        retained_trials=retained_total,
        input_trials=input_trials,
        details=detail_rows,
    )
    retained_projections = {
        (t.participant_id, t.block_index, t.trial_index): projections[
            (t.participant_id, t.block_index, t.trial_index)
        ]
        for s in clean_sessions
        for t in s.trials
    }
    return CleanDataset(
        session_kind=policy,
        sessions=tuple(clean_sessions),
        projections=retained_projections,
        report=report,
    )
