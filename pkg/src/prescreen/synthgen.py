"""Synthetic participant populations with conforming and careless profiles.

The generator is the ground-truth oracle behind the screening and
simulation tests. Conforming participants follow the movement-time law
and the width-linked endpoint-variance model generatively; careless
profiles break the pre-task, the main task, or both. All parameter
defaults are generator conventions, not measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .core import (
    Adjustment,
    ConditionKey,
    DeviceProfile,
    Instruction,
    PointingTrial,
    PreTaskOutcome,
    ReaimPolicy,
    SessionKind,
    SessionLog,
    CARD_SHORT_MM,
    mm_to_px,
)
from .models import index_of_difficulty
from .rng import substream


class InvalidSpec(ValueError):
    pass


class ProfileKind(str, Enum):
    CONFORMING = "Conforming"
    NO_RESIZE = "NoResize"
    RANDOM_RESIZE = "RandomResize"
    IGNORE_WIDTH = "IgnoreWidth"
    CONSTANT_MT = "ConstantMT"
    IGNORE_INSTRUCTION = "IgnoreInstruction"


@dataclass(frozen=True)
class BehaviorProfile:
    kind: ProfileKind
    mixture_weight: float


@dataclass(frozen=True)
class ConformingParams:
    """Generative parameters for lawful participants.

    MT = (a + b*ID) * instruction multiplier * (1 + N(0, mt_noise_cv)),
    endpoint spread sigma(W) = sqrt(g + h*W^2) * instruction multiplier.
    Units follow the session kind: ms, and px (PC) or mm (phone).
    """

    a: float
    b: float
    g: float
    h: float
    mt_noise_cv: float
    pretask_error_scale: float
    fast_mt_mult: float = 0.9
    fast_sigma_mult: float = 1.2
    accurate_mt_mult: float = 1.1
    accurate_sigma_mult: float = 0.8

    def mt_mult(self, instruction: Instruction) -> float:
        if instruction is Instruction.FAST:
            return self.fast_mt_mult
        if instruction is Instruction.ACCURATE:
            return self.accurate_mt_mult
        return 1.0

    def sigma_mult(self, instruction: Instruction) -> float:
        if instruction is Instruction.FAST:
            return self.fast_sigma_mult
        if instruction is Instruction.ACCURATE:
            return self.accurate_sigma_mult
        return 1.0


@dataclass(frozen=True)
class CarelessParams:
    """Main-task bundle for participants that ignore the task structure.

    Careless first attempts are bimodal: most land in a tight habitual
    cluster near the target center (the bands are hard to miss when one
    does aim), and a per-participant fraction are unaimed strays in a
    ring beyond the largest target. Error rate is therefore nearly
    width-independent while the endpoint variance is inflated, which is
    deliberately outside the Gaussian-endpoint model family. Movement
    time is width-independent with per-participant centers.
    """

    mt_mean: float
    mt_sd: float  # per-trial spread
    mt_between_sd: float  # per-participant center spread
    bias_sd: float  # habitual-spot offset across participants
    habit_sd: float  # spread around the habitual spot
    stray_min: float  # stray ring: misses every width in the design
    stray_max: float
    stray_frac_range: tuple[float, float]  # per-participant unaimed fraction
    spread_sigma: float  # IgnoreWidth profile: constant endpoint spread
    slider_min: float  # random-resize travel, px
    slider_max: float


@dataclass(frozen=True)
class PopulationSpec:
    n_participants: int
    session_kind: SessionKind
    amplitude: float
    widths: tuple[float, ...]
    trials_per_width_per_block: int
    main_blocks: int
    profiles: tuple[BehaviorProfile, ...]
    conforming: ConformingParams
    careless: CarelessParams
    reaim_policy: ReaimPolicy
    seed: int
    device: DeviceProfile | None = None
    pc_area: tuple[float, float] = (1280.0, 720.0)
    pretask_initial_sizes: tuple[float, ...] = field(default=(100.0, 900.0))
    decouple_pretask: bool = False

    def __post_init__(self) -> None:
        if self.n_participants <= 0:
            raise InvalidSpec("n_participants must be positive")
        if not self.widths:
            raise InvalidSpec("widths must be nonempty")
        if any(w <= 0 for w in self.widths):
            raise InvalidSpec("widths must be positive")
        if self.trials_per_width_per_block <= 0 or self.main_blocks <= 0:
            raise InvalidSpec("block structure must be positive")
        if self.conforming.mt_noise_cv < 0:
            raise InvalidSpec("mt_noise_cv must be nonnegative")
        total = sum(p.mixture_weight for p in self.profiles)
        if not self.profiles or abs(total - 1.0) > 1e-9:
            raise InvalidSpec(f"profile weights must sum to 1, got {total!r}")
        if any(
            self.conforming.g + self.conforming.h * w * w <= 0 for w in self.widths
        ):
            raise InvalidSpec("conforming variance must be positive at every width")
        if self.session_kind is SessionKind.PHONE_SINGLE_TRIAL and self.device is None:
            raise InvalidSpec("phone populations need a device profile")

    @classmethod
    def exp1_default(
        cls,
        n_participants: int,
        profiles: tuple[BehaviorProfile, ...] | None = None,
        seed: int = 0,
    ) -> "PopulationSpec":
        return cls(
            n_participants=n_participants,
            session_kind=SessionKind.PC_TWO_TRIAL,
            amplitude=510.0,
            widths=(8.0, 38.0, 78.0),
            trials_per_width_per_block=5,
            main_blocks=4,
            profiles=profiles or default_profiles(),
            conforming=ConformingParams(
                a=300.0, b=150.0, g=4.0, h=0.008, mt_noise_cv=0.15,
                pretask_error_scale=5.0,
            ),
            careless=CarelessParams(
                mt_mean=350.0, mt_sd=40.0, mt_between_sd=80.0,
                bias_sd=4.0, habit_sd=4.0, stray_min=50.0, stray_max=150.0,
                stray_frac_range=(0.1, 0.4), spread_sigma=40.0,
                slider_min=100.0, slider_max=900.0,
            ),
            reaim_policy=ReaimPolicy.REAIM_UNTIL_SUCCESS,
            seed=seed,
        )

    @classmethod
    def exp2_default(
        cls,
        n_participants: int,
        profiles: tuple[BehaviorProfile, ...] | None = None,
        seed: int = 0,
    ) -> "PopulationSpec":
        return cls(
            n_participants=n_participants,
            session_kind=SessionKind.PHONE_SINGLE_TRIAL,
            amplitude=30.0,
            widths=(2.0, 2.8, 3.6, 4.4, 5.2, 6.0, 6.8, 7.6, 8.4),
            trials_per_width_per_block=10,
            main_blocks=4,
            profiles=profiles or default_profiles(),
            conforming=ConformingParams(
                a=300.0, b=50.0, g=0.8, h=0.03, mt_noise_cv=0.15,
                pretask_error_scale=1.2,
            ),
            careless=CarelessParams(
                mt_mean=350.0, mt_sd=40.0, mt_between_sd=80.0,
                bias_sd=0.4, habit_sd=0.4, stray_min=5.0, stray_max=12.0,
                stray_frac_range=(0.1, 0.4), spread_sigma=4.0,
                slider_min=20.0, slider_max=300.0,
            ),
            reaim_policy=ReaimPolicy.REAIM_UNTIL_SUCCESS,
            seed=seed,
            device=DeviceProfile(logical_resolution=(393, 852), ppi=460.0, scale_factor=3),
            pretask_initial_sizes=(50.0,),
        )

    @classmethod
    def exp3_default(
        cls,
        n_participants: int,
        profiles: tuple[BehaviorProfile, ...] | None = None,
        seed: int = 0,
    ) -> "PopulationSpec":
        base = cls.exp2_default(n_participants, profiles, seed)
        return replace(base, reaim_policy=ReaimPolicy.NO_REAIM)


def default_profiles(nonconforming: float = 0.3) -> tuple[BehaviorProfile, ...]:
    """A conforming majority with the pre-task-detectable careless kinds."""
    half = nonconforming / 2.0
    return (
        BehaviorProfile(ProfileKind.CONFORMING, 1.0 - nonconforming),
        BehaviorProfile(ProfileKind.NO_RESIZE, half),
        BehaviorProfile(ProfileKind.RANDOM_RESIZE, nonconforming - half),
    )


def _pretask(
    spec: PopulationSpec, kind: ProfileKind, rng: np.random.Generator, pid: str
) -> PreTaskOutcome:
    initials = list(spec.pretask_initial_sizes)
    if len(initials) > 1:
        rng.shuffle(initials)
    phone = spec.session_kind is SessionKind.PHONE_SINGLE_TRIAL

    conforming_pretask = kind is ProfileKind.CONFORMING or (
        spec.decouple_pretask
        and kind in (ProfileKind.IGNORE_WIDTH, ProfileKind.CONSTANT_MT, ProfileKind.IGNORE_INSTRUCTION)
    )
    adjustments = []
    if conforming_pretask:
        if phone:
            error_mm = rng.normal(0.0, spec.conforming.pretask_error_scale)
            final = max(mm_to_px(max(CARD_SHORT_MM + error_mm, 1.0), spec.device), 1.0)
            adjustments.append(
                Adjustment(final_size=final, op_time=max(rng.normal(8.5, 3.0), 0.5), initial_size=initials[0])
            )
        else:
            base = float(np.clip(rng.normal(359.0, 60.0), 220.0, 580.0))
            for initial in initials:
                final = base + rng.normal(0.0, spec.conforming.pretask_error_scale)
                adjustments.append(
                    Adjustment(final_size=max(final, 1.0), op_time=max(rng.normal(7.0, 2.5), 0.5), initial_size=initial)
                )
    elif kind is ProfileKind.NO_RESIZE:
        for initial in initials:
            adjustments.append(Adjustment(final_size=initial, op_time=0.0, initial_size=initial))
    else:
        # RandomResize, and the coupled careless pre-task of the
        # main-task-careless kinds: arbitrary slider travel.
        for initial in initials:
            final = rng.uniform(spec.careless.slider_min, spec.careless.slider_max)
            adjustments.append(
                Adjustment(final_size=final, op_time=rng.uniform(0.3, 3.0), initial_size=initial)
            )
    return PreTaskOutcome(
        participant_id=pid,
        adjustments=tuple(adjustments),
        session_kind=spec.session_kind,
    )


def _block_instructions(spec: PopulationSpec, rng: np.random.Generator) -> list[Instruction]:
    per_instruction = spec.main_blocks // 2
    order = [Instruction.FAST] * per_instruction + [Instruction.ACCURATE] * (
        spec.main_blocks - per_instruction
    )
    permuted = rng.permutation(len(order))
    return [order[i] for i in permuted]


def _width_sequence(spec: PopulationSpec, rng: np.random.Generator) -> list[float]:
    widths = [w for w in spec.widths for _ in range(spec.trials_per_width_per_block)]
    permuted = rng.permutation(len(widths))
    return [widths[i] for i in permuted]


def _pc_target(
    prev: tuple[float, float],
    amplitude: float,
    width: float,
    area: tuple[float, float],
    rng: np.random.Generator,
) -> tuple[float, float]:
    margin = width / 2.0 + 2.0
    for _ in range(1000):
        angle = rng.uniform(0.0, 2.0 * math.pi)
        x = prev[0] + amplitude * math.cos(angle)
        y = prev[1] + amplitude * math.sin(angle)
        if margin <= x <= area[0] - margin and margin <= y <= area[1] - margin:
            return (x, y)
    # Amplitude too large for the area; center-facing fallback.
    cx, cy = area[0] / 2.0, area[1] / 2.0
    norm = math.hypot(cx - prev[0], cy - prev[1]) or 1.0
    return (prev[0] + amplitude * (cx - prev[0]) / norm, prev[1] + amplitude * (cy - prev[1]) / norm)


def _conforming_sigma(spec: PopulationSpec, width: float) -> float:
    return math.sqrt(spec.conforming.g + spec.conforming.h * width * width)


def _generate_trials(
    spec: PopulationSpec, kind: ProfileKind, rng: np.random.Generator, pid: str
) -> list[PointingTrial]:
    careless_main = kind in (ProfileKind.NO_RESIZE, ProfileKind.RANDOM_RESIZE)
    phone = spec.session_kind is SessionKind.PHONE_SINGLE_TRIAL
    centers_phone = ((30.0, 40.0), (30.0, 40.0 + spec.amplitude))
    start_pc = (spec.pc_area[0] / 2.0, spec.pc_area[1] / 2.0)

    careless = spec.careless
    if careless_main:
        # Per-participant careless traits: a width-independent pace, a
        # habitual tap spot, and how often taps are unaimed strays.
        mt_center = rng.normal(careless.mt_mean, careless.mt_between_sd)
        bias = (rng.normal(0.0, careless.bias_sd), rng.normal(0.0, careless.bias_sd))
        stray_frac = rng.uniform(*careless.stray_frac_range)

    trials: list[PointingTrial] = []
    for block_index, instruction in enumerate(_block_instructions(spec, rng)):
        if kind is ProfileKind.IGNORE_INSTRUCTION or careless_main:
            mt_mult = sigma_mult = 1.0
        else:
            mt_mult = spec.conforming.mt_mult(instruction)
            sigma_mult = spec.conforming.sigma_mult(instruction)
        prev = centers_phone[0] if phone else start_pc
        for trial_index, width in enumerate(_width_sequence(spec, rng)):
            if phone:
                target = centers_phone[(trial_index + 1) % 2]
            else:
                target = _pc_target(prev, spec.amplitude, width, spec.pc_area, rng)

            if careless_main:
                if rng.random() < stray_frac:
                    radius = rng.uniform(careless.stray_min, careless.stray_max)
                    if phone:
                        sign = 1.0 if rng.random() < 0.5 else -1.0
                        offset = (rng.normal(0.0, 3.0), sign * radius)
                    else:
                        angle = rng.uniform(0.0, 2.0 * math.pi)
                        offset = (radius * math.cos(angle), radius * math.sin(angle))
                else:
                    offset = (
                        bias[0] + rng.normal(0.0, careless.habit_sd),
                        bias[1] + rng.normal(0.0, careless.habit_sd),
                    )
            elif kind is ProfileKind.IGNORE_WIDTH:
                sigma = careless.spread_sigma
                offset = (rng.normal(0.0, sigma), rng.normal(0.0, sigma))
            else:
                sigma = _conforming_sigma(spec, width) * sigma_mult
                if phone:
                    offset = (rng.normal(0.0, 3.0), rng.normal(0.0, sigma))
                else:
                    ux = (target[0] - prev[0]) / spec.amplitude
                    uy = (target[1] - prev[1]) / spec.amplitude
                    along = rng.normal(0.0, sigma)
                    ortho = rng.normal(0.0, sigma)
                    offset = (along * ux - ortho * uy, along * uy + ortho * ux)
            if phone:
                hit = abs(offset[1]) <= width / 2.0
            else:
                hit = math.hypot(*offset) <= width / 2.0
            endpoint = (target[0] + offset[0], target[1] + offset[1])

            if careless_main:
                mt = rng.normal(mt_center, careless.mt_sd)
            elif kind is ProfileKind.CONSTANT_MT:
                mt = rng.normal(careless.mt_mean, careless.mt_sd)
            else:
                difficulty = index_of_difficulty(spec.amplitude, width)
                mt = (spec.conforming.a + spec.conforming.b * difficulty) * mt_mult
                if spec.conforming.mt_noise_cv > 0:
                    mt *= 1.0 + rng.normal(0.0, spec.conforming.mt_noise_cv)
            mt = max(mt, 1.0)

            if spec.reaim_policy is ReaimPolicy.REAIM_UNTIL_SUCCESS:
                success, reaim = True, (0 if hit else 1)
            else:
                success, reaim = hit, 0
            trials.append(
                PointingTrial(
                    participant_id=pid,
                    block_index=block_index,
                    trial_index=trial_index,
                    condition=ConditionKey(
                        instruction=instruction,
                        amplitude_A=spec.amplitude,
                        width_W=width,
                    ),
                    prev_center=prev,
                    target_center=target,
                    endpoint=endpoint,
                    movement_time_MT=mt,
                    success=success,
                    reaim_count=reaim,
                )
            )
            prev = target
    return trials


def generate_population(
    spec: PopulationSpec,
) -> tuple[list[SessionLog], dict[str, ProfileKind]]:
    """Generate session logs plus ground-truth profile labels.

    Deterministic given (spec, seed): each participant draws from an
    index-keyed substream, so output is stable under any evaluation
    order.
    """
    kinds = [p.kind for p in spec.profiles]
    weights = np.array([p.mixture_weight for p in spec.profiles], dtype=np.float64)
    weights = weights / weights.sum()

    sessions: list[SessionLog] = []
    labels: dict[str, ProfileKind] = {}
    for index in range(spec.n_participants):
        pid = f"p{index:04d}"
        rng = substream(spec.seed, "participant", index)
        kind = kinds[int(rng.choice(len(kinds), p=weights))]
        pretask = _pretask(spec, kind, rng, pid)
        trials = _generate_trials(spec, kind, rng, pid)
        sessions.append(
            SessionLog(
                participant_id=pid,
                device=(
                    spec.device.logical_resolution
                    if spec.device is not None
                    else None
                ),
                pretask=pretask,
                trials=tuple(trials),
                reaim_policy=spec.reaim_policy,
            )
        )
        labels[pid] = kind
    return sessions, labels


def write_labels(path, labels: dict[str, ProfileKind], header_comments=()) -> None:
    from pathlib import Path

    lines = [f"# {comment}" for comment in header_comments]
    lines.append("participant_id,profile")
    lines.extend(f"{pid},{kind.value}" for pid, kind in sorted(labels.items()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
