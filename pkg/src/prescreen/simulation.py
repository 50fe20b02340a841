"""Monte Carlo mixture-resampling over cohort size, threshold, and mix.

For every grid cell (N, T, X) the engine draws N-participant cohorts with
round(N*X/100) members from the non-passing group, fits the requested
model on the cohort's pooled retained trials, and averages R^2 over the
repetitions. Per-repetition RNG substreams are keyed on (seed, purpose,
model, instruction, N, X, repetition, partition-fingerprint); the
threshold T enters only through the fingerprint of the partition it
induces, so identical partitions reproduce identical draws. Cells are
independent, which makes results identical under any worker count.
"""

from __future__ import annotations

import hashlib
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

from .core import DeviceTable, Instruction
from .models import (
    ConditionMatrix,
    DegenerateX,
    InsufficientTrials,
    LengthMismatch,
    R2_UNDEFINED,
    fit_fitts_pooled,
    fit_sigma_2d_pooled,
    fit_variance_1d_pooled,
    index_of_difficulty,
    observed_error_rates,
    pooled_mean_mt,
    predict_er,
    r_squared,
)
from .preprocess import CleanDataset
from .rng import substream
from .screening import ScreeningRule, partition, screen_sessions

_FIT_ERRORS = (DegenerateX, InsufficientTrials, LengthMismatch)

#: Minimum distinct width levels for leave-one-width-out cross-validation.
#: Three levels would leave 2-point training folds, which saturate every
#: 2-parameter model here and predict nothing.
MIN_LOOCV_WIDTHS = 4


class Model(str, Enum):
    FITTS_MT = "FittsMT"
    ER_DISK = "ErDisk"
    ER_BAND = "ErBand"


class InsufficientGroup(ValueError):
    def __init__(self, group: str, needed: int, available: int):
        super().__init__(f"{group} group has {available} participants, need {needed}")
        self.group = group
        self.needed = needed
        self.available = available


class AllRepetitionsFailed(RuntimeError):
    pass


class TooFewWidths(ValueError):
    pass


@dataclass(frozen=True)
class SimGrid:
    n_values: tuple[int, ...]
    t_values: tuple[float, ...]
    x_values: tuple[int, ...]
    repetitions: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.n_values and self.t_values and self.x_values):
            raise ValueError("grid axes must be nonempty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if any(x < 0 or x > 100 for x in self.x_values):
            raise ValueError("X values must lie in [0, 100]")
        if any(n < 1 for n in self.n_values):
            raise ValueError("N values must be positive")

    @classmethod
    def exp1_default(cls, repetitions: int = 1000, seed: int = 0) -> "SimGrid":
        return cls(
            n_values=(10, 20, 40, 80),
            t_values=tuple(float(t) for t in range(5, 55, 5)),
            x_values=tuple(range(0, 110, 10)),
            repetitions=repetitions,
            seed=seed,
        )

    @classmethod
    def exp2_default(cls, repetitions: int = 1000, seed: int = 0) -> "SimGrid":
        return cls(
            n_values=(10, 20, 40, 80),
            t_values=tuple(float(t) for t in range(1, 11)),
            x_values=tuple(range(0, 110, 10)),
            repetitions=repetitions,
            seed=seed,
        )


@dataclass(frozen=True)
class CohortSample:
    repetition_index: int
    ids: tuple[str, ...]
    n_nonpassing: int
    n_passing: int


@dataclass(frozen=True)
class CellResult:
    mean_r2: float | None
    reps_ok: int
    reps_failed: int


CellKey = tuple[str, str, int, float, int]  # (model, instruction, N, T, X)


@dataclass
class HeatmapGrid:
    n_values: tuple[int, ...]
    t_values: tuple[float, ...]
    x_values: tuple[int, ...]
    repetitions: int
    seed: int
    cells: dict[CellKey, CellResult] = field(default_factory=dict)
    group_sizes: dict[float, tuple[int, int]] = field(default_factory=dict)


def _round_half_away(value: float) -> int:
    return int(math.floor(value + 0.5))


def mixture_counts(n: int, x_percent: float) -> tuple[int, int]:
    n_non = _round_half_away(n * x_percent / 100.0)
    return n_non, n - n_non


def sample_mixture(
    passing: set[str] | tuple[str, ...],
    non_passing: set[str] | tuple[str, ...],
    n: int,
    x_percent: float,
    rng,
    repetition_index: int = 0,
) -> CohortSample:
    """Draw round(N*X/100) non-passing and the rest passing, no replacement."""
    n_non, n_pass = mixture_counts(n, x_percent)
    non_pool = sorted(non_passing)
    pass_pool = sorted(passing)
    if n_non > len(non_pool):
        raise InsufficientGroup("non_passing", n_non, len(non_pool))
    if n_pass > len(pass_pool):
        raise InsufficientGroup("passing", n_pass, len(pass_pool))
    drawn: list[str] = []
    if n_non:
        drawn.extend(str(v) for v in rng.choice(non_pool, size=n_non, replace=False))
    if n_pass:
        drawn.extend(str(v) for v in rng.choice(pass_pool, size=n_pass, replace=False))
    return CohortSample(
        repetition_index=repetition_index,
        ids=tuple(sorted(drawn)),
        n_nonpassing=n_non,
        n_passing=n_pass,
    )


def partition_fingerprint(
    passing: set[str] | tuple[str, ...], non_passing: set[str] | tuple[str, ...]
) -> str:
    key = "\x1e".join(sorted(passing)) + "\x1d" + "\x1e".join(sorted(non_passing))
    return hashlib.sha256(key.encode()).hexdigest()


def cohort_r2(
    stats: ConditionMatrix,
    model: Model,
    instruction: Instruction,
    ids: tuple[str, ...],
) -> float:
    """Model R^2 on one cohort's pooled retained trials."""
    if model is Model.FITTS_MT:
        return fit_fitts_pooled(stats, instruction, ids).r2
    observed = observed_error_rates(stats, instruction, ids)
    if model is Model.ER_DISK:
        fit = fit_sigma_2d_pooled(stats, instruction, ids)
    else:
        fit = fit_variance_1d_pooled(stats, instruction, ids)
    return predict_er(fit, observed).r2


def cohort_loocv_r2(
    stats: ConditionMatrix,
    model: Model,
    instruction: Instruction,
    ids: tuple[str, ...],
) -> float:
    """Leave-one-width-out predictive R^2, pooled over the cohort's folds."""
    pooled = stats.pooled(ids)
    observed_pairs: list[float] = []
    predicted_pairs: list[float] = []
    er_observed = (
        dict(observed_error_rates(stats, instruction, ids))
        if model is not Model.FITTS_MT
        else {}
    )
    for held_out in stats.widths(instruction):
        if model is Model.FITTS_MT:
            fit = fit_fitts_pooled(stats, instruction, ids, exclude_width=held_out)
            for col in stats.instruction_columns(instruction):
                _instr, amplitude, width = stats.conditions[col]
                if width != held_out:
                    continue
                mean_mt = pooled_mean_mt(pooled[col])
                if mean_mt is None:
                    continue
                observed_pairs.append(mean_mt)
                predicted_pairs.append(fit.predict(index_of_difficulty(amplitude, width)))
        else:
            if held_out not in er_observed:
                continue
            if model is Model.ER_DISK:
                sigma_fit = fit_sigma_2d_pooled(
                    stats, instruction, ids, exclude_width=held_out
                )
                prediction = predict_er(sigma_fit, [(held_out, er_observed[held_out])])
            else:
                var_fit = fit_variance_1d_pooled(
                    stats, instruction, ids, exclude_width=held_out
                )
                prediction = predict_er(var_fit, [(held_out, er_observed[held_out])])
            observed_pairs.append(prediction.per_width[0][1])
            predicted_pairs.append(prediction.per_width[0][2])
    if len(observed_pairs) < 2:
        raise DegenerateX("fewer than 2 cross-validation folds produced data")
    return r_squared(observed_pairs, predicted_pairs)


def _run_cell(
    stats: ConditionMatrix,
    passing: tuple[str, ...],
    non_passing: tuple[str, ...],
    n: int,
    x_percent: int,
    model: Model,
    instruction: Instruction,
    repetitions: int,
    seed: int,
    cross_validate: bool,
) -> CellResult:
    n_non, n_pass = mixture_counts(n, x_percent)
    if n_non > len(non_passing):
        raise InsufficientGroup("non_passing", n_non, len(non_passing))
    if n_pass > len(passing):
        raise InsufficientGroup("passing", n_pass, len(passing))
    purpose = "loocv" if cross_validate else "cell"
    fingerprint = partition_fingerprint(passing, non_passing)
    values: list[float] = []
    failed = 0
    for repetition in range(repetitions):
        rng = substream(
            seed, purpose, model.value, instruction.value, n, x_percent, repetition, fingerprint
        )
        cohort = sample_mixture(passing, non_passing, n, x_percent, rng, repetition)
        try:
            if cross_validate:
                r2 = cohort_loocv_r2(stats, model, instruction, cohort.ids)
            else:
                r2 = cohort_r2(stats, model, instruction, cohort.ids)
        except _FIT_ERRORS:
            failed += 1
            continue
        if math.isnan(r2) or r2 == R2_UNDEFINED:
            failed += 1
            continue
        values.append(r2)
    if not values:
        raise AllRepetitionsFailed(
            f"all {repetitions} repetitions failed for N={n} X={x_percent} {model.value}"
        )
    return CellResult(
        mean_r2=statistics.fmean(values), reps_ok=len(values), reps_failed=failed
    )


def evaluate_cell(
    clean: CleanDataset,
    passing: set[str] | tuple[str, ...],
    non_passing: set[str] | tuple[str, ...],
    n: int,
    x_percent: int,
    model: Model,
    instruction: Instruction,
    repetitions: int,
    seed: int,
    stats: ConditionMatrix | None = None,
) -> CellResult:
    """Average model R^2 over seeded mixture repetitions for one cell."""
    stats = stats if stats is not None else ConditionMatrix.from_clean(clean)
    return _run_cell(
        stats,
        tuple(sorted(passing)),
        tuple(sorted(non_passing)),
        n,
        x_percent,
        model,
        instruction,
        repetitions,
        seed,
        cross_validate=False,
    )


def loocv_cell(
    clean: CleanDataset,
    passing: set[str] | tuple[str, ...],
    non_passing: set[str] | tuple[str, ...],
    n: int,
    x_percent: int,
    model: Model,
    instruction: Instruction,
    repetitions: int,
    seed: int,
    stats: ConditionMatrix | None = None,
) -> CellResult:
    """Leave-one-width-out predictive R^2, pooled over folds, averaged."""
    stats = stats if stats is not None else ConditionMatrix.from_clean(clean)
    widths = stats.widths(instruction)
    if len(widths) < MIN_LOOCV_WIDTHS:
        raise TooFewWidths(
            f"{len(widths)} width levels; cross-validation needs >= {MIN_LOOCV_WIDTHS}"
        )
    return _run_cell(
        stats,
        tuple(sorted(passing)),
        tuple(sorted(non_passing)),
        n,
        x_percent,
        model,
        instruction,
        repetitions,
        seed,
        cross_validate=True,
    )


# -- Grid sweep ----------------------------------------------------------------

_WORKER_CTX: dict = {}


def _init_worker(stats, partitions, repetitions, seed, cross_validate) -> None:
    _WORKER_CTX["stats"] = stats
    _WORKER_CTX["partitions"] = partitions
    _WORKER_CTX["repetitions"] = repetitions
    _WORKER_CTX["seed"] = seed
    _WORKER_CTX["cross_validate"] = cross_validate


def _sweep_one(spec: tuple[str, str, int, float, int]) -> tuple[CellKey, CellResult]:
    model_value, instruction_value, n, t, x = spec
    stats = _WORKER_CTX["stats"]
    passing, non_passing = _WORKER_CTX["partitions"][t]
    try:
        result = _run_cell(
            stats,
            passing,
            non_passing,
            n,
            x,
            Model(model_value),
            Instruction(instruction_value),
            _WORKER_CTX["repetitions"],
            _WORKER_CTX["seed"],
            _WORKER_CTX["cross_validate"],
        )
    except InsufficientGroup:
        result = CellResult(mean_r2=None, reps_ok=0, reps_failed=0)
    except AllRepetitionsFailed:
        result = CellResult(
            mean_r2=None, reps_ok=0, reps_failed=_WORKER_CTX["repetitions"]
        )
    return spec, result


def sweep_grid(
    clean: CleanDataset,
    rule_factory,
    grid: SimGrid,
    models: list[Model],
    instructions: list[Instruction],
    devices: DeviceTable | None = None,
    workers: int = 1,
    cross_validate: bool = False,
) -> HeatmapGrid:
    """Evaluate every (model, instruction, N, T, X) cell of the grid.

    The partition is recomputed per threshold from the cleaned sessions'
    pre-task outcomes (``rule_factory(T)`` builds the rule). Cells whose
    sampling is infeasible are marked empty rather than failing the
    sweep. Output is identical for any ``workers`` setting. Phone rules
    fall back to the bundled device table when none is supplied.
    """
    if devices is None:
        from .core import default_device_table

        devices = default_device_table()
    if cross_validate:
        stats_probe = ConditionMatrix.from_clean(clean)
        for instruction in instructions:
            widths = stats_probe.widths(instruction)
            if len(widths) < MIN_LOOCV_WIDTHS:
                raise TooFewWidths(
                    f"{len(widths)} width levels; cross-validation needs >= {MIN_LOOCV_WIDTHS}"
                )
        stats = stats_probe
    else:
        stats = ConditionMatrix.from_clean(clean)

    partitions: dict[float, tuple[tuple[str, ...], tuple[str, ...]]] = {}
    result = HeatmapGrid(
        n_values=grid.n_values,
        t_values=grid.t_values,
        x_values=grid.x_values,
        repetitions=grid.repetitions,
        seed=grid.seed,
    )
    for t in grid.t_values:
        rule: ScreeningRule = rule_factory(t)
        verdicts, _unresolved = screen_sessions(list(clean.sessions), rule, devices)
        passing, non_passing = partition(verdicts)
        partitions[t] = (tuple(sorted(passing)), tuple(sorted(non_passing)))
        result.group_sizes[t] = (len(passing), len(non_passing))

    specs: list[tuple[str, str, int, float, int]] = [
        (model.value, instruction.value, n, t, x)
        for model in models
        for instruction in instructions
        for n in grid.n_values
        for t in grid.t_values
        for x in grid.x_values
    ]
    if workers <= 1:
        _init_worker(stats, partitions, grid.repetitions, grid.seed, cross_validate)
        outcomes = [_sweep_one(spec) for spec in specs]
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(stats, partitions, grid.repetitions, grid.seed, cross_validate),
        ) as pool:
            outcomes = list(pool.map(_sweep_one, specs, chunksize=8))
    result.cells = dict(outcomes)
    if all(cell.reps_ok == 0 for cell in result.cells.values()):
        import warnings

        warnings.warn("all grid cells are empty", stacklevel=2)
    return result


# -- CSV export -----------------------------------------------------------------

HEATMAP_HEADER = "model,instruction,N,T,X,mean_r2,reps_ok,reps_failed"


def _format_float(value: float) -> str:
    return repr(value)


def heatmap_to_csv_lines(grid: HeatmapGrid, comments: tuple[str, ...] = ()) -> list[str]:
    lines = [f"# {comment}" for comment in comments]
    lines.append(HEATMAP_HEADER)
    for key in sorted(grid.cells):
        model, instruction, n, t, x = key
        cell = grid.cells[key]
        mean = "" if cell.mean_r2 is None else _format_float(cell.mean_r2)
        lines.append(
            f"{model},{instruction},{n},{_format_float(t)},{x},{mean},{cell.reps_ok},{cell.reps_failed}"
        )
    return lines


def group_sizes_to_csv_lines(
    grid: HeatmapGrid, comments: tuple[str, ...] = ()
) -> list[str]:
    lines = [f"# {comment}" for comment in comments]
    lines.append("T,passing,non_passing")
    for t in grid.t_values:
        passing, non_passing = grid.group_sizes.get(t, (0, 0))
        lines.append(f"{_format_float(t)},{passing},{non_passing}")
    return lines


def heatmap_from_csv_lines(lines: list[str]) -> HeatmapGrid:
    seed = 0
    rows: list[tuple[CellKey, CellResult]] = []
    header_seen = False
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.startswith("seed="):
                try:
                    seed = int(body.split("=", 1)[1])
                except ValueError:
                    pass
            continue
        if not header_seen:
            if line != HEATMAP_HEADER:
                from .render import SchemaMismatch

                raise SchemaMismatch(
                    f"expected header {HEATMAP_HEADER!r}, got {line!r}"
                )
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 8:
            from .render import SchemaMismatch

            raise SchemaMismatch(f"expected 8 columns, got {len(parts)}: {line!r}")
        model, instruction, n, t, x, mean, ok, bad = parts
        key: CellKey = (model, instruction, int(n), float(t), int(x))
        rows.append(
            (
                key,
                CellResult(
                    mean_r2=None if mean == "" else float(mean),
                    reps_ok=int(ok),
                    reps_failed=int(bad),
                ),
            )
        )
    if not header_seen:
        from .render import SchemaMismatch

        raise SchemaMismatch("missing header row")
    cells = dict(rows)
    grid = HeatmapGrid(
        n_values=tuple(sorted({k[2] for k in cells})),
        t_values=tuple(sorted({k[3] for k in cells})),
        x_values=tuple(sorted({k[4] for k in cells})),
        repetitions=max(
            (c.reps_ok + c.reps_failed for c in cells.values()), default=0
        ),
        seed=seed,
        cells=cells,
    )
    return grid
