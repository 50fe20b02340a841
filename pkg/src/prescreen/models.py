"""Movement-time and error-rate models with their fitting machinery.

The model surface: a linear movement-time law on task difficulty, linear
regressions of endpoint spread on target width, a bivariate-normal disk
success probability for circular targets, and a 1D band success
probability for full-width targets. Fits pool trials per condition
across the supplied participants (pooled-trial means, not averaged
per-participant fits).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import Instruction
from .preprocess import CleanDataset

#: Floor applied to predicted spreads (length units) before disk integration.
SIGMA_FLOOR = 1e-9
#: Floor applied to predicted variances (squared units) before band prediction.
VARIANCE_FLOOR = 1e-9

#: Sentinel returned by r_squared when SStot is zero with nonzero residuals.
R2_UNDEFINED = float("-inf")


class NonpositiveWidth(ValueError):
    pass


class DegenerateX(ValueError):
    """Regression x values carry no spread (or too few points)."""


class LengthMismatch(ValueError):
    pass


class InsufficientTrials(ValueError):
    """A width level has too few retained trials for a spread estimate."""


# -- Scalar numerics ----------------------------------------------------------


def index_of_difficulty(amplitude: float, width: float) -> float:
    """Task difficulty in bits: log2(A/W + 1)."""
    if width <= 0:
        raise NonpositiveWidth(f"width must be positive, got {width!r}")
    if amplitude < 0:
        raise ValueError(f"amplitude must be nonnegative, got {amplitude!r}")
    return math.log2(amplitude / width + 1.0)


def erf(x: float) -> float:
    """Error function, absolute error well below 1e-12 over the real line.

    Uses the positive-term Maclaurin form 2x e^(-x^2)/sqrt(pi) * sum
    (2x^2)^n / (2n+1)!! for |x| <= 3 (no cancellation) and a Lentz
    continued fraction for the complement beyond.
    """
    if math.isnan(x):
        raise ValueError("erf requires a finite argument")
    ax = abs(x)
    if math.isinf(x):
        return math.copysign(1.0, x)
    if ax == 0.0:
        return 0.0
    if ax <= 3.0:
        value = _erf_series(ax)
    else:
        value = 1.0 - _erfc_continued_fraction(ax)
    return -value if x < 0 else value


def _erf_series(x: float) -> float:
    x2 = 2.0 * x * x
    term = 1.0
    total = 1.0
    n = 0
    while term > 1e-18 * total:
        term *= x2 / (2 * n + 3)
        total += term
        n += 1
    return (2.0 / math.sqrt(math.pi)) * x * math.exp(-x * x) * total


def _erfc_continued_fraction(x: float) -> float:
    # erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    tiny = 1e-300
    f = tiny
    c = f
    d = 0.0
    a = 1.0
    for n in range(1, 300):
        d = x + a * d
        if d == 0.0:
            d = tiny
        d = 1.0 / d
        c = x + a / c
        if c == 0.0:
            c = tiny
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-17:
            break
        a = n / 2.0
    return math.exp(-x * x) / math.sqrt(math.pi) * f


def success_prob_band(sigma_y: float, width: float) -> float:
    """P(|Y| <= W/2) for a centered normal with spread sigma_y."""
    if width <= 0:
        raise NonpositiveWidth(f"width must be positive, got {width!r}")
    if sigma_y < 0:
        raise ValueError(f"sigma_y must be nonnegative, got {sigma_y!r}")
    if sigma_y == 0.0:
        return 1.0
    return erf(width / (2.0 * math.sqrt(2.0) * sigma_y))


@lru_cache(maxsize=16)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _disk_quadrature(
    sigma_x: float, sigma_y: float, radius: float, n_r: int, n_theta: int
) -> float:
    nodes, weights = _leggauss(n_r)
    # Radial truncation at 12 sigma keeps the integrand resolved when the
    # disk is much larger than the distribution (mass beyond is < 1e-30).
    r_cap = min(radius, 12.0 * max(sigma_x, sigma_y))
    r = (nodes + 1.0) * (r_cap / 2.0)
    w_r = weights * (r_cap / 2.0)
    theta = np.arange(n_theta) * (2.0 * math.pi / n_theta)
    coef = (np.cos(theta) ** 2) / (2.0 * sigma_x**2) + (np.sin(theta) ** 2) / (
        2.0 * sigma_y**2
    )
    radial = np.exp(-np.outer(r * r, coef)) * (r * w_r)[:, None]
    total = radial.sum() * (2.0 * math.pi / n_theta)
    return float(total / (2.0 * math.pi * sigma_x * sigma_y))


def success_prob_disk(sigma_x: float, sigma_y: float, width: float) -> float:
    """Mass of a centered axis-aligned bivariate normal inside a disk.

    The disk has diameter ``width``. Polar quadrature: Gauss-Legendre in
    r crossed with a periodic trapezoid in theta, refined until two
    successive estimates agree to 1e-7 (absolute error <= 1e-6).
    Degenerate spreads reduce to the surviving marginal; a double point
    mass sits at the center and is inside.
    """
    if width <= 0:
        raise NonpositiveWidth(f"width must be positive, got {width!r}")
    if sigma_x < 0 or sigma_y < 0:
        raise ValueError("spreads must be nonnegative")
    radius = width / 2.0
    if sigma_x == 0.0 and sigma_y == 0.0:
        return 1.0
    if sigma_x == 0.0:
        return erf(radius / (math.sqrt(2.0) * sigma_y))
    if sigma_y == 0.0:
        return erf(radius / (math.sqrt(2.0) * sigma_x))
    n_r, n_theta = 16, 32
    previous = _disk_quadrature(sigma_x, sigma_y, radius, n_r, n_theta)
    while True:
        n_r = min(n_r * 2, 512)
        n_theta = min(n_theta * 2, 4096)
        current = _disk_quadrature(sigma_x, sigma_y, radius, n_r, n_theta)
        if abs(current - previous) <= 1e-7 or (n_r == 512 and n_theta == 4096):
            return min(max(current, 0.0), 1.0)
        previous = current


def r_squared(observed: list[float], predicted: list[float]) -> float:
    """1 - SSres/SStot; may be negative.

    When SStot is zero the value is 1.0 for an exact match and the
    R2_UNDEFINED sentinel otherwise.
    """
    if len(observed) != len(predicted):
        raise LengthMismatch(f"{len(observed)} observed vs {len(predicted)} predicted")
    if not observed:
        raise LengthMismatch("empty inputs")
    mean = math.fsum(observed) / len(observed)
    ss_res = math.fsum((o - p) ** 2 for o, p in zip(observed, predicted))
    ss_tot = math.fsum((o - mean) ** 2 for o in observed)
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else R2_UNDEFINED
    return 1.0 - ss_res / ss_tot


def fit_linear(xs: list[float], ys: list[float]) -> tuple[float, float, float]:
    """Ordinary least squares; returns (intercept, slope, r2)."""
    if len(xs) != len(ys):
        raise LengthMismatch(f"{len(xs)} xs vs {len(ys)} ys")
    if len(xs) < 2:
        raise DegenerateX("need at least 2 points")
    n = len(xs)
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    sxx = math.fsum((x - mean_x) ** 2 for x in xs)
    if sxx == 0.0:
        raise DegenerateX("all x values equal")
    sxy = math.fsum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    predictions = [intercept + slope * x for x in xs]
    return intercept, slope, r_squared(ys, predictions)


# -- Fit result types ---------------------------------------------------------


@dataclass(frozen=True)
class FittsFit:
    """Movement-time law MT = a + b * ID fitted on per-condition means."""

    a: float
    b: float
    points: tuple[tuple[float, float], ...]  # (ID bits, mean MT ms)
    r2: float
    saturated: bool  # exactly two conditions: the line is forced

    def predict(self, difficulty: float) -> float:
        return self.a + self.b * difficulty


@dataclass(frozen=True)
class SigmaFit2D:
    """Linear spread models sigma_x = c + d*W and sigma_y = e + f*W."""

    c: float
    d: float
    e: float
    f: float
    per_width: tuple[tuple[float, float, float], ...]  # (W, sd_x, sd_y)

    def predict(self, width: float) -> tuple[float, float]:
        return self.c + self.d * width, self.e + self.f * width


@dataclass(frozen=True)
class VarianceFit1D:
    """Variance model sigma_y^2 = g + h * W^2."""

    g: float
    h: float
    per_width: tuple[tuple[float, float], ...]  # (W, var_y)

    def predict_variance(self, width: float) -> float:
        return self.g + self.h * width * width


@dataclass(frozen=True)
class ErPrediction:
    """Observed vs model-predicted error rate per width level."""

    per_width: tuple[tuple[float, float, float], ...]  # (W, observed, predicted)
    r2: float
    clamp_warnings: tuple[float, ...]  # widths whose predicted spread was floored


# -- Pooled per-condition statistics ------------------------------------------

# Column layout of the statistics matrix.
_N, _SUM_MT, _SUM_X, _SUM_X2, _SUM_Y, _SUM_Y2, _N_ERR = range(7)

ConditionId = tuple[Instruction, float, float]  # (instruction, amplitude, width)


@dataclass(frozen=True)
class ConditionMatrix:
    """Per-participant sufficient statistics per condition.

    ``matrix[p, c]`` holds (n, sum MT, sum x, sum x^2, sum y, sum y^2,
    error count) for participant ``ids[p]`` under ``conditions[c]``, where
    x and y are the analysis-frame endpoint offsets from the target
    center. Cohort pooling is a participant-order sum, which makes fits
    on a cohort bit-identical to direct fits on the same participants.
    """

    ids: tuple[str, ...]
    conditions: tuple[ConditionId, ...]
    matrix: np.ndarray

    @classmethod
    def from_clean(cls, clean: CleanDataset) -> "ConditionMatrix":
        ids = tuple(sorted(s.participant_id for s in clean.sessions))
        condition_set = {
            (t.condition.instruction, t.condition.amplitude_A, t.condition.width_W)
            for s in clean.sessions
            for t in s.trials
        }
        conditions = tuple(
            sorted(condition_set, key=lambda c: (c[0].value, c[1], c[2]))
        )
        cond_index = {c: i for i, c in enumerate(conditions)}
        row_index = {pid: i for i, pid in enumerate(ids)}
        matrix = np.zeros((len(ids), len(conditions), 7), dtype=np.float64)
        for session in clean.sessions:
            row = row_index[session.participant_id]
            for trial in session.trials:
                proj = clean.projections[
                    (trial.participant_id, trial.block_index, trial.trial_index)
                ]
                col = cond_index[
                    (trial.condition.instruction, trial.condition.amplitude_A, trial.condition.width_W)
                ]
                cell = matrix[row, col]
                cell[_N] += 1.0
                cell[_SUM_MT] += trial.movement_time_MT
                cell[_SUM_X] += proj.x_along
                cell[_SUM_X2] += proj.x_along * proj.x_along
                cell[_SUM_Y] += proj.y_ortho
                cell[_SUM_Y2] += proj.y_ortho * proj.y_ortho
                if trial.first_attempt_error():
                    cell[_N_ERR] += 1.0
        return cls(ids=ids, conditions=conditions, matrix=matrix)

    def pooled(self, participant_ids: tuple[str, ...] | None = None) -> np.ndarray:
        """Sum the per-participant statistics, in sorted-id order."""
        if participant_ids is None:
            rows = self.matrix
        else:
            index = {pid: i for i, pid in enumerate(self.ids)}
            try:
                selected = [index[pid] for pid in sorted(participant_ids)]
            except KeyError as exc:
                raise KeyError(f"unknown participant {exc.args[0]!r}") from None
            rows = self.matrix[selected]
        return np.add.reduce(rows, axis=0)

    def instruction_columns(
        self, instruction: Instruction, exclude_width: float | None = None
    ) -> list[int]:
        return [
            i
            for i, (instr, _a, w) in enumerate(self.conditions)
            if instr is instruction and (exclude_width is None or w != exclude_width)
        ]

    def widths(self, instruction: Instruction) -> list[float]:
        return sorted({w for instr, _a, w in self.conditions if instr is instruction})


def _pooled_sd(cell: np.ndarray, sum_col: int, sumsq_col: int) -> float:
    n = cell[_N]
    if n < 2:
        raise InsufficientTrials("need at least 2 trials for a spread estimate")
    var = (cell[sumsq_col] - cell[sum_col] ** 2 / n) / (n - 1.0)
    return math.sqrt(max(var, 0.0))


def _pooled_var(cell: np.ndarray, sum_col: int, sumsq_col: int) -> float:
    n = cell[_N]
    if n < 2:
        raise InsufficientTrials("need at least 2 trials for a variance estimate")
    return max((cell[sumsq_col] - cell[sum_col] ** 2 / n) / (n - 1.0), 0.0)


def pooled_mean_mt(cell: np.ndarray) -> float | None:
    """Pooled mean MT of one condition cell, or None when it has no trials."""
    return cell[_SUM_MT] / cell[_N] if cell[_N] > 0 else None


def fit_fitts_pooled(
    stats: ConditionMatrix,
    instruction: Instruction,
    participant_ids: tuple[str, ...] | None = None,
    exclude_width: float | None = None,
) -> FittsFit:
    pooled = stats.pooled(participant_ids)
    points = []
    for col in stats.instruction_columns(instruction, exclude_width):
        cell = pooled[col]
        if cell[_N] > 0:
            _instr, amplitude, width = stats.conditions[col]
            points.append(
                (index_of_difficulty(amplitude, width), cell[_SUM_MT] / cell[_N])
            )
    points.sort()
    if len({p[0] for p in points}) < 2:
        raise DegenerateX("need at least 2 distinct difficulty values")
    intercept, slope, r2 = fit_linear([p[0] for p in points], [p[1] for p in points])
    return FittsFit(
        a=intercept,
        b=slope,
        points=tuple(points),
        r2=r2,
        saturated=len(points) == 2,
    )


def _per_width_cells(
    stats: ConditionMatrix,
    pooled: np.ndarray,
    instruction: Instruction,
    exclude_width: float | None = None,
) -> list[tuple[float, np.ndarray]]:
    by_width: dict[float, np.ndarray] = {}
    for col in stats.instruction_columns(instruction, exclude_width):
        width = stats.conditions[col][2]
        if width in by_width:
            by_width[width] = by_width[width] + pooled[col]
        else:
            by_width[width] = pooled[col].copy()
    return sorted(by_width.items())


def fit_sigma_2d_pooled(
    stats: ConditionMatrix,
    instruction: Instruction,
    participant_ids: tuple[str, ...] | None = None,
    exclude_width: float | None = None,
) -> SigmaFit2D:
    pooled = stats.pooled(participant_ids)
    rows = []
    for width, cell in _per_width_cells(stats, pooled, instruction, exclude_width):
        if cell[_N] == 0:
            continue
        rows.append((width, _pooled_sd(cell, _SUM_X, _SUM_X2), _pooled_sd(cell, _SUM_Y, _SUM_Y2)))
    if len(rows) < 2:
        raise DegenerateX("need at least 2 width levels")
    widths = [r[0] for r in rows]
    c, d, _ = fit_linear(widths, [r[1] for r in rows])
    e, f, _ = fit_linear(widths, [r[2] for r in rows])
    return SigmaFit2D(c=c, d=d, e=e, f=f, per_width=tuple(rows))


def fit_variance_1d_pooled(
    stats: ConditionMatrix,
    instruction: Instruction,
    participant_ids: tuple[str, ...] | None = None,
    exclude_width: float | None = None,
) -> VarianceFit1D:
    pooled = stats.pooled(participant_ids)
    rows = []
    for width, cell in _per_width_cells(stats, pooled, instruction, exclude_width):
        if cell[_N] == 0:
            continue
        rows.append((width, _pooled_var(cell, _SUM_Y, _SUM_Y2)))
    if len(rows) < 2:
        raise DegenerateX("need at least 2 width levels")
    g, h, _ = fit_linear([w * w for w, _ in rows], [v for _, v in rows])
    return VarianceFit1D(g=g, h=h, per_width=tuple(rows))


def observed_error_rates(
    stats: ConditionMatrix,
    instruction: Instruction,
    participant_ids: tuple[str, ...] | None = None,
) -> list[tuple[float, float]]:
    """Pooled first-attempt error rate per width level, sorted by width."""
    pooled = stats.pooled(participant_ids)
    rates = []
    for width, cell in _per_width_cells(stats, pooled, instruction):
        if cell[_N] > 0:
            rates.append((width, cell[_N_ERR] / cell[_N]))
    return rates


def predict_er(
    model: SigmaFit2D | VarianceFit1D,
    observed: list[tuple[float, float]],
) -> ErPrediction:
    """Predicted error rate 1 - P per width, scored against observations."""
    per_width = []
    clamped = []
    for width, observed_er in observed:
        if not 0.0 <= observed_er <= 1.0:
            raise ValueError(f"observed ER {observed_er!r} outside [0, 1]")
        if isinstance(model, SigmaFit2D):
            sigma_x, sigma_y = model.predict(width)
            if sigma_x < SIGMA_FLOOR or sigma_y < SIGMA_FLOOR:
                clamped.append(width)
            prob = success_prob_disk(
                max(sigma_x, SIGMA_FLOOR), max(sigma_y, SIGMA_FLOOR), width
            )
        else:
            variance = model.predict_variance(width)
            if variance < VARIANCE_FLOOR:
                clamped.append(width)
            prob = success_prob_band(math.sqrt(max(variance, VARIANCE_FLOOR)), width)
        per_width.append((width, observed_er, 1.0 - prob))
    if not per_width:
        raise LengthMismatch("no width levels with observations")
    r2 = r_squared([row[1] for row in per_width], [row[2] for row in per_width])
    return ErPrediction(
        per_width=tuple(per_width), r2=r2, clamp_warnings=tuple(clamped)
    )


# -- CleanDataset-facing wrappers ---------------------------------------------


def fit_fitts(clean: CleanDataset, instruction: Instruction) -> FittsFit:
    return fit_fitts_pooled(ConditionMatrix.from_clean(clean), instruction)


def fit_sigma_2d(clean: CleanDataset, instruction: Instruction) -> SigmaFit2D:
    return fit_sigma_2d_pooled(ConditionMatrix.from_clean(clean), instruction)


def fit_variance_1d(clean: CleanDataset, instruction: Instruction) -> VarianceFit1D:
    return fit_variance_1d_pooled(ConditionMatrix.from_clean(clean), instruction)


def fit_er_disk(clean: CleanDataset, instruction: Instruction) -> ErPrediction:
    stats = ConditionMatrix.from_clean(clean)
    return predict_er(
        fit_sigma_2d_pooled(stats, instruction), observed_error_rates(stats, instruction)
    )


def fit_er_band(clean: CleanDataset, instruction: Instruction) -> ErPrediction:
    stats = ConditionMatrix.from_clean(clean)
    return predict_er(
        fit_variance_1d_pooled(stats, instruction), observed_error_rates(stats, instruction)
    )
