"""Command-line orchestrator: ingest, screen, fit, simulate, loocv, generate, serve, render.

Artifacts are written atomically (temp file, then rename) and embed the
toolkit version plus the seed and rule they were produced under, so every
output is self-describing and reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .core import (
    DeviceTable,
    Instruction,
    SessionKind,
    default_device_table,
    ingest_sessions,
    load_device_table,
    write_sessions,
)
from .io_utils import atomic_write_text
from .models import (
    ConditionMatrix,
    fit_fitts_pooled,
    fit_sigma_2d_pooled,
    fit_variance_1d_pooled,
    observed_error_rates,
    predict_er,
)
from .preprocess import clean_dataset
from .render import render_heatmap
from .screening import (
    PcRangeAndDiscrepancy,
    PhoneAbsError,
    ScreeningRule,
    screen_sessions,
)
from .simulation import (
    Model,
    SimGrid,
    group_sizes_to_csv_lines,
    heatmap_to_csv_lines,
    sweep_grid,
)
from .synthgen import (
    BehaviorProfile,
    PopulationSpec,
    ProfileKind,
    generate_population,
    write_labels,
)

ENV_OUT_DIR = "PRESCREEN_OUT_DIR"


@dataclass
class RunConfig:
    command: str
    options: argparse.Namespace


def parse_kv_config(text: str) -> dict[str, str]:
    """Flat `key = value` lines; # starts a comment."""
    values: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _resolve_out_dir(flag_value: str | None) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(ENV_OUT_DIR)
    if env:
        return Path(env)
    return Path(".")


def _load_devices(path: str | None) -> DeviceTable:
    return load_device_table(path) if path else default_device_table()


def _rule_from_args(args) -> ScreeningRule:
    if args.rule == "pc":
        return PcRangeAndDiscrepancy(T=args.t)
    return PhoneAbsError(T=args.t)


def _rule_label(rule: ScreeningRule) -> str:
    desc = rule.describe()
    return ";".join(f"{k}={desc[k]}" for k in sorted(desc))


def _infer_kind(sessions) -> SessionKind:
    kinds = {s.pretask.session_kind for s in sessions}
    if len(kinds) != 1:
        raise ValueError(f"mixed session kinds in input: {sorted(k.value for k in kinds)}")
    return next(iter(kinds))


def _parse_models(spec: str, kind: SessionKind) -> list[Model]:
    models = []
    for token in spec.split(","):
        token = token.strip().lower()
        if token == "fitts":
            models.append(Model.FITTS_MT)
        elif token == "er":
            models.append(
                Model.ER_DISK if kind is SessionKind.PC_TWO_TRIAL else Model.ER_BAND
            )
        elif token in ("er_disk", "erdisk"):
            models.append(Model.ER_DISK)
        elif token in ("er_band", "erband"):
            models.append(Model.ER_BAND)
        else:
            raise ValueError(f"unknown model {token!r}")
    return models


def _parse_instructions(spec: str) -> list[Instruction]:
    mapping = {"fast": Instruction.FAST, "accurate": Instruction.ACCURATE}
    out = []
    for token in spec.split(","):
        token = token.strip().lower()
        if token not in mapping:
            raise ValueError(f"unknown instruction {token!r}")
        out.append(mapping[token])
    return out


def _grid_from_args(args, kind: SessionKind) -> SimGrid:
    base = (
        SimGrid.exp1_default(seed=args.seed)
        if kind is SessionKind.PC_TWO_TRIAL
        else SimGrid.exp2_default(seed=args.seed)
    )
    values = {}
    if args.grid:
        values = parse_kv_config(Path(args.grid).read_text(encoding="utf-8"))
    n_values = tuple(
        int(v) for v in values.get("n_values", "").split(",") if v.strip()
    ) or base.n_values
    t_values = tuple(
        float(v) for v in values.get("t_values", "").split(",") if v.strip()
    ) or base.t_values
    x_values = tuple(
        int(v) for v in values.get("x_values", "").split(",") if v.strip()
    ) or base.x_values
    repetitions = args.reps or int(values.get("repetitions", "1000"))
    return SimGrid(
        n_values=n_values,
        t_values=t_values,
        x_values=x_values,
        repetitions=repetitions,
        seed=args.seed,
    )


# -- Subcommands ----------------------------------------------------------------


def _cmd_ingest(args) -> int:
    result = ingest_sessions(args.input, args.schema_version)
    print(f"sessions: {len(result.sessions)}")
    print(f"rejections: {len(result.rejections)}")
    for rejection in result.rejections:
        print(f"  line {rejection.line_number}: {rejection.reason}")
    if args.report:
        lines = [f"# generated-by=prescreen {__version__}", "line,reason"]
        lines += [f"{r.line_number},{r.reason}" for r in result.rejections]
        atomic_write_text(args.report, "\n".join(lines) + "\n")
    return 0


def _profiles_from_config(values: dict[str, str]) -> tuple[BehaviorProfile, ...]:
    weight_keys = {
        "weight_conforming": ProfileKind.CONFORMING,
        "weight_noresize": ProfileKind.NO_RESIZE,
        "weight_randomresize": ProfileKind.RANDOM_RESIZE,
        "weight_ignorewidth": ProfileKind.IGNORE_WIDTH,
        "weight_constantmt": ProfileKind.CONSTANT_MT,
        "weight_ignoreinstruction": ProfileKind.IGNORE_INSTRUCTION,
    }
    if not any(k in values for k in weight_keys):
        return ()
    profiles = tuple(
        BehaviorProfile(kind, float(values[key]))
        for key, kind in weight_keys.items()
        if key in values and float(values[key]) > 0
    )
    return profiles


def _cmd_generate(args) -> int:
    values = parse_kv_config(Path(args.spec).read_text(encoding="utf-8"))
    kind = values.get("kind", "exp2")
    n_participants = int(values.get("n_participants", "100"))
    seed = args.seed if args.seed is not None else int(values.get("seed", "0"))
    profiles = _profiles_from_config(values) or None
    factories = {
        "exp1": PopulationSpec.exp1_default,
        "exp2": PopulationSpec.exp2_default,
        "exp3": PopulationSpec.exp3_default,
    }
    if kind not in factories:
        raise ValueError(f"unknown population kind {kind!r}")
    spec = factories[kind](n_participants, profiles, seed)
    overrides = {}
    for key in ("a", "b", "g", "h", "mt_noise_cv", "pretask_error_scale"):
        if key in values:
            overrides[key] = float(values[key])
    if overrides:
        from dataclasses import replace

        spec = replace(spec, conforming=replace(spec.conforming, **overrides))
    if values.get("decouple_pretask", "").lower() in ("1", "true", "yes"):
        from dataclasses import replace

        spec = replace(spec, decouple_pretask=True)

    sessions, labels = generate_population(spec)
    comments = (f"generated-by=prescreen {__version__}", f"seed={seed}", f"kind={kind}")
    write_sessions(args.out, sessions, header_comments=comments)
    if args.labels:
        write_labels(args.labels, labels, header_comments=comments)
    print(f"wrote {len(sessions)} sessions to {args.out}")
    return 0


def _cmd_screen(args) -> int:
    result = ingest_sessions(args.input)
    rule = _rule_from_args(args)
    devices = _load_devices(args.devices) if args.rule == "phone" else None
    verdicts, unresolved = screen_sessions(result.sessions, rule, devices)
    lines = [
        f"# generated-by=prescreen {__version__}",
        f"# rule={_rule_label(rule)}",
        "participant_id,passed,metric",
    ]
    for verdict in sorted(verdicts, key=lambda v: v.participant_id):
        lines.append(f"{verdict.participant_id},{str(verdict.passed).lower()},{verdict.metric!r}")
    for pid in sorted(unresolved):
        lines.append(f"{pid},false,")
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    n_pass = sum(1 for v in verdicts if v.passed)
    print(f"passing: {n_pass}  non-passing: {len(verdicts) - n_pass}  unresolved: {len(unresolved)}")
    return 0


def _fit_rows(clean, kind: SessionKind) -> tuple[list[str], list[str]]:
    stats = ConditionMatrix.from_clean(clean)
    fits: list[str] = []
    points: list[str] = []
    for instruction in (Instruction.FAST, Instruction.ACCURATE):
        fitts = fit_fitts_pooled(stats, instruction)
        fits.append(
            f"FittsMT,{instruction.value},a={fitts.a!r};b={fitts.b!r},{fitts.r2!r},"
            f"{str(fitts.saturated).lower()}"
        )
        for difficulty, mean_mt in fitts.points:
            points.append(
                f"FittsMT,{instruction.value},{difficulty!r},{mean_mt!r},{fitts.predict(difficulty)!r}"
            )
        observed = observed_error_rates(stats, instruction)
        if kind is SessionKind.PC_TWO_TRIAL:
            sigma = fit_sigma_2d_pooled(stats, instruction)
            er = predict_er(sigma, observed)
            coeffs = f"c={sigma.c!r};d={sigma.d!r};e={sigma.e!r};f={sigma.f!r}"
            model_name = Model.ER_DISK.value
        else:
            variance = fit_variance_1d_pooled(stats, instruction)
            er = predict_er(variance, observed)
            coeffs = f"g={variance.g!r};h={variance.h!r}"
            model_name = Model.ER_BAND.value
        clamped = "clamped" if er.clamp_warnings else ""
        fits.append(f"{model_name},{instruction.value},{coeffs},{er.r2!r},{clamped}")
        for width, observed_er, predicted_er in er.per_width:
            points.append(
                f"{model_name},{instruction.value},{width!r},{observed_er!r},{predicted_er!r}"
            )
    return fits, points


def _cmd_fit(args) -> int:
    result = ingest_sessions(args.input)
    kind = SessionKind(args.kind) if args.kind else _infer_kind(result.sessions)
    clean = clean_dataset(result.sessions, kind)
    out_dir = _resolve_out_dir(args.out_dir)
    fits, points = _fit_rows(clean, kind)
    header = [f"# generated-by=prescreen {__version__}"]
    atomic_write_text(
        out_dir / "fits.csv",
        "\n".join(header + ["model,instruction,coefficients,r2,flags"] + fits) + "\n",
    )
    atomic_write_text(
        out_dir / "fit_points.csv",
        "\n".join(header + ["model,instruction,x,observed,predicted"] + points) + "\n",
    )
    print(f"wrote {out_dir / 'fits.csv'} and {out_dir / 'fit_points.csv'}")
    return 0


def _cmd_simulate(args, cross_validate: bool = False) -> int:
    result = ingest_sessions(args.input)
    kind = SessionKind(args.kind) if args.kind else _infer_kind(result.sessions)
    clean = clean_dataset(result.sessions, kind)
    models = _parse_models(args.models, kind)
    instructions = _parse_instructions(args.instructions)
    grid = _grid_from_args(args, kind)
    devices = (
        _load_devices(args.devices) if kind is SessionKind.PHONE_SINGLE_TRIAL else None
    )
    if kind is SessionKind.PC_TWO_TRIAL:
        rule_factory = lambda t: PcRangeAndDiscrepancy(T=t)  # noqa: E731
        rule_label = "pc-range-discrepancy"
    else:
        rule_factory = lambda t: PhoneAbsError(T=t)  # noqa: E731
        rule_label = "phone-abs-error"
    heatmap = sweep_grid(
        clean,
        rule_factory,
        grid,
        models,
        instructions,
        devices=devices,
        workers=args.workers,
        cross_validate=cross_validate,
    )
    comments = (
        f"generated-by=prescreen {__version__}",
        f"seed={grid.seed}",
        f"rule={rule_label}",
        f"repetitions={grid.repetitions}",
        f"mode={'loocv' if cross_validate else 'fit'}",
    )
    atomic_write_text(args.out, "\n".join(heatmap_to_csv_lines(heatmap, comments)) + "\n")
    if args.group_sizes_out:
        atomic_write_text(
            args.group_sizes_out,
            "\n".join(group_sizes_to_csv_lines(heatmap, comments)) + "\n",
        )
    populated = sum(1 for c in heatmap.cells.values() if c.reps_ok > 0)
    print(f"wrote {args.out} ({populated}/{len(heatmap.cells)} cells populated)")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve_forever

    rule = _rule_from_args(args)
    devices = _load_devices(args.devices) if args.rule == "phone" else None
    config_document: dict = {
        "session_kind": "PhoneSingleTrial" if args.rule == "phone" else "PcTwoTrial"
    }
    if devices is not None:
        config_document["devices"] = [
            {
                "width_px": p.logical_resolution[0],
                "height_px": p.logical_resolution[1],
                "ppi": p.ppi,
                "scale_factor": p.scale_factor,
            }
            for p in devices.profiles
        ]
    if args.config:
        config_document.update(parse_kv_config(Path(args.config).read_text(encoding="utf-8")))
    serve_forever(
        rule,
        devices,
        Path(args.decision_log) if args.decision_log else None,
        Path(args.sessions_out) if args.sessions_out else None,
        config_document,
        host=args.host,
        port=args.port,
    )
    return 0


def _cmd_render(args) -> int:
    out_dir = _resolve_out_dir(args.out_dir)
    written = render_heatmap(args.grid, out_dir)
    print(f"wrote {len(written)} heatmap file(s) to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prescreen",
        description="Pre-task screening toolkit for crowdsourced pointing experiments",
    )
    parser.add_argument("--version", action="version", version=f"prescreen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a session log file")
    p.add_argument("--input", required=True)
    p.add_argument("--schema-version", default="1")
    p.add_argument("--report", help="write a rejection report CSV")

    p = sub.add_parser("generate", help="generate a synthetic population")
    p.add_argument("--spec", required=True, help="flat key-value population spec file")
    p.add_argument("--seed", type=int, default=None, help="overrides the spec seed")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="write ground-truth profile labels CSV")

    p = sub.add_parser("screen", help="classify participants offline")
    p.add_argument("--input", required=True)
    p.add_argument("--rule", choices=("pc", "phone"), required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--devices", help="device table CSV (default: bundled table)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit MT and ER models on cleaned data")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=[k.value for k in SessionKind])
    p.add_argument("--out-dir")

    for name, help_text in (
        ("simulate", "sweep the (N, T, X) grid"),
        ("loocv", "sweep the grid with leave-one-width-out cross-validation"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--input", required=True)
        p.add_argument("--kind", choices=[k.value for k in SessionKind])
        p.add_argument("--grid", help="flat key-value grid config file")
        p.add_argument("--models", default="fitts,er")
        p.add_argument("--instructions", default="fast,accurate")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--devices")
        p.add_argument("--out", required=True)
        p.add_argument("--group-sizes-out")

    p = sub.add_parser("serve", help="run the live gate service")
    p.add_argument("--rule", choices=("pc", "phone"), required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--devices")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--decision-log")
    p.add_argument("--sessions-out")
    p.add_argument("--config", help="extra runner-config keys served at /config")

    p = sub.add_parser("render", help="render heatmap SVGs from a grid CSV")
    p.add_argument("--grid", required=True)
    p.add_argument("--out-dir")

    return parser


def run(config: RunConfig) -> int:
    args = config.options
    if config.command == "ingest":
        return _cmd_ingest(args)
    if config.command == "generate":
        return _cmd_generate(args)
    if config.command == "screen":
        return _cmd_screen(args)
    if config.command == "fit":
        return _cmd_fit(args)
    if config.command == "simulate":
        return _cmd_simulate(args)
    if config.command == "loocv":
        return _cmd_simulate(args, cross_validate=True)
    if config.command == "serve":
        return _cmd_serve(args)
    if config.command == "render":
        return _cmd_render(args)
    raise ValueError(f"unknown command {config.command!r}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(RunConfig(command=args.command, options=args))
    except Exception as exc:  # structured one-line error summary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
