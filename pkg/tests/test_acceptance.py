"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. The simulation-trend test is the slowest (about a minute); the
whole module stays far under the ten-minute target.
"""

from __future__ import annotations

import dataclasses
import json
import math
import threading
import time
import urllib.request
from pathlib import Path

import numpy as np
import pytest

from prescreen.core import (
    Instruction,
    SessionKind,
    default_device_table,
    mm_to_px,
)
from prescreen.models import (
    ConditionMatrix,
    erf,
    fit_fitts_pooled,
    fit_variance_1d,
    success_prob_disk,
)
from prescreen.preprocess import clean_dataset
from prescreen.rng import substream
from prescreen.screening import (
    PhoneAbsError,
    ScreeningVerdict,
    classify_phone,
    partition,
)
from prescreen.simulation import (
    Model,
    SimGrid,
    cohort_loocv_r2,
    cohort_r2,
    loocv_cell,
    sample_mixture,
    sweep_grid,
)
from prescreen.synthgen import (
    BehaviorProfile,
    PopulationSpec,
    ProfileKind,
    generate_population,
)

from conftest import PHONE_DEVICE, as_clean, exact_spread_values, phone_session
from test_models import disk_mc_oracle, erf_series_reference

REPO_ROOT = Path(__file__).resolve().parent.parent
CONFORMING_ONLY = (BehaviorProfile(ProfileKind.CONFORMING, 1.0),)


def spearman(xs: list[float], ys: list[float]) -> float:
    def ranks(values: list[float]) -> list[float]:
        order = sorted(range(len(values)), key=lambda i: values[i])
        out = [0.0] * len(values)
        i = 0
        while i < len(order):
            j = i
            while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
                j += 1
            for k in range(i, j + 1):
                out[order[k]] = (i + j) / 2 + 1
            i = j + 1
        return out

    rx, ry = ranks(xs), ranks(ys)
    n = len(xs)
    mx, my = sum(rx) / n, sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx * vy) if vx > 0 and vy > 0 else 0.0


class TestNumericOracles:
    def test_numeric_oracles(self):
        started = time.monotonic()

        # Isotropic disk probability vs the closed form, 100-point grid.
        sigmas = np.linspace(0.3, 6.0, 10)
        widths = np.linspace(0.5, 40.0, 10)
        worst_iso = 0.0
        for sigma in sigmas:
            for width in widths:
                closed = 1.0 - math.exp(-(width**2) / (8.0 * sigma**2))
                worst_iso = max(
                    worst_iso,
                    abs(success_prob_disk(float(sigma), float(sigma), float(width)) - closed),
                )
        assert worst_iso <= 1e-6

        # Anisotropic disk probability vs a 1e7-sample Monte Carlo oracle.
        cases = [
            (1.0, 2.0, 4.0),
            (2.0, 1.0, 4.0),
            (0.5, 2.0, 3.0),
            (3.0, 0.75, 6.0),
            (1.5, 1.0, 2.0),
            (0.8, 3.2, 5.0),
            (4.0, 1.0, 10.0),
            (1.0, 4.0, 12.0),
            (2.5, 2.0, 1.5),
            (0.6, 0.9, 2.5),
        ]
        worst_mc = 0.0
        for index, (sx, sy, width) in enumerate(cases):
            mc = disk_mc_oracle(sx, sy, width, n=10_000_000, seed=1000 + index)
            worst_mc = max(worst_mc, abs(success_prob_disk(sx, sy, width) - mc))
        assert worst_mc <= 1e-3

        # erf vs the Maclaurin series reference on [-6, 6].
        worst_erf = 0.0
        for x in np.linspace(-6.0, 6.0, 121):
            worst_erf = max(worst_erf, abs(erf(float(x)) - erf_series_reference(float(x))))
        assert worst_erf <= 1e-12

        elapsed = time.monotonic() - started
        assert elapsed < 60.0
        print(
            f"\nACCEPTANCE PASS numeric-oracles: iso<={worst_iso:.2e} "
            f"mc<={worst_mc:.2e} erf<={worst_erf:.2e} in {elapsed:.1f}s"
        )


class TestRecovery:
    def test_recovery(self):
        started = time.monotonic()

        # Noiseless movement-time recovery at 1e-9 relative.
        spec = PopulationSpec.exp2_default(4, CONFORMING_ONLY, seed=5)
        spec = dataclasses.replace(
            spec, conforming=dataclasses.replace(spec.conforming, mt_noise_cv=0.0)
        )
        sessions, _ = generate_population(spec)
        clean = clean_dataset(sessions, SessionKind.PHONE_SINGLE_TRIAL)
        stats = ConditionMatrix.from_clean(clean)
        for instruction in (Instruction.FAST, Instruction.ACCURATE):
            fit = fit_fitts_pooled(stats, instruction)
            mult = spec.conforming.mt_mult(instruction)
            assert fit.a == pytest.approx(spec.conforming.a * mult, rel=1e-9)
            assert fit.b == pytest.approx(spec.conforming.b * mult, rel=1e-9)

        # Noiseless variance recovery at 1e-9 relative (deterministic
        # alternating-offset fixture holds the sample variance exactly).
        g_true, h_true = 0.5, 0.01
        per_condition = {}
        for width in (2.0, 4.4, 6.8, 8.4):
            sigma = math.sqrt(g_true + h_true * width * width)
            per_condition[(Instruction.ACCURATE, width)] = [
                (off, 500.0) for off in exact_spread_values(sigma, 20)
            ]
        fixture = as_clean(
            [phone_session("p00", per_condition)], SessionKind.PHONE_SINGLE_TRIAL
        )
        variance_fit = fit_variance_1d(fixture, Instruction.ACCURATE)
        assert variance_fit.g == pytest.approx(g_true, rel=1e-9)
        assert variance_fit.h == pytest.approx(h_true, rel=1e-9)

        # Generator defaults, noise on, seed 7: conforming-cohort Fitts
        # R^2 stays at or above 0.98 per instruction.
        noisy_spec = PopulationSpec.exp2_default(40, CONFORMING_ONLY, seed=7)
        noisy_sessions, _ = generate_population(noisy_spec)
        noisy_clean = clean_dataset(noisy_sessions, SessionKind.PHONE_SINGLE_TRIAL)
        noisy_stats = ConditionMatrix.from_clean(noisy_clean)
        r2s = {}
        for instruction in (Instruction.FAST, Instruction.ACCURATE):
            r2s[instruction.value] = fit_fitts_pooled(noisy_stats, instruction).r2
            assert r2s[instruction.value] >= 0.98

        elapsed = time.monotonic() - started
        assert elapsed < 60.0
        print(
            f"\nACCEPTANCE PASS recovery: noiseless 1e-9 ok, "
            f"seed-7 Fitts R2 {r2s} in {elapsed:.1f}s"
        )


class TestOutlierPipeline:
    def test_outlier_pipeline(self):
        baseline = [(0.2 * ((j % 2) * 2 - 1), 500.0) for j in range(20)]

        # One coordinate outlier: excluded at stage 1, nothing else.
        coord_values = baseline[:19] + [(30.0, 500.0)]
        sessions = [phone_session("planted", {(Instruction.FAST, 4.0): coord_values})]
        sessions += [
            phone_session(f"c{i}", {(Instruction.FAST, 4.0): list(baseline)})
            for i in range(9)
        ]
        report = clean_dataset(sessions, SessionKind.PHONE_SINGLE_TRIAL).report
        assert (
            report.excluded_coord_trials,
            report.excluded_mt_trials,
            report.excluded_participants,
        ) == (1, 0, 0)
        assert report.retained_trials == report.input_trials - 1

        # One movement-time outlier: excluded at stage 2, nothing else.
        mt_values = list(baseline[:19]) + [(0.2, 5000.0)]
        sessions = [phone_session("planted", {(Instruction.FAST, 4.0): mt_values})]
        sessions += [
            phone_session(f"c{i}", {(Instruction.FAST, 4.0): list(baseline)})
            for i in range(9)
        ]
        report = clean_dataset(sessions, SessionKind.PHONE_SINGLE_TRIAL).report
        assert (
            report.excluded_coord_trials,
            report.excluded_mt_trials,
            report.excluded_participants,
        ) == (0, 1, 0)

        # One slow participant among 30 others: excluded at stage 3.
        sessions = [
            phone_session(f"c{i:02d}", {(Instruction.FAST, 4.0): list(baseline)})
            for i in range(30)
        ]
        slow = [(0.2 * ((j % 2) * 2 - 1), 5000.0) for j in range(20)]
        sessions.append(phone_session("slow", {(Instruction.FAST, 4.0): slow}))
        clean = clean_dataset(sessions, SessionKind.PHONE_SINGLE_TRIAL)
        report = clean.report
        assert (
            report.excluded_coord_trials,
            report.excluded_mt_trials,
            report.excluded_participants,
        ) == (0, 0, 1)
        assert all(s.participant_id != "slow" for s in clean.sessions)
        print("\nACCEPTANCE PASS outlier-pipeline: each planted outlier excluded at its stage")


class TestScreeningMonotonicityAndParity:
    def test_screening_monotonicity(self):
        rng = np.random.default_rng(123)
        thresholds = [float(t) for t in range(1, 11)]
        for _case in range(1000):
            n = int(rng.integers(5, 25))
            metrics = rng.uniform(0.0, 12.0, n)
            previous: set[str] = set()
            for threshold in thresholds:
                rule = PhoneAbsError(T=threshold)
                verdicts = [
                    ScreeningVerdict(
                        participant_id=f"p{i}",
                        passed=bool(m < threshold),
                        metric=float(m),
                        rule_used=rule,
                    )
                    for i, m in enumerate(metrics)
                ]
                passing, non_passing = partition(verdicts)
                assert previous <= passing
                assert passing.isdisjoint(non_passing)
                assert len(passing) + len(non_passing) == n
                previous = passing
        print("\nACCEPTANCE PASS screening-monotonicity: 1000 verdict sets nested in T")

    def test_gate_parity_with_offline_classification(self, tmp_path):
        from prescreen.service import GateApp, _AppendLog, make_server

        devices = default_device_table()
        rule = PhoneAbsError(T=3.0)
        app = GateApp(
            rule=rule,
            devices=devices,
            decision_log=_AppendLog(tmp_path / "decisions.log"),
            session_log=_AppendLog(None),
            config_document={},
        )
        server = make_server(app, port=0)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{server.server_address[1]}"
        try:
            rng = np.random.default_rng(7)
            agreements = 0
            for index in range(100):
                known_device = index % 10 != 9
                metric = float(rng.uniform(0.0, 8.0))
                payload = {
                    "participant_id": f"w{index}",
                    "session_kind": "PhoneSingleTrial",
                    "adjustments": [
                        {
                            "final_size": mm_to_px(53.98 + metric, PHONE_DEVICE),
                            "op_time": float(rng.uniform(0.0, 12.0)),
                            "initial_size": 50.0,
                        }
                    ],
                    "device": {"w": 393, "h": 852} if known_device else {"w": 7, "h": 9},
                }
                request = urllib.request.Request(
                    base + "/gate", data=json.dumps(payload).encode("utf-8")
                )
                with urllib.request.urlopen(request) as response:
                    body = json.loads(response.read().decode("utf-8"))
                if not known_device:
                    assert body["decision"] == "reject"
                    assert body["reason"] == "UnresolvableDevice"
                else:
                    from prescreen.core import Adjustment, PreTaskOutcome

                    outcome = PreTaskOutcome(
                        participant_id=f"w{index}",
                        adjustments=(
                            Adjustment(
                                final_size=payload["adjustments"][0]["final_size"],
                                op_time=payload["adjustments"][0]["op_time"],
                                initial_size=50.0,
                            ),
                        ),
                        session_kind=SessionKind.PHONE_SINGLE_TRIAL,
                    )
                    offline = classify_phone(outcome, PHONE_DEVICE, rule)
                    assert (body["decision"] == "admit") == offline.passed
                    assert body["metric"] == pytest.approx(offline.metric, rel=1e-12)
                agreements += 1
            assert agreements == 100
        finally:
            server.shutdown()
            server.server_close()
        print("\nACCEPTANCE PASS gate-parity: 100 replayed payloads match offline classification")


class TestSimulationTrend:
    def test_simulation_trend(self):
        started = time.monotonic()
        spec = PopulationSpec.exp2_default(420, seed=20260809)  # 30% nonconforming
        sessions, _ = generate_population(spec)
        clean = clean_dataset(sessions, SessionKind.PHONE_SINGLE_TRIAL)
        grid = SimGrid(
            n_values=(40,),
            t_values=tuple(float(t) for t in range(1, 11)),
            x_values=tuple(range(0, 110, 10)),
            repetitions=100,
            seed=20260809,
        )
        models = [Model.FITTS_MT, Model.ER_BAND]
        instructions = [Instruction.FAST, Instruction.ACCURATE]
        heatmap = sweep_grid(
            clean, lambda t: PhoneAbsError(T=t), grid, models, instructions
        )

        # (a) strict-T/X=0 beats loose-T/X=100 by at least 0.05 everywhere.
        diffs = {}
        for model in models:
            for instruction in instructions:
                top_left = heatmap.cells[(model.value, instruction.value, 40, 1.0, 0)]
                bottom_right = heatmap.cells[
                    (model.value, instruction.value, 40, 10.0, 100)
                ]
                assert top_left.mean_r2 is not None and bottom_right.mean_r2 is not None
                diff = top_left.mean_r2 - bottom_right.mean_r2
                diffs[(model.value, instruction.value)] = round(diff, 3)
                assert diff >= 0.05

        # (b) Spearman rho between X and cell R^2 negative for >= 80% of rows.
        negative = 0
        total = 0
        for model in models:
            for instruction in instructions:
                for t in grid.t_values:
                    xs, ys = [], []
                    for x in grid.x_values:
                        cell = heatmap.cells[(model.value, instruction.value, 40, t, x)]
                        if cell.mean_r2 is not None:
                            xs.append(float(x))
                            ys.append(cell.mean_r2)
                    total += 1
                    if spearman(xs, ys) < 0:
                        negative += 1
        fraction = negative / total
        assert fraction >= 0.8

        elapsed = time.monotonic() - started
        assert elapsed < 600.0
        print(
            f"\nACCEPTANCE PASS simulation-trend: diffs {diffs}, "
            f"negative rows {negative}/{total}, {elapsed:.1f}s"
        )


class TestLoocv:
    def test_loocv(self):
        # Paired cohorts: pooled LOOCV R^2 <= full-fit R^2 + 0.01 in at
        # least 95 of 100 seeded repetitions on conforming data.
        spec = PopulationSpec.exp2_default(120, CONFORMING_ONLY, seed=21)
        sessions, _ = generate_population(spec)
        clean = clean_dataset(sessions, SessionKind.PHONE_SINGLE_TRIAL)
        stats = ConditionMatrix.from_clean(clean)
        ids = tuple(sorted(s.participant_id for s in clean.sessions))
        held = 0
        for repetition in range(100):
            rng = substream(21, "loocv-acceptance", repetition)
            cohort = sample_mixture(ids, (), 40, 0, rng, repetition)
            full = cohort_r2(stats, Model.FITTS_MT, Instruction.ACCURATE, cohort.ids)
            cv = cohort_loocv_r2(stats, Model.FITTS_MT, Instruction.ACCURATE, cohort.ids)
            if cv <= full + 0.01:
                held += 1
        assert held >= 95

        # Noiseless data: LOOCV R^2 is exactly 1.
        import test_simulation

        noiseless = test_simulation._noiseless_clean()
        all_ids = {s.participant_id for s in noiseless.sessions}
        cell = loocv_cell(
            noiseless,
            all_ids,
            set(),
            len(all_ids),
            0,
            Model.FITTS_MT,
            Instruction.FAST,
            2,
            0,
        )
        assert cell.mean_r2 == 1.0
        print(f"\nACCEPTANCE PASS loocv: {held}/100 repetitions within bound; noiseless == 1.0")


class TestDeterminism:
    def test_end_to_end_determinism(self, tmp_path):
        from prescreen.cli import main

        spec_path = tmp_path / "pop.cfg"
        spec_path.write_text(
            "kind = exp2\nn_participants = 40\nseed = 11\n", encoding="utf-8"
        )
        grid_path = tmp_path / "grid.cfg"
        grid_path.write_text(
            "n_values = 10\nt_values = 2,6\nx_values = 0,50,100\nrepetitions = 5\n",
            encoding="utf-8",
        )

        def pipeline(out_dir: Path, workers: int) -> dict[str, bytes]:
            out_dir.mkdir()
            log = out_dir / "sessions.log"
            assert main(["generate", "--spec", str(spec_path), "--out", str(log)]) == 0
            verdicts = out_dir / "verdicts.csv"
            assert (
                main(
                    [
                        "screen",
                        "--input",
                        str(log),
                        "--rule",
                        "phone",
                        "--t",
                        "3",
                        "--out",
                        str(verdicts),
                    ]
                )
                == 0
            )
            heatmap = out_dir / "heatmap.csv"
            assert (
                main(
                    [
                        "simulate",
                        "--input",
                        str(log),
                        "--grid",
                        str(grid_path),
                        "--models",
                        "fitts,er",
                        "--instructions",
                        "fast,accurate",
                        "--seed",
                        "42",
                        "--workers",
                        str(workers),
                        "--out",
                        str(heatmap),
                        "--group-sizes-out",
                        str(out_dir / "groups.csv"),
                    ]
                )
                == 0
            )
            svg_dir = out_dir / "svg"
            assert main(["render", "--grid", str(heatmap), "--out-dir", str(svg_dir)]) == 0
            artifacts = {}
            for path in sorted(out_dir.rglob("*")):
                if path.is_file():
                    artifacts[str(path.relative_to(out_dir))] = path.read_bytes()
            return artifacts

        first = pipeline(tmp_path / "run1", workers=1)
        second = pipeline(tmp_path / "run2", workers=1)
        parallel = pipeline(tmp_path / "run3", workers=2)
        assert first.keys() == second.keys() == parallel.keys()
        for name in first:
            assert first[name] == second[name], f"rerun differs: {name}"
            assert first[name] == parallel[name], f"worker count changed: {name}"
        print(
            f"\nACCEPTANCE PASS determinism: {len(first)} artifacts byte-identical "
            "across reruns and worker counts"
        )


class TestSecondarySchemaParity:
    def test_frontend_golden_sessions_ingest_cleanly(self):
        from prescreen.core import ingest_sessions

        samples = {
            "phone": (REPO_ROOT / "frontend" / "sample" / "session-phone.log", 360),
            "pc": (REPO_ROOT / "frontend" / "sample" / "session-pc.log", 60),
        }
        for label, (path, expected_main_trials) in samples.items():
            assert path.exists(), f"missing frontend golden sample {path}"
            result = ingest_sessions(path)
            assert result.rejections == [], f"{label}: {result.rejections}"
            assert len(result.sessions) == 1
            session = result.sessions[0]
            assert len(session.main_trials()) == expected_main_trials
        print(
            "\nACCEPTANCE PASS secondary-schema-parity: frontend goldens ingest with "
            "zero rejects (60 PC / 360 phone main trials)"
        )
