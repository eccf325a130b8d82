#!/usr/bin/env python3
"""
Hector MPC
==========
Kör scenarier med kraft- och moment-MPC för en tvåbent robot, mäter
QP-lösningstider och kontrollerar modellens invarianter.

Användning:
    python main.py run scenarios/standing.scenario             # Kör ett scenario
    python main.py run scenarios/walk_flat_0p6.scenario --pdf  # Med PDF-rapport
    python main.py bench --horizons 5 10 20                    # Jämför formuleringar
    python main.py check                                       # Snabba invarianter
"""
import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from config import Config
from controller import LocomotionController
from dynamics import RobotState
from errors import ConfigError, HectorError
from kinematics import LegJoints, forward_kinematics, leg_jacobian
from markdown_generator import RunMarkdownGenerator
from model import JOINT_NAMES, GaitSchedule, PayloadSpec, RobotModel
from mpc import (MpcConfig, QpProblem, assemble_inequalities, build_condensed, equilibrium_inputs, formulate,
                 linearize_horizon, prediction_matrices)
from pdf_generator import RunPDFGenerator
from qpsolver import SolverSettings, run_benchmark, solve_qp
from scenario_file import load_scenario, scenario_to_dict
from sim import Scenario, SimLog, run_scenario, standing_pose

EXIT_OK, EXIT_CHECK_FAILED, EXIT_FALL, EXIT_CONFIG = 0, 1, 2, 3

STATE_COLUMNS = ["px", "py", "pz", "roll", "pitch", "yaw", "vx", "vy", "vz", "wx", "wy", "wz"]
INPUT_COLUMNS = [f"{kind}{leg}{axis}" for kind in ("F", "M") for leg in (1, 2) for axis in "xyz"]
TORQUE_COLUMNS = [f"tau_{side}_{joint}" for side in ("left", "right") for joint in JOINT_NAMES]
CSV_HEADER = (["t"] + STATE_COLUMNS + INPUT_COLUMNS + TORQUE_COLUMNS
              + ["contact_left", "contact_right", "solve_ms", "violation"])


def _printer(quiet: bool) -> Callable[..., None]:
    if quiet:
        return lambda *args, **kwargs: None
    return print


def solver_settings(base: Optional[SolverSettings] = None) -> SolverSettings:
    """Lösarinställningar där miljövariablerna ersätter standardvärdena"""
    base = base or SolverSettings()
    if base != SolverSettings():
        return base
    return dataclasses.replace(base, tol=Config.QP_TOL, max_iter=Config.QP_MAX_ITER)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def write_trajectory(log: SimLog, path: str) -> int:
    """
    Skriv trajektorian som CSV med full flyttalsprecision

    Args:
        log: Simuleringslogg
        path: Sökväg till CSV-filen

    Returns:
        Antal datarader
    """
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for i in range(len(log)):
            values = ([log.times[i]] + list(log.states[i]) + list(log.inputs[i]) + list(log.torques[i]))
            row = [repr(float(v)) for v in values]
            row += [str(int(c)) for c in log.contacts[i]]
            row += [repr(float(log.solve_ms[i])), repr(float(log.violation[i]))]
            writer.writerow(row)
    return len(log)


def _json_safe(value):
    """Byt icke-ändliga flyttal mot strängarna "inf", "-inf" och "nan" (läses tillbaka med float)"""
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    if isinstance(value, (float, np.floating)):
        if math.isfinite(value):
            return float(value)
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def build_summary(scenario: Scenario, log: SimLog, formulation: str, exit_code: int) -> Dict:
    """Maskinläsbar sammanfattning: mätetal, scenarioeko och versioner"""
    counts: Dict[str, int] = {}
    for _, kind, _ in log.events:
        counts[kind] = counts.get(kind, 0) + 1
    return _json_safe({
        "schema_version": Config.CSV_SCHEMA_VERSION,
        "version": Config.VERSION,
        "scenario_name": scenario.name,
        "formulation": formulation,
        "exit_code": exit_code,
        "csv_header": CSV_HEADER,
        "csv_rows": len(log),
        "metrics": log.metrics,
        "events": {
            "counts": counts,
            "first": [{"t": float(t), "kind": kind, "detail": detail} for t, kind, detail in log.events[:20]],
        },
        "scenario": scenario_to_dict(scenario),
    })


def run_command(args: argparse.Namespace) -> int:
    """Kör ett scenario och skriv CSV, summary.json, summary.md och ev. PDF"""
    say = _printer(args.quiet)
    say(f"🔧 Läser scenario {args.scenario}...")
    try:
        scenario = load_scenario(args.scenario)
        overrides = {"solver": solver_settings(scenario.solver)}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.duration is not None:
            overrides["duration"] = args.duration
        scenario = dataclasses.replace(scenario, **overrides)
    except ConfigError as e:
        print(f"❌ Konfigurationsfel i {args.scenario}: {e}")
        return EXIT_CONFIG

    formulation = args.mpc_formulation or Config.MPC_FORMULATION or scenario.mpc.formulation
    out_dir = args.out or os.path.join(Config.OUTPUT_DIR, scenario.name)
    os.makedirs(out_dir, exist_ok=True)

    say(f"▶️  Kör {scenario.name}: {scenario.duration:g} s, {scenario.steps} ticks, "
        f"MPC {scenario.mpc.frequency:g} Hz ({formulation})")
    start = time.perf_counter()
    log = run_scenario(scenario, formulation=formulation, verbose=not args.quiet)
    elapsed = time.perf_counter() - start

    exit_code = EXIT_FALL if log.fall else EXIT_OK
    csv_path = os.path.join(out_dir, "trajectory.csv")
    rows = write_trajectory(log, csv_path)
    summary = build_summary(scenario, log, formulation, exit_code)
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, allow_nan=False)
    markdown_path = RunMarkdownGenerator(out_dir).generate(summary)
    say(f"   📄 {csv_path} ({rows} rader)")
    say(f"   📄 {summary_path}")
    say(f"   📄 {markdown_path}")
    if args.pdf or Config.WRITE_PDF:
        pdf_path = RunPDFGenerator(out_dir).generate(summary, log)
        say(f"   📄 {pdf_path}")

    metrics = log.metrics
    solve = metrics["solve_ms"]
    say(f"\n   Körtid {elapsed:.1f} s, {solve['count']} MPC-lösningar, "
        f"medel {solve['mean'] or 0.0:.2f} ms, p95 {solve['p95'] or 0.0:.2f} ms")
    say(f"   RMSE vx {metrics['rmse']['vx']:.3f} m/s, z {metrics['rmse']['z']:.4f} m, "
        f"max villkorsöverträdelse {metrics['max_violation']:.2e}")
    if metrics["solver_failures"]:
        say(f"⚠️  {metrics['solver_failures']} MPC-lösningar misslyckades (senaste u hölls)")
    if metrics["saturated_ticks"]:
        say(f"⚠️  Momentmättnad under {metrics['saturated_ticks']} ticks")

    if log.fall:
        print(f"❌ Roboten föll vid t = {log.fall_time:.3f} s")
    else:
        say("✅ Klart utan fall")
    return exit_code


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

BENCH_INSTANCES = ("standing", "walking")


def benchmark_problems(kind: str, horizon: int, count: int = 5, seed: int = 0,
                       model: Optional[RobotModel] = None) -> Dict[str, List[QpProblem]]:
    """
    QP-instanser för båda formuleringarna från samma tillstånd

    Args:
        kind: standing eller walking
        horizon: Horisontlängd h
        count: Antal störda starttillstånd
        seed: Frö för störningarna

    Returns:
        Dictionary formulering -> lista av QpProblem
    """
    model = model or RobotModel()
    cfg = MpcConfig(horizon=horizon)
    if kind == "walking":
        gait, t, cmd = GaitSchedule(mode="walking"), 0.1, (0.6, 0.0, 0.0)
    else:
        gait, t, cmd = GaitSchedule(), 0.0, (0.0, 0.0, 0.0)
    rng = np.random.default_rng(seed)
    nominal, feet = standing_pose(model)

    problems: Dict[str, List[QpProblem]] = {name: [] for name in Config.FORMULATIONS}
    for _ in range(count):
        vector = nominal.as_vector() + np.concatenate([
            rng.uniform(-0.005, 0.005, 3), rng.uniform(-0.02, 0.02, 3),
            rng.uniform(-0.05, 0.05, 3), rng.uniform(-0.05, 0.05, 3)])
        state = RobotState.from_vector(vector)
        controller = LocomotionController(model, gait, PayloadSpec(), cfg)
        controller.reset(state)
        ref, plan, foot_data = controller.prepare(t, state, feet, cmd)
        for name in Config.FORMULATIONS:
            problem, _ = formulate(state, ref, plan, foot_data, cfg, model, PayloadSpec(), name)
            problems[name].append(problem)
    return problems


def bench_command(args: argparse.Namespace) -> int:
    """Jämför lösningstider för kondenserad och icke-kondenserad formulering"""
    say = _printer(args.quiet)
    try:
        settings = solver_settings()
        if args.repetitions < 1:
            raise ConfigError("must be >= 1", key="--repetitions")
        if not args.horizons:
            raise ConfigError("needs at least one horizon", key="--horizons")
        for horizon in args.horizons:
            MpcConfig(horizon=horizon)
    except ConfigError as e:
        print(f"❌ Ogiltiga benchmark-parametrar: {e}")
        return EXIT_CONFIG

    say(f"⏱️  Benchmark: h = {', '.join(str(h) for h in args.horizons)}, "
        f"{args.repetitions} repetitioner per instans")
    rows = []
    for horizon in sorted(args.horizons):
        for kind in BENCH_INSTANCES:
            problems = benchmark_problems(kind, horizon, count=args.instances)
            row = {"horizon": horizon, "instance": kind}
            for name in Config.FORMULATIONS:
                result = run_benchmark(problems[name], settings, args.repetitions, verbose=args.verbose)
                row[name] = {"mean_ms": result.mean * 1000.0, "p95_ms": result.p95 * 1000.0,
                             "samples": len(result.samples), "failures": result.failures}
            row["ratio"] = row["noncondensed"]["mean_ms"] / row["condensed"]["mean_ms"]
            rows.append(row)

    say("")
    say(f"{'h':>4}  {'instans':<10} {'kondenserad [ms]':>18} {'icke-kondenserad [ms]':>22} {'kvot':>6}")
    say("-" * 66)
    for row in rows:
        say(f"{row['horizon']:>4}  {row['instance']:<10} {row['condensed']['mean_ms']:>18.2f} "
            f"{row['noncondensed']['mean_ms']:>22.2f} {row['ratio']:>6.1f}")
    failures = sum(row[name]["failures"] for row in rows for name in Config.FORMULATIONS)
    if failures:
        say(f"⚠️  {failures} lösningar nådde inte optimum")

    out_dir = args.out or Config.OUTPUT_DIR
    os.makedirs(out_dir, exist_ok=True)
    bench_path = os.path.join(out_dir, "bench.json")
    with open(bench_path, "w", encoding="utf-8") as f:
        json.dump(_json_safe({"version": Config.VERSION, "repetitions": args.repetitions,
                              "instances": args.instances, "rows": rows}), f, indent=2, allow_nan=False)
    say(f"\n✅ Resultat sparat i {bench_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def check_condensing(count: int = 10, inject_sign_flip: bool = False, seed: int = 1,
                     model: Optional[RobotModel] = None,
                     settings: Optional[SolverSettings] = None) -> CheckResult:
    """Kondenserad och icke-kondenserad formulering ger samma u[0]"""
    name = "condensing equivalence"
    model = model or RobotModel()
    settings = settings or SolverSettings()
    cfg = MpcConfig()
    rng = np.random.default_rng(seed)
    nominal, feet = standing_pose(model)

    for index in range(count):
        gait = GaitSchedule(mode="walking") if index % 2 else GaitSchedule()
        payload = PayloadSpec(mass_breakpoints=((0.0, float(rng.uniform(0.0, 4.0))),))
        vector = nominal.as_vector() + np.concatenate([
            rng.uniform(-0.01, 0.01, 3), rng.uniform(-0.05, 0.05, 3),
            rng.uniform(-0.1, 0.1, 3), rng.uniform(-0.1, 0.1, 3)])
        state = RobotState.from_vector(vector)
        cmd = (float(rng.uniform(-0.3, 0.6)), 0.0, float(rng.uniform(-0.5, 0.5)))
        t = float(rng.uniform(0.0, gait.period))

        controller = LocomotionController(model, gait, payload, cfg)
        controller.reset(state)
        ref, plan, foot_data = controller.prepare(t, state, feet, cmd)
        models = linearize_horizon(state, ref, plan, foot_data, model, payload, cfg)
        inequalities = assemble_inequalities(plan, foot_data, cfg, model)
        A_qp, B_qp = prediction_matrices(models)
        if inject_sign_flip:
            B_qp = B_qp.copy()
            B_qp[13:26, 0:12] *= -1.0

        condensed = build_condensed(state.augmented(), ref, plan, models, cfg, inequalities, (A_qp, B_qp),
                                    u_ref=equilibrium_inputs(plan, model, payload))
        noncondensed, _ = formulate(state, ref, plan, foot_data, cfg, model, payload, "noncondensed")
        solutions = []
        for problem in (condensed, noncondensed):
            solution = solve_qp(problem.H, problem.f, problem.A_eq, problem.b_eq, problem.C, problem.d, settings)
            if not solution.optimal:
                return CheckResult(name, False, f"instance {index}: {problem.layout} solve {solution.status}")
            solutions.append(problem.inputs(solution.x)[0])

        difference = float(np.max(np.abs(solutions[0] - solutions[1])))
        scale = 1.0 + float(np.max(np.abs(solutions[1])))
        if difference > 1e-4 * scale:
            return CheckResult(name, False, f"instance {index}: |u0 condensed - u0 noncondensed| = "
                                            f"{difference:.3e} (limit {1e-4 * scale:.3e})")
    return CheckResult(name, True, f"{count} instances agree")


def check_jacobian(count: int = 20, seed: int = 2, model: Optional[RobotModel] = None,
                   step: float = 1e-6, tol: float = 1e-6) -> CheckResult:
    """Jacobianen mot centrala differenser av framåtkinematiken"""
    name = "jacobian finite differences"
    model = model or RobotModel()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for index in range(count):
        side = index % 2
        q = rng.uniform(model.joint_lower, model.joint_upper)
        J = leg_jacobian(LegJoints(q, side), model)
        numeric = np.zeros((6, 5))
        for i in range(5):
            dq = np.zeros(5)
            dq[i] = step
            plus = forward_kinematics(LegJoints(q + dq, side), model)
            minus = forward_kinematics(LegJoints(q - dq, side), model)
            numeric[0:3, i] = (plus.position - minus.position) / (2 * step)
            numeric[3:6, i] = Rotation.from_matrix(plus.rotation @ minus.rotation.T).as_rotvec() / (2 * step)
        error = float(np.max(np.abs(J - numeric)))
        worst = max(worst, error)
        if error > tol:
            return CheckResult(name, False, f"sample {index} (leg {side + 1}, q = {np.round(q, 3).tolist()}): "
                                            f"max error {error:.3e}")
    return CheckResult(name, True, f"{count} samples, max error {worst:.2e}")


def check_equilibrium(model: Optional[RobotModel] = None,
                      settings: Optional[SolverSettings] = None) -> CheckResult:
    """Stående på referensen: ΣF_z = m·g"""
    name = "equilibrium solve"
    model = model or RobotModel()
    controller = LocomotionController(model, GaitSchedule(), PayloadSpec(), MpcConfig(),
                                      settings or SolverSettings())
    state, feet = standing_pose(model)
    controller.reset(state)
    try:
        u0, _ = controller.solve(0.0, state, feet, (0.0, 0.0, 0.0))
    except HectorError as e:
        return CheckResult(name, False, f"{type(e).__name__}: {e}")
    total = u0[2] + u0[5]
    weight = model.mass * model.gravity
    if abs(total - weight) > 0.5:
        return CheckResult(name, False, f"sum F_z = {total:.3f} N, expected {weight:.2f} ± 0.5 N")
    return CheckResult(name, True, f"sum F_z = {total:.3f} N")


def run_checks(inject_sign_flip: bool = False, mu: Optional[float] = None,
               verbose: bool = False) -> List[CheckResult]:
    """
    Kör den snabba invariantsviten

    Args:
        inject_sign_flip: Byt tecken på ett B_qp-block (felinjicering)
        mu: Friktionskoefficient till modellen (standard om None)
        verbose: Skriv ut varje resultat

    Returns:
        Resultat per invariant; bara friktionsfelet om modellen avvisas
    """
    try:
        model = RobotModel() if mu is None else RobotModel(mu=mu)
    except ConfigError as e:
        result = CheckResult("friction constraint (robot.mu)", False, str(e))
        if verbose:
            print(f"   ❌ {result.name}: {result.detail}")
        return [result]

    settings = solver_settings()
    results = []
    for check in (lambda: check_condensing(inject_sign_flip=inject_sign_flip, model=model, settings=settings),
                  lambda: check_jacobian(model=model),
                  lambda: check_equilibrium(model=model, settings=settings)):
        result = check()
        results.append(result)
        if verbose:
            print(f"   {'✅' if result.passed else '❌'} {result.name}: {result.detail}")
    return results


def check_command(args: argparse.Namespace) -> int:
    """Kör invarianterna och returnera 0 om alla håller"""
    say = _printer(args.quiet)
    say("🔍 Kontrollerar invarianter...")
    start = time.perf_counter()
    results = run_checks(inject_sign_flip=args.inject_bqp_sign_flip, mu=args.mu, verbose=not args.quiet)
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"❌ Invariant bröts: {failed[0].name}: {failed[0].detail}")
        return EXIT_CHECK_FAILED
    say(f"✅ Alla {len(results)} invarianter håller ({time.perf_counter() - start:.1f} s)")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Kraft- och moment-MPC för tvåbent robot: simulering, benchmark och kontroller",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Exempel:
  %(prog)s run scenarios/standing.scenario
  %(prog)s run scenarios/walk_slats_random.scenario --seed 3 --out runs/slats
  %(prog)s run scenarios/turn_yaw.scenario --mpc-formulation noncondensed --pdf
  %(prog)s bench --horizons 5 10 20 --repetitions 3
  %(prog)s check --inject-bqp-sign-flip
        """
    )
    parser.add_argument("--quiet", "-q", action="store_true", default=Config.QUIET,
                        help="Skriv bara ut slutligt fel")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Kör ett scenario")
    run.add_argument("scenario", help="Sökväg till scenariofil (YAML)")
    run.add_argument("--out", "-o", help="Utdatakatalog (standard: HECTOR_OUTPUT_DIR/<scenario>)")
    run.add_argument("--seed", type=int, help="Frö för återkopplingsbrus")
    run.add_argument("--mpc-formulation", choices=Config.FORMULATIONS, help="QP-formulering")
    run.add_argument("--duration", type=float, help="Ersätt scenariots längd (s)")
    run.add_argument("--pdf", action="store_true", help="Skriv även report.pdf")
    run.add_argument("--quiet", "-q", action="store_true", default=argparse.SUPPRESS)
    run.set_defaults(handler=run_command)

    bench = sub.add_parser("bench", help="Jämför QP-formuleringarnas lösningstid")
    bench.add_argument("--horizons", type=int, nargs="+", default=[10], help="Horisontlängder")
    bench.add_argument("--repetitions", type=int, default=5, help="Lösningar per instans")
    bench.add_argument("--instances", type=int, default=5, help="Störda instanser per rad")
    bench.add_argument("--out", "-o", help="Katalog för bench.json")
    bench.add_argument("--verbose", "-v", action="store_true", help="Skriv ut tid per problem")
    bench.add_argument("--quiet", "-q", action="store_true", default=argparse.SUPPRESS)
    bench.set_defaults(handler=bench_command)

    check = sub.add_parser("check", help="Kör snabba invarianter")
    check.add_argument("--inject-bqp-sign-flip", action="store_true",
                       help="Byt tecken på ett B_qp-block (ska ge fel)")
    check.add_argument("--mu", type=float, help="Friktionskoefficient till modellen")
    check.add_argument("--quiet", "-q", action="store_true", default=argparse.SUPPRESS)
    check.set_defaults(handler=check_command)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not Config.validate():
        return EXIT_CONFIG
    return args.handler(args)


if __name__ == '__main__':
    sys.exit(main())
