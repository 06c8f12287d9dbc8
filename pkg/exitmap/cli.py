"""
Exitmap Command Line.

``exitmap <command> --builtin NAME | --scenario FILE [options]``

Commands:
  exitmap   sampled first-out / first-in maps (or cooling return times)
  classify  per-point boundary types
  typeseq   run-length type sequence along the boundary
  check     property suite with a pass/fail matrix
  realize   realize a prescribed first-out map and verify it
  hybrid    simulate an impacting system
  list      builtin scenario and flow names
  schema    JSON schema of scenario files

Exit codes: 0 success, 1 computation error (or a failed check with
``--strict``), 2 schema error. Errors are printed to stderr as JSON.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from collections import Counter
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from exitmap import export
from exitmap.config import ConfigError, Tolerances, config
from exitmap.core.flow_core import BUILTIN_FLOW_NAMES, FlowError
from exitmap.core.geometry import GeometryError
from exitmap.modules.first_maps import (
    CheckResult,
    PreconditionError,
    TypeLabel,
    Verdict,
    check_backward_invariance,
    check_coverage,
    check_duality,
    check_forward_invariance,
    check_period_bound,
    classify_many,
)
from exitmap.modules.hybrid import (
    HybridError,
    check_conjugacy_invariance,
    first_in_time_scenario,
    normal_form_conjugate,
    orbits_between,
    poincare_composition,
    simulate,
)
from exitmap.modules.planar_analysis import (
    ParametricMapSample,
    TypeSequence,
    boundary_parameters,
    check_domain_openness,
    check_extremum_count,
    check_forbidden_BC,
    check_interval_trapping,
    check_junction_behavior,
    check_monotone_identity,
    check_monotonicity,
    check_two_to_one_map,
    sample_F_E,
    sample_F_R,
    type_sequence,
)
from exitmap.modules.realization import (
    CircleMapSpec,
    RealizationError,
    build_disc_realization,
    build_halfplane_realization,
    verify_disc_realization,
    verify_realization,
)
from exitmap.scenarios import (
    BUILTIN_SCENARIOS,
    Scenario,
    ScenarioError,
    builtin_scenario,
    load_scenario,
    scenario_schema,
)

logger = logging.getLogger(__name__)

SCHEMA_ERRORS = (ScenarioError, ValidationError)
COMPUTATION_ERRORS = (
    FlowError, GeometryError, RealizationError, HybridError, ConfigError, PreconditionError,
    ValueError,
)

CIRCLE_READING = (
    "circle map read as the identity on [0, alpha] followed by a strict decrease "
    "to 0 at 1, with its maximum at alpha"
)
REALIZATION_LIMIT = 1e-5


# ---------------------------------------------------------------------------
# Run context
# ---------------------------------------------------------------------------

class Run:
    """Resolved scenario, tolerances and output settings of one invocation."""

    def __init__(self, args: argparse.Namespace) -> None:
        if args.scenario:
            self.scenario = load_scenario(args.scenario)
        elif args.builtin:
            self.scenario = builtin_scenario(args.builtin)
        else:
            raise ScenarioError("give --scenario FILE or --builtin NAME")
        tol = self.scenario.tolerance_set()
        if args.tol_file:
            tol = Tolerances.from_file(args.tol_file, tol)
        self.tol: Tolerances = tol
        analysis = self.scenario.analysis
        self.samples: int = args.samples or analysis.samples
        self.horizon: float | None = args.horizon or analysis.horizon
        self.fmt: str = args.format
        self.svg: bool = args.svg
        self.seed: int = args.seed
        slug = re.sub(r"[^A-Za-z0-9_.-]+", "_", self.scenario.name).strip("_")
        self.out: Path = Path(args.out) if args.out else config.out_dir / slug
        self.artifacts: list[str] = []

    def planar(self) -> tuple[Any, Any]:
        sc = self.scenario
        if sc.flow is None or sc.region is None:
            raise ScenarioError(f"scenario {sc.name!r} declares no flow and region")
        region = sc.region.build()
        if region.boundary is None:
            raise ScenarioError(f"region of {sc.name!r} has no boundary parametrization")
        return sc.flow.build(), region

    def table(self, stem: str, rows: list[dict[str, Any]], fields: tuple[str, ...]) -> None:
        path = export.write_table(self.out / stem, rows, fields, self.fmt)
        self.artifacts.append(str(path))

    def json(self, stem: str, payload: Any) -> None:
        self.artifacts.append(str(export.write_json(self.out / f"{stem}.json", payload)))

    def plot(self, fn: Any, stem: str, *args: Any) -> None:
        if self.svg:
            self.artifacts.append(str(fn(self.out / f"{stem}.svg", *args)))

    def summary(self, **payload: Any) -> dict[str, Any]:
        return {"scenario": self.scenario.name, **payload, "artifacts": self.artifacts}


def _status_counts(sample: ParametricMapSample) -> dict[str, int]:
    return dict(sorted(Counter(st.value for st in sample.status).items()))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_exitmap(args: argparse.Namespace) -> dict[str, Any]:
    run = Run(args)
    cooling = run.scenario.cooling
    if cooling is not None:
        reports = [
            first_in_time_scenario(eps, alpha=cooling.alpha, beta=cooling.beta,
                                   gamma=cooling.gamma, t_room=cooling.t_room,
                                   t_hot=cooling.t_hot, horizon=run.horizon, cfg=run.tol)
            for eps in cooling.epsilons
        ]
        run.table("return_times", [r.to_dict() for r in reports],
                  ("epsilon", "exit_time", "return_time", "total", "status"))
        return run.summary(return_times=[r.to_dict() for r in reports])

    flow, region = run.planar()
    span = run.scenario.analysis.span
    f_e = sample_F_E(flow, region, run.samples, run.horizon, run.tol, span=span)
    f_r = sample_F_R(flow, region, run.samples, run.horizon, run.tol, span=span)
    run.table("first_out", export.exit_map_rows(f_e), export.EXIT_MAP_FIELDS)
    run.table("first_in", export.exit_map_rows(f_r), export.EXIT_MAP_FIELDS)
    run.plot(export.plot_parametric_maps, "maps", [f_e, f_r], run.scenario.name)
    return run.summary(first_out=_status_counts(f_e), first_in=_status_counts(f_r))


def cmd_classify(args: argparse.Namespace) -> dict[str, Any]:
    run = Run(args)
    flow, region = run.planar()
    s = boundary_parameters(region.boundary, run.samples, run.scenario.analysis.span)
    types = classify_many(flow, region, region.boundary.point(s), run.horizon, run.tol)
    rows = [
        {"s": float(si), "label": bt.label.value, "x": float(bt.point[0]),
         "y": float(bt.point[1]), "exit_status": bt.exit.status.value, "exit_T": bt.exit.time,
         "return_status": bt.ret.status.value, "return_T": bt.ret.time,
         "notes": "; ".join(bt.notes)}
        for si, bt in zip(s, types)
    ]
    run.table("classification", rows, ("s", "label", "x", "y", "exit_status", "exit_T",
                                       "return_status", "return_T", "notes"))
    counts = Counter(bt.label.value for bt in types)
    return run.summary(labels=dict(sorted(counts.items())))


def cmd_typeseq(args: argparse.Namespace) -> dict[str, Any]:
    run = Run(args)
    flow, region = run.planar()
    seq = type_sequence(flow, region, max(run.samples, 16), run.horizon, run.tol,
                        span=run.scenario.analysis.span)
    run.table("type_sequence", export.exit_map_rows(seq.exit_map(run.tol), seq),
              export.EXIT_MAP_FIELDS)
    run.json("runs", seq.to_dict())
    run.plot(export.plot_type_sequence, "type_sequence", seq, run.scenario.name)
    return run.summary(runs=[f"{r.label.value}[{r.s_lo:.4g}, {r.s_hi:.4g}]" for r in seq.runs])


def _map_checks(F: ParametricMapSample, tol: Tolerances) -> list[CheckResult]:  # noqa: N803
    return [
        check_two_to_one_map(F, tol),
        check_monotonicity(F, tol),
        check_monotone_identity(F, tol),
        check_interval_trapping(F, tol),
        check_extremum_count(F, tol),
    ]


def _synthetic_checks(run: Run) -> list[CheckResult]:
    spec = run.scenario.synthetic
    if spec.kind == "labels":
        seq = TypeSequence.from_labels(spec.s, [TypeLabel(lb) for lb in spec.labels],
                                       periodic=spec.periodic)
        return [check_forbidden_BC(seq)]
    values = [np.nan if v is None else v for v in spec.values]
    F = ParametricMapSample.from_values(spec.s, values, periodic=spec.periodic,  # noqa: N806
                                        cfg=run.tol)
    return _map_checks(F, run.tol)


def _planar_checks(run: Run) -> list[CheckResult]:
    flow, region = run.planar()
    seq = type_sequence(flow, region, max(run.samples, 16), run.horizon, run.tol,
                        span=run.scenario.analysis.span)
    F = seq.exit_map(run.tol)  # noqa: N806
    rng = np.random.default_rng(run.seed)
    picks = np.sort(rng.choice(seq.s.size, size=min(16, seq.s.size), replace=False))
    points = region.boundary.point(seq.s)
    results = [check_forbidden_BC(seq), *_map_checks(F, run.tol)]
    results += [
        check_duality(flow, region, points[picks], run.horizon, run.tol),
        check_coverage(seq.types, run.tol),
        check_domain_openness(F, seq, region),
        check_junction_behavior(flow, region, seq, run.tol, run.horizon),
        check_backward_invariance(flow, region, points, run.horizon, run.tol),
        check_forward_invariance(flow, region, points, run.horizon, run.tol),
    ]
    if run.scenario.analysis.period is not None:
        results.append(check_period_bound(seq.types, run.scenario.analysis.period))
    return results


def _hybrid_checks(run: Run) -> list[CheckResult]:
    spec = run.scenario.hybrid
    system = spec.build(run.tol)
    results = [system.check_closed(np.linspace(-3.0, 3.0, 25), spec.horizon, run.tol)]
    if system.reset.total:
        results.append(orbits_between(system, spec.x0[0], spec.horizon, cfg=run.tol))
    if spec.normal_form:
        nf = normal_form_conjugate(system, run.tol)
        results.append(check_conjugacy_invariance(system, nf.system, nf.H, run.tol))
    return results


def _realization_checks(run: Run) -> list[CheckResult]:
    report = _realize(run, write=False)
    error = report["max_error"]
    verdict = Verdict.PASS if error <= REALIZATION_LIMIT else Verdict.FAIL
    violations = [] if verdict is Verdict.PASS else [f"round-trip error {error:.3e}"]
    return [CheckResult("realization", verdict, violations, {"max_error": error})]


def cmd_check(args: argparse.Namespace) -> dict[str, Any]:
    run = Run(args)
    sc = run.scenario
    results: list[CheckResult] = []
    if sc.synthetic is not None:
        results += _synthetic_checks(run)
    if sc.flow is not None and sc.cooling is None:
        results += _planar_checks(run)
    if sc.hybrid is not None:
        results += _hybrid_checks(run)
    if sc.realize is not None:
        results += _realization_checks(run)
    if not results:
        raise ScenarioError(f"scenario {sc.name!r} has nothing to check")
    run.json("checks", [r.to_dict() for r in results])
    matrix = {r.name: r.verdict.value for r in results}
    failed = [r.name for r in results if r.verdict is Verdict.FAIL]
    for r in results:
        logger.info("%-22s %s", r.name, r.verdict.value)
    return run.summary(checks=matrix, failed=failed)


def _realize(run: Run, *, write: bool = True) -> dict[str, Any]:
    spec_decl = run.scenario.realize
    if spec_decl is None:
        raise ScenarioError(f"scenario {run.scenario.name!r} declares no map to realize")
    spec = spec_decl.build()
    if isinstance(spec, CircleMapSpec):
        logger.info("Interpretation: %s", CIRCLE_READING)
        dr = build_disc_realization(spec, run.tol)
        error = verify_disc_realization(dr, max(run.samples, 8), run.horizon, run.tol)
        report = {**dr.to_dict(), "max_error": error, "interpretation": CIRCLE_READING}
        rf = dr.halfplane
    else:
        rf = build_halfplane_realization(spec, run.tol)
        samples = np.linspace(-3.0, 0.0, spec_decl.samples)
        verified = verify_realization(rf, samples, run.horizon, run.tol)
        report = verified.to_dict()
    if write:
        run.json("realization", report)
        run.plot(export.plot_curves, "closed_curves",
                 [rf.closed_curve(r0) for r0 in (0.5, 1.0, 2.0)], rf.label)
    return report


def cmd_realize(args: argparse.Namespace) -> dict[str, Any]:
    run = Run(args)
    report = _realize(run)
    return run.summary(max_error=report["max_error"],
                       max_time_error=report.get("max_time_error"))


def cmd_hybrid(args: argparse.Namespace) -> dict[str, Any]:
    run = Run(args)
    spec = run.scenario.hybrid
    if spec is None:
        raise ScenarioError(f"scenario {run.scenario.name!r} declares no hybrid system")
    system = spec.build(run.tol)
    horizon = args.horizon or spec.horizon
    traj = simulate(system, spec.x0, horizon, spec.max_events, run.tol, policy=spec.policy)
    path, jumps = export.trajectory_tables(traj)
    run.table("trajectory", path, export.TRAJECTORY_FIELDS)
    run.table("jumps", jumps, export.JUMP_FIELDS)
    report: dict[str, Any] = {"system": system.to_dict(), "trajectory": traj.to_dict(),
                              "coordinates": spec.coordinates}
    if spec.poincare_x is not None:
        report["poincare"] = poincare_composition(system, spec.poincare_x, horizon,
                                                  run.tol).to_dict()
    if spec.normal_form:
        nf = normal_form_conjugate(system, run.tol)
        check = check_conjugacy_invariance(system, nf.system, nf.H, run.tol)
        report["normal_form"] = {"flip": nf.flip, "shift": nf.shift,
                                 "max_residual": nf.max_residual, "conjugacy": check.to_dict()}
    run.json("hybrid", report)
    run.plot(export.plot_trajectory, "trajectory", traj, run.scenario.name)
    zeno = traj.zeno.to_dict() if traj.zeno else None
    return run.summary(termination=traj.termination.value, jumps=len(traj.jumps), zeno=zeno)


def cmd_list(args: argparse.Namespace) -> dict[str, Any]:
    return {"scenarios": list(BUILTIN_SCENARIOS), "flows": list(BUILTIN_FLOW_NAMES)}


def cmd_schema(args: argparse.Namespace) -> dict[str, Any]:
    return scenario_schema()


COMMANDS = {
    "exitmap": cmd_exitmap,
    "classify": cmd_classify,
    "typeseq": cmd_typeseq,
    "check": cmd_check,
    "realize": cmd_realize,
    "hybrid": cmd_hybrid,
    "list": cmd_list,
    "schema": cmd_schema,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def create_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--scenario", metavar="FILE", help="scenario JSON file")
    source.add_argument("--builtin", metavar="NAME", help="builtin scenario, e.g. affine(p=-1)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--samples", type=int, metavar="N", help="boundary samples")
    common.add_argument("--horizon", type=float, metavar="T", help="time horizon")
    common.add_argument("--tol-file", metavar="FILE", help="JSON tolerance overrides")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--svg", action="store_true", help="also write SVG plots")
    common.add_argument("--seed", type=int, default=0, help="probe randomization seed")
    common.add_argument("--strict", action="store_true", help="exit 1 when a check fails")

    parser = argparse.ArgumentParser(
        prog="exitmap",
        description="First-out / first-in maps, boundary types and impacting systems",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command")
    helps = {
        "exitmap": "sampled first-out and first-in maps",
        "classify": "boundary type of each sample",
        "typeseq": "type sequence along the boundary",
        "check": "structural property suite",
        "realize": "realize a prescribed first-out map",
        "hybrid": "simulate an impacting system",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    sub.add_parser("list", help="builtin names")
    sub.add_parser("schema", help="JSON schema of scenario files")
    return parser


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, config.log_level, logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _fail(exc: BaseException, code: int) -> int:
    payload: dict[str, Any] = {"error": type(exc).__name__, "detail": str(exc),
                               "exit_code": code}
    report = getattr(exc, "report", None)
    if report is not None:
        payload["report"] = export.to_jsonable(report)
    failed = getattr(exc, "failed", None)
    if failed is not None:
        payload["failed"] = export.to_jsonable(failed)
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = create_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    for issue in config.validate():
        logger.warning("Config issue: %s", issue)

    if args.command is None:
        parser.print_help(sys.stderr)
        return 2

    try:
        result = COMMANDS[args.command](args)
    except SCHEMA_ERRORS as exc:
        return _fail(exc, 2)
    except COMPUTATION_ERRORS as exc:
        logger.debug("Command %s failed", args.command, exc_info=True)
        return _fail(exc, 1)

    print(json.dumps(export.to_jsonable(result), indent=2, sort_keys=True))
    if getattr(args, "strict", False) and result.get("failed"):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
