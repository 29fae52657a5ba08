"""Command-line interface.

Subcommands: fourbar-sweep, cable-sweep, axis-eval, axis-optimize, serve.
Exit codes: 0 success, 1 I/O or parse failure, 2 invariant violation,
3 infeasible result.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import analysis
from .axisdesign import optimize_axis
from .errors import (CalibrationInfeasible, InvariantViolation,
                     NoFeasiblePoint, NonPositiveSpeed, ParseError,
                     ToolkitError)
from .fourbar import GripMode
from .project import (ProjectFile, default_project_path, dumps_project,
                      load_project, save_project)
from .reports import RunReport, file_digest, write_csv

EXIT_OK, EXIT_IO, EXIT_INVARIANT, EXIT_INFEASIBLE = 0, 1, 2, 3


def _add_common(p: argparse.ArgumentParser, default_step=1.0):
    p.add_argument("--project", type=Path, default=default_project_path(),
                   help="project JSON (default: the shipped sample)")
    p.add_argument("--out", type=Path, default=Path("out"),
                   help="output directory")
    p.add_argument("--step", type=float, default=default_step,
                   help="stroke sampling step in degrees")
    p.add_argument("--tau", type=float, default=None,
                   help="override input torque (N.mm)")
    p.add_argument("--omega", type=float, default=None,
                   help="override input speed (deg/s)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tridigit",
        description="Static and kinematic analysis of a single-actuator "
                    "tridigital hand prosthesis with cable transmission "
                    "and passive thumb retropulsion.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fourbar-sweep",
                       help="force/opening curve of the rigid four-bar model")
    _add_common(p)

    p = sub.add_parser("cable-sweep",
                       help="force/opening curve through the cable transmission")
    _add_common(p)
    p.add_argument("--grip", choices=["opposed", "lateral", "both"],
                   default="opposed")
    p.add_argument("--check-antagonist", action="store_true",
                   help="also verify flexor/extensor compatibility")

    p = sub.add_parser("axis-eval",
                       help="evaluate the project's retropulsion axis against "
                            "the design criteria")
    p.add_argument("--project", type=Path, default=default_project_path())
    p.add_argument("--out", type=Path, default=Path("out"))

    p = sub.add_parser("axis-optimize",
                       help="search the 4-parameter axis placement space")
    p.add_argument("--project", type=Path, default=default_project_path())
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=10000,
                   help="max criterion evaluations")

    p = sub.add_parser("serve", help="run the design service (HTTP JSON API)")
    p.add_argument("--project", type=Path, default=default_project_path())
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    return ap


def _load(path: Path) -> ProjectFile:
    project = load_project(path)
    if project.calibration is None:
        raise InvariantViolation("calibration present",
                                 "project has no calibration record; run the "
                                 "calibration first")
    return project


def _report(args, project_path) -> RunReport:
    return RunReport(command=[str(a) for a in sys.argv[1:]],
                     input_digest=file_digest(project_path))


def cmd_fourbar_sweep(args) -> int:
    project = _load(args.project)
    drive = analysis.resolve_drive(project, args.tau, args.omega)
    report = _report(args, args.project)
    rows, summary, warnings, _ = analysis.fourbar_sweep(project, args.step, drive)
    args.out.mkdir(parents=True, exist_ok=True)
    csv_path = args.out / "fourbar_curve.csv"
    write_csv(csv_path, analysis.FOURBAR_CSV_HEADER, rows, summary)
    report.outputs.append(csv_path.name)
    report.summary = summary
    report.warnings = warnings
    report.save(args.out / "fourbar_report.json")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_cable_sweep(args) -> int:
    project = _load(args.project)
    drive = analysis.resolve_drive(project, args.tau, args.omega)
    modes = ([GripMode.OPPOSED, GripMode.LATERAL] if args.grip == "both"
             else [GripMode(args.grip)])
    report = _report(args, args.project)
    args.out.mkdir(parents=True, exist_ok=True)
    summaries = {}
    for mode in modes:
        rows, summary, warnings, _ = analysis.cable_mode_sweep(
            project, mode, args.step, drive)
        csv_path = args.out / f"cable_curve_{mode.value}.csv"
        write_csv(csv_path, analysis.CABLE_CSV_HEADER, rows, summary)
        report.outputs.append(csv_path.name)
        report.warnings.extend(warnings)
        summaries[mode.value] = summary
        if args.check_antagonist:
            reports, warns = analysis.antagonist_check(project, mode)
            report.warnings.extend(warns)
            if reports is not None:
                summaries[mode.value]["max_antagonist_stretch_mm"] = max(
                    r.stretch_mm for r in reports)
                summaries[mode.value]["antagonist_bound_mm"] = \
                    reports[0].stretch_bound_mm
    report.summary = summaries
    report.save(args.out / "cable_report.json")
    print(json.dumps(summaries, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_axis_eval(args) -> int:
    project = _load(args.project)
    report = _report(args, args.project)
    constraint, poses, _ = analysis.axis_evaluation(project)
    args.out.mkdir(parents=True, exist_ok=True)
    payload = {"axis": {"azimuth_deg": project.axis.azimuth_deg,
                        "elevation_deg": project.axis.elevation_deg,
                        "x0_mm": project.axis.x0_mm,
                        "y0_mm": project.axis.y0_mm},
               "report": constraint.to_dict()}
    (args.out / "axis_eval.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    report.outputs.append("axis_eval.json")
    report.summary = constraint.to_dict()
    report.save(args.out / "axis_eval_report.json")
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_axis_optimize(args) -> int:
    project = _load(args.project)
    report = _report(args, args.project)
    result = optimize_axis([project.axis], project.geometry,
                           project.cable_design, project.targets,
                           project.stroke, budget=args.budget, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    trace_path = args.out / "axis_trace.jsonl"
    with trace_path.open("w", encoding="utf-8") as fh:
        for entry in result.trace:
            fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
    report.outputs.append(trace_path.name)
    report.summary = {"feasible": result.feasible,
                      "evaluations": result.evaluations,
                      "message": result.message,
                      "best": result.report.to_dict()}
    new_project = ProjectFile(project.geometry, project.drive,
                              project.calibration, result.placement,
                              project.targets, project.cable_design,
                              project.notes)
    out_project = args.out / "project_optimized.json"
    save_project(new_project, out_project)
    report.outputs.append(out_project.name)
    report.save(args.out / "axis_optimize_report.json")
    print(json.dumps(report.summary, indent=2, sort_keys=True))
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    project = _load(args.project)
    app = create_app(project)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"fourbar-sweep": cmd_fourbar_sweep,
                "cable-sweep": cmd_cable_sweep,
                "axis-eval": cmd_axis_eval,
                "axis-optimize": cmd_axis_optimize,
                "serve": cmd_serve}
    t0 = time.perf_counter()
    try:
        code = handlers[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvariantViolation, NonPositiveSpeed) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (CalibrationInfeasible, NoFeasiblePoint) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ToolkitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    # wall time goes to the console only: written artifacts stay byte-identical
    print(f"done in {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
