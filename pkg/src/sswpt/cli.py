"""Command-line entry point: ``sswpt <subcommand> [options]``.

Exit codes: 0 success, 2 scenario or argument error, 3 session fault,
4 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import experiments as ex
from .controller import CalibrationTable, self_check
from .errors import DomainError, ReportIOError, ScenarioError
from .report import FORMATS, SweepReport, emit_report, render
from .scenarios import Sweep, load_scenario, parse_override_value

EXIT_OK, EXIT_SCENARIO, EXIT_FAULT, EXIT_IO = 0, 2, 3, 4


class _Fault(Exception):
    pass


def _floats(text: str, n: Optional[int] = None, what: str = "list") -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ScenarioError(f"{what}: cannot parse '{text}' as comma-separated numbers") from None
    if n is not None and len(vals) != n:
        raise ScenarioError(f"{what}: expected {n} values, got {len(vals)}")
    return vals


def _range(text: Optional[str], scenario, variable: str, default: tuple[float, float, float]) -> list[float]:
    if text is not None:
        return Sweep(variable, *_floats(text, 3, "--range")).values()
    if scenario.sweep is not None and scenario.sweep.variable == variable:
        return scenario.sweep.values()
    return Sweep(variable, *default).values()


def _overrides(items: Sequence[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ScenarioError(f"--override expects key=value, got '{item}'")
        out[key.strip()] = parse_override_value(value.strip())
    return out


def _disturb(scenario, name: Optional[str]):
    if name is None:
        return scenario
    return replace(scenario, disturbance=ex.toggle_model(scenario.disturbance, name))


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"cannot write {out}: {exc.strerror or exc}") from exc


def _emit(report: SweepReport, args) -> None:
    if args.out is None:
        sys.stdout.write(render(report, args.format))
    else:
        emit_report(report, args.out, args.format)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default=None, help="built-in name or JSON file")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=FORMATS, default="csv")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-key scenario override, e.g. tank.delta=0.1 (repeatable)")

    p = argparse.ArgumentParser(prog="sswpt", description="Series-series WPT detuning and identification simulator")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep-detuning", parents=[common], help="efficiency and pf versus detuning at 85 kHz")
    s.add_argument("--k", default="0.1,0.15,0.2", help="comma-separated coupling coefficients")
    s.add_argument("--range", default=None, help="delta start,stop,step")

    s = sub.add_parser("compare-methods", parents=[common], help="primary-only, secondary and double-side tuning")
    s.add_argument("--range", default=None, help="delta start,stop,step")

    s = sub.add_parser("identify-sweep", parents=[common], help="identification error versus true resonance")
    s.add_argument("--band", default="84000,86000", help="first probe pair f_m,f_n in Hz")
    s.add_argument("--range", default=None, help="true resonance start,stop,step in Hz")
    s.add_argument("--disturb", default=",".join(ex.TOGGLES),
                   help="comma-separated toggles from none,load,scc,zcd,all")
    s.add_argument("--include-esr", action="store_true", help="keep coil ESRs in the probe model")

    s = sub.add_parser("run-case", parents=[common], help="controller session with before/after metrics")
    s.add_argument("--case", type=int, choices=(1, 2, 3, 4), default=None)
    s.add_argument("--disturb", choices=ex.TOGGLES, default=None)
    s.add_argument("--calibration", default=None, help="calibration table to use instead of a self-check")
    s.add_argument("--trace", default=None, help="also write the session trace as CSV")

    s = sub.add_parser("self-check", parents=[common], help="calibrate SCC angles with the secondary absent")
    s.add_argument("--disturb", choices=ex.TOGGLES, default=None)
    return p


def _run(args) -> int:
    overrides = _overrides(args.override)
    cmd = args.command
    if cmd == "run-case" and args.case is not None and args.scenario is None:
        args.scenario = f"case{args.case}"
    default_scenario = {"identify-sweep": "id-study", "run-case": "case1", "self-check": "table2-aligned"}.get(cmd, "table1")
    scenario = load_scenario(args.scenario or default_scenario, overrides)

    if cmd == "sweep-detuning":
        deltas = _range(args.range, scenario, "delta", (-0.2, 0.2, 0.01))
        _emit(ex.sweep_detuning(scenario, _floats(args.k, what="--k"), deltas), args)
    elif cmd == "compare-methods":
        deltas = _range(args.range, scenario, "delta", (-0.2, 0.2, 0.01))
        _emit(ex.compare_methods(scenario, deltas), args)
    elif cmd == "identify-sweep":
        band = tuple(_floats(args.band, 2, "--band"))
        fs = _range(args.range, scenario, "fs", (79e3, 90e3, 250.0))
        toggles = [t.strip() for t in args.disturb.split(",") if t.strip()]
        bad = [t for t in toggles if t not in ex.TOGGLES]
        if bad or not toggles:
            raise ScenarioError(f"--disturb: unknown toggle(s) {bad}; choose from {', '.join(ex.TOGGLES)}")
        _emit(ex.identification_error_sweep(scenario, band, fs, toggles, include_esr=args.include_esr), args)
    elif cmd == "run-case":
        scenario = _disturb(scenario, args.disturb)
        calibration = None
        if args.calibration is not None:
            try:
                calibration = CalibrationTable.load(args.calibration)
            except OSError as exc:
                raise ReportIOError(f"cannot read {args.calibration}: {exc.strerror or exc}") from exc
        report, result = ex.run_case(scenario, calibration)
        _emit(report, args)
        if args.trace is not None:
            emit_report(trace_report(result, scenario), args.trace, "csv")
        if result.mode.value == "Fault":
            raise _Fault(result.diagnostic)
    elif cmd == "self-check":
        scenario = _disturb(scenario, args.disturb)
        if scenario.scc is None:
            raise ScenarioError(f"scenario '{scenario.name}' has no SCC")
        check = self_check(scenario.tank.Lp, scenario.tank.Rp, scenario.scc, scenario.controller, scenario.disturbance)
        if check.table is not None:
            _write(check.table.to_text(), args.out)
        if check.fault:
            raise _Fault(check.diagnostic)
    return EXIT_OK


def trace_report(result, scenario) -> SweepReport:
    rows = [[r.t, r.mode.value, r.f, r.phi, r.theta_meas, r.note] for r in result.trace.records]
    return SweepReport(["t", "mode", "f", "phi", "theta_meas", "note"], rows,
                       {"scenario": scenario.name, "scenario_hash": scenario.digest()})


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except _Fault as exc:
        print(f"sswpt: session fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except (ReportIOError, OSError) as exc:
        print(f"sswpt: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ScenarioError, DomainError) as exc:
        print(f"sswpt: {exc}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
