"""Command-line interface: ``trsim validate|run|compare``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .compare import compare
from .engine import MetricsReport, run
from .errors import ParseError, ValidationError
from .scenario import Scenario, load_scenario
from .topology import validate_graph

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INVALID = 2


class _InputError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load(path: str) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise _InputError(EXIT_PARSE, f"cannot read {path}: {exc}") from None
    try:
        return load_scenario(text)
    except ParseError as exc:
        raise _InputError(EXIT_PARSE, f"parse error: {exc}") from None
    except ValidationError as exc:
        raise _InputError(EXIT_INVALID, f"invalid: {exc}") from None


def _emit(text: str, report_path: str | None, summary: str) -> None:
    if report_path:
        Path(report_path).write_text(text, encoding="utf-8")
        print(summary)
    else:
        sys.stdout.write(text)


def _summary(report: MetricsReport) -> str:
    return (
        f"{report.mode}: ticks={report.ticks_run} delivered={report.packets_delivered}/{report.packets_sent} "
        f"exposures={report.total_exposures} detections={len(report.detections)} reroutes={report.reroute_count}"
    )


def render_table(report: MetricsReport) -> str:
    rows = [
        ("mode", report.mode),
        ("seed", report.seed),
        ("ticks run", report.ticks_run),
        ("packets sent", report.packets_sent),
        ("packets delivered", report.packets_delivered),
        ("packets dropped", report.packets_dropped),
        ("packets in flight", report.packets_in_flight),
        ("plaintext exposures", report.plaintext_exposures["total"]),
        ("ciphertext exposures", report.ciphertext_exposures["total"]),
        ("detections", len(report.detections)),
        ("max detection latency", "-" if report.max_detection_latency is None else report.max_detection_latency),
        ("reroutes", report.reroute_count),
        ("zombifications", report.zombification_count),
        ("label rotations", report.rotation_count),
        ("ids alerts", report.ids_alert_count),
    ]
    width = max(len(k) for k, _ in rows)
    lines = [f"{k.ljust(width)}  {v}" for k, v in rows]
    lines.append("")
    lines.append(f"{'session':<8}{'route':<32}{'state':<14}{'delivered':>10}{'dropped':>9}")
    for s in report.sessions:
        route = "-".join(s["path"]) or "-"
        state = s["state"] + (f"({s['reason']})" if s["reason"] else "")
        lines.append(f"{s['id']:<8}{route:<32}{state:<14}{s['delivered']:>10}{s['dropped']:>9}")
    for d in report.detections:
        lines.append(f"detection tick={d['tick']} node={d['node']} kind={d['kind']} session={d['session']}")
    return "\n".join(lines) + "\n"


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    violations = validate_graph(scenario.graph, scenario.config.require_full_mesh)
    if violations:
        for v in violations:
            print(v)
        return EXIT_INVALID
    print("OK")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    for v in validate_graph(scenario.graph, scenario.config.require_full_mesh):
        print(f"warning: {v}", file=sys.stderr)
    report = run(scenario, seed=args.seed)
    text = report.to_json() if args.format == "json" else render_table(report)
    _emit(text, args.report, _summary(report))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    result = compare(scenario, seed=args.seed)
    for notice in result.notices:
        print(f"notice: {notice}", file=sys.stderr)
    _emit(result.to_json(), args.report, f"{_summary(result.tr)}\n{_summary(result.vpn)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trsim", description="Trusted routing vs VPN simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run one simulation")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--report", default=None, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run the scenario under TR and VPN")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--report", default=None, help="write the comparison here instead of stdout")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _InputError as exc:
        print(exc, file=sys.stderr if exc.code == EXIT_PARSE else sys.stdout)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
