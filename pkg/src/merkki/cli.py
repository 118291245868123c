"""Command line: ``merkki run | analyze | replay-check | validate``.

Exit codes: 0 success, 1 unreadable or unparsable input, 2 invalid scenario or
unknown picture/device, 3 replay violations.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis
from .core import LogParseError, parse_log, serialize_log
from .engine import EventLimitExceeded, effective_seed, run
from .replay import replay_check
from .scenario import ScenarioParseError, ScenarioValidationError, load_scenario

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_VIOLATION = 0, 1, 2, 3


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {text}")
    return v


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise _Fail(EXIT_PARSE, f"cannot read {path}: {e.strerror}") from None


def _scenario(path: str):
    try:
        return load_scenario(_read(path))
    except ScenarioParseError as e:
        raise _Fail(EXIT_PARSE, f"{path}: {e}") from None
    except ScenarioValidationError as e:
        raise _Fail(EXIT_INVALID, "\n".join(e.violations)) from None


def _log(path: str):
    try:
        return parse_log(_read(path))
    except LogParseError as e:
        raise _Fail(EXIT_PARSE, f"{path}: {e}") from None


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


# -- commands -----------------------------------------------------------------------


def cmd_run(args) -> int:
    sc = _scenario(args.scenario)
    try:
        log = run(sc, effective_seed(sc, args.seed))
    except EventLimitExceeded as e:
        raise _Fail(EXIT_INVALID, str(e)) from None
    _emit(serialize_log(log), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    log = _log(args.log)
    pictures = senders = None
    if args.scenario is not None:
        sc = _scenario(args.scenario)
        pictures = [p.id for p in sc.pictures]
        senders = sc.device_ids
    w = args.which
    if w == "stats":
        text = analysis.format_stats(analysis.picture_stats(log, pictures))
    elif w == "heatmap":
        text = analysis.share_heatmap(log, senders, pictures).to_tsv()
    elif w == "repetition":
        text = analysis.format_repetition(analysis.repetition_index(log))
    elif w == "graph":
        if args.picture is None:
            raise _Fail(EXIT_INVALID, "graph needs --picture")
        try:
            text = analysis.export_graph(analysis.diffusion_graph(log, args.picture))
        except analysis.UnknownPictureError:
            raise _Fail(EXIT_INVALID, f"unknown picture {args.picture}") from None
    else:  # timeline
        if args.device is None:
            raise _Fail(EXIT_INVALID, "timeline needs --device")
        try:
            text = analysis.format_timeline(analysis.collection_timeline(log, args.device))
        except analysis.UnknownDeviceError:
            raise _Fail(EXIT_INVALID, f"unknown device {args.device}") from None
    _emit(text, args.out)
    return EXIT_OK


def cmd_replay_check(args) -> int:
    log = _log(args.log)
    sc = _scenario(args.scenario)
    violations = replay_check(log, sc)
    for v in violations:
        print(v)
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_validate(args) -> int:
    _scenario(args.scenario)
    print("ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="merkki", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write its event log")
    p.add_argument("scenario")
    p.add_argument("--seed", type=_u64, help="overrides MERKKI_SEED and the scenario seed")
    p.add_argument("--out", help="log file (default: stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="statistics from a log")
    p.add_argument("log")
    p.add_argument("which", choices=["stats", "heatmap", "graph", "repetition", "timeline"])
    p.add_argument("--picture", type=int, help="picture for 'graph'")
    p.add_argument("--device", type=int, help="device for 'timeline'")
    p.add_argument("--scenario", help="take picture and sender axes from this scenario")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("replay-check", help="check a log against a scenario")
    p.add_argument("log")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_replay_check)

    p = sub.add_parser("validate", help="parse and validate a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Fail as e:
        print(str(e), file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
