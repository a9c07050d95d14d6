"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input-format error, 3 protocol
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from . import attacks
from .config import ConfigError, Scenario, load
from .protocol import AuthenTree, AuthReport, ProtocolError, TranscriptEntry, latency_model

EXIT_OK, EXIT_CONFIG, EXIT_PROTOCOL, EXIT_IO = 0, 2, 3, 4
TRANSCRIPT_FORMAT = "authentree-transcript"
TRANSCRIPT_VERSION = 1


class TranscriptError(ValueError):
    pass


def _seed(arg: Optional[int]) -> Optional[int]:
    if arg is not None:
        return arg
    env = os.environ.get("AUTHENTREE_SEED")
    return int(env) if env else None


def _load(path: str, seed: Optional[int]) -> Scenario:
    return load(path, _seed(seed))


def summarize(scenario: Scenario, report: AuthReport) -> str:
    tree = report.tree
    lines = [f"scenario {scenario.name} (seed {report.seed}, session {report.session_id})"]
    excluded = " ".join(map(str, tree.excluded)) or "none"
    lines.append(f"trusted integrators: {' '.join(map(str, tree.root_set))} "
                 f"(quorum {tree.quorum.t} of {tree.quorum.n}); excluded: {excluded}")
    third = [r for r in report.results.values() if r.role.value == "third_party"]
    counts = {v: sum(r.final.value == v for r in third) for v in ("pass", "fail", "anomalous")}
    lines.append(f"third-party chiplets: {counts['pass']} pass, {counts['fail']} fail, "
                 f"{counts['anomalous']} anomalous")
    lines.append("all authenticated" if report.all_authenticated
                 else f"rejected: {' '.join(map(str, report.rejected))}")
    diags = sorted(report.diagnoses, key=lambda d: d.target_id)
    if diags:
        lines.append("diagnoses:")
        for d in diags:
            links = " ".join(f"({a},{b})" for a, b in sorted(d.links))
            extra = f" links {links}" if links else ""
            flags = f" [{'; '.join(d.flags)}]" if d.flags else ""
            lines.append(f"  chiplet {d.target_id}: {d.classification.value}{extra}{flags}")
    cycles, ns = latency_model(report)
    lines.append(f"critical path: {cycles} cycles = {ns:.1f} ns at {report.clock_ghz} GHz; "
                 f"total {report.total_cycles} cycles")
    return "\n".join(lines) + "\n"


def transcript_lines(scenario: Scenario, report: AuthReport) -> str:
    header = {"record": "header", "format": TRANSCRIPT_FORMAT, "version": TRANSCRIPT_VERSION,
              "seed": scenario.seed, "session_id": report.session_id, "scenario": scenario.doc}
    end = {"record": "end", "session_id": report.session_id, "messages": len(report.transcripts),
           "verdicts": {str(k): r.final.value for k, r in sorted(report.results.items())}}
    out = [json.dumps(header, sort_keys=True)]
    out += [json.dumps({"record": "message", **e.to_dict()}, sort_keys=True) for e in report.transcripts]
    out.append(json.dumps(end, sort_keys=True))
    return "\n".join(out) + "\n"


def read_transcript(path: str) -> tuple[dict, list[TranscriptEntry], dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        records = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise TranscriptError(f"transcript ends mid-session (line {exc.lineno}: {exc.msg})") from None
    if not records or records[0].get("record") != "header":
        raise TranscriptError("transcript has no header record")
    header = records[0]
    if header.get("format") != TRANSCRIPT_FORMAT or header.get("version") != TRANSCRIPT_VERSION:
        raise TranscriptError(f"transcript version mismatch: {header.get('format')} v{header.get('version')}")
    if records[-1].get("record") != "end":
        raise TranscriptError("transcript ends mid-session")
    entries = [TranscriptEntry.from_dict(r) for r in records[1:-1] if r.get("record") == "message"]
    end = records[-1]
    if end.get("messages") != len(entries):
        raise TranscriptError("transcript ends mid-session")
    return header, entries, end


def cmd_validate(args) -> int:
    try:
        _load(args.path, None)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"{args.path}:{d.line or 1}: {d.field}: {d.message}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.path}: ok")
    return EXIT_OK


def cmd_authenticate(args) -> int:
    scenario = _load(args.path, args.seed)
    try:
        report = scenario.authenticate()
    except ProtocolError as exc:
        print(f"protocol failure: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json())
        (out / "transcript.jsonl").write_text(transcript_lines(scenario, report))
        (out / "manifest.json").write_text(scenario.manifest.to_json() + "\n")
    sys.stdout.write(summarize(scenario, report))
    return EXIT_OK


def cmd_attack(args) -> int:
    scenario = _load(args.path, args.seed)
    if args.sweep:
        lengths = args.lengths or list(attacks.DEFAULT_LENGTHS)
        reports = attacks.sweep(scenario, lengths, attacks.DEFAULT_ATTACKS, args.trials,
                                jobs=args.jobs)
    else:
        if not scenario.attacks:
            print("config error: no attack section; pass --sweep or add attacks", file=sys.stderr)
            return EXIT_CONFIG
        reports = []
        for spec in scenario.attacks:
            spec = dict(spec)
            if args.trials_given:
                spec["trials"] = args.trials
            bits = spec.get("signature_length_bits", scenario.protocol.signature_bits)
            reports += attacks.sweep(scenario, [bits], [spec], args.trials, jobs=args.jobs)
    text = attacks.to_csv(reports)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        if args.raw:
            out.with_suffix(".raw.jsonl").write_text(attacks.to_jsonl(reports))
    else:
        sys.stdout.write(text)
        if args.raw:
            sys.stdout.write(attacks.to_jsonl(reports))
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        header, entries, end = read_transcript(args.transcript)
    except TranscriptError as exc:
        print(f"transcript error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    seed = header["seed"]
    scenario = Scenario.from_dict(header["scenario"], seed)
    if args.as_attack:
        engine = AuthenTree(scenario.topology, scenario.manifest, scenario.protocol, seed)
        ctx = engine.new_session()
        while ctx.session_id <= header["session_id"]:
            ctx = engine.new_session()
        rep = attacks.attack_replay(engine, entries, ctx)
        mean = "n/a" if rep.mean_hd is None else f"{rep.mean_hd:.2f}"
        print(f"replayed {rep.replayed} responses into session {ctx.session_id}: "
              f"{rep.acceptances} acceptances, mean HD {mean}")
        return EXIT_OK if rep.acceptances == 0 else EXIT_PROTOCOL
    report = scenario.authenticate()
    verdicts = {str(k): r.final.value for k, r in sorted(report.results.items())}
    same_msgs = [e.to_dict() for e in report.transcripts] == [e.to_dict() for e in entries]
    for cid, v in verdicts.items():
        print(f"chiplet {cid}: {v}")
    if verdicts != end.get("verdicts") or not same_msgs:
        print("audit replay diverged from the recorded session", file=sys.stderr)
        return EXIT_PROTOCOL
    print(f"audit replay of session {report.session_id}: identical verdicts")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="authentree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("authenticate", help="run one authentication session")
    p.add_argument("path")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="directory for report.json, transcript.jsonl, manifest.json")
    p.set_defaults(func=cmd_authenticate)

    p = sub.add_parser("attack", help="run the attack harness and emit CSV")
    p.add_argument("path")
    p.add_argument("--sweep", action="store_true", help="attack x signature-length grid")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--lengths", type=int, nargs="+")
    p.add_argument("--raw", action="store_true", help="also dump per-trial JSON lines")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("replay", help="audit-replay a transcript or replay it as an attack")
    p.add_argument("transcript")
    p.add_argument("--as-attack", action="store_true")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "attack":
        args.trials_given = args.trials is not None
        if args.trials is None:
            args.trials = 1000
        if args.trials < 1:
            print("config error: --trials must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
