"""Command-line entry point: ``qclean {repl,run,gen-errors,score,compare}``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .config import MODES, EngineConfig
from .engine import Session
from .errors import QCleanError
from .model import Relation
from .plan import explain
from .rules import parse_rules
from .sql import parse_query, split_queries
from .store import load_csv, load_prob, load_schema, save_csv, save_prob
from .workload import gen_errors, run_batch, score

log_err = sys.stderr


def _named(spec: str) -> tuple[str | None, str]:
    name, sep, path = spec.partition("=")
    return (name, path) if sep and "/" not in name else (None, spec)


def load_relations(data: list[str], schemas: list[str]) -> dict[str, Relation]:
    """Load ``[name=]path`` inputs; CSV files take the schema of the same name or ``<stem>.schema``."""
    by_name, unnamed = {}, []
    for s in schemas or []:
        name, path = _named(s)
        if name:
            by_name[name] = path
        else:
            unnamed.append(path)
    out = {}
    for spec in data:
        name, path = _named(spec)
        p = Path(path)
        if p.suffix == ".jsonl":
            rel = load_prob(p)
            if name:
                rel.name = name
        else:
            name = name or p.stem
            schema_path = by_name.get(name)
            if schema_path is None and len(data) == 1 and len(unnamed) == 1:
                schema_path = unnamed[0]
            if schema_path is None:
                schema_path = p.with_suffix(".schema")
            rel = load_csv(p, load_schema(schema_path), name)
        if rel.name in out:
            raise QCleanError(f"relation {rel.name!r} loaded twice")
        out[rel.name] = rel
    return out


def _session(args) -> Session:
    rels = load_relations(args.data, args.schema)
    rules = parse_rules(Path(args.rules).read_text()) if args.rules else []
    cfg = EngineConfig(args.mode, args.partitions, args.accuracy_threshold, args.seed)
    return Session(rels, rules, cfg)


def _save(session: Session, out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, rel in sorted(session.relations.items()):
        path = out / f"{name}.jsonl"
        save_prob(path, rel)
        paths.append(path)
    return paths


def _report_line(rec) -> dict:
    d = rec.to_dict()
    timing = d.pop("timing")
    return {"record": d, "timing": timing}


def _print_record(rec, out) -> None:
    print(f"-- rows: {rec.rows} | strategy: {rec.strategy} | eps: {rec.eps} | violations: {rec.violations}"
          f" | fixes: {rec.fixes}" + (" | switched" if rec.switched else ""), file=out)
    for rid, est in sorted(rec.estimates.items()):
        print(f"-- {rid}: accuracy {est['accuracy']:.3f}, support {est['support']:.3f}"
              f" ({'full' if est['full'] else 'partial'} cleaning)", file=out)
    print(f"-- time: {rec.timing['total_ms']:.3f} ms", file=out)


# ---------------------------------------------------------------------------
# subcommands


def cmd_repl(args) -> int:
    session = _session(args)
    interactive = sys.stdin.isatty()
    out = sys.stdout
    while True:
        if interactive:
            out.write("qclean> ")
            out.flush()
        line = sys.stdin.readline()
        if not line:
            break
        line = line.strip()
        if not line or line.startswith("--"):
            continue
        if line.startswith("\\"):
            cmd, _, rest = line.partition(" ")
            if cmd in ("\\q", "\\quit"):
                break
            if cmd == "\\stats":
                for s in session.stats_summary():
                    print(json.dumps(s, sort_keys=True), file=out)
            elif cmd == "\\save":
                target = Path(rest.strip() or args.out or ".")
                for p in _save(session, target):
                    print(f"saved {p}", file=out)
            elif cmd == "\\explain":
                try:
                    print(explain(session.plan(parse_query(rest))), file=out)
                except QCleanError as exc:
                    print(f"error: {exc}", file=out)
            elif cmd == "\\help":
                print("queries end at the line break; commands: \\stats \\save [dir] \\explain <query> \\quit",
                      file=out)
            else:
                print(f"error: unknown command {cmd}", file=out)
            continue
        try:
            result, rec = session.execute(line)
        except QCleanError as exc:
            print(f"error: {exc}", file=out)
            continue
        print(result.format(), file=out)
        _print_record(rec, out)
    return 0


def cmd_run(args) -> int:
    session = _session(args)
    queries = split_queries(Path(args.queries).read_text()) if args.queries else []
    report = run_batch(session, queries)
    lines = [json.dumps(_report_line(r), sort_keys=True) for r in report.records]
    summary = {"summary": {"queries": len(report.records), "mode": args.mode, "switches": report.switches,
                           "total_cost": report.total_cost, "error": report.error,
                           "stats": session.stats_summary()},
               "timing": {"total_ms": round(report.total_ms, 3)}}
    lines.append(json.dumps(summary, sort_keys=True))
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        _save(session, out)
        (out / "report.jsonl").write_text(text)
    else:
        sys.stdout.write(text)
    if report.error:
        print(f"error: {report.error}", file=log_err)
        return 1
    return 0


def cmd_gen_errors(args) -> int:
    rels = load_relations([args.data], args.schema)
    (rel,) = rels.values()
    rules = {r.id: r for r in parse_rules(Path(args.rules).read_text())}
    if args.rule not in rules:
        raise QCleanError(f"unknown rule {args.rule!r}; have {sorted(rules)}")
    dirty, truth = gen_errors(rel, rules[args.rule], args.rate, args.seed)
    save_csv(args.out, dirty)
    if args.truth:
        rows = [{"tid": t, "attr": a, "value": v} for (t, a), v in sorted(truth.items())]
        Path(args.truth).write_text(json.dumps(rows, indent=1) + "\n")
    print(f"edited {len(truth)} cells of {rel.name}", file=log_err)
    return 0


def cmd_score(args) -> int:
    rels = load_relations([args.data], args.schema)
    (rel,) = rels.values()
    truth = {(d["tid"], d["attr"]): d["value"] for d in json.loads(Path(args.truth).read_text())}
    s = score(rel, truth)
    print(json.dumps({"precision": s.precision, "recall": s.recall, "f1": s.f1, "updates": s.updates,
                      "correct": s.correct, "errors": s.errors}, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    queries = split_queries(Path(args.queries).read_text())
    rows = []
    for mode in args.modes:
        args.mode = mode
        t0 = time.perf_counter()
        session = _session(args)
        report = run_batch(session, queries)
        wall = time.perf_counter() - t0
        rows.append({"mode": mode, "wall_s": round(wall, 3), "sim_cost": report.total_cost,
                     "switches": len(report.switches), "error": report.error})
    for r in rows:
        print(json.dumps(r, sort_keys=True))
    return 1 if any(r["error"] for r in rows) else 0


# ---------------------------------------------------------------------------


def _engine_flags(p: argparse.ArgumentParser, mode: bool = True) -> None:
    p.add_argument("--data", action="append", required=True, metavar="[NAME=]PATH",
                   help="CSV (with a schema) or probabilistic .jsonl relation; repeatable")
    p.add_argument("--schema", action="append", default=[], metavar="[NAME=]PATH",
                   help="attr:kind schema file; defaults to <data stem>.schema")
    p.add_argument("--rules", help="rule file (FD/DC lines)")
    if mode:
        p.add_argument("--mode", choices=MODES, default="auto")
    p.add_argument("--partitions", type=int, default=64, help="theta-matrix partitions (perfect square)")
    p.add_argument("--accuracy-threshold", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory for the final relations and report")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qclean", description="Query-driven probabilistic data cleaning.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("repl", help="interactive query session")
    _engine_flags(p)
    p.set_defaults(func=cmd_repl)

    p = sub.add_parser("run", help="execute a query file in order")
    _engine_flags(p)
    p.add_argument("--queries", help="one query per line; lines starting with -- are comments")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run the same workload under several modes")
    _engine_flags(p, mode=False)
    p.add_argument("--queries", required=True)
    p.add_argument("--modes", nargs="+", choices=MODES, default=list(MODES))
    p.set_defaults(func=cmd_compare, mode="auto")

    p = sub.add_parser("gen-errors", help="inject FD errors and write ground truth")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", action="append", default=[])
    p.add_argument("--rules", required=True)
    p.add_argument("--rule", required=True, help="id of the FD to violate")
    p.add_argument("--rate", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dirty CSV path")
    p.add_argument("--truth", help="ground-truth JSON path")
    p.set_defaults(func=cmd_gen_errors)

    p = sub.add_parser("score", help="precision/recall of a cleaned relation")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", action="append", default=[])
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_score)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (QCleanError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=log_err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
