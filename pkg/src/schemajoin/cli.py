"""Command-line entry points.

Exit codes: 0 ok, 1 usage or parameter error, 2 data error (missing or
malformed input), 3 corrupt state or table file.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .errors import DataError, NotFound, ParameterError, SchemaJoinError, StateCorruption
from .kb import DEFAULT_BUCKET_LENGTH, DEFAULT_SEED, ingest_file
from .normalize import RULES, Dictionaries, normalize_corpus
from .pipeline import (
    IntegrationParams,
    IntegrationState,
    KnowledgeBase,
    batch_integrate,
    incremental_integrate,
    read_decisions,
    read_schema_file,
    resolve_state,
    review_export,
    review_import,
    stats,
)

log = logging.getLogger("schemajoin")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_STATE = 0, 1, 2, 3

DEFAULTS = {
    "epsilon_t": 1,
    "gamma": 3,
    "beta": 1.5,
    "q": 2,
    "frontier_cap": 64,
    "tables": "1,2",
    "seed": DEFAULT_SEED,
    "bucket_length": DEFAULT_BUCKET_LENGTH,
    "abbrev": None,
    "wordlist": None,
    "overrides": None,
    "kb": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon-t", type=int, help="literal edit-distance threshold (default 1)")
    p.add_argument("--gamma", type=int, help="semantic path-length threshold (default 3)")
    p.add_argument("--beta", type=float, help="resolve tolerance factor, > 1 (default 1.5)")
    p.add_argument("--q", type=int, help="q-gram length (default 2)")
    p.add_argument("--frontier-cap", type=int, help="frontier degree cap for inserts (default 64)")


def _dict_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--abbrev", help="abbreviation TSV (abbr<TAB>expansion)")
    p.add_argument("--wordlist", help="newline-delimited wordlist for word cutting")
    p.add_argument("--overrides", help="override TSV (raw name<TAB>tokens)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="schemajoin", description="Knowledge-base assisted schema integration.")
    parser.add_argument("--config", help="flat JSON file of flag defaults")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    kb = sub.add_parser("kb", help="build and inspect knowledge-base artifacts")
    kb_sub = kb.add_subparsers(dest="kb_command", required=True, parser_class=_Parser)
    b = kb_sub.add_parser("build", help="ingest an edge TSV and build neighbor tables")
    b.add_argument("edges")
    b.add_argument("--out", required=True)
    b.add_argument("--tables", help="comma-separated powers of two (default 1,2)")
    b.add_argument("--seed", type=int)
    b.add_argument("--bucket-length", type=int)
    n = kb_sub.add_parser("neighbors", help="print the concepts within --gamma hops")
    n.add_argument("concept")
    n.add_argument("--kb")
    n.add_argument("--gamma", type=int)

    integ = sub.add_parser("integrate", help="batch or incremental integration")
    i_sub = integ.add_subparsers(dest="integrate_command", required=True, parser_class=_Parser)
    ib = i_sub.add_parser("batch", help="integrate a schema corpus from scratch")
    ib.add_argument("schemas")
    ib.add_argument("--kb")
    ib.add_argument("--out", required=True)
    _param_flags(ib)
    _dict_flags(ib)
    ia = i_sub.add_parser("add", help="insert schemas into an existing state in place")
    ia.add_argument("schemas")
    ia.add_argument("--state", required=True)
    ia.add_argument("--kb")
    _param_flags(ia)
    _dict_flags(ia)

    r = sub.add_parser("resolve", help="re-run resolve on a state")
    r.add_argument("--state", required=True)
    r.add_argument("--kb")
    r.add_argument("--beta", type=float)

    rev = sub.add_parser("review", help="manual review queue")
    rev_sub = rev.add_subparsers(dest="review_command", required=True, parser_class=_Parser)
    re_ = rev_sub.add_parser("export", help="write pending items as JSON lines")
    re_.add_argument("--state", required=True)
    re_.add_argument("--out", required=True)
    ri = rev_sub.add_parser("import", help="apply a decisions file")
    ri.add_argument("decisions")
    ri.add_argument("--state", required=True)
    ri.add_argument("--kb")

    nm = sub.add_parser("normalize", help="tokenize attribute names")
    nm.add_argument("names")
    _dict_flags(nm)

    st = sub.add_parser("stats", help="summarize a state file")
    st.add_argument("--state", required=True)
    return parser


def _resolve_options(args: argparse.Namespace) -> dict:
    """Flags beat the config file, which beats the built-in defaults."""
    config: dict = {}
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise DataError(f"{args.config}: expected a flat object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
        unknown = set(config) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    opts = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        opts[key] = flag if flag is not None else config.get(key, default)
    return opts


def _params(opts: dict) -> IntegrationParams:
    try:
        return IntegrationParams(int(opts["epsilon_t"]), int(opts["gamma"]), float(opts["beta"]),
                                 int(opts["q"]), int(opts["frontier_cap"]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(str(exc)) from None


def _dicts(opts: dict) -> Dictionaries:
    return Dictionaries.load(opts["abbrev"], opts["wordlist"], opts["overrides"])


def _kb(opts: dict) -> KnowledgeBase | None:
    return KnowledgeBase.load(opts["kb"]) if opts["kb"] else None


def _require_kb(state: IntegrationState, kb: KnowledgeBase | None) -> None:
    if kb is None and any(v is not None for v in state.anchors.values()):
        raise UsageError("the state has knowledge-base anchors; pass --kb")


def _report(report) -> None:
    for schema_id, errs in sorted(report.normalization_errors.items()):
        for name, msg in sorted(errs.items()):
            print(f"schema {schema_id}: cannot normalize {name!r}: {msg}", file=sys.stderr)
    print(f"added {len(report.added)}, skipped {len(report.skipped)}, merges {report.merges}, "
          f"queued {report.queued}, unanchored {len(report.unanchored)}", file=sys.stderr)


def _kb_build(args, opts) -> int:
    try:
        ks = [int(k) for k in str(opts["tables"]).split(",") if k.strip()]
    except ValueError:
        raise ParameterError(f"bad --tables {opts['tables']!r}") from None
    result = ingest_file(args.edges)
    for rej in result.rejects:
        print(f"{args.edges}:{rej.line_no}: {rej.reason}", file=sys.stderr)
    kb = KnowledgeBase.build(result.graph, ks, int(opts["seed"]), int(opts["bucket_length"]))
    kb.save(args.out)
    print(f"concepts: {len(kb.graph)}")
    print(f"edges: {len(kb.graph.edges)}")
    print(f"rejected lines: {len(result.rejects)}")
    print(f"duplicate or self-loop edges: {result.dropped}")
    for k, t in kb.tables.items():
        print(f"H_{k}: {len(t)} entries in {len(t.buckets)} buckets")
    return EXIT_OK


def _kb_neighbors(args, opts) -> int:
    if not opts["kb"]:
        raise UsageError("--kb is required")
    kb = KnowledgeBase.load(opts["kb"])
    gamma = int(opts["gamma"])
    if gamma < 1:
        raise ParameterError(f"gamma must be >= 1, got {gamma}")
    if args.concept not in kb.graph:
        raise NotFound(args.concept)
    ball = kb.graph.ball(args.concept, gamma)
    for name, d in sorted(ball.items(), key=lambda x: (x[1], x[0])):
        print(f"{d}\t{name}")
    return EXIT_OK


def _integrate_batch(args, opts) -> int:
    params = _params(opts)
    schemas = read_schema_file(args.schemas)
    state, report = batch_integrate(schemas, params, _kb(opts), _dicts(opts))
    state.save(args.out)
    _report(report)
    return EXIT_OK


def _integrate_add(args, opts) -> int:
    path = Path(args.state)
    state = IntegrationState.load(path) if path.exists() else IntegrationState(_params(opts))
    kb = _kb(opts)
    dicts = _dicts(opts)
    for schema in read_schema_file(args.schemas):
        _report(incremental_integrate(schema, state, kb, dicts))
    state.save(path)
    return EXIT_OK


def _resolve(args, opts) -> int:
    state = IntegrationState.load(args.state)
    kb = _kb(opts)
    _require_kb(state, kb)
    n = resolve_state(state, kb, args.beta)
    state.save(args.state)
    print(f"split {n} clusters", file=sys.stderr)
    return EXIT_OK


def _review_export(args, opts) -> int:
    state = IntegrationState.load(args.state)
    with open(args.out, "w", encoding="utf-8") as fh:
        for doc in review_export(state):
            fh.write(json.dumps(doc, sort_keys=True, ensure_ascii=False) + "\n")
    return EXIT_OK


def _review_import(args, opts) -> int:
    state = IntegrationState.load(args.state)
    kb = _kb(opts)
    _require_kb(state, kb)
    with open(args.decisions, encoding="utf-8") as fh:
        decisions = read_decisions(fh)
    report = review_import(state, decisions, kb)
    for item_id in report.unknown:
        print(f"unknown review id {item_id!r}, skipped", file=sys.stderr)
    for item_id in report.invalid:
        print(f"review {item_id!r}: invalid verdict or already decided, skipped", file=sys.stderr)
    state.save(args.state)
    print(f"applied {len(report.applied)}", file=sys.stderr)
    return EXIT_OK


def _normalize(args, opts) -> int:
    names = [line.strip() for line in Path(args.names).read_text(encoding="utf-8").splitlines()]
    tokenized, errors = normalize_corpus([n for n in names if n], _dicts(opts))
    for name, t in tokenized.items():
        print(json.dumps({"raw": name, "tokens": t.tokens, "rule": t.rule_fired,
                          "rule_name": RULES[t.rule_fired], "keyword": t.keyword,
                          "unsplit": t.unsplit}, ensure_ascii=False))
    for name, msg in errors.items():
        print(f"cannot normalize {name!r}: {msg}", file=sys.stderr)
    return EXIT_OK


def _stats(args, opts) -> int:
    state = IntegrationState.load(args.state)
    print(json.dumps(stats(state), indent=1, sort_keys=True, ensure_ascii=False))
    return EXIT_OK


_COMMANDS = {
    ("kb", "build"): _kb_build,
    ("kb", "neighbors"): _kb_neighbors,
    ("integrate", "batch"): _integrate_batch,
    ("integrate", "add"): _integrate_add,
    ("resolve", None): _resolve,
    ("review", "export"): _review_export,
    ("review", "import"): _review_import,
    ("normalize", None): _normalize,
    ("stats", None): _stats,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    sub = (getattr(args, "kb_command", None) or getattr(args, "integrate_command", None)
           or getattr(args, "review_command", None))
    handler = _COMMANDS[(args.command, sub)]
    try:
        opts = _resolve_options(args)
        return handler(args, opts)
    except (UsageError, ParameterError) as exc:
        print(f"schemajoin: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StateCorruption as exc:
        print(f"schemajoin: corrupt state: {exc}", file=sys.stderr)
        return EXIT_STATE
    except NotFound as exc:
        print(f"schemajoin: not found: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, SchemaJoinError, OSError) as exc:
        print(f"schemajoin: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
