"""Command-line entry point exposing every pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Errors print one machine-parsable line to stderr: ``error: <kind>: <msg>``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    evolution_curves,
    history_from_journal,
    linear_bound_census,
    load_history,
    proliferation_census,
    reduction_after_discovery,
    write_csv,
    write_gnuplot,
)
from .checker import CheckMode, SolutionStore, check_pool, generalization_check
from .config import ConfigError, describe_defaults, loop_config_from, parse_config_file, registry
from .evaluator import EvalLimits, FAST_LIMITS, SLOW_LIMITS, take_terms
from .guidance import BeamConfig, NGramGuidance, beam_generate
from .lang import GlobalMacroTable, LangError, decode_tokens, tokens_of
from .notation import NotationError, from_symbolic
from .oeis import OeisError, build_trie, extension_terms, load_bfile, load_stripped
from .synth import (
    SynthError,
    mine_global_macros,
    random_programs,
    run_loop,
    training_pairs,
    export_training_pairs,
)
from .transpile import transpile_python


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _limits(name: str, values: dict | None = None) -> EvalLimits:
    if values:
        if name == "fast":
            return EvalLimits(values["fast_t_call"], values["fast_n_compr"])
        if name == "slow":
            return EvalLimits(values["slow_t_call"], values["slow_n_compr"])
    return FAST_LIMITS if name == "fast" else SLOW_LIMITS


def _program_from_args(args) -> "Expr":
    if args.symbolic:
        return from_symbolic(args.program)
    return decode_tokens(tokens_of(args.program))


def _load_pool(path) -> list[str]:
    pool = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            pool.append(line.split("\t")[-1])
    return pool


def cmd_ingest(args) -> int:
    corpus = load_stripped(args.corpus, max_terms=args.max_terms)
    trie = build_trie(corpus)
    total_terms = sum(len(e.terms) for e in corpus)
    print(f"sequences: {len(corpus)}")
    print(f"terms: {total_terms}")
    print(f"trie nodes: {trie.node_count}")
    return 0


def cmd_eval(args) -> int:
    e = _program_from_args(args)
    limits = _limits(args.limits)
    terms, run = take_terms(e, limits, args.terms)
    print(" ".join(str(t) for t in terms))
    if len(terms) < args.terms:
        print(f"stopped: {run.reason} after {len(terms)} terms", file=sys.stderr)
    return 0


def cmd_transpile(args) -> int:
    e = _program_from_args(args)
    source = transpile_python(e, args.entry)
    if args.out:
        Path(args.out).write_text(source, encoding="utf-8")
    else:
        sys.stdout.write(source)
    return 0


def cmd_random_gen(args) -> int:
    pool = random_programs(args.count, args.max_size, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        for text in pool:
            fh.write(f"A000000\t{text}\n")
    print(f"generated: {len(pool)}")
    return 0


def cmd_check(args) -> int:
    corpus = load_stripped(args.corpus, max_terms=args.max_terms)
    trie = build_trie(corpus)
    pool = _load_pool(args.pool)
    store = SolutionStore.load_tsv(args.store) if args.store and Path(args.store).exists() else SolutionStore()
    mode = CheckMode(args.mode)
    report = check_pool(
        pool, trie, mode, store,
        jobs=args.jobs, min_promote_depth=args.min_promote_depth,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    store.save_tsv(out_dir / "solutions.tsv")
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"checked: {report.checked}")
    print(f"unique: {report.unique}")
    print(f"new solutions: {report.new_solutions}")
    print(f"total solutions: {report.total_solutions}")
    return 0


def cmd_train(args) -> int:
    corpus = load_stripped(args.corpus, max_terms=args.max_terms)
    store = SolutionStore.load_tsv(args.store)
    table = GlobalMacroTable.load(args.macros) if args.macros else GlobalMacroTable()
    pairs = training_pairs(store, corpus, args.pairs_per_solution, table if len(table) else None)
    if args.export_dir:
        export_dir = Path(args.export_dir)
        export_dir.mkdir(parents=True, exist_ok=True)
        export_training_pairs(pairs, export_dir / "train.src", export_dir / "train.tgt", args.src_max_tokens)
    model = NGramGuidance(args.order, args.smoothing)
    model.train(pairs)
    model.save(args.out)
    print(f"pairs: {len(pairs)}")
    return 0


def cmd_infer(args) -> int:
    corpus = load_stripped(args.corpus, max_terms=args.max_terms)
    model = NGramGuidance.load(args.model)
    cfg = BeamConfig(args.beam_width, args.max_len, args.beam_width)
    cache: dict[str, list[str]] = {}
    from .guidance import bucket_of

    with open(args.out, "w", encoding="utf-8") as fh:
        for entry in corpus:
            bucket = bucket_of(entry.terms)
            if bucket not in cache:
                cache[bucket] = [text for text, _ in beam_generate(model, entry.terms, cfg)]
            for text in cache[bucket]:
                fh.write(f"A{entry.anum:06d}\t{text}\n")
    print(f"sequences: {len(corpus)}")
    return 0


def cmd_loop(args) -> int:
    values = parse_config_file(args.config) if args.config else {k: d for k, (d, _, _) in registry().items()}
    if args.corpus:
        values["corpus"] = args.corpus
    if args.out:
        values["out_dir"] = args.out
    if args.iterations is not None:
        values["iterations"] = args.iterations
    if args.jobs is not None:
        values["jobs"] = args.jobs
    if not values["corpus"]:
        raise UsageError("loop needs a corpus (flag --corpus or config key)")
    cfg = loop_config_from(values)
    corpus = load_stripped(values["corpus"], max_terms=values["max_terms"])
    trie = build_trie(corpus)
    reports = run_loop(corpus, trie, cfg, values["iterations"], values["out_dir"])
    for i, report in enumerate(reports):
        print(
            f"iter {i}: UC={report.unique} NS={report.new_solutions} "
            f"TS={report.total_solutions} OS={report.own_solutions}"
        )
    return 0


def cmd_macros(args) -> int:
    store = SolutionStore.load_tsv(args.store)
    table = GlobalMacroTable.load(args.table) if Path(args.table).exists() else GlobalMacroTable()
    added = mine_global_macros(store, table, args.budget, args.min_len, args.max_len, args.min_count)
    table.save(args.table)
    print(f"appended: {len(added)}")
    print(f"table size: {len(table)}")
    return 0


def cmd_stats(args) -> int:
    history = load_history(args.history)
    if not history:
        raise OeisError(f"no iteration snapshots under {args.history}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = evolution_curves(history)
    write_csv(rows, ["iteration", "avg_size_smallest", "avg_speed_fastest"], out_dir / "evolution.csv")
    write_gnuplot(out_dir / "evolution.csv", ["iteration", "size", "speed"], out_dir / "evolution.gp")

    red = reduction_after_discovery(history, horizon=args.horizon)
    write_csv(red, ["offset", "size_ratio", "speed_ratio"], out_dir / "reduction.csv")

    journal = Path(args.history) / "journal.tsv"
    if journal.exists():
        jh = history_from_journal(journal)
        jrows = evolution_curves(jh)
        write_csv(jrows, ["iteration", "avg_size_smallest", "avg_speed_fastest"], out_dir / "evolution_journal.csv")
        if [r[1:] for r in jrows] != [r[1:] for r in rows]:
            print("warning: journal and snapshot statistics disagree", file=sys.stderr)

    if args.patterns:
        patterns = [line.strip() for line in Path(args.patterns).read_text(encoding="utf-8").splitlines() if line.strip()]
        census = proliferation_census(history, patterns)
        rows = [[snap.iteration, *counts] for snap, counts in zip(history, census)]
        write_csv(rows, ["iteration", *patterns], out_dir / "census.csv")

    bounds = linear_bound_census(history, xmax=args.bound_xmax)
    write_csv(
        [(a, b, form, int(valid)) for a, b, form, valid in bounds],
        ["a", "b", "form", "valid"],
        out_dir / "bounds.csv",
    )
    print(f"snapshots: {len(history)}")
    return 0


def cmd_bcheck(args) -> int:
    corpus = load_stripped(args.corpus, max_terms=args.max_terms)
    by_anum = {e.anum: e for e in corpus}
    store = SolutionStore.load_tsv(args.store)
    bfiles = {}
    for path in sorted(Path(args.bdir).glob("b*.txt")):
        bf = load_bfile(path)
        entry = by_anum.get(bf.anum)
        if entry is not None:
            bfiles[bf.anum] = extension_terms(entry, bf)
    report = generalization_check(store, corpus, bfiles, _limits("slow"))
    for kind in ("smallest", "fastest"):
        counts = report.counts[kind]
        pct = report.percentage(kind)
        pct_text = f"{pct:.2f}%" if pct is not None else "n/a"
        print(
            f"{kind}: generalizes={counts['generalizes']} mismatch={counts['mismatch']} "
            f"timeout={counts['timeout']} rate={pct_text}"
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "per_anum": {f"A{k:06d}": v for k, v in sorted(report.per_anum.items())},
                    "counts": report.counts,
                },
                fh,
                sort_keys=True,
                indent=2,
            )
            fh.write("\n")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="seqsynth",
        description="Self-learning synthesis of integer-sequence programs.",
        epilog=describe_defaults(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"seqsynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a stripped corpus and report stats")
    p.add_argument("--corpus", required=True)
    p.add_argument("--max-terms", type=int, default=0)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("eval", help="print the first terms of a program")
    p.add_argument("--program", required=True, help="space-separated tokens, or symbolic with --symbolic")
    p.add_argument("--terms", type=int, default=10)
    p.add_argument("--limits", choices=["fast", "slow"], default="slow")
    p.add_argument("--symbolic", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("transpile", help="emit Python source for a program")
    p.add_argument("--program", required=True)
    p.add_argument("--symbolic", action="store_true")
    p.add_argument("--entry", default="F")
    p.add_argument("--out", default="")
    p.set_defaults(fn=cmd_transpile)

    p = sub.add_parser("random-gen", help="write a random candidate pool")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--max-size", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_random_gen)

    p = sub.add_parser("check", help="check a candidate pool against a corpus")
    p.add_argument("--pool", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=["fast", "slow", "hybrid"], default="hybrid")
    p.add_argument("--store", default="", help="existing solutions.tsv to update")
    p.add_argument("--out", default="check-out")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--min-promote-depth", type=int, default=4)
    p.add_argument("--max-terms", type=int, default=0)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("train", help="fit a guidance model on a solution store")
    p.add_argument("--store", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--macros", default="")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--smoothing", type=float, default=0.1)
    p.add_argument("--pairs-per-solution", type=int, default=2)
    p.add_argument("--src-max-tokens", type=int, default=80)
    p.add_argument("--export-dir", default="", help="also write train.src/train.tgt here")
    p.add_argument("--max-terms", type=int, default=0)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("infer", help="beam-decode candidates for every sequence")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam-width", type=int, default=240)
    p.add_argument("--max-len", type=int, default=140)
    p.add_argument("--max-terms", type=int, default=0)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("loop", help="run search -> check -> learn iterations")
    p.add_argument("--config", default="")
    p.add_argument("--corpus", default="")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--out", default="")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(fn=cmd_loop)

    p = sub.add_parser("macros", help="mine global macros from a store")
    p.add_argument("--store", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--budget", type=int, default=10)
    p.add_argument("--min-len", type=int, default=4)
    p.add_argument("--max-len", type=int, default=20)
    p.add_argument("--min-count", type=int, default=2)
    p.set_defaults(fn=cmd_macros)

    p = sub.add_parser("stats", help="compute history statistics as CSV")
    p.add_argument("--history", required=True, help="loop output directory")
    p.add_argument("--out", required=True)
    p.add_argument("--patterns", default="", help="file of token-string patterns to census")
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--bound-xmax", type=int, default=10**6)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("bcheck", help="generalization check against b-files")
    p.add_argument("--store", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--bdir", required=True)
    p.add_argument("--out", default="")
    p.add_argument("--max-terms", type=int, default=0)
    p.set_defaults(fn=cmd_bcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as err:
        print(f"error: usage: {err}", file=sys.stderr)
        return 1
    except (LangError, NotationError, OeisError, ConfigError, SynthError, FileNotFoundError) as err:
        print(f"error: data: {err}", file=sys.stderr)
        return 2
    except SystemExit:
        raise
    except Exception as err:  # pragma: no cover - defensive
        print(f"error: internal: {type(err).__name__}: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
