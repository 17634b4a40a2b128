"""Candidate generation and the search -> check -> learn loop.

Generation 0 draws arity-correct random trees; later iterations train a
portfolio of n-gram guidance models on the current champions and decode
candidates per sequence with beam search.  External guidance processes
plug in through the exchange files: they read train.src/train.tgt and
write candidates.txt, and the loop treats them like any other model.
"""

from __future__ import annotations

import json
import random
import subprocess
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

from .checker import CheckMode, CheckReport, NotASolution, SolutionStore, check_pool, measure_speed
from .evaluator import EvalLimits
from .guidance import (
    GLOBAL_ALPHABET,
    MACRO_ALPHABET,
    PROGRAM_ALPHABET,
    BeamConfig,
    EmptyStore,
    NGramGuidance,
    beam_generate,
    bucket_of,
    render_terms,
)
from .lang import (
    ARITY,
    Expr,
    GlobalMacroTable,
    abstract_replace,
    LangError,
    LocalMacroProgram,
    decode_tokens,
    encode_tokens,
    expand_local_macros,
    is_macro_free,
    text_of,
)


class SynthError(Exception):
    pass


class MissingFile(SynthError):
    pass


def random_programs(count: int, max_size: int, seed: int) -> list[str]:
    """Deterministic pool of distinct random token strings, size <= max_size.

    Operators are drawn uniformly; draws that cannot fit the remaining
    size budget are resampled.  May return fewer than ``count`` strings
    when the size cap bounds the space (max_size=1 admits only the five
    nullary programs).
    """
    rng = random.Random(seed)
    out: dict[str, None] = {}
    attempts = 0
    limit = count * 200

    def gen(budget: int) -> Expr:
        while True:
            op = rng.randrange(14)
            if 1 + ARITY[op] <= budget:
                break
        arity = ARITY[op]
        if arity == 0:
            return Expr(op)
        remaining = budget - 1
        args = []
        for i in range(arity):
            reserve = arity - i - 1
            child = gen(remaining - reserve)
            args.append(child)
            remaining -= _size(child)
        return Expr(op, tuple(args))

    def _size(e: Expr) -> int:
        return 1 + sum(_size(a) for a in e.args)

    while len(out) < count and attempts < limit:
        attempts += 1
        out.setdefault(text_of(encode_tokens(gen(max_size))), None)
    return list(out)


def store_programs(store: SolutionStore) -> list[str]:
    """Distinct champion token strings, deterministic order."""
    seen: dict[str, None] = {}
    for anum in sorted(store.records):
        rec = store.records[anum]
        seen.setdefault(rec.smallest.tokens, None)
        seen.setdefault(rec.fastest.tokens, None)
    return list(seen)


def training_pairs(
    store: SolutionStore,
    corpus,
    pairs_per_solution: int = 2,
    table: GlobalMacroTable | None = None,
):
    """(terms, target_tokens) pairs from the store's champions.

    pairs_per_solution 1 keeps only the smallest program, 2 both champions
    (deduplicated when they coincide).  With a macro table the targets are
    compressed with abstract replacement first.
    """
    by_anum = {entry.anum: entry for entry in corpus}
    pairs = []
    for anum in sorted(store.records):
        entry = by_anum.get(anum)
        if entry is None:
            continue
        rec = store.records[anum]
        targets = [rec.smallest.tokens]
        if pairs_per_solution >= 2 and rec.fastest.tokens != rec.smallest.tokens:
            targets.append(rec.fastest.tokens)
        for text in targets:
            tokens = text.split()
            if table is not None and len(table):
                tokens = abstract_replace(tokens, table)
            pairs.append((entry.terms, tokens))
    return pairs


def export_training_pairs(pairs, src_path, tgt_path, max_src_tokens: int = 80) -> int:
    with open(src_path, "w", encoding="utf-8") as src, open(tgt_path, "w", encoding="utf-8") as tgt:
        for terms, tokens in pairs:
            src.write(text_of(render_terms(terms, max_src_tokens)) + "\n")
            tgt.write(text_of(list(tokens)) + "\n")
    return len(pairs)


def import_candidates(path, expander=None) -> tuple[dict[int, list[str]], int]:
    """Read ANUM<TAB>TOKENS lines; undecodable lines are tallied, not fatal."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    pool: dict[int, list[str]] = {}
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].lstrip("A").isdigit():
                dropped += 1
                continue
            anum = int(parts[0].lstrip("A"))
            tokens = parts[1].split()
            if expander is not None:
                try:
                    tokens = expander(tokens)
                except LangError:
                    dropped += 1
                    continue
            pool.setdefault(anum, []).append(text_of(tokens))
    return pool, dropped


def _nonoverlapping_count(tokens: tuple[str, ...], pattern: tuple[str, ...]) -> int:
    count = 0
    i = 0
    plen = len(pattern)
    while i + plen <= len(tokens):
        if tokens[i : i + plen] == pattern:
            count += 1
            i += plen
        else:
            i += 1
    return count


def mine_global_macros(
    store: SolutionStore,
    table: GlobalMacroTable,
    budget: int = 10,
    min_len: int = 4,
    max_len: int = 20,
    min_count: int = 2,
) -> list[int]:
    """Append the most frequent action subsequences to the global table.

    Occurrences are counted with non-overlapping left-to-right matching;
    a sliding-window pass proposes candidates and the leaders are then
    recounted exactly.  Returns the indices of the appended entries.
    """
    programs = [tuple(text.split()) for text in store_programs(store)]
    window_counts: Counter = Counter()
    for toks in programs:
        n = len(toks)
        for length in range(min_len, min(max_len, n) + 1):
            for i in range(n - length + 1):
                window_counts[toks[i : i + length]] += 1

    existing = {tuple(table.expanded_entry(i)) for i in range(len(table))}
    leaders = sorted(
        (pat for pat, c in window_counts.items() if c >= min_count and pat not in existing),
        key=lambda pat: (-window_counts[pat], pat),
    )[: budget * 20]

    exact = []
    for pat in leaders:
        total = sum(_nonoverlapping_count(toks, pat) for toks in programs)
        if total >= min_count:
            exact.append((-total, pat))
    exact.sort()

    appended = []
    for _, pat in exact[:budget]:
        appended.append(table.append(list(pat)))
    return appended


@dataclass
class ModelSpec:
    """One guidance model in the portfolio."""

    name: str  # "full" | "half" | "quarter"
    data_fraction: float = 1.0
    continuous: bool = False


def _select_fraction(pairs, fraction: float, rng: random.Random):
    if fraction >= 1.0:
        return list(pairs)
    k = max(1, int(len(pairs) * fraction))
    idx = sorted(rng.sample(range(len(pairs)), k))
    return [pairs[i] for i in idx]


@dataclass
class LoopConfig:
    seed: int = 0
    jobs: int = 1
    random_count: int = 100_000
    random_max_size: int = 30
    check_mode: str = "hybrid"
    check_mode_switch_iteration: int = -1
    check_mode_late: str = "slow"
    fast_t_call: int = 1000
    fast_n_compr: int = 20
    slow_t_call: int = 100_000
    slow_n_compr: int = 200
    min_promote_depth: int = 4
    beam_width: int = 240
    beam_max_len: int = 140
    per_sequence_cap: int = 240
    ngram_order: int = 4
    ngram_smoothing: float = 0.1
    models: tuple[str, ...] = ("full",)
    continuous: tuple[str, ...] = ()
    pairs_per_solution: int = 2
    src_max_tokens: int = 80
    macro_mode: str = "none"  # none | global | local
    macro_budget: int = 10
    macro_min_len: int = 4
    macro_max_len: int = 20
    macro_min_count: int = 2
    external_model_cmd: str = ""

    def fast_limits(self) -> EvalLimits:
        return EvalLimits(self.fast_t_call, self.fast_n_compr)

    def slow_limits(self) -> EvalLimits:
        return EvalLimits(self.slow_t_call, self.slow_n_compr)

    def mode_for(self, iteration: int) -> CheckMode:
        kind = self.check_mode
        if 0 <= self.check_mode_switch_iteration <= iteration:
            kind = self.check_mode_late
        return CheckMode(kind, self.fast_limits(), self.slow_limits())

    def model_specs(self) -> list[ModelSpec]:
        fractions = {"full": 1.0, "half": 0.5, "quarter": 0.25}
        specs = []
        for name in self.models:
            if name not in fractions:
                raise SynthError(f"unknown model kind {name!r}")
            specs.append(ModelSpec(name, fractions[name], name in self.continuous))
        return specs


@dataclass
class IterationState:
    """Everything the loop carries between iterations."""

    iteration: int
    store: SolutionStore
    table: GlobalMacroTable
    config: LoopConfig
    models: dict[str, NGramGuidance] = field(default_factory=dict)
    last_verify_limits: EvalLimits | None = None


def _iteration_seed(seed: int, iteration: int, salt: int = 0) -> int:
    return (seed * 1_000_003 + iteration) * 7 + salt


def _alphabet_for(cfg: LoopConfig):
    if cfg.macro_mode == "local":
        return MACRO_ALPHABET
    if cfg.macro_mode == "global":
        return GLOBAL_ALPHABET
    return PROGRAM_ALPHABET


def make_expander(cfg: LoopConfig, table: GlobalMacroTable):
    """Macro expansion + decode validation for raw candidate tokens."""

    def expand(tokens: list[str]) -> list[str]:
        if cfg.macro_mode == "local":
            tokens = expand_local_macros(LocalMacroProgram.from_tokens(tokens))
        elif cfg.macro_mode == "global":
            tokens = table.expand(list(tokens))
        if not is_macro_free(tokens):
            raise LangError("expansion left non-operator tokens")
        decode_tokens(tokens)
        return tokens

    return expand


def train_guidance(
    store: SolutionStore,
    corpus,
    cfg: LoopConfig,
    table: GlobalMacroTable,
    previous: dict[str, NGramGuidance],
    iteration: int,
) -> dict[str, NGramGuidance]:
    """Fit the configured model portfolio on the current champions."""
    pairs = training_pairs(
        store,
        corpus,
        cfg.pairs_per_solution,
        table if cfg.macro_mode == "global" else None,
    )
    if not pairs:
        raise EmptyStore("store is empty")
    models: dict[str, NGramGuidance] = {}
    alphabet = _alphabet_for(cfg)
    for spec_index, spec in enumerate(cfg.model_specs()):
        rng = random.Random(_iteration_seed(cfg.seed, iteration, salt=100 + spec_index))
        subset = _select_fraction(pairs, spec.data_fraction, rng)
        model = NGramGuidance(cfg.ngram_order, cfg.ngram_smoothing, alphabet)
        model.train(subset)
        if spec.continuous and spec.name in previous:
            merged = NGramGuidance(cfg.ngram_order, cfg.ngram_smoothing, alphabet)
            merged.merge(previous[spec.name])
            merged.merge(model)
            model = merged
        models[spec.name] = model
    return models


def beam_candidates(models: dict[str, NGramGuidance], corpus, cfg: LoopConfig) -> dict[int, list[str]]:
    """Per-sequence union of every model's beam, deduplicated.

    Beam output depends on the input only through its bucket feature, so
    decode once per (model, bucket) and fan the result out.
    """
    beam_cfg = BeamConfig(cfg.beam_width, cfg.beam_max_len, cfg.per_sequence_cap)
    out: dict[int, list[str]] = {}
    for name in sorted(models):
        model = models[name]
        per_bucket: dict[str, list[str]] = {}
        for entry in corpus:
            bucket = bucket_of(entry.terms)
            got = per_bucket.get(bucket)
            if got is None:
                got = [text for text, _ in beam_generate(model, entry.terms, beam_cfg)]
                per_bucket[bucket] = got
            slot = out.setdefault(entry.anum, [])
            slot.extend(got)
    for anum, texts in out.items():
        out[anum] = list(dict.fromkeys(texts))
    return out


def run_external_model(cfg: LoopConfig, iter_dir: Path, corpus) -> Path | None:
    """Invoke the external guidance subprocess; returns its candidates file.

    The command template gets {train_src} {train_tgt} {src} {out} and
    {iteration} substituted.  A nonzero exit is a diverged model: skipped
    with a warning, never fatal.
    """
    if not cfg.external_model_cmd:
        return None
    src_all = iter_dir / "infer.src"
    with open(src_all, "w", encoding="utf-8") as fh:
        for entry in corpus:
            fh.write(f"A{entry.anum:06d}\t{text_of(render_terms(entry.terms, cfg.src_max_tokens))}\n")
    out_path = iter_dir / "external_candidates.txt"
    cmd = cfg.external_model_cmd.format(
        train_src=iter_dir / "train.src",
        train_tgt=iter_dir / "train.tgt",
        src=src_all,
        out=out_path,
        iteration=iter_dir.name,
    )
    proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
    if proc.returncode != 0:
        print(f"warning: external model failed (exit {proc.returncode}); skipping")
        return None
    return out_path if out_path.exists() else None


def run_iteration(state: IterationState, corpus, trie, out_dir: Path) -> tuple[IterationState, CheckReport]:
    """One search -> check -> learn cycle; writes the iteration directory."""
    cfg = state.config
    iteration = state.iteration
    iter_dir = Path(out_dir) / f"iter_{iteration:04d}"
    iter_dir.mkdir(parents=True, exist_ok=True)

    expander = make_expander(cfg, state.table)
    tagged: dict[int, list[str]] = {}
    models: dict[str, NGramGuidance] = {}

    if len(state.store) == 0:
        pool_raw = random_programs(
            cfg.random_count, cfg.random_max_size, _iteration_seed(cfg.seed, iteration)
        )
        tagged[0] = pool_raw
    else:
        pairs_written = export_training_pairs(
            training_pairs(
                state.store,
                corpus,
                cfg.pairs_per_solution,
                state.table if cfg.macro_mode == "global" else None,
            ),
            iter_dir / "train.src",
            iter_dir / "train.tgt",
            cfg.src_max_tokens,
        )
        if pairs_written and cfg.models:
            models = train_guidance(state.store, corpus, cfg, state.table, state.models, iteration)
            for name in sorted(models):
                models[name].save(iter_dir / f"model_{name}.json")
            tagged = beam_candidates(models, corpus, cfg)
        external = run_external_model(cfg, iter_dir, corpus)
        if external is not None:
            ext_pool, dropped = import_candidates(external)
            for anum, texts in ext_pool.items():
                tagged.setdefault(anum, []).extend(texts)
            if dropped:
                print(f"warning: {dropped} malformed external candidate lines dropped")

    with open(iter_dir / "candidates.txt", "w", encoding="utf-8") as fh:
        for anum in sorted(tagged):
            for text in tagged[anum]:
                fh.write(f"A{anum:06d}\t{text}\n")

    # Expand macros, validate, deduplicate across the whole pool.
    pool: dict[str, None] = {}
    invalid = 0
    for anum in sorted(tagged):
        for text in tagged[anum]:
            try:
                pool.setdefault(text_of(expander(text.split())), None)
            except LangError:
                invalid += 1

    mode = cfg.mode_for(iteration)
    if state.last_verify_limits is not None and mode.verify_limits != state.last_verify_limits:
        _remeasure_speeds(state.store, corpus, mode.verify_limits)

    report = check_pool(
        list(pool),
        trie,
        mode,
        state.store,
        jobs=cfg.jobs,
        iteration=iteration,
        min_promote_depth=cfg.min_promote_depth,
    )
    report.undecodable += invalid

    if cfg.macro_mode == "global":
        mine_global_macros(
            state.store,
            state.table,
            cfg.macro_budget,
            cfg.macro_min_len,
            cfg.macro_max_len,
            cfg.macro_min_count,
        )
    state.table.save(iter_dir / "macros.txt")
    state.store.save_tsv(iter_dir / "solutions.tsv")
    _write_first_solved(state.store, iter_dir / "first_solved.tsv")
    _write_report(report, iter_dir / "report.json")

    next_state = IterationState(
        iteration=iteration + 1,
        store=state.store,
        table=state.table,
        config=cfg,
        models=models or state.models,
        last_verify_limits=mode.verify_limits,
    )
    return next_state, report


def _remeasure_speeds(store: SolutionStore, corpus, limits: EvalLimits) -> None:
    by_anum = {entry.anum: entry for entry in corpus}
    for anum in sorted(store.records):
        entry = by_anum.get(anum)
        if entry is None:
            continue
        rec = store.records[anum]
        for kind in ("smallest", "fastest"):
            champ = getattr(rec, kind)
            try:
                speed = measure_speed(decode_tokens(champ.tokens.split()), entry, limits)
            except NotASolution:
                continue
            setattr(rec, kind, replace(champ, speed=speed))


def _write_first_solved(store: SolutionStore, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for anum in sorted(store.records):
            fh.write(f"A{anum:06d}\t{store.records[anum].first_iteration}\n")


def _write_report(report: CheckReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_state(out_dir, iteration: int, cfg: LoopConfig) -> IterationState:
    """Reconstruct the loop state right after a completed iteration.

    Reads that iteration's snapshot files; re-running the next iteration
    from the result reproduces the original run bit for bit.
    """
    it_dir = Path(out_dir) / f"iter_{iteration:04d}"
    store = SolutionStore.load_tsv(it_dir / "solutions.tsv")
    first = it_dir / "first_solved.tsv"
    if first.exists():
        with open(first, encoding="utf-8") as fh:
            for line in fh:
                anum_s, iter_s = line.split("\t")
                rec = store.records.get(int(anum_s.lstrip("A")))
                if rec is not None:
                    rec.first_iteration = int(iter_s)
    store.journal.clear()  # loading a snapshot is not an update event
    table = GlobalMacroTable.load(it_dir / "macros.txt")
    models = {
        path.stem.removeprefix("model_"): NGramGuidance.load(path)
        for path in sorted(it_dir.glob("model_*.json"))
    }
    return IterationState(
        iteration=iteration + 1,
        store=store,
        table=table,
        config=cfg,
        models=models,
        last_verify_limits=cfg.mode_for(iteration).verify_limits,
    )


def append_journal(store: SolutionStore, path, iteration: int, clear: bool = True) -> None:
    """Flush accumulated store updates to the append-only journal.

    A marker line closes every iteration, so a replay sees iterations that
    changed nothing.
    """
    with open(path, "a", encoding="utf-8") as fh:
        for it, anum, kind, champ in store.journal:
            fh.write(f"{it}\tA{anum:06d}\t{kind}\t{champ.size}\t{champ.speed}\t{champ.tokens}\n")
        fh.write(f"# end-iteration {iteration}\n")
    if clear:
        store.journal.clear()


def run_loop(corpus, trie, cfg: LoopConfig, iterations: int, out_dir) -> list[CheckReport]:
    """Run the whole cycle for a number of iterations, journaling as it goes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    journal = out_dir / "journal.tsv"
    if journal.exists():
        journal.unlink()
    state = IterationState(0, SolutionStore(), GlobalMacroTable(), cfg)
    reports = []
    for i in range(iterations):
        state, report = run_iteration(state, corpus, trie, out_dir)
        append_journal(state.store, out_dir / "journal.tsv", iteration=i)
        reports.append(report)
    return reports
