"""Pool checking against the whole corpus and the smallest/fastest store.

A candidate is run once and walked through the sequence trie; every
A-number whose stored terms end on the walked path is solved by it.  Per
sequence only two champions are kept: the smallest program (by token
count) and the fastest (by total abstract time over the stored terms).
Replacement is strict improvement with a lexicographic token tie-break,
which makes store merges commutative, so parallel checking is
deterministic regardless of worker count or chunking.

The hybrid mode runs the fast check first, then re-runs under slow limits
only the smallest candidate per distinct prefix among those that aborted
on resources mid-walk.
"""

from __future__ import annotations

import multiprocessing
import time
from dataclasses import dataclass, field, replace

from .evaluator import (
    EvalLimits,
    FAST_LIMITS,
    MAGNITUDE,
    RESOURCE_ABORTS,
    SLOW_LIMITS,
    run_sequence_program,
    take_terms,
)
from .lang import LangError, decode_tokens
from .oeis import SequenceTrie, TrieWalker


class CheckerError(Exception):
    pass


class NotASolution(CheckerError):
    pass


@dataclass(frozen=True, slots=True)
class CheckMode:
    kind: str  # "fast" | "slow" | "hybrid"
    fast_limits: EvalLimits = FAST_LIMITS
    slow_limits: EvalLimits = SLOW_LIMITS

    def __post_init__(self):
        if self.kind not in ("fast", "slow", "hybrid"):
            raise ValueError(f"unknown check mode {self.kind!r}")

    @property
    def verify_limits(self) -> EvalLimits:
        return self.fast_limits if self.kind == "fast" else self.slow_limits


@dataclass(frozen=True, slots=True)
class Champion:
    tokens: str
    size: int
    speed: int

    def key_smallest(self):
        return (self.size, self.speed, self.tokens)

    def key_fastest(self):
        return (self.speed, self.size, self.tokens)


@dataclass(slots=True)
class SolutionRecord:
    anum: int
    smallest: Champion
    fastest: Champion
    first_iteration: int


class SolutionStore:
    """Per-sequence smallest and fastest champions; never loses a solve."""

    def __init__(self):
        self.records: dict[int, SolutionRecord] = {}
        self.journal: list[tuple[int, int, str, Champion]] = []

    def __len__(self):
        return len(self.records)

    def __contains__(self, anum: int):
        return anum in self.records

    def update(self, anum: int, tokens: str, size: int, speed: int, iteration: int = 0):
        """Offer a verified solution; returns (new, better_small, better_fast)."""
        cand = Champion(tokens=tokens, size=size, speed=speed)
        rec = self.records.get(anum)
        if rec is None:
            self.records[anum] = SolutionRecord(anum, cand, cand, iteration)
            self.journal.append((iteration, anum, "smallest", cand))
            self.journal.append((iteration, anum, "fastest", cand))
            return True, False, False
        better_small = cand.key_smallest() < rec.smallest.key_smallest()
        better_fast = cand.key_fastest() < rec.fastest.key_fastest()
        if better_small:
            rec.smallest = cand
            self.journal.append((iteration, anum, "smallest", cand))
        if better_fast:
            rec.fastest = cand
            self.journal.append((iteration, anum, "fastest", cand))
        return False, better_small, better_fast

    def merge(self, other: "SolutionStore") -> None:
        for rec in other.records.values():
            for champ in (rec.smallest, rec.fastest):
                self.update(rec.anum, champ.tokens, champ.size, champ.speed, rec.first_iteration)
            mine = self.records[rec.anum]
            mine.first_iteration = min(mine.first_iteration, rec.first_iteration)

    def snapshot(self) -> "SolutionStore":
        clone = SolutionStore()
        for anum, rec in self.records.items():
            clone.records[anum] = replace(rec)
        return clone

    def save_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for anum in sorted(self.records):
                rec = self.records[anum]
                for kind, champ in (("smallest", rec.smallest), ("fastest", rec.fastest)):
                    fh.write(f"A{anum:06d}\t{champ.size}\t{champ.speed}\t{kind}\t{champ.tokens}\n")

    @classmethod
    def load_tsv(cls, path) -> "SolutionStore":
        store = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 5 or not parts[0].startswith("A"):
                    raise CheckerError(f"{path}:{lineno}: bad store line")
                anum, size, speed, kind, tokens = parts
                champ = Champion(tokens=tokens, size=int(size), speed=int(speed))
                rec = store.records.get(int(anum[1:]))
                if rec is None:
                    rec = SolutionRecord(int(anum[1:]), champ, champ, 0)
                    store.records[rec.anum] = rec
                if kind == "smallest":
                    rec.smallest = champ
                elif kind == "fastest":
                    rec.fastest = champ
                else:
                    raise CheckerError(f"{path}:{lineno}: unknown kind {kind!r}")
        return store


def update_solutions(store: SolutionStore, anum, tokens, size, speed, iteration=0):
    return store.update(anum, tokens, size, speed, iteration)


@dataclass(slots=True)
class CheckReport:
    checked: int = 0
    unique: int = 0
    undecodable: int = 0
    new_solutions: int = 0
    improved_smallest: int = 0
    improved_fastest: int = 0
    own_solutions: int = 0  # distinct sequences covered by this pool
    total_solutions: int = 0  # store size after the pool
    aborts: dict = field(default_factory=dict)
    promoted: int = 0  # hybrid only: candidates re-run under slow limits
    wall_time: float = 0.0  # informational; never serialized

    def as_dict(self) -> dict:
        return {
            "checked": self.checked,
            "unique": self.unique,
            "undecodable": self.undecodable,
            "new_solutions": self.new_solutions,
            "improved_smallest": self.improved_smallest,
            "improved_fastest": self.improved_fastest,
            "own_solutions": self.own_solutions,
            "total_solutions": self.total_solutions,
            "aborts": dict(sorted(self.aborts.items())),
            "promoted": self.promoted,
        }


@dataclass(slots=True)
class _CandidateResult:
    tokens: str
    size: int
    decodable: bool
    solved: list  # [(anum, speed)]
    abort: str | None
    prefix: tuple | None  # terms walked, when eligible for hybrid promotion


# Worker context is inherited through fork; only candidate chunks travel
# through pickling.
_WORKER: dict = {}


def _init_worker(trie, limits, min_depth):
    _WORKER["trie"] = trie
    _WORKER["limits"] = limits
    _WORKER["min_depth"] = min_depth


def _check_candidate(tokens_text: str, trie: SequenceTrie, limits: EvalLimits, min_depth: int) -> _CandidateResult:
    tokens = tokens_text.split()
    try:
        e = decode_tokens(tokens)
    except LangError:
        return _CandidateResult(tokens_text, len(tokens), False, [], None, None)
    walker = TrieWalker(trie)
    path: list[int] = []

    def consumer(term: int) -> bool:
        keep = walker(term)
        if walker.depth > len(path):  # the edge was taken
            path.append(term)
        return keep

    run = run_sequence_program(e, limits, consumer)
    solved = [
        (anum, run.speed_at(depth))
        for anum, depth in zip(walker.solved, walker.solved_depths)
    ]
    abort = run.reason if run.reason != "consumer" else None
    prefix = None
    # Depth-0 stops never qualify: they generated no prefix at all.
    if abort in RESOURCE_ABORTS and walker.depth >= max(1, min_depth):
        prefix = tuple(path)
    return _CandidateResult(tokens_text, len(tokens), True, solved, abort, prefix)


def _check_chunk(chunk: list[str]) -> list[_CandidateResult]:
    trie = _WORKER["trie"]
    limits = _WORKER["limits"]
    min_depth = _WORKER["min_depth"]
    return [_check_candidate(t, trie, limits, min_depth) for t in chunk]


def _run_pass(
    candidates: list[str],
    trie: SequenceTrie,
    limits: EvalLimits,
    min_depth: int,
    jobs: int,
) -> list[_CandidateResult]:
    if jobs <= 1 or len(candidates) < 64:
        _init_worker(trie, limits, min_depth)
        return _check_chunk(candidates)
    ctx = multiprocessing.get_context("fork")
    _init_worker(trie, limits, min_depth)
    chunk_size = max(16, len(candidates) // (jobs * 8))
    chunks = [candidates[i : i + chunk_size] for i in range(0, len(candidates), chunk_size)]
    with ctx.Pool(processes=jobs) as pool:
        results: list[_CandidateResult] = []
        for part in pool.imap(_check_chunk, chunks):
            results.extend(part)
    return results


def check_pool(
    pool,
    trie: SequenceTrie,
    mode: CheckMode,
    store: SolutionStore,
    *,
    jobs: int = 1,
    iteration: int = 0,
    min_promote_depth: int = 4,
) -> CheckReport:
    """Check candidate token strings against every sequence at once."""
    t0 = time.monotonic()
    report = CheckReport()
    pool = list(pool)
    report.checked = len(pool)
    unique = list(dict.fromkeys(pool))
    report.unique = len(unique)
    before = len(store)
    solved_now: set[int] = set()

    def absorb(results: list[_CandidateResult]):
        for res in results:
            if not res.decodable:
                report.undecodable += 1
                continue
            if res.abort:
                report.aborts[res.abort] = report.aborts.get(res.abort, 0) + 1
            for anum, speed in res.solved:
                solved_now.add(anum)
                new, bs, bf = store.update(anum, res.tokens, res.size, speed, iteration)
                if not new:
                    report.improved_smallest += bs
                    report.improved_fastest += bf
        return results

    first_limits = mode.slow_limits if mode.kind == "slow" else mode.fast_limits
    results = _run_pass(unique, trie, first_limits, min_promote_depth, jobs)
    absorb(results)

    if mode.kind == "hybrid":
        # Smallest candidate per distinct reached prefix goes to the slow pass.
        per_prefix: dict[tuple, tuple[tuple, str]] = {}
        for res in results:
            if res.prefix is None:
                continue
            key = (res.size, res.tokens)
            held = per_prefix.get(res.prefix)
            if held is None or key < held[0]:
                per_prefix[res.prefix] = (key, res.tokens)
        promoted = sorted({tokens for _, tokens in per_prefix.values()})
        report.promoted = len(promoted)
        if promoted:
            absorb(_run_pass(promoted, trie, mode.slow_limits, min_promote_depth, jobs))

    report.own_solutions = len(solved_now)
    report.total_solutions = len(store)
    report.new_solutions = len(store) - before
    report.wall_time = time.monotonic() - t0
    return report


def measure_speed(e, entry, limits: EvalLimits) -> int:
    """Deterministic total abstract time to generate the entry's stored terms."""
    terms, run = take_terms(e, limits, len(entry.terms))
    if tuple(terms) != tuple(entry.terms):
        raise NotASolution(f"program does not generate A{entry.anum}")
    return run.speed_at(len(entry.terms))


GENERALIZES = "generalizes"
MISMATCH = "mismatch"
TIMEOUT_CLASS = "timeout"


@dataclass(slots=True)
class GeneralizationReport:
    per_anum: dict  # anum -> {"smallest": class, "fastest": class}
    counts: dict  # kind -> {class: count}

    def percentage(self, kind: str) -> float | None:
        c = self.counts[kind]
        done = c[GENERALIZES] + c[MISMATCH]
        if done == 0:
            return None
        return 100.0 * c[GENERALIZES] / done


def classify_extension(e, stored: tuple[int, ...], ext: tuple[int, ...], limits: EvalLimits) -> str:
    want = len(stored) + len(ext)
    terms, run = take_terms(e, limits, want)
    if len(terms) < want:
        resource = run.reason in RESOURCE_ABORTS or run.reason == MAGNITUDE
        return TIMEOUT_CLASS if resource else MISMATCH
    return GENERALIZES if tuple(terms) == stored + ext else MISMATCH


def generalization_check(store: SolutionStore, corpus, bfiles, limits: EvalLimits = SLOW_LIMITS) -> GeneralizationReport:
    """Classify stored champions on the b-file extension terms.

    ``bfiles`` maps anum -> extension term tuple (already aligned past the
    stored terms).  Programs aborting on resources are counted apart and
    excluded from the generalization percentage.
    """
    by_anum = {entry.anum: entry for entry in corpus}
    per_anum: dict[int, dict[str, str]] = {}
    counts = {
        "smallest": {GENERALIZES: 0, MISMATCH: 0, TIMEOUT_CLASS: 0},
        "fastest": {GENERALIZES: 0, MISMATCH: 0, TIMEOUT_CLASS: 0},
    }
    for anum in sorted(store.records):
        ext = bfiles.get(anum)
        entry = by_anum.get(anum)
        if ext is None or entry is None:
            continue
        rec = store.records[anum]
        cell = {}
        for kind, champ in (("smallest", rec.smallest), ("fastest", rec.fastest)):
            e = decode_tokens(champ.tokens.split())
            verdict = classify_extension(e, tuple(entry.terms), tuple(ext), limits)
            cell[kind] = verdict
            counts[kind][verdict] += 1
        per_anum[anum] = cell
    return GeneralizationReport(per_anum=per_anum, counts=counts)
