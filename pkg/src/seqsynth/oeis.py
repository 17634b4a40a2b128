"""OEIS corpus ingestion and the sequence trie used for hindsight checking.

The ``stripped`` bulk file maps A-numbers to stored terms, one line each:

    A000045 ,0,1,1,2,3,5,8,

Checking a candidate against the whole corpus is a single walk down a
trie whose edges are labeled by integers; every node remembers the
A-numbers whose full stored term list ends exactly there, so sequences
that are prefixes of others are credited mid-path.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class OeisError(Exception):
    pass


class MalformedLine(OeisError):
    pass


class DuplicateANumber(OeisError):
    pass


class NonContiguousIndices(OeisError):
    pass


@dataclass(frozen=True, slots=True)
class SequenceEntry:
    anum: int
    terms: tuple[int, ...]


_STRIPPED_RE = re.compile(r"^A(\d+)\s+,(.*),\s*$")


def parse_stripped_line(line: str, lineno: int = 0) -> SequenceEntry:
    m = _STRIPPED_RE.match(line)
    if not m:
        raise MalformedLine(f"line {lineno}: not a stripped-format line: {line[:60]!r}")
    try:
        terms = tuple(int(t) for t in m.group(2).split(","))
    except ValueError as err:
        raise MalformedLine(f"line {lineno}: bad integer: {err}") from err
    if not terms:
        raise MalformedLine(f"line {lineno}: no terms")
    return SequenceEntry(anum=int(m.group(1)), terms=terms)


def load_stripped(path, max_terms: int = 0) -> list[SequenceEntry]:
    """Parse a stripped file; '#' lines are comments.  max_terms=0 keeps all."""
    entries: list[SequenceEntry] = []
    seen: set[int] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            entry = parse_stripped_line(line, lineno)
            if entry.anum in seen:
                raise DuplicateANumber(f"line {lineno}: A{entry.anum} appears twice")
            seen.add(entry.anum)
            if max_terms and len(entry.terms) > max_terms:
                entry = SequenceEntry(entry.anum, entry.terms[:max_terms])
            entries.append(entry)
    return entries


def save_stripped(entries, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(f"A{e.anum:06d} ," + ",".join(str(t) for t in e.terms) + ",\n")


class TrieNode:
    __slots__ = ("children", "ends")

    def __init__(self):
        self.children: dict[int, TrieNode] = {}
        self.ends: tuple[int, ...] = ()


@dataclass
class SequenceTrie:
    root: TrieNode = field(default_factory=TrieNode)
    size: int = 0  # number of term lists inserted
    node_count: int = 1

    def insert(self, entry: SequenceEntry) -> None:
        node = self.root
        for t in entry.terms:
            child = node.children.get(t)
            if child is None:
                child = TrieNode()
                node.children[t] = child
                self.node_count += 1
            node = child
        node.ends = node.ends + (entry.anum,)
        self.size += 1


def build_trie(corpus) -> SequenceTrie:
    trie = SequenceTrie()
    for entry in corpus:
        trie.insert(entry)
    return trie


STOP_LEAF = "leaf"
STOP_BRANCH = "no-branch"
STOP_PRODUCER = "producer"


@dataclass(slots=True)
class MatchReport:
    solved: list[int]  # A-numbers, in the order their end nodes were passed
    depth: int
    stop: str
    solved_depths: list[int]  # depth at which each solved A-number completed
    node: TrieNode | None  # node where the walk stopped


class TrieWalker:
    """Consumer for run_sequence_program that walks the trie edge by edge."""

    __slots__ = ("node", "depth", "solved", "solved_depths", "stop")

    def __init__(self, trie: SequenceTrie):
        self.node = trie.root
        self.depth = 0
        self.solved: list[int] = []
        self.solved_depths: list[int] = []
        self.stop = STOP_PRODUCER

    def __call__(self, term: int) -> bool:
        child = self.node.children.get(term)
        if child is None:
            self.stop = STOP_BRANCH
            return False
        self.node = child
        self.depth += 1
        for anum in child.ends:
            self.solved.append(anum)
            self.solved_depths.append(self.depth)
        if not child.children:
            self.stop = STOP_LEAF
            return False
        return True

    def report(self) -> MatchReport:
        return MatchReport(
            solved=self.solved,
            depth=self.depth,
            stop=self.stop,
            solved_depths=self.solved_depths,
            node=self.node,
        )


def trie_match(trie: SequenceTrie, producer) -> MatchReport:
    """Drive a lazy term producer through the trie.

    ``producer(consumer)`` must call ``consumer(term)`` for each term until
    it returns False or the producer itself gives up.
    """
    walker = TrieWalker(trie)
    producer(walker)
    return walker.report()


@dataclass(frozen=True, slots=True)
class BFile:
    anum: int
    pairs: tuple[tuple[int, int], ...]

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(v for _, v in self.pairs)


_BFILE_ANUM_RE = re.compile(r"b(\d+)\.txt$")


def load_bfile(path, anum: int | None = None) -> BFile:
    """Parse a b-file of "index value" lines; '#' comments allowed."""
    if anum is None:
        m = _BFILE_ANUM_RE.search(str(path))
        if not m:
            raise MalformedLine(f"cannot infer A-number from path {path!r}")
        anum = int(m.group(1))
    pairs: list[tuple[int, int]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise MalformedLine(f"line {lineno}: expected 'index value': {line[:40]!r}")
            try:
                idx, val = int(parts[0]), int(parts[1])
            except ValueError as err:
                raise MalformedLine(f"line {lineno}: bad integer: {err}") from err
            if pairs and idx != pairs[-1][0] + 1:
                raise NonContiguousIndices(
                    f"line {lineno}: index {idx} after {pairs[-1][0]}"
                )
            pairs.append((idx, val))
    if not pairs:
        raise MalformedLine(f"{path}: no data lines")
    return BFile(anum=anum, pairs=tuple(pairs))


def extension_terms(entry: SequenceEntry, bfile: BFile) -> tuple[int, ...]:
    """Terms the b-file adds past the stored ones.

    B-files normally restate the stored terms from their own offset; the
    extension starts right after the stored prefix, and the overlap must
    agree with the stored terms.
    """
    values = bfile.values
    k = len(entry.terms)
    overlap = values[: min(k, len(values))]
    if overlap != entry.terms[: len(overlap)]:
        raise OeisError(f"A{entry.anum}: b-file values disagree with stored terms")
    return values[k:]
