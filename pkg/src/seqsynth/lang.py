"""Abstract syntax, token codec and macro machinery for the sequence DSL.

The language has 14 operators.  In the canonical order

    0 1 2 + - * div mod cond loop x y compr loop2

they map to the capital letters A..N, which is the alphabet programs are
written in on the wire.  The linear form is prefix notation with the
arguments of every node written in reversed order, so no parentheses are
needed: ``loop(x*y, x, 1)`` becomes ``J B K F L K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

ZERO, ONE, TWO, PLUS, MINUS, TIMES, DIV, MOD, COND, LOOP, VARX, VARY, COMPR, LOOP2 = range(14)

ARITY = (0, 0, 0, 2, 2, 2, 2, 2, 3, 3, 0, 0, 2, 5)
OP_LETTERS = "ABCDEFGHIJKLMN"
OP_NAMES = ("0", "1", "2", "+", "-", "*", "div", "mod", "cond", "loop", "x", "y", "compr", "loop2")
LETTER_TO_OP = {ch: i for i, ch in enumerate(OP_LETTERS)}

# Tokens beyond the 14 operator letters: ten local-macro names, a segment
# separator for local definitions, ten digits and a terminator for global
# references.  The counts are fixed by the design; the glyphs are ours and
# are pinned in doc/formats.md.
LOCAL_MACRO_LETTERS = "OPQRSTUVWX"
LOCAL_SEPARATOR = "|"
DIGIT_TOKENS = "0123456789"
GLOBAL_SEPARATOR = "#"

NULLARY_OPS = tuple(op for op in range(14) if ARITY[op] == 0)
LOOPLIKE_OPS = (LOOP, LOOP2, COMPR)


class LangError(Exception):
    """Base class for codec and macro errors."""


class TruncatedProgram(LangError):
    pass


class TrailingTokens(LangError):
    pass


class UnknownToken(LangError):
    pass


class UndefinedMacro(LangError):
    pass


class ForwardReference(LangError):
    pass


class ExpansionNotAProgram(LangError):
    pass


class EmptyMacroDefinition(LangError):
    pass


class IndexOutOfRange(LangError):
    pass


class MalformedReference(LangError):
    pass


@dataclass(frozen=True, slots=True)
class Expr:
    """Arity-correct expression tree; the unit of synthesis and evaluation."""

    op: int
    args: tuple["Expr", ...] = ()

    def __post_init__(self):
        if len(self.args) != ARITY[self.op]:
            raise ValueError(
                f"operator {OP_NAMES[self.op]} takes {ARITY[self.op]} args, got {len(self.args)}"
            )

    def __repr__(self):
        from .notation import to_symbolic

        return f"Expr({to_symbolic(self)!r})"


# Leaves are shared: programs contain vastly more of these than anything else.
E_ZERO = Expr(ZERO)
E_ONE = Expr(ONE)
E_TWO = Expr(TWO)
E_X = Expr(VARX)
E_Y = Expr(VARY)
_LEAVES = {ZERO: E_ZERO, ONE: E_ONE, TWO: E_TWO, VARX: E_X, VARY: E_Y}


def expr(op: int, *args: Expr) -> Expr:
    if not args and op in _LEAVES:
        return _LEAVES[op]
    return Expr(op, args)


def program_size(e: Expr) -> int:
    """Number of nodes, which equals the token count of the linear form."""
    size = 0
    stack = [e]
    while stack:
        node = stack.pop()
        size += 1
        stack.extend(node.args)
    return size


def tokens_of(text: str) -> list[str]:
    return text.split()


def text_of(tokens: list[str]) -> str:
    return " ".join(tokens)


def encode_tokens(e: Expr) -> list[str]:
    """Linear form: each operator followed by its arguments reversed."""
    out: list[str] = []
    stack = [e]
    while stack:
        node = stack.pop()
        out.append(OP_LETTERS[node.op])
        # Children are pushed in argument order so they pop reversed,
        # which is exactly the wire order.
        stack.extend(node.args)
    return out


def decode_tokens(tokens: list[str]) -> Expr:
    """Inverse of encode_tokens; consumes the whole token list or fails."""
    pos = 0
    n = len(tokens)

    def parse() -> Expr:
        nonlocal pos
        if pos >= n:
            raise TruncatedProgram(f"tokens exhausted at position {pos}")
        tok = tokens[pos]
        op = LETTER_TO_OP.get(tok)
        if op is None:
            raise UnknownToken(f"unknown token {tok!r} at position {pos}")
        pos += 1
        arity = ARITY[op]
        if arity == 0:
            return _LEAVES[op]
        rev = tuple(parse() for _ in range(arity))
        return Expr(op, rev[::-1])

    e = parse()
    if pos != n:
        raise TrailingTokens(f"{n - pos} tokens remain after a complete program")
    return e


def is_macro_free(tokens: list[str]) -> bool:
    return all(t in LETTER_TO_OP for t in tokens)


@dataclass(frozen=True)
class LocalMacroProgram:
    """A program with up to ten local definitions spliced in before checking.

    The wire form is ``def0 | def1 | ... | body``; definition i is named by
    the letter O..X at index i and may only use lower-indexed names.  A
    definition is an arbitrary token sequence, not necessarily a well-formed
    program on its own; only the fully expanded body must decode.
    """

    definitions: tuple[tuple[str, ...], ...]
    body: tuple[str, ...]

    def __post_init__(self):
        if len(self.definitions) > len(LOCAL_MACRO_LETTERS):
            raise LangError(f"at most {len(LOCAL_MACRO_LETTERS)} local definitions")
        for i, d in enumerate(self.definitions):
            if not d:
                raise EmptyMacroDefinition(f"definition {i} is empty")
            for t in d:
                if t in LOCAL_MACRO_LETTERS and LOCAL_MACRO_LETTERS.index(t) >= i:
                    raise ForwardReference(
                        f"definition {i} references macro {t!r} with index >= {i}"
                    )

    @classmethod
    def from_tokens(cls, tokens: list[str]) -> "LocalMacroProgram":
        segments: list[list[str]] = [[]]
        for t in tokens:
            if t == LOCAL_SEPARATOR:
                segments.append([])
            else:
                segments.append(segments.pop() + [t])
        return cls(tuple(tuple(s) for s in segments[:-1]), tuple(segments[-1]))

    def to_tokens(self) -> list[str]:
        out: list[str] = []
        for d in self.definitions:
            out.extend(d)
            out.append(LOCAL_SEPARATOR)
        out.extend(self.body)
        return out


def expand_local_macros(p: LocalMacroProgram) -> list[str]:
    """Token-level splice of local definitions; result must decode."""
    expanded_defs: list[list[str]] = []
    for i, d in enumerate(p.definitions):
        out: list[str] = []
        for t in d:
            if t in LOCAL_MACRO_LETTERS:
                out.extend(expanded_defs[LOCAL_MACRO_LETTERS.index(t)])
            else:
                out.append(t)
        if not out:
            raise EmptyMacroDefinition(f"definition {i} expands to nothing")
        expanded_defs.append(out)

    body: list[str] = []
    for t in p.body:
        if t in LOCAL_MACRO_LETTERS:
            idx = LOCAL_MACRO_LETTERS.index(t)
            if idx >= len(expanded_defs):
                raise UndefinedMacro(f"macro {t!r} has no definition")
            body.extend(expanded_defs[idx])
        else:
            body.append(t)

    try:
        decode_tokens(body)
    except LangError as err:
        raise ExpansionNotAProgram(f"expanded body does not decode: {err}") from err
    return body


@dataclass
class GlobalMacroTable:
    """Append-only array of token sequences shared across all programs.

    Programs reference entry i by writing its decimal digits as tokens,
    terminated by the reference separator.  Entry i may itself reference
    entries with lower indices.
    """

    entries: list[tuple[str, ...]] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def append(self, tokens: list[str]) -> int:
        idx = len(self.entries)
        for t in tokens:
            if t in DIGIT_TOKENS or t == GLOBAL_SEPARATOR:
                self._check_reference_tokens(tokens, idx)
                break
        if not self.expand([*tokens]):
            raise EmptyMacroDefinition(f"entry {idx} expands to nothing")
        self.entries.append(tuple(tokens))
        return idx

    def _check_reference_tokens(self, tokens: list[str], limit: int):
        i = 0
        while i < len(tokens):
            if tokens[i] in DIGIT_TOKENS:
                j = i
                while j < len(tokens) and tokens[j] in DIGIT_TOKENS:
                    j += 1
                if j >= len(tokens) or tokens[j] != GLOBAL_SEPARATOR:
                    raise MalformedReference("digit run without separator")
                ref = int("".join(tokens[i:j]))
                if ref >= limit:
                    raise ForwardReference(f"entry {limit} references entry {ref}")
                i = j + 1
            elif tokens[i] == GLOBAL_SEPARATOR:
                raise MalformedReference("separator without digits")
            else:
                i += 1

    def expand(self, tokens: list[str]) -> list[str]:
        return expand_global_macros(tokens, self)

    def expanded_entry(self, idx: int) -> list[str]:
        if idx >= len(self.entries):
            raise IndexOutOfRange(f"no entry {idx} in a table of {len(self.entries)}")
        return self.expand(list(self.entries[idx]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.entries:
                fh.write(text_of(list(entry)) + "\n")

    @classmethod
    def load(cls, path) -> "GlobalMacroTable":
        table = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    table.append(tokens_of(line))
        return table


def expand_global_macros(tokens: list[str], table: GlobalMacroTable) -> list[str]:
    """Replace every decimal reference by its (recursively expanded) entry."""
    out: list[str] = []
    i = 0
    n = len(tokens)
    while i < n:
        t = tokens[i]
        if t in DIGIT_TOKENS:
            j = i
            while j < n and tokens[j] in DIGIT_TOKENS:
                j += 1
            if j >= n or tokens[j] != GLOBAL_SEPARATOR:
                raise MalformedReference(f"digit run at position {i} lacks a separator")
            idx = int("".join(tokens[i:j]))
            if idx >= len(table.entries):
                raise IndexOutOfRange(f"reference to entry {idx}, table has {len(table.entries)}")
            out.extend(expand_global_macros(list(table.entries[idx]), table))
            i = j + 1
        elif t == GLOBAL_SEPARATOR:
            raise MalformedReference(f"separator without digits at position {i}")
        else:
            out.append(t)
            i += 1
    return out


def _reference_tokens(idx: int) -> list[str]:
    return list(str(idx)) + [GLOBAL_SEPARATOR]


def abstract_replace(tokens: list[str], table: GlobalMacroTable) -> list[str]:
    """Greedy lowest-index-first compression of macro occurrences.

    Scans left to right; after a splice scanning resumes past the inserted
    reference, so replaced regions are never re-matched for the same index.
    expand_global_macros is an exact inverse.
    """
    current = list(tokens)
    for idx in range(len(table.entries)):
        pattern = table.expanded_entry(idx)
        plen = len(pattern)
        if plen == 0:
            continue
        ref = _reference_tokens(idx)
        out: list[str] = []
        i = 0
        n = len(current)
        while i < n:
            if current[i : i + plen] == pattern:
                out.extend(ref)
                i += plen
            else:
                out.append(current[i])
                i += 1
        current = out
    return current
