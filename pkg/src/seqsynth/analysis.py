"""Statistics over the solution store's history.

Works from per-iteration snapshots (solutions.tsv files) or, as an
independent second route, from the append-only journal; the two must
agree.  Outputs are plain CSV with documented headers plus optional
gnuplot scripts.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .checker import Champion, SolutionRecord, SolutionStore
from .lang import (
    COND,
    DIV,
    MINUS,
    MOD,
    ONE,
    PLUS,
    TIMES,
    TWO,
    VARX,
    VARY,
    ZERO,
    Expr,
    decode_tokens,
)


@dataclass(frozen=True, slots=True)
class HistorySnapshot:
    iteration: int
    store: SolutionStore


def load_history(run_dir) -> list[HistorySnapshot]:
    """Snapshots from a loop output directory, ordered by iteration."""
    run_dir = Path(run_dir)
    snaps = []
    for sub in sorted(run_dir.glob("iter_*")):
        path = sub / "solutions.tsv"
        if path.exists():
            snaps.append(HistorySnapshot(int(sub.name.split("_")[1]), SolutionStore.load_tsv(path)))
    return snaps


def history_from_journal(path) -> list[HistorySnapshot]:
    """Rebuild per-iteration stores by replaying the journal.

    Each iteration ends with an ``# end-iteration N`` marker, so snapshots
    exist even for iterations that changed nothing.
    """
    snaps: list[HistorySnapshot] = []
    store = SolutionStore()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# end-iteration "):
                snaps.append(HistorySnapshot(int(line.rsplit(" ", 1)[1]), store.snapshot()))
                continue
            iter_s, anum_s, kind, size_s, speed_s, tokens = line.split("\t")
            anum = int(anum_s.lstrip("A"))
            champ = Champion(tokens, int(size_s), int(speed_s))
            rec = store.records.get(anum)
            if rec is None:
                store.records[anum] = SolutionRecord(anum, champ, champ, int(iter_s))
            elif kind == "smallest":
                rec.smallest = champ
            else:
                rec.fastest = champ
    return snaps


def evolution_curves(history) -> list[tuple[int, float, float]]:
    """Per iteration: mean size of smallest and mean speed of fastest."""
    rows = []
    for snap in history:
        recs = snap.store.records.values()
        n = len(snap.store)
        if n == 0:
            rows.append((snap.iteration, 0.0, 0.0))
            continue
        avg_size = sum(r.smallest.size for r in recs) / n
        avg_speed = sum(r.fastest.speed for r in recs) / n
        rows.append((snap.iteration, avg_size, avg_speed))
    return rows


def reduction_after_discovery(history, horizon: int = 100) -> list[tuple[int, float, float]]:
    """Mean size/speed ratios relative to each sequence's first solution.

    Iteration 0 of each sequence is the snapshot where it first appears;
    ratios are averaged over all sequences that have data at offset t,
    so the t=0 row is exactly (1.0, 1.0).
    """
    first_at: dict[int, int] = {}
    base: dict[int, tuple[int, int]] = {}
    for pos, snap in enumerate(history):
        for anum, rec in snap.store.records.items():
            if anum not in first_at:
                first_at[anum] = pos
                base[anum] = (rec.smallest.size, rec.fastest.speed)
    rows = []
    for t in range(horizon + 1):
        size_ratios = []
        speed_ratios = []
        for anum, pos in first_at.items():
            if pos + t >= len(history):
                continue
            rec = history[pos + t].store.records[anum]
            b_size, b_speed = base[anum]
            size_ratios.append(rec.smallest.size / b_size)
            speed_ratios.append(rec.fastest.speed / b_speed if b_speed else 1.0)
        if not size_ratios:
            break
        rows.append((t, sum(size_ratios) / len(size_ratios), sum(speed_ratios) / len(speed_ratios)))
    return rows


def _contains_subsequence(tokens: tuple[str, ...], pattern: tuple[str, ...]) -> bool:
    plen = len(pattern)
    return any(tokens[i : i + plen] == pattern for i in range(len(tokens) - plen + 1))


def _contains_subtree(e: Expr, pattern: Expr) -> bool:
    if e == pattern:
        return True
    return any(_contains_subtree(a, pattern) for a in e.args)


def proliferation_census(history, patterns, subtree: bool = False) -> list[list[int]]:
    """Count stored programs containing each pattern, per iteration.

    Patterns are token strings; containment is contiguous token
    subsequence by default, whole-subtree with subtree=True.  Programs
    are the deduplicated champions of each snapshot.
    """
    pattern_tokens = [tuple(p.split()) if isinstance(p, str) else tuple(p) for p in patterns]
    pattern_exprs = [decode_tokens(list(p)) for p in pattern_tokens] if subtree else None
    rows = []
    for snap in history:
        programs: dict[str, None] = {}
        for rec in snap.store.records.values():
            programs.setdefault(rec.smallest.tokens, None)
            programs.setdefault(rec.fastest.tokens, None)
        counts = []
        for j, pat in enumerate(pattern_tokens):
            if subtree:
                c = sum(
                    1
                    for text in programs
                    if _contains_subtree(decode_tokens(text.split()), pattern_exprs[j])
                )
            else:
                c = sum(1 for text in programs if _contains_subsequence(tuple(text.split()), pat))
            counts.append(c)
        rows.append(counts)
    return rows


def _const_value(e: Expr) -> int | None:
    """Value of a variable- and loop-free subtree, None if it is not one."""
    from .lang import COND, DIV as _DIV, MINUS, MOD, ONE, TWO, VARY, ZERO

    if e.op == ZERO:
        return 0
    if e.op == ONE:
        return 1
    if e.op == TWO:
        return 2
    if e.op in (VARX, VARY):
        return None
    if e.op in (PLUS, MINUS, TIMES, DIV, MOD):
        a = _const_value(e.args[0])
        b = _const_value(e.args[1])
        if a is None or b is None:
            return None
        if e.op == PLUS:
            return a + b
        if e.op == MINUS:
            return a - b
        if e.op == TIMES:
            return a * b
        if b == 0:
            return None
        q = abs(a) // abs(b)
        if (a < 0) != (b < 0):
            q = -q
        return q if e.op == DIV else a - b * q
    if e.op == COND:
        c = _const_value(e.args[0])
        if c is None:
            return None
        return _const_value(e.args[1]) if c <= 0 else _const_value(e.args[2])
    return None


FORM_LINEAR = "a+x/b"
FORM_DOUBLED = "a+2(x/b)"


def extract_linear_bounds(e: Expr) -> list[tuple[int, int, str]]:
    """(a, b, form) for every subtree shaped a + x div b or a + 2*(x div b)."""
    found: list[tuple[int, int, str]] = []

    def try_pair(const_side: Expr, other: Expr):
        a = _const_value(const_side)
        if a is None:
            return
        if other.op == DIV and other.args[0].op == VARX:
            b = _const_value(other.args[1])
            if b is not None and b >= 1:
                found.append((a, b, FORM_LINEAR))
            return
        if other.op == TIMES:
            for two_side, div_side in ((other.args[0], other.args[1]), (other.args[1], other.args[0])):
                if _const_value(two_side) == 2 and div_side.op == DIV and div_side.args[0].op == VARX:
                    b = _const_value(div_side.args[1])
                    if b is not None and b >= 1:
                        found.append((a, b, FORM_DOUBLED))
                        return

    def walk(node: Expr):
        if node.op == PLUS:
            try_pair(node.args[0], node.args[1])
            try_pair(node.args[1], node.args[0])
        for arg in node.args:
            walk(arg)

    walk(e)
    return found


def bound_is_valid(a: int, b: int, form: str, xmax: int = 10**6) -> bool:
    """Whether a + x div b (or a + 2(x div b)) covers the subtracting steps on [0, xmax].

    The loops these bounds drive need exactly r(x) effective steps, where
    r is the largest row index with r(r+1)/2 <= x; extra iterations are
    no-ops.  So the bound q is sufficient iff q >= r(x), in integers:
    q >= 0 and (q+1)(q+2) > 2x.  Within a quotient class the worst x is
    the largest, so one check per class suffices.  No floating point.
    """
    k = 0
    while True:
        x_lo = k * b
        if x_lo > xmax:
            return True
        x_hi = min((k + 1) * b - 1, xmax)
        q = a + (2 * k if form == FORM_DOUBLED else k)
        if q < 0 or (q + 1) * (q + 2) <= 2 * x_hi:
            return False
        k += 1


def linear_bound_census(history, xmax: int = 10**6) -> list[tuple[int, int, str, bool]]:
    """Distinct (a, b, form) bounds found in stored programs, with validity."""
    seen: dict[tuple[int, int, str], bool] = {}
    for snap in history:
        programs: dict[str, None] = {}
        for rec in snap.store.records.values():
            programs.setdefault(rec.smallest.tokens, None)
            programs.setdefault(rec.fastest.tokens, None)
        for text in programs:
            for a, b, form in extract_linear_bounds(decode_tokens(text.split())):
                key = (a, b, form)
                if key not in seen:
                    seen[key] = bound_is_valid(a, b, form, xmax)
    return [(a, b, form, valid) for (a, b, form), valid in sorted(seen.items())]


def write_csv(rows, header: list[str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def write_gnuplot(csv_path, columns: list[str], path) -> None:
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"plot " + ", ".join(f"'{csv_path}' using 1:{i + 2} with lines" for i in range(len(columns) - 1)),
        "pause -1",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
