"""Cost-metered big-integer evaluation of programs.

Every node evaluation charges abstract time: 1 unit for most operators,
5 for div/mod, and the bit length of the result whenever it exceeds 64
bits.  Evaluation aborts as soon as the meter passes its budget, a value
leaves the +/-10^285 window, division hits zero, or a comprehension runs
past its precomputed values.  The accounting is pure integer arithmetic,
so identical inputs spend identical amounts on any machine.

Programs are compiled to nested closures once and then called per term;
this keeps the per-node interpretation overhead low enough to stream
thousands of terms per second under the slow budget.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lang import (
    COMPR,
    COND,
    DIV,
    LOOP,
    LOOP2,
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
    encode_tokens,
)

MAX_MAGNITUDE = 10**285
_TWO64 = 1 << 64

VALUE = "value"
TIMEOUT = "timeout"
MAGNITUDE = "magnitude"
COMPR_LIMIT = "compr-limit"
COMPR_FAILURE = "compr-failure"
DIV_BY_ZERO = "div-by-zero"
ABORT_KINDS = (TIMEOUT, MAGNITUDE, COMPR_LIMIT, COMPR_FAILURE, DIV_BY_ZERO)
# Aborts that are resource exhaustion rather than a semantic dead end;
# only these can be cured by a larger budget.
RESOURCE_ABORTS = (TIMEOUT, COMPR_LIMIT)


@dataclass(frozen=True, slots=True)
class EvalLimits:
    t_call: int
    n_compr: int
    max_magnitude: int = MAX_MAGNITUDE

    def __post_init__(self):
        if self.t_call <= 0 or self.n_compr < 0:
            raise ValueError("t_call must be positive and n_compr nonnegative")

    def dominates(self, other: "EvalLimits") -> bool:
        return (
            self.t_call >= other.t_call
            and self.n_compr >= other.n_compr
            and self.max_magnitude == other.max_magnitude
        )


FAST_LIMITS = EvalLimits(t_call=1000, n_compr=20)
SLOW_LIMITS = EvalLimits(t_call=100_000, n_compr=200)


class CostMeter:
    """Abstract-time account: spent never passes budget in a live run."""

    __slots__ = ("spent", "budget")

    def __init__(self, budget: int = 0):
        self.spent = 0
        self.budget = budget

    def grant(self, units: int) -> None:
        self.budget += units


class _Abort(Exception):
    __slots__ = ("kind",)

    def __init__(self, kind: str):
        self.kind = kind


def cost_of(op: int, result: int) -> int:
    """Charge for one node evaluation that produced ``result``."""
    mag = result if result >= 0 else -result
    if mag >= _TWO64:
        return mag.bit_length()
    return 5 if op in (DIV, MOD) else 1


@dataclass(frozen=True, slots=True)
class EvalOutcome:
    kind: str
    value: int | None
    spent: int

    @property
    def ok(self) -> bool:
        return self.kind == VALUE


@dataclass(slots=True)
class ComprEntry:
    """Precomputed compr(f, 0..k) values for one predicate subtree."""

    values: list[int]
    spent: int


def compr_key(f: Expr) -> str:
    return " ".join(encode_tokens(f))


def _collect_compr_args(e: Expr) -> list[Expr]:
    """Distinct compr predicates, innermost first (dependencies precede users)."""
    seen: dict[str, Expr] = {}

    def walk(node: Expr):
        for a in node.args:
            walk(a)
        if node.op == COMPR:
            f = node.args[0]
            seen.setdefault(compr_key(f), f)

    walk(e)
    return list(seen.values())


def _compile(e: Expr, meter: CostMeter, caches: dict[str, ComprEntry], max_mag: int):
    """Build a closure (x, y) -> int that meters and checks as it runs."""
    op = e.op

    if op == ZERO or op == ONE or op == TWO:
        k = op  # ZERO..TWO are 0..2

        def run(x, y, m=meter, k=k):
            m.spent += 1
            if m.spent > m.budget:
                raise _Abort(TIMEOUT)
            return k

        return run

    if op == VARX:

        def run(x, y, m=meter):
            mag = x if x >= 0 else -x
            m.spent += mag.bit_length() if mag >= _TWO64 else 1
            if m.spent > m.budget:
                raise _Abort(TIMEOUT)
            return x

        return run

    if op == VARY:

        def run(x, y, m=meter):
            mag = y if y >= 0 else -y
            m.spent += mag.bit_length() if mag >= _TWO64 else 1
            if m.spent > m.budget:
                raise _Abort(TIMEOUT)
            return y

        return run

    if op in (PLUS, MINUS, TIMES):
        fa = _compile(e.args[0], meter, caches, max_mag)
        fb = _compile(e.args[1], meter, caches, max_mag)

        if op == PLUS:

            def run(x, y, m=meter, fa=fa, fb=fb, lim=max_mag):
                v = fa(x, y) + fb(x, y)
                mag = v if v >= 0 else -v
                m.spent += mag.bit_length() if mag >= _TWO64 else 1
                if m.spent > m.budget:
                    raise _Abort(TIMEOUT)
                if mag > lim:
                    raise _Abort(MAGNITUDE)
                return v

        elif op == MINUS:

            def run(x, y, m=meter, fa=fa, fb=fb, lim=max_mag):
                v = fa(x, y) - fb(x, y)
                mag = v if v >= 0 else -v
                m.spent += mag.bit_length() if mag >= _TWO64 else 1
                if m.spent > m.budget:
                    raise _Abort(TIMEOUT)
                if mag > lim:
                    raise _Abort(MAGNITUDE)
                return v

        else:

            def run(x, y, m=meter, fa=fa, fb=fb, lim=max_mag):
                v = fa(x, y) * fb(x, y)
                mag = v if v >= 0 else -v
                m.spent += mag.bit_length() if mag >= _TWO64 else 1
                if m.spent > m.budget:
                    raise _Abort(TIMEOUT)
                if mag > lim:
                    raise _Abort(MAGNITUDE)
                return v

        return run

    if op in (DIV, MOD):
        fa = _compile(e.args[0], meter, caches, max_mag)
        fb = _compile(e.args[1], meter, caches, max_mag)
        want_mod = op == MOD

        # Truncated division, remainder takes the dividend's sign (C rules).
        def run(x, y, m=meter, fa=fa, fb=fb, lim=max_mag, want_mod=want_mod):
            a = fa(x, y)
            b = fb(x, y)
            if b == 0:
                raise _Abort(DIV_BY_ZERO)
            q = abs(a) // abs(b)
            if (a < 0) != (b < 0):
                q = -q
            v = a - b * q if want_mod else q
            mag = v if v >= 0 else -v
            if mag >= _TWO64:
                m.spent += mag.bit_length()
            else:
                m.spent += 5
            if m.spent > m.budget:
                raise _Abort(TIMEOUT)
            if mag > lim:
                raise _Abort(MAGNITUDE)
            return v

        return run

    if op == COND:
        fa = _compile(e.args[0], meter, caches, max_mag)
        fb = _compile(e.args[1], meter, caches, max_mag)
        fc = _compile(e.args[2], meter, caches, max_mag)

        def run(x, y, m=meter, fa=fa, fb=fb, fc=fc):
            v = fb(x, y) if fa(x, y) <= 0 else fc(x, y)
            mag = v if v >= 0 else -v
            m.spent += mag.bit_length() if mag >= _TWO64 else 1
            if m.spent > m.budget:
                raise _Abort(TIMEOUT)
            return v

        return run

    if op == LOOP:
        ff = _compile(e.args[0], meter, caches, max_mag)
        fa = _compile(e.args[1], meter, caches, max_mag)
        fb = _compile(e.args[2], meter, caches, max_mag)

        def run(x, y, m=meter, ff=ff, fa=fa, fb=fb):
            a = fa(x, y)
            acc = fb(x, y)
            for i in range(1, a + 1):
                acc = ff(acc, i)
            mag = acc if acc >= 0 else -acc
            m.spent += mag.bit_length() if mag >= _TWO64 else 1
            if m.spent > m.budget:
                raise _Abort(TIMEOUT)
            return acc

        return run

    if op == LOOP2:
        ff = _compile(e.args[0], meter, caches, max_mag)
        fg = _compile(e.args[1], meter, caches, max_mag)
        fa = _compile(e.args[2], meter, caches, max_mag)
        fb = _compile(e.args[3], meter, caches, max_mag)
        fc = _compile(e.args[4], meter, caches, max_mag)

        # Both update functions see the pre-update pair, per the recursive
        # definition: loop2(f,g,a-1,f(b,c),g(b,c)).
        def run(x, y, m=meter, ff=ff, fg=fg, fa=fa, fb=fb, fc=fc):
            a = fa(x, y)
            u = fb(x, y)
            v = fc(x, y)
            for _ in range(1, a + 1):
                u, v = ff(u, v), fg(u, v)
            mag = u if u >= 0 else -u
            m.spent += mag.bit_length() if mag >= _TWO64 else 1
            if m.spent > m.budget:
                raise _Abort(TIMEOUT)
            return u

        return run

    if op == COMPR:
        key = compr_key(e.args[0])
        fa = _compile(e.args[1], meter, caches, max_mag)
        entry = caches[key]

        def run(x, y, m=meter, fa=fa, values=entry.values):
            i = fa(x, y)
            if i < 0:
                raise _Abort(COMPR_FAILURE)
            if i >= len(values):
                raise _Abort(COMPR_LIMIT)
            v = values[i]
            mag = v if v >= 0 else -v
            m.spent += mag.bit_length() if mag >= _TWO64 else 1
            if m.spent > m.budget:
                raise _Abort(TIMEOUT)
            return v

        return run

    raise AssertionError(f"unhandled operator {op}")


def precompute_compr(f: Expr, limits: EvalLimits, caches: dict[str, ComprEntry]) -> ComprEntry:
    """Enumerate compr(f, 0), compr(f, 1), ... under a cumulative budget.

    While searching for the value of index i the meter may spend up to
    (i+1) * t_call in total.  The scan stops at n_compr values, at budget
    exhaustion, or at the first failing evaluation of the predicate;
    partial caches are legal and surface later as compr-limit aborts.
    """
    meter = CostMeter()
    fn = _compile(f, meter, caches, limits.max_magnitude)
    values: list[int] = []
    m = 0
    while len(values) < limits.n_compr:
        meter.budget = (len(values) + 1) * limits.t_call
        try:
            while True:
                if fn(m, 0) <= 0:
                    values.append(m)
                    m += 1
                    break
                m += 1
        except _Abort:
            break
    return ComprEntry(values=values, spent=meter.spent)


def build_compr_caches(e: Expr, limits: EvalLimits) -> tuple[dict[str, ComprEntry], int]:
    """Precompute every distinct compr predicate in e; returns (caches, spent)."""
    caches: dict[str, ComprEntry] = {}
    total = 0
    for f in _collect_compr_args(e):
        entry = precompute_compr(f, limits, caches)
        caches[compr_key(f)] = entry
        total += entry.spent
    return caches, total


def eval_expr(
    e: Expr,
    x: int,
    y: int,
    limits: EvalLimits,
    meter: CostMeter | None = None,
    caches: dict[str, ComprEntry] | None = None,
) -> EvalOutcome:
    """One metered evaluation of e at (x, y)."""
    if caches is None:
        caches, _ = build_compr_caches(e, limits)
    if meter is None:
        meter = CostMeter(budget=limits.t_call)
    fn = _compile(e, meter, caches, limits.max_magnitude)
    try:
        v = fn(x, y)
    except _Abort as a:
        return EvalOutcome(a.kind, None, meter.spent)
    return EvalOutcome(VALUE, v, meter.spent)


@dataclass(slots=True)
class SequenceRun:
    """Result of streaming f(0,0), f(1,0), ... to a consumer."""

    reason: str  # "consumer" when the consumer stopped the stream, else an abort kind
    terms: int
    spent: int
    precompute_spent: int
    spent_per_term: list[int]

    def speed_at(self, depth: int) -> int:
        """Total abstract time to produce the first ``depth`` terms."""
        return self.precompute_spent + self.spent_per_term[depth - 1]


def run_sequence_program(e: Expr, limits: EvalLimits, consumer) -> SequenceRun:
    """Stream terms in index order under the carried-over per-call budget.

    The cumulative allowance after the term of 0-based index n is
    (n+1) * t_call; time unused by earlier terms remains available.
    ``consumer`` receives each term and returns False to stop the stream.
    """
    caches, pre_spent = build_compr_caches(e, limits)
    meter = CostMeter()
    fn = _compile(e, meter, caches, limits.max_magnitude)
    spent_per_term: list[int] = []
    n = 0
    while True:
        meter.budget += limits.t_call
        try:
            v = fn(n, 0)
        except _Abort as a:
            return SequenceRun(a.kind, n, meter.spent, pre_spent, spent_per_term)
        spent_per_term.append(meter.spent)
        n += 1
        if not consumer(v):
            return SequenceRun("consumer", n, meter.spent, pre_spent, spent_per_term)


class ProgramRunner:
    """Compile once, evaluate at many points; each call gets a fresh budget."""

    def __init__(self, e: Expr, limits: EvalLimits):
        self.limits = limits
        self.caches, self.precompute_spent = build_compr_caches(e, limits)
        self.meter = CostMeter()
        self._fn = _compile(e, self.meter, self.caches, limits.max_magnitude)

    def eval(self, x: int, y: int = 0, budget: int | None = None) -> EvalOutcome:
        self.meter.budget = self.meter.spent + (budget if budget is not None else self.limits.t_call)
        start = self.meter.spent
        try:
            v = self._fn(x, y)
        except _Abort as a:
            return EvalOutcome(a.kind, None, self.meter.spent - start)
        return EvalOutcome(VALUE, v, self.meter.spent - start)


def take_terms(e: Expr, limits: EvalLimits, count: int) -> tuple[list[int], SequenceRun]:
    """First ``count`` terms of the program, stopping early on any abort."""
    if count <= 0:
        return [], SequenceRun("consumer", 0, 0, 0, [])
    out: list[int] = []

    def consumer(v: int) -> bool:
        out.append(v)
        return len(out) < count

    run = run_sequence_program(e, limits, consumer)
    return out, run
