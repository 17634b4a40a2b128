"""Emission of self-contained Python source for a program.

Each looping construct becomes its own helper function: loop turns into a
for-loop over an accumulator, loop2 into a paired-update for-loop with
simultaneous tuple assignment, and compr into a counting while-loop.
Variables appearing in the integer arguments of a looping construct refer
to the caller's scope and are capitalized (X, Y) inside the helper to
avoid capture by the loop-local lowercase x and y.

Division uses truncate-toward-zero semantics with the remainder taking
the dividend's sign, so emitted code agrees with the native evaluator on
negative operands too.
"""

from __future__ import annotations

from .lang import (
    COMPR,
    COND,
    DIV,
    LOOP,
    LOOP2,
    MINUS,
    MOD,
    PLUS,
    TIMES,
    VARX,
    VARY,
    ONE,
    TWO,
    ZERO,
    Expr,
)

_PRELUDE = '''\
def _div(a, b):
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q

def _mod(a, b):
    return a - b * _div(a, b)
'''


class _Emitter:
    def __init__(self):
        self.defs: list[str] = []
        self.counter = 0

    def fresh_name(self) -> str:
        name = f"f{self.counter}"
        self.counter += 1
        return name

    def expression(self, e: Expr, upper: bool) -> str:
        """Python expression for e; upper selects X/Y instead of x/y."""
        op = e.op
        if op == ZERO:
            return "0"
        if op == ONE:
            return "1"
        if op == TWO:
            return "2"
        if op == VARX:
            return "X" if upper else "x"
        if op == VARY:
            return "Y" if upper else "y"
        if op == PLUS:
            return f"({self.expression(e.args[0], upper)} + {self.expression(e.args[1], upper)})"
        if op == MINUS:
            return f"({self.expression(e.args[0], upper)} - {self.expression(e.args[1], upper)})"
        if op == TIMES:
            return f"({self.expression(e.args[0], upper)} * {self.expression(e.args[1], upper)})"
        if op == DIV:
            return f"_div({self.expression(e.args[0], upper)}, {self.expression(e.args[1], upper)})"
        if op == MOD:
            return f"_mod({self.expression(e.args[0], upper)}, {self.expression(e.args[1], upper)})"
        if op == COND:
            a, b, c = (self.expression(arg, upper) for arg in e.args)
            return f"({b} if {a} <= 0 else {c})"
        # Looping constructs become helper calls on the current scope pair.
        name = self.helper(e)
        return f"{name}({'X, Y' if upper else 'x, y'})"

    def helper(self, e: Expr) -> str:
        name = self.fresh_name()
        if e.op == LOOP:
            f, a, b = e.args
            body = [
                f"def {name}(X, Y):",
                f"    x = {self.expression(b, upper=True)}",
                f"    for y in range(1, {self.expression(a, upper=True)} + 1):",
                f"        x = {self.expression(f, upper=False)}",
                "    return x",
            ]
        elif e.op == LOOP2:
            f, g, a, b, c = e.args
            body = [
                f"def {name}(X, Y):",
                f"    x = {self.expression(b, upper=True)}",
                f"    y = {self.expression(c, upper=True)}",
                f"    for _ in range(1, {self.expression(a, upper=True)} + 1):",
                f"        x, y = {self.expression(f, upper=False)}, {self.expression(g, upper=False)}",
                "    return x",
            ]
        elif e.op == COMPR:
            f, a = e.args
            # The predicate runs at (candidate, 0): x holds the candidate
            # and y is pinned to 0 for the whole search.
            body = [
                f"def {name}(X, Y):",
                f"    n = {self.expression(a, upper=True)}",
                "    x, i, y = 0, 0, 0",
                "    while i <= n:",
                f"        if {self.expression(f, upper=False)} <= 0:",
                "            i = i + 1",
                "        x = x + 1",
                "    return x - 1",
            ]
        else:
            raise AssertionError(f"not a looping construct: {e.op}")
        self.defs.append("\n".join(body))
        return name


def transpile_python(e: Expr, entry_name: str = "F") -> str:
    """Self-contained Python module text computing the program.

    The entry point is ``def <entry_name>(X, Y)``.  When the root of the
    program is itself a looping construct, the entry function is that
    construct's helper, so the file reads as exactly one def per looping
    node.
    """
    em = _Emitter()
    if e.op in (LOOP, LOOP2, COMPR):
        root = em.helper(e)
        entry = em.defs.pop().replace(f"def {root}(", f"def {entry_name}(", 1)
        pieces = [_PRELUDE, *em.defs, entry]
    else:
        em.counter = 1  # keep f0 free; the entry is its own def here
        expr_text = em.expression(e, upper=True)
        entry = f"def {entry_name}(X, Y):\n    return {expr_text}"
        pieces = [_PRELUDE, *em.defs, entry]
    return "\n\n".join(pieces) + "\n"


def compile_python(e: Expr, entry_name: str = "F"):
    """Exec the emitted source and hand back the entry callable."""
    source = transpile_python(e, entry_name)
    namespace: dict = {}
    exec(source, namespace)  # noqa: S102 - our own generated code
    return namespace[entry_name]
