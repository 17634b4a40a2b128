"""Shared oracles and builders for the test suite.

The oracles are direct, independent implementations (sieve, iterative
recurrences, closed forms); expected values in tests come from these,
never from the code under test.
"""

from __future__ import annotations

import random
from pathlib import Path

from seqsynth.lang import ARITY, Expr, encode_tokens, text_of
from seqsynth.notation import from_symbolic
from seqsynth.oeis import load_stripped

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def sieve_primes(count: int) -> list[int]:
    primes: list[int] = []
    n = 2
    while len(primes) < count:
        if all(n % p for p in primes if p * p <= n):
            primes.append(n)
        n += 1
    return primes


def fib_oracle(count: int) -> list[int]:
    out, a, b = [], 0, 1
    for _ in range(count):
        out.append(a)
        a, b = b, a + b
    return out


def factorial_oracle(count: int) -> list[int]:
    out, acc = [], 1
    for n in range(count):
        out.append(acc)
        acc *= n + 1
    return out


def pow2_oracle(count: int) -> list[int]:
    return [2**n for n in range(count)]


def power_oracle(base: int, exp: int) -> int:
    acc = 1
    for _ in range(exp):
        acc *= base
    return acc


FACTORIAL_TOKENS = "J B K F L K"
FACTORIAL = from_symbolic("loop (x * y) x 1")
POW2 = from_symbolic("loop (2 * x) x 1")
FIBONACCI = from_symbolic("loop2 (x + y) x x 0 1")
POWER = from_symbolic("loop2 (x * y) y y 1 x")

# if m <= 1 the predicate fails; otherwise the subtracting loop lands on
# zero exactly at the primes (shifted form of the prime-stream program)
PRIMALITY = from_symbolic(
    "if (x - 1) <= 0 then 1 else "
    "(loop (x - (if (x mod (1 + y)) <= 0 then 0 else 1)) (x - 2) (x - 2))"
)

TRIANGLE_F0 = from_symbolic(
    "loop (x - (if (y - x) <= 0 then y else 0)) (2 + (x div (1 + (2 + 2)))) x"
)
TRIANGLE_F1 = from_symbolic(
    "loop (x - (if x <= 0 then 0 else (1 + y))) (2 + (x div (1 + (2 + 2)))) x"
)


def prime_programs() -> list[Expr]:
    lines = [
        line.strip()
        for line in (FIXTURES / "prime_programs.txt").read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
    return [from_symbolic(line) for line in lines]


def fixture_corpus():
    return load_stripped(FIXTURES / "corpus_small.txt")


def random_expr(rng: random.Random, max_size: int) -> Expr:
    """Arity-correct random tree of at most max_size nodes."""

    def gen(budget: int) -> Expr:
        while True:
            op = rng.randrange(14)
            if 1 + ARITY[op] <= budget:
                break
        if ARITY[op] == 0:
            return Expr(op)
        remaining = budget - 1
        args = []
        for i in range(ARITY[op]):
            reserve = ARITY[op] - i - 1
            child = gen(remaining - reserve)
            args.append(child)
            remaining -= node_count(child)
        return Expr(op, tuple(args))

    return gen(max_size)


def node_count(e: Expr) -> int:
    return 1 + sum(node_count(a) for a in e.args)


def random_token_pool(count: int, max_size: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    pool: dict[str, None] = {}
    while len(pool) < count:
        pool.setdefault(text_of(encode_tokens(random_expr(rng, max_size))), None)
    return list(pool)


def synthetic_corpus(n_entries: int, seed: int, terms_per_entry: int = 24):
    """Deterministic stand-in corpus built from simple closed forms."""
    from seqsynth.oeis import SequenceEntry

    rng = random.Random(seed)
    entries = []
    anum = 500_000
    while len(entries) < n_entries:
        kind = rng.randrange(5)
        a, b, c = rng.randint(1, 9), rng.randint(0, 9), rng.randint(0, 4)
        if kind == 0:
            terms = [a * n + b for n in range(terms_per_entry)]
        elif kind == 1:
            terms = [a * n * n + b * n + c for n in range(terms_per_entry)]
        elif kind == 2:
            r = rng.randint(2, 4)
            terms = [b + a * r**n for n in range(terms_per_entry)]
        elif kind == 3:
            period = rng.randint(2, 6)
            cycle = [rng.randint(-9, 9) for _ in range(period)]
            terms = [cycle[n % period] for n in range(terms_per_entry)]
        else:
            seq = [rng.randint(0, 3), rng.randint(1, 4)]
            while len(seq) < terms_per_entry:
                seq.append(seq[-1] + a * seq[-2])
            terms = seq
        entries.append(SequenceEntry(anum, tuple(terms)))
        anum += 1
    return entries
