#!/usr/bin/env python3
"""Regenerate the test fixture corpus and b-files.

Every term list is computed here with direct oracles (sieve, iterative
recurrences, closed forms), never with the package's evaluator, so the
fixtures stay independent of the code under test.  Entries with real
A-numbers carry the true leading terms of those OEIS sequences; filler
entries use A9xxxxx numbers far outside the allocated range.
"""

from __future__ import annotations

import random
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def sieve_primes(count: int) -> list[int]:
    primes: list[int] = []
    n = 2
    while len(primes) < count:
        if all(n % p for p in primes if p * p <= n):
            primes.append(n)
        n += 1
    return primes


def fib(count: int) -> list[int]:
    out, a, b = [], 0, 1
    for _ in range(count):
        out.append(a)
        a, b = b, a + b
    return out


def factorials(count: int) -> list[int]:
    out, acc = [], 1
    for n in range(count):
        out.append(acc)
        acc *= n + 1
    return out


def triangle_read(count: int, cell) -> list[int]:
    out = []
    n = k = 0
    while len(out) < count:
        out.append(cell(n, k))
        k += 1
        if k > n:
            n, k = n + 1, 0
    return out


REAL_ENTRIES = [
    (12, lambda n: 1, 30),                      # all ones
    (27, lambda n: n + 1, 35),                  # natural numbers
    (35, lambda n: n % 2, 40),                  # parity
    (40, None, 35),                             # primes (sieve below)
    (45, None, 32),                             # Fibonacci
    (79, lambda n: 2**n, 30),                   # powers of two
    (142, None, 22),                            # factorials
    (217, lambda n: n * (n + 1) // 2, 35),      # triangular numbers
    (225, lambda n: 2**n - 1, 30),              # 2^n - 1
    (244, lambda n: 3**n, 25),                  # powers of three
    (290, lambda n: n * n, 35),                 # squares
    (292, lambda n: n * (n + 1) * (n + 2) // 6, 30),  # tetrahedral
    (302, lambda n: 4**n, 22),                  # powers of four
    (351, lambda n: 5**n, 20),                  # powers of five
    (578, lambda n: n**3, 30),                  # cubes
    (1018, lambda n: 8**n, 18),                 # powers of eight
    (1477, lambda n: n, 35),                    # nonnegative integers
    (2262, None, 45),                           # triangle T(n,k) = k
    (2378, lambda n: n * (n + 1), 32),          # oblong numbers
    (5408, lambda n: 2 * n + 1, 35),            # odd numbers
    (5843, lambda n: 2 * n, 35),                # even numbers
    (8585, lambda n: 3 * n, 30),                # multiples of three
    (8586, lambda n: 4 * n, 30),                # multiples of four
    (25581, None, 45),                          # triangle T(n,k) = n-k
    (94, None, 30),                             # fib minus one... see below
]


def real_terms(anum: int, count: int):
    if anum == 40:
        return sieve_primes(count)
    if anum == 45:
        return fib(count)
    if anum == 142:
        return factorials(count)
    if anum == 2262:
        return triangle_read(count, lambda n, k: k)
    if anum == 25581:
        return triangle_read(count, lambda n, k: n - k)
    if anum == 94:
        f = fib(count + 1)
        return [f[n + 1] - 1 for n in range(count)]
    return None


def filler_entries():
    rng = random.Random(20240901)
    entries = []
    anum = 900001

    for a in range(1, 7):
        for b in range(0, 5):
            count = 25 + (a * 5 + b) % 12
            entries.append((anum, [a * n + b for n in range(count)]))
            anum += 1
    for a in range(1, 5):
        for c in range(0, 5):
            count = 25 + (a * 3 + c) % 10
            entries.append((anum, [a * n * n + c for n in range(count)]))
            anum += 1
    for r in (2, 3, 5):
        for m in (1, 3, 7):
            count = 18 + (r + m) % 6
            entries.append((anum, [m * r**n for n in range(count)]))
            anum += 1
    for _ in range(12):
        period = rng.randint(2, 5)
        cycle = [rng.randint(-9, 9) for _ in range(period)]
        count = 28 + rng.randint(0, 8)
        entries.append((anum, [cycle[n % period] for n in range(count)]))
        anum += 1
    for _ in range(12):
        a0 = rng.randint(0, 4)
        a1 = rng.randint(1, 5)
        p = rng.randint(1, 3)
        q = rng.randint(1, 2)
        seq = [a0, a1]
        count = 24 + rng.randint(0, 9)
        while len(seq) < count:
            seq.append(p * seq[-1] + q * seq[-2])
        entries.append((anum, seq))
        anum += 1
    return entries


def write_stripped(path: Path, entries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# fixture corpus in OEIS stripped format\n")
        for anum, terms in entries:
            fh.write(f"A{anum:06d} ," + ",".join(str(t) for t in terms) + ",\n")


def write_bfile(path: Path, start: int, values) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# fixture b-file\n")
        for i, v in enumerate(values):
            fh.write(f"{start + i} {v}\n")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    entries = []
    for anum, fn, count in REAL_ENTRIES:
        terms = real_terms(anum, count) if fn is None else [fn(n) for n in range(count)]
        entries.append((anum, terms))
    # Lookalike for the generalization mismatch case: stored terms are the
    # first 12 factorials, but the extension deliberately breaks away.
    entries.append((900090, factorials(12)))
    # Short doubling prefix: a deliberately slow champion can still solve
    # these 12 stored terms yet blow the budget somewhere in the extension.
    entries.append((900091, [2**n for n in range(12)]))
    entries.extend(filler_entries())
    entries.sort(key=lambda pair: pair[0])
    write_stripped(FIXTURES / "corpus_small.txt", entries)

    bdir = FIXTURES / "bfiles"
    bdir.mkdir(exist_ok=True)
    # generalizing: true factorials well past the stored 22 terms
    write_bfile(bdir / "b000142.txt", 0, factorials(40))
    # timeout bait: powers of two far past the stored terms; a deliberately
    # slow champion will blow the budget out here
    write_bfile(bdir / "b000079.txt", 0, [2**n for n in range(80)])
    # mismatching: follows the stored factorials, then veers off
    broken = factorials(20)
    for i in range(12, 20):
        broken[i] += i  # diverges right after the stored prefix
    write_bfile(bdir / "b900090.txt", 0, broken)
    # long doubling extension for the timeout case
    write_bfile(bdir / "b900091.txt", 0, [2**n for n in range(60)])
    n_bfiles = len(list(bdir.glob("b*.txt")))
    print(f"wrote {len(entries)} corpus entries and {n_bfiles} b-files under {FIXTURES}")


if __name__ == "__main__":
    main()
