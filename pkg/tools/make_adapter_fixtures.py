#!/usr/bin/env python3
"""Regenerate the adapter's toy training fixtures.

Fifty (sequence, program) pairs: random decodable programs that stream at
least 12 terms under fast limits, deduplicated by their first 12 terms so
every source is distinguishable. Written in the core's exchange formats
plus a stripped-format corpus for end-to-end checks.
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from seqsynth.evaluator import FAST_LIMITS, take_terms  # noqa: E402
from seqsynth.guidance import render_terms  # noqa: E402
from seqsynth.lang import ARITY, Expr, encode_tokens, text_of  # noqa: E402

OUT = Path(__file__).resolve().parent.parent / "adapter" / "test" / "fixtures"
N_PAIRS = 50
N_TERMS = 8


def random_expr(rng: random.Random, max_size: int) -> Expr:
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
            child = gen(remaining - (ARITY[op] - i - 1))
            args.append(child)
            remaining -= size(child)
        return Expr(op, tuple(args))

    def size(e: Expr) -> int:
        return 1 + sum(size(a) for a in e.args)

    return gen(max_size)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    rng = random.Random(77_2024)
    pairs = []
    seen_terms = set()
    seen_programs = set()
    while len(pairs) < N_PAIRS:
        e = random_expr(rng, rng.randint(5, 16))
        tokens = encode_tokens(e)
        text = text_of(tokens)
        if text in seen_programs or len(tokens) > 24:
            continue
        terms, run = take_terms(e, FAST_LIMITS, N_TERMS)
        if len(terms) < N_TERMS:
            continue
        if any(abs(t) > 10**8 for t in terms):
            continue
        key = tuple(terms)
        if key in seen_terms:
            continue
        seen_terms.add(key)
        seen_programs.add(text)
        pairs.append((terms, text))

    with open(OUT / "train.src", "w", encoding="utf-8") as src, open(
        OUT / "train.tgt", "w", encoding="utf-8"
    ) as tgt:
        for terms, text in pairs:
            src.write(text_of(render_terms(terms, 32)) + "\n")
            tgt.write(text + "\n")

    with open(OUT / "infer.src", "w", encoding="utf-8") as fh:
        for i, (terms, _) in enumerate(pairs):
            fh.write(f"A{910000 + i:06d}\t{text_of(render_terms(terms, 32))}\n")

    with open(OUT / "toy_corpus.txt", "w", encoding="utf-8") as fh:
        fh.write("# adapter toy corpus in OEIS stripped format\n")
        for i, (terms, _) in enumerate(pairs):
            fh.write(f"A{910000 + i:06d} ," + ",".join(str(t) for t in terms) + ",\n")

    sizes = [len(t.split()) for _, t in pairs]
    print(f"wrote {len(pairs)} pairs (program sizes {min(sizes)}..{max(sizes)}) under {OUT}")


if __name__ == "__main__":
    main()
