"""Search guidance: term rendering, the n-gram model and beam decoding.

Training pairs map a rendered integer sequence to a solution token
string.  The source side writes each term's decimal digits in reversed
order, keeps the terms themselves in sequence order, separates terms
with '%' and marks negatives with a leading '-'; the rendering is
invertible.  The guidance model is an order-k token n-gram over solution
programs, bucketed by a cheap fingerprint of the first terms of the
source sequence, with add-mass smoothing and backoff to unbucketed
counts.  It stands in for a neural translator at desk scale: anything
that scores next tokens given a context can drive the same beam search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .lang import (
    DIGIT_TOKENS,
    GLOBAL_SEPARATOR,
    LOCAL_MACRO_LETTERS,
    LOCAL_SEPARATOR,
    OP_LETTERS,
)

BOUNDARY = "%"
NEGATIVE = "-"
END = "$"  # end-of-program marker inside the model only, never on the wire

PROGRAM_ALPHABET = tuple(OP_LETTERS)
MACRO_ALPHABET = tuple(OP_LETTERS) + tuple(LOCAL_MACRO_LETTERS) + (LOCAL_SEPARATOR,)
GLOBAL_ALPHABET = tuple(OP_LETTERS) + tuple(DIGIT_TOKENS) + (GLOBAL_SEPARATOR,)


class GuidanceError(Exception):
    pass


class EmptyStore(GuidanceError):
    pass


def render_terms(terms, max_tokens: int = 80) -> list[str]:
    """Digit tokens for a term list; whole terms are dropped once the cap hits."""
    out: list[str] = []
    for i, t in enumerate(terms):
        piece: list[str] = [NEGATIVE] if t < 0 else []
        piece.extend(reversed(str(abs(t))))
        extra = len(piece) + (1 if i > 0 else 0)
        if max_tokens and len(out) + extra > max_tokens:
            break
        if i > 0:
            out.append(BOUNDARY)
        out.extend(piece)
    return out


def parse_terms(tokens) -> list[int]:
    """Inverse of render_terms."""
    terms: list[int] = []
    group: list[str] = []

    def flush():
        if not group:
            raise GuidanceError("empty term group")
        neg = group[0] == NEGATIVE
        digits = group[1:] if neg else group
        if not digits or any(d not in DIGIT_TOKENS for d in digits):
            raise GuidanceError(f"bad digit group {group!r}")
        value = int("".join(reversed(digits)))
        terms.append(-value if neg else value)

    for tok in tokens:
        if tok == BOUNDARY:
            flush()
            group = []
        else:
            group.append(tok)
    flush()
    return terms


def bucket_of(terms, span: int = 8) -> str:
    """Sign pattern and clipped magnitudes of the leading terms."""
    head = list(terms[:span])
    parts = []
    for t in head:
        sign = "-" if t < 0 else ("0" if t == 0 else "+")
        parts.append(sign + str(min(abs(t), 9)))
    return "".join(parts)


@dataclass(frozen=True, slots=True)
class BeamConfig:
    width: int = 240
    max_len: int = 140
    per_sequence_cap: int = 240

    def __post_init__(self):
        if self.width < 1 or self.max_len < 1 or self.per_sequence_cap < 1:
            raise ValueError("beam parameters must be positive")


class NGramGuidance:
    """Order-k conditional token frequencies over solution programs."""

    def __init__(self, order: int = 4, smoothing: float = 0.1, alphabet=PROGRAM_ALPHABET):
        if order < 1:
            raise ValueError("order must be at least 1")
        self.order = order
        self.smoothing = smoothing
        self.alphabet = tuple(alphabet)
        self.emit_alphabet = self.alphabet + (END,)
        # counts[bucket][context][token]; bucket "" holds the global table
        self.counts: dict[str, dict[str, dict[str, int]]] = {"": {}}
        self.trained_pairs = 0

    def _observe(self, table: dict, target: list[str]) -> None:
        padded = ["^"] * (self.order - 1) + target + [END]
        k = self.order - 1
        for i in range(k, len(padded)):
            ctx = " ".join(padded[i - k : i])
            tok = padded[i]
            slot = table.setdefault(ctx, {})
            slot[tok] = slot.get(tok, 0) + 1

    def train(self, pairs) -> None:
        """pairs: iterable of (source_terms, target_tokens)."""
        n = 0
        for terms, target in pairs:
            bucket = bucket_of(terms)
            self._observe(self.counts.setdefault(bucket, {}), list(target))
            self._observe(self.counts[""], list(target))
            n += 1
        if n == 0:
            raise EmptyStore("no training pairs")
        self.trained_pairs += n

    def merge(self, other: "NGramGuidance") -> None:
        """Continuous training: fold another model's counts into this one."""
        for bucket, table in other.counts.items():
            mine = self.counts.setdefault(bucket, {})
            for ctx, slot in table.items():
                dest = mine.setdefault(ctx, {})
                for tok, c in slot.items():
                    dest[tok] = dest.get(tok, 0) + c
        self.trained_pairs += other.trained_pairs

    def _slot(self, bucket: str, ctx: str) -> dict[str, int] | None:
        table = self.counts.get(bucket)
        if table is not None:
            slot = table.get(ctx)
            if slot:
                return slot
        if bucket != "":
            slot = self.counts[""].get(ctx)
            if slot:
                return slot
        return None

    def next_logprobs(self, bucket: str, context: list[str]) -> list[tuple[str, float]]:
        """(token, logprob) over the emit alphabet, smoothed; sums to 1."""
        k = self.order - 1
        padded = ["^"] * max(0, k - len(context)) + context[-k:] if k else []
        ctx = " ".join(padded)
        slot = self._slot(bucket, ctx) or {}
        total = sum(slot.values())
        vocab = self.emit_alphabet
        denom = total + self.smoothing
        share = self.smoothing / len(vocab)
        out = []
        for tok in vocab:
            p = (slot.get(tok, 0) + share) / denom
            out.append((tok, math.log(p)))
        return out

    def to_json(self) -> str:
        payload = {
            "order": self.order,
            "smoothing": self.smoothing,
            "alphabet": list(self.alphabet),
            "trained_pairs": self.trained_pairs,
            "counts": self.counts,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "NGramGuidance":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        model = cls(
            order=payload["order"],
            smoothing=payload["smoothing"],
            alphabet=tuple(payload["alphabet"]),
        )
        model.counts = payload["counts"]
        model.trained_pairs = payload["trained_pairs"]
        return model


def beam_generate(model: NGramGuidance, terms, cfg: BeamConfig) -> list[tuple[str, float]]:
    """Beam search over token emissions for one input sequence.

    Returns up to ``width`` complete token strings ranked by log
    probability (ties lexicographic).  Width 1 degenerates to greedy
    decoding.
    """
    bucket = bucket_of(terms)
    # (logprob, tokens); kept sorted best-first with lexicographic tie-break
    beams: list[tuple[float, list[str]]] = [(0.0, [])]
    complete: dict[str, float] = {}
    for _ in range(cfg.max_len):
        expansions: list[tuple[float, list[str]]] = []
        for lp, toks in beams:
            for tok, tlp in model.next_logprobs(bucket, toks):
                new_lp = lp + tlp
                if tok == END:
                    if toks:
                        text = " ".join(toks)
                        if text not in complete or complete[text] < new_lp:
                            complete[text] = new_lp
                else:
                    expansions.append((new_lp, toks + [tok]))
        if not expansions:
            break
        expansions.sort(key=lambda item: (-item[0], item[1]))
        beams = expansions[: cfg.width]
        # Nothing pending can beat the established floor once the beam is
        # saturated with complete outputs.
        if len(complete) >= cfg.width:
            floor = sorted(complete.values(), reverse=True)[cfg.width - 1]
            if beams and beams[0][0] <= floor:
                break
    ranked = sorted(complete.items(), key=lambda kv: (-kv[1], kv[0]))
    cap = min(cfg.width, cfg.per_sequence_cap)
    return [(text, lp) for text, lp in ranked[:cap]]
