import pytest

from seqsynth.checker import (
    Champion,
    CheckMode,
    GENERALIZES,
    MISMATCH,
    NotASolution,
    SolutionStore,
    TIMEOUT_CLASS,
    check_pool,
    classify_extension,
    generalization_check,
    measure_speed,
    update_solutions,
)
from seqsynth.evaluator import SLOW_LIMITS, take_terms
from seqsynth.lang import decode_tokens, encode_tokens, text_of
from seqsynth.notation import from_symbolic
from seqsynth.oeis import build_trie, extension_terms, load_bfile
from helpers import (
    FACTORIAL,
    FACTORIAL_TOKENS,
    FIXTURES,
    fixture_corpus,
    prime_programs,
    random_token_pool,
)

# 2^x computed with deliberate per-iteration busywork: solves a doubling
# sequence only when given the slow budget
PADDED_POW2_TEXT = text_of(
    encode_tokens(
        from_symbolic(
            "loop ((x + x) + (0 * (loop (1 + x) (2 * (2 * (2 * (2 + (2 + 2))))) 0))) x 1"
        )
    )
)
# 2^x computed by unit increments: exponential abstract time per term
INCREMENT_POW2_TEXT = text_of(
    encode_tokens(from_symbolic("loop (x + 1) (loop (x + x) x 1) 0"))
)


@pytest.fixture(scope="module")
def corpus():
    return fixture_corpus()


@pytest.fixture(scope="module")
def trie(corpus):
    return build_trie(corpus)


class TestUpdateRules:
    def test_first_solution_takes_both(self):
        store = SolutionStore()
        new, bs, bf = update_solutions(store, 40, "K", 1, 10)
        assert new and not bs and not bf
        rec = store.records[40]
        assert rec.smallest == rec.fastest == Champion("K", 1, 10)

    def test_faster_but_bigger_replaces_fastest_only(self):
        store = SolutionStore()
        store.update(40, "P5", 25, 515990)
        new, bs, bf = store.update(40, "P6", 33, 98390)
        assert (new, bs, bf) == (False, False, True)
        assert store.records[40].smallest.tokens == "P5"
        assert store.records[40].fastest.tokens == "P6"

    def test_equal_size_faster_replaces_smallest(self):
        store = SolutionStore()
        store.update(40, "AAA", 3, 100)
        new, bs, bf = store.update(40, "BBB", 3, 50)
        assert (bs, bf) == (True, True)

    def test_identical_challenger_changes_nothing(self):
        store = SolutionStore()
        store.update(40, "AAA", 3, 100)
        assert store.update(40, "AAA", 3, 100) == (False, False, False)

    def test_equal_keys_break_on_token_text(self):
        store = SolutionStore()
        store.update(40, "B A", 2, 7)
        new, bs, bf = store.update(40, "A B", 2, 7)
        assert (bs, bf) == (True, True)
        assert store.records[40].smallest.tokens == "A B"
        # and the reverse insertion order converges to the same store
        other = SolutionStore()
        other.update(40, "A B", 2, 7)
        assert other.update(40, "B A", 2, 7) == (False, False, False)
        assert other.records[40].smallest == store.records[40].smallest

    def test_never_loses_a_sequence(self):
        store = SolutionStore()
        store.update(40, "AAA", 3, 100)
        store.update(40, "Z", 9, 900)  # strictly worse
        assert 40 in store
        assert store.records[40].smallest.tokens == "AAA"

    def test_merge_is_order_independent(self):
        updates = [(40, "AAA", 3, 100), (40, "AB", 2, 220), (45, "K", 1, 5), (40, "BB", 2, 220)]
        one = SolutionStore()
        for anum, tok, size, speed in updates:
            one.update(anum, tok, size, speed)
        two = SolutionStore()
        for anum, tok, size, speed in reversed(updates):
            two.update(anum, tok, size, speed)
        for anum in one.records:
            assert one.records[anum].smallest == two.records[anum].smallest
            assert one.records[anum].fastest == two.records[anum].fastest


class TestStorePersistence:
    def test_tsv_round_trip(self, tmp_path):
        store = SolutionStore()
        store.update(40, FACTORIAL_TOKENS, 6, 1234)
        store.update(45, "K", 1, 55)
        store.update(45, "A", 1, 44)
        path = tmp_path / "solutions.tsv"
        store.save_tsv(path)
        loaded = SolutionStore.load_tsv(path)
        assert loaded.records.keys() == store.records.keys()
        for anum in store.records:
            assert loaded.records[anum].smallest == store.records[anum].smallest
            assert loaded.records[anum].fastest == store.records[anum].fastest

    def test_tsv_shape(self, tmp_path):
        store = SolutionStore()
        store.update(40, "K", 1, 10)
        path = tmp_path / "solutions.tsv"
        store.save_tsv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "A000040\t1\t10\tsmallest\tK"
        assert lines[1] == "A000040\t1\t10\tfastest\tK"


class TestCheckPool:
    def test_factorial_solves_a142(self, corpus, trie):
        store = SolutionStore()
        report = check_pool([FACTORIAL_TOKENS], trie, CheckMode("fast"), store)
        assert 142 in store
        assert report.new_solutions >= 1
        rec = store.records[142]
        assert rec.smallest.tokens == FACTORIAL_TOKENS
        assert rec.smallest.size == 6

    def test_empty_pool(self, trie):
        store = SolutionStore()
        report = check_pool([], trie, CheckMode("hybrid"), store)
        assert report.checked == report.unique == report.new_solutions == 0
        assert report.total_solutions == 0

    def test_counts_consistent(self, trie):
        pool = random_token_pool(500, 15, seed=77) + [FACTORIAL_TOKENS] * 3
        store = SolutionStore()
        report = check_pool(pool, trie, CheckMode("fast"), store)
        assert report.new_solutions <= report.unique <= report.checked
        assert report.checked == 503

    def test_undecodable_tallied(self, trie):
        store = SolutionStore()
        report = check_pool(["Z Z Z", FACTORIAL_TOKENS], trie, CheckMode("fast"), store)
        assert report.undecodable == 1
        assert 142 in store

    def test_slow_budget_candidate_needs_promotion(self, corpus, trie):
        # the padded doubler solves the 2^n entries only with the slow budget
        fast_store = SolutionStore()
        check_pool([PADDED_POW2_TEXT], trie, CheckMode("fast"), fast_store)
        hybrid_store = SolutionStore()
        hybrid_report = check_pool([PADDED_POW2_TEXT], trie, CheckMode("hybrid"), hybrid_store)
        assert 79 not in fast_store
        assert hybrid_report.promoted == 1
        assert 79 in hybrid_store

    def test_mode_inclusion(self, corpus, trie):
        pool = random_token_pool(1500, 30, seed=4242) + [PADDED_POW2_TEXT, FACTORIAL_TOKENS]
        solved = {}
        for kind in ("fast", "hybrid", "slow"):
            store = SolutionStore()
            check_pool(pool, trie, CheckMode(kind), store)
            solved[kind] = set(store.records)
        assert solved["fast"] <= solved["hybrid"] <= solved["slow"]
        assert 79 in solved["hybrid"] - solved["fast"]

    def test_parallel_determinism(self, corpus, trie):
        pool = random_token_pool(800, 22, seed=99) + [FACTORIAL_TOKENS, PADDED_POW2_TEXT]
        stores = []
        for jobs in (1, 2):
            store = SolutionStore()
            check_pool(pool, trie, CheckMode("hybrid"), store, jobs=jobs)
            stores.append(store)
        a, b = stores
        assert a.records.keys() == b.records.keys()
        for anum in a.records:
            assert a.records[anum].smallest == b.records[anum].smallest, anum
            assert a.records[anum].fastest == b.records[anum].fastest, anum

    def test_store_reverification(self, corpus, trie):
        by_anum = {e.anum: e for e in corpus}
        pool = random_token_pool(800, 18, seed=3)
        store = SolutionStore()
        check_pool(pool, trie, CheckMode("fast"), store)
        assert len(store) > 0
        for anum, rec in store.records.items():
            entry = by_anum[anum]
            for champ in (rec.smallest, rec.fastest):
                e = decode_tokens(champ.tokens.split())
                terms, _ = take_terms(e, SLOW_LIMITS, len(entry.terms))
                assert tuple(terms) == entry.terms


class TestMeasureSpeed:
    def test_deterministic(self, corpus):
        entry = next(e for e in corpus if e.anum == 142)
        speeds = {measure_speed(FACTORIAL, entry, SLOW_LIMITS) for _ in range(3)}
        assert len(speeds) == 1

    def test_not_a_solution(self, corpus):
        entry = next(e for e in corpus if e.anum == 40)
        with pytest.raises(NotASolution):
            measure_speed(FACTORIAL, entry, SLOW_LIMITS)

    def test_later_prime_program_is_faster(self, corpus):
        # the sixth-found prime program bounds its divisor loop and beats
        # the fifth by a wide margin; check ordering, not absolute numbers
        programs = prime_programs()
        entry = next(e for e in corpus if e.anum == 40)
        speed_p5 = measure_speed(programs[4], entry, SLOW_LIMITS)
        speed_p6 = measure_speed(programs[5], entry, SLOW_LIMITS)
        assert speed_p6 < speed_p5

    def test_constant_program_on_singleton(self):
        from seqsynth.oeis import SequenceEntry

        zero = decode_tokens(["A"])
        entry = SequenceEntry(1, (0,))
        s1 = measure_speed(zero, entry, SLOW_LIMITS)
        s2 = measure_speed(zero, entry, SLOW_LIMITS)
        assert s1 == s2 > 0


class TestGeneralization:
    def make_inputs(self, corpus):
        by_anum = {e.anum: e for e in corpus}
        bfiles = {}
        for path in sorted((FIXTURES / "bfiles").glob("b*.txt")):
            bf = load_bfile(path)
            if bf.anum in by_anum:
                bfiles[bf.anum] = extension_terms(by_anum[bf.anum], bf)
        return by_anum, bfiles

    def test_three_way_classification(self, corpus):
        by_anum, bfiles = self.make_inputs(corpus)
        store = SolutionStore()
        store.update(142, FACTORIAL_TOKENS, 6, 1000)        # generalizes
        store.update(900090, FACTORIAL_TOKENS, 6, 1000)     # extension diverges
        store.update(900091, INCREMENT_POW2_TEXT, 9, 2000)  # blows the budget
        report = generalization_check(store, corpus, bfiles, SLOW_LIMITS)
        assert report.per_anum[142] == {"smallest": GENERALIZES, "fastest": GENERALIZES}
        assert report.per_anum[900090] == {"smallest": MISMATCH, "fastest": MISMATCH}
        assert report.per_anum[900091] == {"smallest": TIMEOUT_CLASS, "fastest": TIMEOUT_CLASS}

    def test_timeouts_excluded_from_rate(self, corpus):
        by_anum, bfiles = self.make_inputs(corpus)
        store = SolutionStore()
        store.update(142, FACTORIAL_TOKENS, 6, 1000)
        store.update(900091, INCREMENT_POW2_TEXT, 9, 2000)
        report = generalization_check(store, corpus, bfiles, SLOW_LIMITS)
        assert report.percentage("smallest") == 100.0

    def test_classify_directly(self, corpus):
        by_anum, bfiles = self.make_inputs(corpus)
        entry = by_anum[142]
        assert classify_extension(FACTORIAL, entry.terms, bfiles[142], SLOW_LIMITS) == GENERALIZES
