import filecmp
import json
import random

import pytest

from seqsynth.checker import SolutionStore
from seqsynth.guidance import (
    BeamConfig,
    EmptyStore,
    NGramGuidance,
    beam_generate,
    bucket_of,
    parse_terms,
    render_terms,
)
from seqsynth.lang import (
    GlobalMacroTable,
    LangError,
    decode_tokens,
    encode_tokens,
    expand_global_macros,
    abstract_replace,
    text_of,
    tokens_of,
)
from seqsynth.oeis import build_trie
from seqsynth.synth import (
    LoopConfig,
    import_candidates,
    make_expander,
    mine_global_macros,
    random_programs,
    run_iteration,
    run_loop,
    training_pairs,
    export_training_pairs,
)
from helpers import FACTORIAL_TOKENS, fixture_corpus, prime_programs, sieve_primes


class TestRendering:
    def test_two_terms(self):
        assert render_terms([1, 12]) == ["1", "%", "2", "1"]

    def test_negative(self):
        assert render_terms([-5, 304]) == ["-", "5", "%", "4", "0", "3"]

    def test_invertible(self):
        rng = random.Random(8)
        for _ in range(300):
            terms = [rng.randint(-10**6, 10**6) for _ in range(rng.randint(1, 12))]
            assert parse_terms(render_terms(terms, max_tokens=0)) == terms

    def test_cap_drops_whole_terms(self):
        terms = [10**20] * 10  # 21 tokens per term once separated
        tokens = render_terms(terms, max_tokens=80)
        assert len(tokens) <= 80
        assert parse_terms(tokens) == terms[:3]

    def test_bucket_feature(self):
        assert bucket_of([0, -3, 12]) == "00-3+9"
        # only the first eight terms matter
        assert bucket_of(list(range(1, 20))) == bucket_of(list(range(1, 9)))
        assert bucket_of([1, 2]) != bucket_of([2, 1])


class TestRandomPrograms:
    def test_deterministic(self):
        a = random_programs(10, 20, seed=1)
        b = random_programs(10, 20, seed=1)
        assert a == b
        assert len(a) == 10
        for text in a:
            decode_tokens(text.split())

    def test_max_size_one_only_nullary(self):
        pool = random_programs(10, 1, seed=5)
        assert set(pool) <= {"A", "B", "C", "K", "L"}
        assert len(pool) == 5  # the space is exhausted

    def test_respects_size_cap(self):
        for text in random_programs(200, 12, seed=9):
            assert len(text.split()) <= 12

    def test_different_seeds_differ(self):
        assert random_programs(50, 20, seed=1) != random_programs(50, 20, seed=2)


class TestGuidanceTraining:
    def make_store(self):
        store = SolutionStore()
        primes = sieve_primes(30)
        for i, e in enumerate(prime_programs()):
            tokens = encode_tokens(e)
            store.update(40, text_of(tokens), len(tokens), 10_000 + i)
        return store, primes

    def test_single_solution_greedy_memorizes(self):
        model = NGramGuidance(order=4, smoothing=0.1)
        model.train([([1, 1, 2, 6], tokens_of(FACTORIAL_TOKENS))])
        out = beam_generate(model, [1, 1, 2, 6], BeamConfig(width=1, max_len=30, per_sequence_cap=1))
        assert out[0][0] == FACTORIAL_TOKENS

    def test_prime_store_reuses_fragments(self):
        primes = sieve_primes(30)
        pairs = [(primes, encode_tokens(e)) for e in prime_programs()]
        model = NGramGuidance(order=4, smoothing=0.1)
        model.train(pairs)
        cands = beam_generate(model, primes, BeamConfig(width=60, max_len=60, per_sequence_cap=60))
        texts = [t for t, _ in cands]
        assert sum("M" in t.split() for t in texts) >= 30  # compr everywhere
        assert sum("H D K B" in t for t in texts) >= 3  # ... mod (1 + x)

    def test_training_deterministic(self):
        primes = sieve_primes(30)
        pairs = [(primes, encode_tokens(e)) for e in prime_programs()]
        a = NGramGuidance(order=4, smoothing=0.1)
        a.train(pairs)
        b = NGramGuidance(order=4, smoothing=0.1)
        b.train(pairs)
        assert a.to_json() == b.to_json()

    def test_empty_store_raises(self):
        with pytest.raises(EmptyStore):
            NGramGuidance().train([])

    def test_save_load(self, tmp_path):
        model = NGramGuidance(order=3, smoothing=0.5)
        model.train([([1, 2], ["K"])])
        path = tmp_path / "model.json"
        model.save(path)
        loaded = NGramGuidance.load(path)
        assert loaded.to_json() == model.to_json()

    def test_merge_accumulates(self):
        a = NGramGuidance()
        a.train([([1], ["K"])])
        b = NGramGuidance()
        b.train([([1], ["K"])])
        b.merge(a)
        assert b.trained_pairs == 2


class TestBeam:
    def setup_method(self):
        primes = sieve_primes(30)
        self.primes = primes
        self.model = NGramGuidance(order=4, smoothing=0.1)
        self.model.train([(primes, encode_tokens(e)) for e in prime_programs()])

    def test_width_bounds_output(self):
        cands = beam_generate(self.model, self.primes, BeamConfig(240, 60, 240))
        assert len(cands) <= 240
        assert len(set(t for t, _ in cands)) == len(cands)

    def test_rank_monotone(self):
        cands = beam_generate(self.model, self.primes, BeamConfig(40, 50, 40))
        lps = [lp for _, lp in cands]
        assert lps == sorted(lps, reverse=True)

    def test_deterministic(self):
        a = beam_generate(self.model, self.primes, BeamConfig(25, 40, 25))
        b = beam_generate(self.model, self.primes, BeamConfig(25, 40, 25))
        assert a == b

    def test_width_one_is_greedy_prefix_of_wider(self):
        g = beam_generate(self.model, self.primes, BeamConfig(1, 60, 1))
        assert len(g) == 1

    def test_cap_applies(self):
        cands = beam_generate(self.model, self.primes, BeamConfig(40, 50, 5))
        assert len(cands) <= 5

    def test_corpus_candidate_bound(self):
        from seqsynth.synth import beam_candidates

        corpus = fixture_corpus()[:40]
        cfg = small_config(beam_width=6, per_sequence_cap=6)
        tagged = beam_candidates({"full": self.model}, corpus, cfg)
        assert len(tagged) <= 40
        assert all(len(texts) <= 6 for texts in tagged.values())
        assert sum(len(texts) for texts in tagged.values()) <= 40 * 6


class TestMacroMining:
    def test_frequent_fragment_appended(self):
        store = SolutionStore()
        # thirty programs sharing the K D L B fragment, nothing else repeats
        base = decode_tokens(tokens_of("D F K D L B D F K D L B F K D L B"))
        for i in range(30):
            # wrap in a varying number of +1 layers to make each distinct
            tokens = ["D", "B"] * i + encode_tokens(base)
            decode_tokens(tokens)
            store.update(1000 + i, text_of(tokens), len(tokens), 100 + i)
        table = GlobalMacroTable()
        mine_global_macros(store, table, budget=10, min_len=4, max_len=6, min_count=10)
        patterns = {text_of(list(e)) for e in table.entries}
        assert any("K D L B" in p for p in patterns)

    def test_all_known_no_change(self):
        store = SolutionStore()
        store.update(1, "D B D B D B K", 7, 10)
        table = GlobalMacroTable()
        mine_global_macros(store, table, budget=10, min_len=4, max_len=6, min_count=2)
        size_before = len(table)
        mine_global_macros(store, table, budget=10, min_len=4, max_len=6, min_count=2)
        assert len(table) == size_before

    def test_replace_expand_identity_after_mining(self):
        store = SolutionStore()
        for i, e in enumerate(prime_programs()):
            tokens = encode_tokens(e)
            store.update(2000 + i, text_of(tokens), len(tokens), 100)
        table = GlobalMacroTable()
        mine_global_macros(store, table, budget=10, min_len=4, max_len=20, min_count=2)
        assert len(table) > 0
        for rec in store.records.values():
            tokens = rec.smallest.tokens.split()
            replaced = abstract_replace(tokens, table)
            assert expand_global_macros(replaced, table) == tokens


class TestExchangeFiles:
    def test_export_import_round_trip(self, tmp_path):
        corpus = fixture_corpus()
        store = SolutionStore()
        store.update(142, FACTORIAL_TOKENS, 6, 1000)
        pairs = training_pairs(store, corpus, pairs_per_solution=2)
        export_training_pairs(pairs, tmp_path / "train.src", tmp_path / "train.tgt")
        src_lines = (tmp_path / "train.src").read_text().splitlines()
        tgt_lines = (tmp_path / "train.tgt").read_text().splitlines()
        assert len(src_lines) == len(tgt_lines) == 1
        assert tgt_lines[0] == FACTORIAL_TOKENS
        assert decode_tokens(tgt_lines[0].split())
        entry = next(e for e in corpus if e.anum == 142)
        assert parse_terms(src_lines[0].split()) == list(entry.terms)[: len(parse_terms(src_lines[0].split()))]

    def test_pairs_per_solution_one(self):
        corpus = fixture_corpus()
        store = SolutionStore()
        store.update(142, "K K K", 3, 9000)            # small but slow
        store.update(142, FACTORIAL_TOKENS, 6, 100)    # bigger but fast
        assert len(training_pairs(store, corpus, pairs_per_solution=1)) == 1
        assert len(training_pairs(store, corpus, pairs_per_solution=2)) == 2

    def test_import_drops_bad_lines(self, tmp_path):
        path = tmp_path / "candidates.txt"
        path.write_text(
            f"A000142\t{FACTORIAL_TOKENS}\n"
            "A000045\tZ Q X\n"
            f"notanum\t{FACTORIAL_TOKENS}\n",
            encoding="utf-8",
        )
        expander = make_expander(LoopConfig(), GlobalMacroTable())
        pool, dropped = import_candidates(path, expander)
        assert dropped == 2
        assert pool == {142: [FACTORIAL_TOKENS]}

    def test_missing_file(self, tmp_path):
        from seqsynth.synth import MissingFile

        with pytest.raises(MissingFile):
            import_candidates(tmp_path / "nope.txt")


def small_config(**overrides) -> LoopConfig:
    base = dict(
        seed=7,
        jobs=1,
        random_count=400,
        random_max_size=14,
        check_mode="hybrid",
        beam_width=8,
        beam_max_len=25,
        per_sequence_cap=8,
        ngram_order=3,
        models=("full",),
    )
    base.update(overrides)
    return LoopConfig(**base)


class TestLoop:
    def test_generation_zero_is_random_search(self, tmp_path):
        corpus = fixture_corpus()
        trie = build_trie(corpus)
        reports = run_loop(corpus, trie, small_config(), 1, tmp_path / "run")
        assert (tmp_path / "run" / "iter_0000" / "candidates.txt").exists()
        assert reports[0].total_solutions > 0

    def test_two_iterations_monotone(self, tmp_path):
        corpus = fixture_corpus()
        trie = build_trie(corpus)
        reports = run_loop(corpus, trie, small_config(), 2, tmp_path / "run")
        assert reports[1].total_solutions >= reports[0].total_solutions

    def test_rerun_byte_identical(self, tmp_path):
        corpus = fixture_corpus()
        trie = build_trie(corpus)
        run_loop(corpus, trie, small_config(), 2, tmp_path / "a")
        run_loop(corpus, trie, small_config(), 2, tmp_path / "b")
        diff = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
        assert not _tree_differs(diff)

    def test_second_model_does_not_lose_candidates(self, tmp_path):
        corpus = fixture_corpus()
        trie = build_trie(corpus)
        one = run_loop(corpus, trie, small_config(models=("full",)), 2, tmp_path / "one")
        two = run_loop(
            corpus, trie, small_config(models=("full", "half")), 2, tmp_path / "two"
        )
        assert two[1].unique >= one[1].unique

    def test_iteration_reports_written(self, tmp_path):
        corpus = fixture_corpus()
        trie = build_trie(corpus)
        run_loop(corpus, trie, small_config(), 2, tmp_path / "run")
        for i in range(2):
            d = tmp_path / "run" / f"iter_{i:04d}"
            report = json.loads((d / "report.json").read_text())
            assert "wall_time" not in report
            assert report["unique"] <= report["checked"]
            assert (d / "solutions.tsv").exists()
            assert (d / "macros.txt").exists()
        assert (tmp_path / "run" / "journal.tsv").exists()

    def test_snapshot_reload_reproduces_iteration(self, tmp_path):
        from seqsynth.synth import load_state

        corpus = fixture_corpus()
        trie = build_trie(corpus)
        cfg = small_config()
        run_loop(corpus, trie, cfg, 3, tmp_path / "orig")
        state = load_state(tmp_path / "orig", 1, cfg)
        state, report = run_iteration(state, corpus, trie, tmp_path / "replay")
        orig_dir = tmp_path / "orig" / "iter_0002"
        replay_dir = tmp_path / "replay" / "iter_0002"
        for name in ("solutions.tsv", "report.json", "candidates.txt", "macros.txt", "first_solved.tsv"):
            assert (replay_dir / name).read_bytes() == (orig_dir / name).read_bytes(), name

    def test_emitted_candidates_decode_or_tally(self, tmp_path):
        corpus = fixture_corpus()
        trie = build_trie(corpus)
        run_loop(corpus, trie, small_config(), 2, tmp_path / "run")
        report = json.loads((tmp_path / "run" / "iter_0001" / "report.json").read_text())
        lines = (tmp_path / "run" / "iter_0001" / "candidates.txt").read_text().splitlines()
        decodable = 0
        for line in lines:
            try:
                decode_tokens(line.split("\t")[1].split())
                decodable += 1
            except LangError:
                pass
        assert decodable + report["undecodable"] >= len(set(lines))


def _tree_differs(diff: filecmp.dircmp) -> bool:
    if diff.left_only or diff.right_only or diff.diff_files:
        return True
    return any(_tree_differs(sub) for sub in diff.subdirs.values())
