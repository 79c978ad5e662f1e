import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import filtergen as fg
from filtergen import (BleuConfig, Corpus, InputError, MarkovModel, NGramConfig,
                       SamplerConfig, Sequence, bleu, build_vocab, embed,
                       encode_corpus, fed, fit_ppmi_svd, lm_score, perplexity,
                       reverse_lm_score, self_bleu, synth_markov)
from filtergen.metrics import SWEEP_COLUMNS, temperature_sweep


@pytest.fixture(scope="module")
def vocab():
    return build_vocab(["a b c d e f g h"], max_size=20)


def _corpus(vocab, lines, split="x"):
    return encode_corpus(lines, vocab, split)


# ---------------------------------------------------------------------------
# BLEU / self-BLEU
# ---------------------------------------------------------------------------


def test_bleu_identity(vocab):
    hyps = _corpus(vocab, ["a b c", "d e f g", "a a b"])
    assert bleu(hyps, hyps) == pytest.approx(1.0)


def test_bleu_zero_overlap(vocab):
    hyps = _corpus(vocab, ["a b"])
    refs = _corpus(vocab, ["c d e", "f g"])
    assert bleu(hyps, refs) <= 1e-6


def test_bleu_hand_computed_bigram_case(vocab):
    # p1 = 3/4, p2 = 2/3, equal lengths so BP = 1: sqrt(1/2)
    hyps = _corpus(vocab, ["a b c d"])
    refs = _corpus(vocab, ["a b c e"])
    got = bleu(hyps, refs, BleuConfig(max_order=2))
    assert got == pytest.approx(math.sqrt(0.75 * (2.0 / 3.0)), abs=1e-4)
    assert got == pytest.approx(0.7071, abs=1e-4)


def test_bleu_duplicate_reference_never_decreases(vocab):
    hyps = _corpus(vocab, ["a b c", "c d a", "e f"])
    refs = ["a b d", "c d e f", "a c"]
    base = bleu(hyps, _corpus(vocab, refs))
    for dup in refs:
        again = bleu(hyps, _corpus(vocab, refs + [dup]))
        assert again >= base - 1e-12


def test_bleu_brevity_penalty():
    vocab = build_vocab(["a b c d e"], max_size=10)
    short = _corpus(vocab, ["a b"])
    refs = _corpus(vocab, ["a b c d"])
    got = bleu(short, refs, BleuConfig(max_order=1))
    assert got == pytest.approx(math.exp(1 - 4 / 2) * 1.0, abs=1e-9)


def test_bleu_range_and_validation(vocab):
    hyps = _corpus(vocab, ["a b c"])
    refs = _corpus(vocab, ["a c b"])
    assert 0.0 <= bleu(hyps, refs) <= 1.0
    with pytest.raises(InputError):
        BleuConfig(max_order=0)


def test_self_bleu_degenerate_cases(vocab):
    same = _corpus(vocab, ["a b c"] * 5)
    assert self_bleu(same) == pytest.approx(1.0)
    disjoint = _corpus(vocab, ["a b", "c d", "e f", "g h"])
    assert self_bleu(disjoint) <= 1e-6
    with pytest.raises(InputError):
        self_bleu(_corpus(vocab, ["a b"]))


def test_self_bleu_permutation_invariant(vocab):
    lines = ["a b c", "b c d", "a c", "d e f a", "b b"]
    forward = self_bleu(_corpus(vocab, lines))
    backward = self_bleu(_corpus(vocab, lines[::-1]))
    assert forward == pytest.approx(backward, abs=1e-12)


def test_self_bleu_matches_naive_leave_one_out(vocab):
    # independent oracle: score each sample against the others via plain bleu
    lines = ["a b c", "b c d", "a c b", "d e f a", "b b c"]
    samples = _corpus(vocab, lines)
    cfg = BleuConfig(max_order=3)
    naive = []
    for i in range(len(lines)):
        hyp = _corpus(vocab, [lines[i]])
        others = _corpus(vocab, lines[:i] + lines[i + 1:])
        naive.append(bleu(hyp, others, cfg))
    assert self_bleu(samples, cfg) == pytest.approx(float(np.mean(naive)), abs=1e-12)


def test_self_bleu_sampling_stability():
    source = fg.MarkovSource(("a", "b", "c"), np.full(3, 1 / 3),
                             np.full((3, 3), 1 / 3), 6)
    a = synth_markov(source, 1000, np.random.default_rng(1))
    b = synth_markov(source, 1000, np.random.default_rng(2))
    assert self_bleu(a) == pytest.approx(self_bleu(b), abs=0.02)


# ---------------------------------------------------------------------------
# LM scores
# ---------------------------------------------------------------------------


def test_lm_score_is_log_perplexity(s2):
    oracle = fg.train_mle(s2.train, None,
                          NGramConfig(order=2, delta=0.01, fixed_length=s2.length))
    assert lm_score(oracle, s2.test) == pytest.approx(
        math.log(perplexity(oracle, s2.test)), abs=1e-12)


def test_lm_score_flags_random_tokens(s2):
    oracle = fg.train_mle(s2.train, None,
                          NGramConfig(order=2, delta=0.01, fixed_length=s2.length))
    rng = np.random.default_rng(5)
    noise = Corpus(s2.vocab, tuple(
        Sequence(tuple(rng.integers(4, 4 + s2.vocab.content_size, s2.length)))
        for _ in range(500)), "noise")
    assert lm_score(oracle, noise) > lm_score(oracle, s2.test)


def test_lm_score_deterministic_chain():
    source = fg.MarkovSource(("a", "b"), np.array([1.0, 0.0]),
                             np.array([[0.0, 1.0], [1.0, 0.0]]), 4)
    model = MarkovModel(source)
    seq = model.sample(SamplerConfig(seed=0))
    assert lm_score(model, Corpus(model.vocab, (seq,), "t")) == pytest.approx(0.0, abs=1e-12)


def test_reverse_lm_identity_with_training_data(s2):
    cfg = NGramConfig(order=2, delta=0.01, fixed_length=s2.length)
    forward = lm_score(fg.train_mle(s2.train, None, cfg), s2.test)
    reverse = reverse_lm_score(s2.train, s2.test, cfg)
    assert reverse == pytest.approx(forward, abs=1e-12)


def test_reverse_lm_detects_mode_collapse(s2):
    cfg = NGramConfig(order=2, delta=0.01, fixed_length=s2.length)
    baseline = reverse_lm_score(s2.train, s2.test, cfg)
    collapsed = Corpus(s2.vocab, (s2.train.sequences[0],) * 1000, "collapsed")
    assert reverse_lm_score(collapsed, s2.test, cfg) > 2.0 * baseline


def test_reverse_lm_symmetric_scenario(s2):
    cfg = NGramConfig(order=2, delta=0.01, fixed_length=s2.length)
    forward = lm_score(fg.train_mle(s2.train, None, cfg), s2.test)
    fresh = synth_markov(s2.source, len(s2.train), np.random.default_rng(17), "gen")
    reverse = reverse_lm_score(fresh, s2.test, cfg)
    assert reverse == pytest.approx(forward, rel=0.10)


def test_reverse_lm_minimum_sample_count(s2):
    small = Corpus(s2.vocab, s2.train.sequences[:10], "small")
    with pytest.raises(InputError):
        reverse_lm_score(small, s2.test, NGramConfig(fixed_length=s2.length))


def test_lm_scores_invariant_under_shuffling(s2):
    cfg = NGramConfig(order=2, delta=0.01, fixed_length=s2.length)
    oracle = fg.train_mle(s2.train, None, cfg)
    rng = np.random.default_rng(3)
    shuffled = Corpus(s2.vocab, tuple(
        s2.test.sequences[i] for i in rng.permutation(len(s2.test))), "test")
    assert lm_score(oracle, shuffled) == pytest.approx(lm_score(oracle, s2.test), abs=1e-12)
    shuffled_train = Corpus(s2.vocab, tuple(
        s2.train.sequences[i] for i in rng.permutation(len(s2.train))), "train")
    assert reverse_lm_score(shuffled_train, s2.test, cfg) == pytest.approx(
        reverse_lm_score(s2.train, s2.test, cfg), abs=1e-12)


# ---------------------------------------------------------------------------
# Embeddings and Frechet distance
# ---------------------------------------------------------------------------


def test_embedding_shape_and_determinism(s2):
    em = fit_ppmi_svd(s2.train, dim=16)
    again = fit_ppmi_svd(s2.train, dim=16)
    assert np.array_equal(em.vectors, again.vectors)
    mat = embed(s2.test, em)
    assert mat.shape == (len(s2.test), em.dim)
    same = embed(Corpus(s2.vocab, (s2.test.sequences[0],) * 3, "x"), em)
    assert np.allclose(same[0], same[1]) and np.allclose(same[1], same[2])


def test_embedding_singleton_mean_is_token_row(s2):
    em = fit_ppmi_svd(s2.train, dim=8)
    tok = next(iter(s2.vocab.content_ids))
    single = embed(Corpus(s2.vocab, (Sequence((tok,)),), "x"), em)
    assert np.allclose(single[0], em.vectors[tok])


def test_embedding_from_neural_lm(vocab):
    lm = fg.NeuralLM(vocab, fg.NeuralConfig(embed_dim=6, hidden_dim=4, seed=2))
    em = fg.from_neural_lm(lm)
    assert em.provenance == "neural-lm-mean"
    assert em.dim == 6
    tok = vocab.id_of("a")
    single = embed(Corpus(vocab, (Sequence((tok,)),), "x"), em)
    assert np.allclose(single[0], lm.params["embed"][tok])


def _exact_gaussian_rows(mean, var):
    # two rows with exact sample mean and variance (ddof=1)
    return np.array([[mean - math.sqrt(var / 2)], [mean + math.sqrt(var / 2)]])


def test_fed_identity_and_nonnegativity(s2):
    em = fit_ppmi_svd(s2.train, dim=3)
    mat = embed(s2.test, em)
    d = fed(mat, mat)
    assert abs(d) <= 1e-6
    assert d >= -1e-8


def test_fed_one_dimensional_closed_form():
    a = _exact_gaussian_rows(0.0, 1.0)
    b = _exact_gaussian_rows(3.0, 1.0)
    assert np.var(a, ddof=1) == pytest.approx(1.0)
    assert fed(a, b) == pytest.approx(9.0, abs=1e-6)


def test_fed_commuting_covariances():
    base = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    a = base * math.sqrt(3.0 / 2.0)      # sample covariance I
    b = base * math.sqrt(3.0 / 2.0) * 2  # sample covariance 4I
    assert np.allclose(np.cov(a, rowvar=False), np.eye(2))
    assert fed(a, b) == pytest.approx(2.0, abs=1e-6)


def test_fed_symmetry(s2):
    em = fit_ppmi_svd(s2.train, dim=3)
    a = embed(s2.test, em)
    b = embed(s2.train, em)[: len(a)]
    assert fed(a, b) == pytest.approx(fed(b, a), abs=1e-8)


def test_fed_requires_enough_rows():
    with pytest.raises(InputError):
        fed(np.zeros((3, 3)), np.zeros((5, 3)))


@settings(max_examples=40)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=12),
       st.lists(st.floats(-5, 5), min_size=3, max_size=12))
def test_fed_matches_scalar_closed_form(xs, ys):
    a = np.array(xs)[:, None]
    b = np.array(ys)[:, None]
    mu_a, mu_b = a.mean(), b.mean()
    # regularized standard deviations, matching the covariance treatment
    sd_a = math.sqrt(np.var(a, ddof=1) + 1e-6)
    sd_b = math.sqrt(np.var(b, ddof=1) + 1e-6)
    expected = (mu_a - mu_b) ** 2 + (sd_a - sd_b) ** 2
    assert fed(a, b) == pytest.approx(expected, abs=1e-8)


# ---------------------------------------------------------------------------
# Temperature sweep
# ---------------------------------------------------------------------------


def test_sweep_degenerate_single_point_matches_direct_calls(s2):
    report = temperature_sweep(
        s2.generator, s2.train, s2.test, [1.0], ("bleu", "selfbleu", "lm"),
        n_per_point=300, seed=99, max_len=s2.length)
    assert len(report.rows) == 1
    row = report.rows[0]
    sampler = SamplerConfig(temperature=1.0, max_len=s2.length,
                            seed=fg.seeding.derive_seed(99, "sample", 1.0))
    samples = s2.generator.sample_corpus(300, sampler,
                                         np.random.default_rng(sampler.seed))
    assert row["bleu5"] == pytest.approx(bleu(samples, s2.test))
    assert row["self_bleu5"] == pytest.approx(self_bleu(samples))
    assert row["lm_score"] == pytest.approx(lm_score(s2.generator, samples))


def test_sweep_grid_rows_and_streams(s2, s2_disc):
    disc, _ = s2_disc
    report = temperature_sweep(
        s2.generator, s2.train, s2.test, [0.9, 1.0, 1.1, 1.2], ("bleu", "selfbleu"),
        n_per_point=400, seed=7, disc=disc, c_values=(0.5,), max_len=s2.length)
    assert len(report.rows) == 4 * 3  # baseline, accepted, rejected per temperature
    streams = {(r["temperature"], r["stream"]) for r in report.rows}
    for t in (0.9, 1.0, 1.1, 1.2):
        assert (t, "baseline") in streams
        assert (t, "accepted") in streams
        assert (t, "rejected") in streams
    text = report.csv_text()
    assert text.splitlines()[0] == ",".join(SWEEP_COLUMNS)


def test_sweep_accepted_not_dominated_by_baseline(s2, s2_disc):
    # quality/diversity: the filtered stream must not lose on both axes, and
    # on this scenario it should actually improve the quality axis
    disc, _ = s2_disc
    report = temperature_sweep(
        s2.generator, s2.train, s2.test, [1.0], ("bleu", "selfbleu"),
        n_per_point=2000, seed=11, disc=disc, c_values=(0.5,), max_len=s2.length)
    rows = {r["stream"]: r for r in report.rows}
    base, acc = rows["baseline"], rows["accepted"]
    assert not (base["bleu5"] > acc["bleu5"] and base["self_bleu5"] < acc["self_bleu5"])
    assert acc["bleu5"] >= base["bleu5"]
