import numpy as np
import pytest

import filtergen as fg
from filtergen import (Corpus, DiscConfig, InputError, MarkovModel, MarkovSource,
                       SamplerConfig, Sequence, TextCNN, error_rate,
                       train_discriminator, train_discriminator_corpora)

FAST = DiscConfig(embed_dim=8, kernels2=8, kernels3=8, lr=0.1, batch_size=128,
                  max_epochs=60, patience=5, seed=0)


def _start_token_sources(length=4):
    # real sequences start with "a", generated ones with "b"; neither start
    # token ever recurs, so the distinguishing windows are unambiguous for a
    # max-pooled window classifier
    trans = np.array([
        [0.0, 0.0, 0.5, 0.5],
        [0.0, 0.0, 0.5, 0.5],
        [0.0, 0.0, 0.4, 0.6],
        [0.0, 0.0, 0.6, 0.4],
    ])
    real = MarkovSource(("a", "b", "c", "d"), np.array([1.0, 0.0, 0.0, 0.0]),
                        trans, length)
    fake = MarkovSource(("a", "b", "c", "d"), np.array([0.0, 1.0, 0.0, 0.0]),
                        trans, length)
    return real, fake


def test_separable_classes_reach_high_accuracy():
    real_src, fake_src = _start_token_sources()
    real = fg.synth_markov(real_src, 1500, np.random.default_rng(1), "train")
    disc, report = train_discriminator(real, MarkovModel(fake_src), FAST,
                                       np.random.default_rng(1))
    assert report.final_valid_accuracy >= 0.99
    fake_samples = MarkovModel(fake_src).sample_corpus(
        200, SamplerConfig(max_len=4, seed=2), np.random.default_rng(2))
    p_real = disc.predict_corpus(real.sequences[:200])
    p_fake = disc.predict_corpus(fake_samples)
    assert p_real.min() > 0.9
    assert p_fake.max() < 0.1


def test_indistinguishable_classes_stay_near_chance():
    uniform = MarkovSource(("a", "b", "c"), np.array([0.4, 0.3, 0.3]),
                           np.array([[0.4, 0.3, 0.3],
                                     [0.3, 0.4, 0.3],
                                     [0.3, 0.3, 0.4]]), 4)
    real = fg.synth_markov(uniform, 4000, np.random.default_rng(3), "train")
    disc, report = train_discriminator(real, MarkovModel(uniform), FAST,
                                       np.random.default_rng(3))
    assert 0.45 <= report.final_valid_accuracy <= 0.55


class CountingGenerator:
    """Wraps a generator and records every sample_corpus request size."""

    def __init__(self, inner):
        self.inner = inner
        self.vocab = inner.vocab
        self.fixed_length = inner.fixed_length
        self.requests = []

    def sample_corpus(self, n, cfg, rng=None, split=""):
        self.requests.append(n)
        return self.inner.sample_corpus(n, cfg, rng, split)


def test_training_classes_stay_balanced():
    real_src, fake_src = _start_token_sources()
    real = fg.synth_markov(real_src, 500, np.random.default_rng(4), "train")
    counter = CountingGenerator(MarkovModel(fake_src))
    cfg = DiscConfig(embed_dim=8, kernels2=4, kernels3=4, lr=0.1, batch_size=128,
                     max_epochs=8, patience=2, seed=4)
    train_discriminator(real, counter, cfg, np.random.default_rng(4))
    n_val = len(real) // 10
    n_train = len(real) - n_val
    assert counter.requests[0] == n_val  # fixed validation negatives
    assert all(n == n_train for n in counter.requests[1:])  # fresh, balanced epochs


def test_vocab_mismatch_rejected():
    real_src, fake_src = _start_token_sources()
    other = MarkovSource(("x", "y"), np.array([0.5, 0.5]),
                         np.array([[0.5, 0.5], [0.5, 0.5]]), 4)
    real = fg.synth_markov(real_src, 100, np.random.default_rng(5), "train")
    with pytest.raises(InputError):
        train_discriminator(real, MarkovModel(other), FAST)


def test_embeddings_copied_from_neural_generator_and_frozen():
    vocab = fg.build_vocab(["a b c"], max_size=10)
    gen = fg.NeuralLM(vocab, fg.NeuralConfig(embed_dim=6, hidden_dim=4, seed=0))
    real = Corpus(vocab, tuple(Sequence((4, 5, 6)) for _ in range(40)), "train")
    cfg = DiscConfig(max_epochs=2, patience=1, lr=0.1, batch_size=16, seed=0)
    disc, _ = train_discriminator(real, gen, cfg, np.random.default_rng(0))
    assert disc.embed_frozen
    assert np.array_equal(disc.params["embed"], gen.params["embed"])
    assert "embed" not in disc.trainable()


def test_padding_never_changes_predictions():
    vocab = fg.build_vocab(["a b c d e"], max_size=10)
    rng = np.random.default_rng(6)
    disc = TextCNN(vocab, DiscConfig(embed_dim=8, seed=6), rng)
    seqs = [Sequence((4, 5, 6)), Sequence((5,)), Sequence((6, 7, 8, 4, 5))]
    singly = np.array([disc.predict(s) for s in seqs])
    batched = disc.predict_corpus(seqs)  # pads to the longest in the batch
    assert np.abs(singly - batched).max() <= 1e-6
    # explicit extra padding columns
    from filtergen.data import PAD, corpus_to_arrays
    ids, lengths = corpus_to_arrays(seqs, PAD)
    padded = np.concatenate([ids, np.full((3, 4), PAD)], axis=1)
    logits_a, _ = disc._forward(ids, lengths)
    logits_b, _ = disc._forward(padded, lengths)
    assert np.abs(logits_a - logits_b).max() <= 1e-9


def test_prediction_strictly_inside_unit_interval():
    vocab = fg.build_vocab(["a"], max_size=4)
    disc = TextCNN(vocab, DiscConfig(embed_dim=4, seed=7), np.random.default_rng(7))
    p = disc.predict(Sequence((4, 4)))
    assert 0.0 < p < 1.0


def test_gradients_match_finite_differences():
    vocab = fg.build_vocab(["a b c"], max_size=10)
    rng = np.random.default_rng(8)
    disc = TextCNN(vocab, DiscConfig(embed_dim=4, kernels2=3, kernels3=2, seed=8), rng)
    batch = [Sequence((4, 5, 6, 4)), Sequence((5, 6)), Sequence((6, 4, 5))]
    labels = np.array([1.0, 0.0, 1.0])
    _, grads = disc.loss_and_grads(batch, labels)
    eps = 1e-5
    worst = 0.0
    for name in disc.trainable():
        param = disc.params[name]
        for idx in np.ndindex(param.shape):
            orig = param[idx]
            param[idx] = orig + eps
            up, _ = disc.loss_and_grads(batch, labels)
            param[idx] = orig - eps
            down, _ = disc.loss_and_grads(batch, labels)
            param[idx] = orig
            numeric = (up - down) / (2 * eps)
            denom = max(abs(numeric), abs(grads[name][idx]), 1e-8)
            worst = max(worst, abs(numeric - grads[name][idx]) / denom)
    assert worst <= 1e-3
    # a sampled conv weight agrees to the tighter tolerance as well
    param = disc.params["conv2_w"]
    idx = (1, 1)
    orig = param[idx]
    param[idx] = orig + 1e-4
    up, _ = disc.loss_and_grads(batch, labels)
    param[idx] = orig - 1e-4
    down, _ = disc.loss_and_grads(batch, labels)
    param[idx] = orig
    numeric = (up - down) / 2e-4
    assert abs(numeric - grads["conv2_w"][idx]) / max(abs(numeric), 1e-8) <= 1e-4


class FixedDisc:
    def __init__(self, fn):
        self.fn = fn

    def predict_corpus(self, corpus):
        return np.array([self.fn(s) for s in corpus])


def test_error_rate_perfect_and_constant():
    real_src, fake_src = _start_token_sources()
    real = fg.synth_markov(real_src, 300, np.random.default_rng(9), "test")
    fake = fg.synth_markov(fake_src, 300, np.random.default_rng(10), "gen")
    a_id = real_src.vocab.id_of("a")
    perfect = FixedDisc(lambda s: 0.99 if s.ids[0] == a_id else 0.01)
    assert error_rate(perfect, real, fake) == 0.0
    for const in (0.2, 0.5, 0.9):
        assert error_rate(FixedDisc(lambda s: const), real, fake) == 0.5


def test_report_running_best_non_decreasing(s2_disc):
    _, report = s2_disc
    best = report.running_best()
    assert all(a <= b for a, b in zip(best, best[1:]))
    assert report.final_valid_accuracy == best[-1]
    assert report.converged
    assert 0.0 <= min(report.valid_accuracy) <= max(report.valid_accuracy) <= 1.0


def test_train_discriminator_corpora_balances_by_subsampling():
    real_src, fake_src = _start_token_sources()
    real = fg.synth_markov(real_src, 400, np.random.default_rng(11), "train")
    fake = fg.synth_markov(fake_src, 1000, np.random.default_rng(12), "gen")
    cfg = DiscConfig(embed_dim=8, kernels2=4, kernels3=4, lr=0.1, batch_size=64,
                     max_epochs=20, patience=3, seed=13)
    disc, report = train_discriminator_corpora(real, fake, cfg,
                                               np.random.default_rng(13))
    assert report.final_valid_accuracy >= 0.95  # separable by first token
