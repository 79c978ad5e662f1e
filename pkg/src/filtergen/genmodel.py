"""Autoregressive sequence generators with exact log-probabilities.

Three interchangeable model kinds:

* ``NGramLM`` -- additively smoothed n-gram counts (the default generator;
  exact, fast, deterministic).
* ``NeuralLM`` -- a tiny recurrent LM trained by gradient descent with
  manually derived backpropagation, for exercising gradient-based training.
* ``MarkovModel`` -- an exact wrapper around a ``MarkovSource``, used as
  analytic ground truth.

All models share one contract: ``seq_logprob``, ``sample_corpus`` /
``sample`` (temperature-controlled ancestral sampling), a ``vocab``, and a
``fixed_length`` attribute (``None`` means variable length with an EOS
event). In fixed-length mode the per-step distribution is supported on the
content tokens only, so the model is a proper distribution over the
enumerable domain V^L; in variable-length mode EOS and UNK join the
support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import BOS, EOS, NUM_RESERVED, UNK, Corpus, MarkovSource, Sequence, split_tail
from .errors import InputError

DEFAULT_MAX_LEN = 64


@dataclass(frozen=True)
class SamplerConfig:
    """Ancestral-sampling knobs: softmax temperature, length cap, seed."""

    temperature: float = 1.0
    max_len: int = DEFAULT_MAX_LEN
    seed: int = 0

    def __post_init__(self):
        if not self.temperature > 0:
            raise InputError("temperature must be > 0")
        if self.max_len < 1:
            raise InputError("max_len must be >= 1")


def support_ids(vocab, fixed_length) -> np.ndarray:
    """Token ids a model may emit; content only when the length is fixed."""
    content = list(vocab.content_ids)
    if fixed_length is not None:
        return np.array(content, dtype=np.int64)
    return np.array([EOS, UNK] + content, dtype=np.int64)


def _support_index(vocab, support) -> np.ndarray:
    index = np.full(len(vocab), -1, dtype=np.int64)
    index[support] = np.arange(len(support))
    return index


def _resolve_rng(rng, cfg: SamplerConfig):
    return np.random.default_rng(cfg.seed) if rng is None else rng


def _apply_temperature(probs: np.ndarray, temperature: float) -> np.ndarray:
    # p^(1/T) renormalized == dividing softmax logits by T; computed in log
    # space so extreme temperatures stay stable (T -> 0 gives the argmax)
    if temperature == 1.0:
        return probs
    with np.errstate(divide="ignore"):
        logs = np.log(probs) / temperature
    logs -= logs.max(axis=-1, keepdims=True)
    scaled = np.exp(logs)
    return scaled / scaled.sum(axis=-1, keepdims=True)


def _draw_from_rows(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    hits = (cum_rows < u[:, None]).sum(axis=1)
    return np.minimum(hits, cum_rows.shape[1] - 1)


class NGramLM:
    """Order-n language model with additive delta-smoothing.

    Every conditional is strictly positive and sums to one over the
    support, so sequence log-probabilities are always finite.
    """

    kind = "ngram"

    def __init__(self, vocab, order: int = 2, delta: float = 0.01,
                 fixed_length: int | None = None):
        if order < 1:
            raise InputError("order must be >= 1")
        if not delta > 0:
            raise InputError("smoothing delta must be > 0")
        self.vocab = vocab
        self.order = order
        self.delta = float(delta)
        self.fixed_length = fixed_length
        self.support = support_ids(vocab, fixed_length)
        self._sup_index = _support_index(vocab, self.support)
        self._counts: dict[tuple[int, ...], np.ndarray] = {}
        self._row_cache: dict[tuple[int, ...], np.ndarray] = {}

    # -- training ---------------------------------------------------------

    def fit(self, corpus: Corpus) -> "NGramLM":
        if corpus.vocab != self.vocab:
            raise InputError("corpus vocabulary does not match the model")
        for seq in corpus:
            for ctx, tok in self._events(seq):
                row = self._counts.get(ctx)
                if row is None:
                    row = np.zeros(len(self.support), dtype=np.float64)
                    self._counts[ctx] = row
                row[self._event_index(tok)] += 1.0
        self._row_cache.clear()
        return self

    def _events(self, seq: Sequence):
        ids = seq.ids
        ctx_len = self.order - 1
        padded = (BOS,) * ctx_len + ids
        for t, tok in enumerate(ids):
            yield padded[t: t + ctx_len], tok
        if self.fixed_length is None:
            yield padded[len(ids): len(ids) + ctx_len], EOS

    def _event_index(self, token_id: int) -> int:
        idx = self._sup_index[token_id]
        if idx < 0:
            raise InputError(f"token id {token_id} is outside the model support")
        return int(idx)

    # -- probabilities ----------------------------------------------------

    def cond_probs(self, context: tuple[int, ...]) -> np.ndarray:
        """Smoothed next-token distribution over ``self.support``."""
        row = self._row_cache.get(context)
        if row is None:
            counts = self._counts.get(context)
            s = len(self.support)
            if counts is None:
                row = np.full(s, 1.0 / s)
            else:
                row = (counts + self.delta) / (counts.sum() + self.delta * s)
            row.setflags(write=False)
            self._row_cache[context] = row
        return row

    def _context_at(self, ids: tuple[int, ...], t: int) -> tuple[int, ...]:
        ctx_len = self.order - 1
        padded = (BOS,) * ctx_len + ids
        return padded[t: t + ctx_len]

    def seq_logprob(self, seq: Sequence) -> float:
        total = 0.0
        for ctx, tok in self._events(seq):
            total += math.log(self.cond_probs(ctx)[self._event_index(tok)])
        return total

    # -- sampling ---------------------------------------------------------

    def sample_corpus(self, n: int, cfg: SamplerConfig, rng=None,
                      split: str = "") -> Corpus:
        """Ancestral sampling; the first step never emits EOS, so sequences
        are always non-empty."""
        rng = _resolve_rng(rng, cfg)
        length_cap = (min(self.fixed_length, cfg.max_len)
                      if self.fixed_length is not None else cfg.max_len)
        ctx_len = self.order - 1
        contexts = np.full((n, max(ctx_len, 1)), BOS, dtype=np.int64)
        tokens = np.full((n, length_cap), -1, dtype=np.int64)
        active = np.ones(n, dtype=bool)
        eos_sup = int(self._sup_index[EOS]) if self.fixed_length is None else -1
        for t in range(length_cap):
            u = rng.random(n)
            if not active.any():
                continue
            keys = contexts[:, :ctx_len] if ctx_len else np.zeros((n, 0), dtype=np.int64)
            uniq, inverse = np.unique(keys[active], axis=0, return_inverse=True)
            rows = np.empty((len(uniq), len(self.support)))
            for i, row_key in enumerate(uniq):
                rows[i] = _apply_temperature(
                    self.cond_probs(tuple(int(v) for v in row_key)), cfg.temperature)
            if t == 0 and eos_sup >= 0:
                rows[:, eos_sup] = 0.0
                rows /= rows.sum(axis=1, keepdims=True)
            cum = np.cumsum(rows, axis=1)
            picks = _draw_from_rows(cum[inverse], u[active])
            if self.fixed_length is None:
                ended = picks == eos_sup
            else:
                ended = np.zeros(len(picks), dtype=bool)
            emitted = self.support[picks]
            idx = np.flatnonzero(active)
            keep = ~ended
            tokens[idx[keep], t] = emitted[keep]
            if ctx_len:
                new_ctx = np.concatenate(
                    [contexts[idx[keep], 1:ctx_len], emitted[keep, None]], axis=1)
                contexts[idx[keep], :ctx_len] = new_ctx
            active[idx[ended]] = False
        seqs = []
        for row in tokens:
            seqs.append(Sequence(tuple(int(v) for v in row[row >= 0])))
        return Corpus(self.vocab, tuple(seqs), split)

    def sample(self, cfg: SamplerConfig, rng=None) -> Sequence:
        return self.sample_corpus(1, cfg, rng).sequences[0]


class MarkovModel:
    """Exact generator view of a MarkovSource (fixed length, no smoothing)."""

    kind = "markov"

    def __init__(self, source: MarkovSource):
        self.source = source
        self.vocab = source.vocab
        self.fixed_length = source.length
        self.support = support_ids(self.vocab, self.fixed_length)

    def seq_logprob(self, seq: Sequence) -> float:
        from .data import exact_prob

        p = exact_prob(self.source, seq)
        return math.log(p) if p > 0 else -math.inf

    def sample_corpus(self, n: int, cfg: SamplerConfig, rng=None,
                      split: str = "") -> Corpus:
        from .data import _sample_chain

        rng = _resolve_rng(rng, cfg)
        length = min(self.fixed_length, cfg.max_len)
        if cfg.temperature == 1.0:
            states = _sample_chain(self.source, n, length, rng)
        else:
            src = MarkovSource(
                self.source.tokens,
                _apply_temperature(self.source.initial, cfg.temperature),
                np.apply_along_axis(
                    _apply_temperature, 1, self.source.transition, cfg.temperature),
                length,
            )
            states = _sample_chain(src, n, length, rng)
        seqs = tuple(Sequence(tuple(int(v) for v in row + NUM_RESERVED))
                     for row in states)
        return Corpus(self.vocab, seqs, split)

    def sample(self, cfg: SamplerConfig, rng=None) -> Sequence:
        return self.sample_corpus(1, cfg, rng).sequences[0]


# ---------------------------------------------------------------------------
# Tiny recurrent LM with hand-written backpropagation.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NGramConfig:
    order: int = 2
    delta: float = 0.01
    fixed_length: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class NeuralConfig:
    embed_dim: int = 32
    hidden_dim: int = 64
    lr: float = 0.1
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 3
    fixed_length: int | None = None
    seed: int = 0


@dataclass
class TrainReport:
    """Per-epoch negative log-likelihoods observed during gradient training."""

    train_nll: list
    valid_nll: list
    best_epoch: int
    stopped_early: bool


class NeuralLM:
    """One-layer Elman RNN over token embeddings, trained by MLE.

    Forward/backward passes are explicit numpy; float64 throughout so the
    analytic gradients can be checked against central finite differences.
    """

    kind = "neural"

    def __init__(self, vocab, cfg: NeuralConfig, rng=None):
        self.vocab = vocab
        self.cfg = cfg
        self.fixed_length = cfg.fixed_length
        self.support = support_ids(vocab, cfg.fixed_length)
        self._sup_index = _support_index(vocab, self.support)
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        v, de, dh, s = len(vocab), cfg.embed_dim, cfg.hidden_dim, len(self.support)
        self.params = {
            "embed": rng.standard_normal((v, de)) * 0.1,
            "w_xh": rng.standard_normal((de, dh)) / math.sqrt(de),
            "w_hh": rng.standard_normal((dh, dh)) / math.sqrt(dh),
            "b_h": np.zeros(dh),
            "w_hy": rng.standard_normal((dh, s)) / math.sqrt(dh),
            "b_y": np.zeros(s),
        }
        self.train_report: TrainReport | None = None

    @property
    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    # -- batching ---------------------------------------------------------

    def _targets(self, seqs) -> tuple[np.ndarray, np.ndarray]:
        """Target-event matrix (support indices) and per-sequence event counts."""
        extra = 0 if self.fixed_length is not None else 1
        events = np.array([len(s) + extra for s in seqs], dtype=np.int64)
        width = int(events.max())
        targets = np.zeros((len(seqs), width), dtype=np.int64)
        for i, seq in enumerate(seqs):
            idx = self._sup_index[np.array(seq.ids)]
            if (idx < 0).any():
                raise InputError("sequence contains ids outside the model support")
            targets[i, : len(seq)] = idx
            if extra:
                targets[i, len(seq)] = self._sup_index[EOS]
        return targets, events

    def _step_stack(self, targets, events):
        """Input token ids per step (BOS first, then the previous target)."""
        n, width = targets.shape
        inputs = np.full((n, width), BOS, dtype=np.int64)
        inputs[:, 1:] = self.support[targets[:, :-1]]
        mask = np.arange(width)[None, :] < events[:, None]
        return inputs, mask

    def nll_and_grads(self, seqs) -> tuple[float, dict]:
        """Mean per-event NLL of a batch plus gradients for every parameter."""
        p = self.params
        targets, events = self._targets(seqs)
        inputs, mask = self._step_stack(targets, events)
        n, width = targets.shape
        dh_dim = p["w_hh"].shape[0]
        hs = np.zeros((width + 1, n, dh_dim))
        xs = np.empty((width, n, p["embed"].shape[1]))
        probs = np.empty((width, n, len(self.support)))
        total_events = float(mask.sum())
        loss = 0.0
        for t in range(width):
            x = p["embed"][inputs[:, t]]
            h = np.tanh(x @ p["w_xh"] + hs[t] @ p["w_hh"] + p["b_h"])
            logits = h @ p["w_hy"] + p["b_y"]
            logits -= logits.max(axis=1, keepdims=True)
            e = np.exp(logits)
            prob = e / e.sum(axis=1, keepdims=True)
            xs[t], hs[t + 1], probs[t] = x, h, prob
            picked = prob[np.arange(n), targets[:, t]]
            loss -= float((np.log(picked) * mask[:, t]).sum())
        loss /= total_events

        grads = {k: np.zeros_like(v) for k, v in p.items()}
        dh_next = np.zeros((n, dh_dim))
        for t in range(width - 1, -1, -1):
            dlogits = probs[t].copy()
            dlogits[np.arange(n), targets[:, t]] -= 1.0
            dlogits *= mask[:, t, None] / total_events
            grads["w_hy"] += hs[t + 1].T @ dlogits
            grads["b_y"] += dlogits.sum(axis=0)
            dh = dlogits @ p["w_hy"].T + dh_next
            dz = dh * (1.0 - hs[t + 1] ** 2)
            grads["b_h"] += dz.sum(axis=0)
            grads["w_xh"] += xs[t].T @ dz
            grads["w_hh"] += hs[t].T @ dz
            np.add.at(grads["embed"], inputs[:, t], dz @ p["w_xh"].T)
            dh_next = dz @ p["w_hh"].T
        return loss, grads

    def mean_nll(self, corpus: Corpus) -> float:
        total, events = 0.0, 0
        for start in range(0, len(corpus), 256):
            batch = corpus.sequences[start: start + 256]
            targets, ev = self._targets(batch)
            inputs, mask = self._step_stack(targets, ev)
            nll = self._batch_nll(inputs, targets, mask)
            total += nll
            events += int(mask.sum())
        return total / events

    def _batch_nll(self, inputs, targets, mask) -> float:
        p = self.params
        n, width = targets.shape
        h = np.zeros((n, p["w_hh"].shape[0]))
        loss = 0.0
        for t in range(width):
            x = p["embed"][inputs[:, t]]
            h = np.tanh(x @ p["w_xh"] + h @ p["w_hh"] + p["b_h"])
            logits = h @ p["w_hy"] + p["b_y"]
            logits -= logits.max(axis=1, keepdims=True)
            logz = np.log(np.exp(logits).sum(axis=1))
            picked = logits[np.arange(n), targets[:, t]] - logz
            loss -= float((picked * mask[:, t]).sum())
        return loss

    def seq_logprob(self, seq: Sequence) -> float:
        targets, events = self._targets([seq])
        inputs, mask = self._step_stack(targets, events)
        return -self._batch_nll(inputs, targets, mask)

    # -- training ---------------------------------------------------------

    def fit(self, train: Corpus, valid: Corpus) -> "NeuralLM":
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed + 1)
        velocity = {k: np.zeros_like(v) for k, v in self.params.items()}
        best = {k: v.copy() for k, v in self.params.items()}
        best_valid = math.inf
        best_epoch = -1
        train_nll, valid_nll = [], []
        stale = 0
        stopped_early = False
        for epoch in range(cfg.max_epochs):
            order = rng.permutation(len(train))
            for start in range(0, len(train), cfg.batch_size):
                batch = [train.sequences[i] for i in order[start: start + cfg.batch_size]]
                _, grads = self.nll_and_grads(batch)
                for k, g in grads.items():
                    velocity[k] = cfg.momentum * velocity[k] - cfg.lr * g
                    self.params[k] += velocity[k]
            train_nll.append(self.mean_nll(train))
            valid_nll.append(self.mean_nll(valid))
            if valid_nll[-1] < best_valid - 1e-12:
                best_valid = valid_nll[-1]
                best_epoch = epoch
                best = {k: v.copy() for k, v in self.params.items()}
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    stopped_early = True
                    break
        self.params = best
        self.train_report = TrainReport(train_nll, valid_nll, best_epoch, stopped_early)
        return self

    # -- sampling ---------------------------------------------------------

    def sample_corpus(self, n: int, cfg: SamplerConfig, rng=None,
                      split: str = "") -> Corpus:
        """Ancestral sampling; the first step never emits EOS."""
        rng = _resolve_rng(rng, cfg)
        p = self.params
        length_cap = (min(self.fixed_length, cfg.max_len)
                      if self.fixed_length is not None else cfg.max_len)
        h = np.zeros((n, p["w_hh"].shape[0]))
        current = np.full(n, BOS, dtype=np.int64)
        tokens = np.full((n, length_cap), -1, dtype=np.int64)
        active = np.ones(n, dtype=bool)
        eos_sup = int(self._sup_index[EOS]) if self.fixed_length is None else -1
        for t in range(length_cap):
            u = rng.random(n)
            if not active.any():
                continue
            x = p["embed"][current]
            h = np.tanh(x @ p["w_xh"] + h @ p["w_hh"] + p["b_h"])
            logits = (h @ p["w_hy"] + p["b_y"]) / cfg.temperature
            if t == 0 and eos_sup >= 0:
                logits[:, eos_sup] = -np.inf
            logits -= logits.max(axis=1, keepdims=True)
            e = np.exp(logits)
            rows = e / e.sum(axis=1, keepdims=True)
            picks = _draw_from_rows(np.cumsum(rows, axis=1), u)
            emitted = self.support[picks]
            ended = (picks == eos_sup) & active
            live = active & ~ended
            tokens[live, t] = emitted[live]
            current = np.where(live, emitted, current)
            active = live
        seqs = [Sequence(tuple(int(v) for v in row[row >= 0])) for row in tokens]
        return Corpus(self.vocab, tuple(seqs), split)

    def sample(self, cfg: SamplerConfig, rng=None) -> Sequence:
        return self.sample_corpus(1, cfg, rng).sequences[0]


# ---------------------------------------------------------------------------
# Shared entry points.
# ---------------------------------------------------------------------------


def train_mle(train: Corpus, valid: Corpus | None, config) -> "NGramLM | NeuralLM":
    """Fit a generator by maximum likelihood; dispatch on the config type."""
    if train is None or len(train) == 0:
        raise InputError("training corpus is empty")
    if isinstance(config, NGramConfig):
        model = NGramLM(train.vocab, config.order, config.delta, config.fixed_length)
        return model.fit(train)
    if isinstance(config, NeuralConfig):
        if valid is None:
            train, valid = split_tail(train, max(1, len(train) // 10))
        model = NeuralLM(train.vocab, config)
        return model.fit(train, valid)
    raise InputError(f"unknown generator config: {type(config).__name__}")


def seq_logprob(model, seq: Sequence) -> float:
    return model.seq_logprob(seq)


def sample(model, cfg: SamplerConfig, rng=None) -> Sequence:
    return model.sample(cfg, rng)


def perplexity(model, corpus: Corpus) -> float:
    """exp(mean per-token NLL), averaged per sequence then over the corpus."""
    if len(corpus) == 0:
        raise InputError("corpus is empty")
    extra = 0 if model.fixed_length is not None else 1
    rates = [-model.seq_logprob(s) / (len(s) + extra) for s in corpus]
    return float(np.exp(np.mean(rates)))
