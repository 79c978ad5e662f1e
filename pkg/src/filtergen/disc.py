"""Binary real-vs-generated sequence classifier.

A small convolutional net over token embeddings: window sizes 2 and 3,
global max-pool, one linear output, sigmoid. Forward and backward passes
are explicit numpy in float64, so every gradient can be checked against
central finite differences. Padding positions are masked out of the pools,
which makes predictions invariant to appended padding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import PAD, Corpus, corpus_to_arrays, split_tail
from .errors import InputError
from .genmodel import SamplerConfig

_PROB_CLIP = 1e-12


@dataclass(frozen=True)
class DiscConfig:
    """Architecture and training knobs for the classifier."""

    embed_dim: int = 32
    kernels2: int = 16
    kernels3: int = 32
    lr: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 512
    max_epochs: int = 200
    patience: int = 5
    temperature: float = 1.0  # generator temperature for fresh negatives
    seed: int = 0


@dataclass
class DiscTrainReport:
    """Per-epoch training trace and the convergence verdict."""

    train_loss: list
    valid_accuracy: list
    best_epoch: int
    final_valid_accuracy: float
    converged: bool

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    def running_best(self) -> list:
        best, out = -math.inf, []
        for acc in self.valid_accuracy:
            best = max(best, acc)
            out.append(best)
        return out


class TextCNN:
    """Convolutional sequence scorer mapping a sequence to (0, 1)."""

    kind = "textcnn"

    def __init__(self, vocab, cfg: DiscConfig, rng=None, embeddings=None):
        self.vocab = vocab
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        self.banks = ((2, cfg.kernels2), (3, cfg.kernels3))
        self.embed_frozen = embeddings is not None
        if embeddings is not None:
            embed = np.array(embeddings, dtype=np.float64)
            if embed.shape[0] != len(vocab):
                raise InputError("copied embeddings do not match the vocabulary")
        else:
            embed = rng.standard_normal((len(vocab), cfg.embed_dim)) * 0.1
        de = embed.shape[1]
        self.params = {"embed": embed}
        for w, k in self.banks:
            self.params[f"conv{w}_w"] = rng.standard_normal((w * de, k)) * 0.1
            self.params[f"conv{w}_b"] = np.zeros(k)
        total = sum(k for _, k in self.banks)
        self.params["out_w"] = rng.standard_normal(total) * 0.1
        self.params["out_b"] = np.zeros(1)

    @property
    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def trainable(self) -> list[str]:
        names = [k for k in self.params if k != "embed" or not self.embed_frozen]
        return names

    # -- forward ----------------------------------------------------------

    def _forward(self, ids: np.ndarray, lengths: np.ndarray):
        p = self.params
        emb = p["embed"][ids]  # (B, L, de)
        b, l, de = emb.shape
        pooled, cache = [], {"ids": ids, "emb": emb, "banks": {}}
        for w, k in self.banks:
            positions = l - w + 1
            if positions < 1:
                pooled.append(np.zeros((b, k)))
                cache["banks"][w] = None
                continue
            x = np.concatenate([emb[:, i: i + positions, :] for i in range(w)], axis=2)
            pre = x @ p[f"conv{w}_w"] + p[f"conv{w}_b"]
            act = np.maximum(pre, 0.0)
            valid = (np.arange(positions)[None, :] + w) <= lengths[:, None]
            masked = np.where(valid[:, :, None], act, -np.inf)
            pool = masked.max(axis=1)
            arg = masked.argmax(axis=1)
            any_valid = valid.any(axis=1)
            pool = np.where(any_valid[:, None], pool, 0.0)
            pooled.append(pool)
            cache["banks"][w] = (x, pre, arg, any_valid, positions)
        feats = np.concatenate(pooled, axis=1)
        logits = feats @ p["out_w"] + p["out_b"][0]
        cache["feats"] = feats
        return logits, cache

    def _backward(self, cache, dlogits: np.ndarray) -> dict:
        p = self.params
        grads = {k: np.zeros_like(v) for k, v in p.items()}
        feats = cache["feats"]
        grads["out_w"] += feats.T @ dlogits
        grads["out_b"][0] += dlogits.sum()
        dfeats = dlogits[:, None] * p["out_w"][None, :]
        demb = np.zeros_like(cache["emb"])
        offset = 0
        for w, k in self.banks:
            dpool = dfeats[:, offset: offset + k]
            offset += k
            bank = cache["banks"][w]
            if bank is None:
                continue
            x, pre, arg, any_valid, positions = bank
            b = pre.shape[0]
            dact = np.zeros_like(pre)
            rows = np.repeat(np.arange(b), k)
            cols = np.tile(np.arange(k), b)
            dval = (dpool * any_valid[:, None]).ravel()
            dact[rows, arg.ravel(), cols] = dval
            dpre = dact * (pre > 0.0)
            grads[f"conv{w}_w"] += np.einsum("bpi,bpk->ik", x, dpre)
            grads[f"conv{w}_b"] += dpre.sum(axis=(0, 1))
            dx = dpre @ p[f"conv{w}_w"].T
            de = demb.shape[2]
            for i in range(w):
                demb[:, i: i + positions, :] += dx[:, :, i * de: (i + 1) * de]
        if not self.embed_frozen:
            np.add.at(grads["embed"], cache["ids"], demb)
        return grads

    def loss_and_grads(self, seqs, labels) -> tuple[float, dict]:
        """Mean binary cross-entropy of a batch plus parameter gradients."""
        ids, lengths = corpus_to_arrays(seqs, PAD)
        labels = np.asarray(labels, dtype=np.float64)
        logits, cache = self._forward(ids, lengths)
        # stable BCE-with-logits: softplus(logit) - y * logit
        loss = float(np.mean(np.logaddexp(0.0, logits) - labels * logits))
        dlogits = (_sigmoid(logits) - labels) / len(labels)
        grads = self._backward(cache, dlogits)
        if self.embed_frozen:
            grads["embed"][:] = 0.0
        return loss, grads

    # -- inference --------------------------------------------------------

    def predict(self, seq) -> float:
        return float(self.predict_corpus([seq])[0])

    def predict_corpus(self, corpus, chunk: int = 8192) -> np.ndarray:
        seqs = list(corpus)
        out = np.empty(len(seqs))
        for start in range(0, len(seqs), chunk):
            ids, lengths = corpus_to_arrays(seqs[start: start + chunk], PAD)
            logits, _ = self._forward(ids, lengths)
            out[start: start + len(logits)] = _sigmoid(logits)
        return np.clip(out, _PROB_CLIP, 1.0 - _PROB_CLIP)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


# ---------------------------------------------------------------------------
# Training.
# ---------------------------------------------------------------------------


def train_discriminator(real: Corpus, gen_model, cfg: DiscConfig | None = None,
                        rng=None) -> tuple[TextCNN, DiscTrainReport]:
    """Train against freshly generated negatives until convergence.

    Classes stay exactly balanced: every epoch draws as many generator
    samples as there are real training sequences. The last 10% of the real
    data is held out for the validation accuracy that drives early
    stopping. Embeddings are copied from the generator and frozen when the
    generator has an embedding table.
    """
    cfg = cfg or DiscConfig()
    if real.vocab != gen_model.vocab:
        raise InputError("real corpus and generator use different vocabularies")
    if len(real) < 2:
        raise InputError("need at least two real sequences")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    real_tr, real_val = split_tail(real, max(1, len(real) // 10))
    sampler = SamplerConfig(temperature=cfg.temperature, seed=cfg.seed)
    embeddings = _generator_embeddings(gen_model)
    disc = TextCNN(real.vocab, cfg, rng, embeddings=embeddings)
    fake_val = gen_model.sample_corpus(len(real_val), sampler, rng)

    def negatives(_epoch):
        fresh = gen_model.sample_corpus(len(real_tr), sampler, rng)
        return list(real_tr.sequences), list(fresh.sequences)

    report = _fit(disc, negatives, real_val, fake_val, cfg, rng)
    return disc, report


def train_discriminator_corpora(real: Corpus, fake: Corpus,
                                cfg: DiscConfig | None = None,
                                rng=None) -> tuple[TextCNN, DiscTrainReport]:
    """Train on two fixed corpora, balanced by per-epoch subsampling."""
    cfg = cfg or DiscConfig()
    if real.vocab != fake.vocab:
        raise InputError("corpora use different vocabularies")
    if len(real) < 2 or len(fake) < 2:
        raise InputError("need at least two sequences per class")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    real_tr, real_val = split_tail(real, max(1, len(real) // 10))
    fake_tr, fake_val = split_tail(fake, max(1, len(fake) // 10))
    m = min(len(real_tr), len(fake_tr))
    disc = TextCNN(real.vocab, cfg, rng)

    def negatives(_epoch):
        ri = rng.permutation(len(real_tr))[:m]
        fi = rng.permutation(len(fake_tr))[:m]
        return ([real_tr.sequences[i] for i in ri],
                [fake_tr.sequences[i] for i in fi])

    report = _fit(disc, negatives, real_val, fake_val, cfg, rng)
    return disc, report


def _generator_embeddings(gen_model):
    params = getattr(gen_model, "params", None)
    if isinstance(params, dict) and "embed" in params:
        return params["embed"].copy()
    return None


def _fit(disc: TextCNN, pair_provider, real_val, fake_val, cfg: DiscConfig,
         rng) -> DiscTrainReport:
    velocity = {k: np.zeros_like(v) for k, v in disc.params.items()}
    best_params = {k: v.copy() for k, v in disc.params.items()}
    best_acc, best_epoch, stale = -1.0, -1, 0
    losses, accs = [], []
    converged = False
    for epoch in range(cfg.max_epochs):
        pos, neg = pair_provider(epoch)
        assert len(pos) == len(neg)  # balanced classes by construction
        seqs = list(pos) + list(neg)
        labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
        order = rng.permutation(len(seqs))
        total_loss, seen = 0.0, 0
        for start in range(0, len(seqs), cfg.batch_size):
            take = order[start: start + cfg.batch_size]
            loss, grads = disc.loss_and_grads([seqs[i] for i in take], labels[take])
            for name in disc.trainable():
                velocity[name] = cfg.momentum * velocity[name] - cfg.lr * grads[name]
                disc.params[name] += velocity[name]
            total_loss += loss * len(take)
            seen += len(take)
        losses.append(total_loss / seen)
        accs.append(_accuracy(disc, real_val, fake_val))
        if accs[-1] >= best_acc:
            # ties keep the most-trained snapshot but still count as stale,
            # so a flat accuracy plateau cannot postpone convergence forever
            if accs[-1] > best_acc + 1e-12:
                stale = 0
            else:
                stale += 1
            best_acc, best_epoch = accs[-1], epoch
            best_params = {k: v.copy() for k, v in disc.params.items()}
        else:
            stale += 1
        if stale >= cfg.patience:
            converged = True
            break
    disc.params = best_params
    return DiscTrainReport(losses, accs, best_epoch, best_acc, converged)


def _accuracy(disc: TextCNN, real_val, fake_val) -> float:
    p_real = disc.predict_corpus(real_val)
    p_fake = disc.predict_corpus(fake_val)
    correct = int((p_real >= 0.5).sum()) + int((p_fake < 0.5).sum())
    return correct / (len(p_real) + len(p_fake))


def error_rate(disc, real_test: Corpus, gen_samples: Corpus) -> float:
    """Misclassification rate at threshold 0.5 over a balanced union."""
    if len(real_test) == 0 or len(gen_samples) == 0:
        raise InputError("both corpora must be non-empty")
    m = min(len(real_test), len(gen_samples))
    p_real = disc.predict_corpus(real_test.sequences[:m])
    p_fake = disc.predict_corpus(gen_samples.sequences[:m])
    wrong = int((p_real < 0.5).sum()) + int((p_fake >= 0.5).sum())
    return wrong / (2 * m)
