"""Quality/diversity evaluation: BLEU vs self-BLEU, forward and reverse
language-model scores, Frechet embedding distance, and the temperature
sweep harness that traces quality-diversity curves for baseline, accepted,
and rejected sample streams.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .data import Corpus
from .disc import DiscConfig, error_rate, train_discriminator_corpora
from .errors import InputError
from .filtering import (BoundaryEstimateConfig, FilteredGenerator, FilterParams,
                        estimate_boundary, sample_filtered)
from .genmodel import NeuralLM, NGramConfig, NGramLM, SamplerConfig, train_mle
from .seeding import derive_seed

# ---------------------------------------------------------------------------
# BLEU / self-BLEU
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BleuConfig:
    max_order: int = 5
    epsilon: float = 1e-9  # floor for zero precision numerators

    def __post_init__(self):
        if self.max_order < 1:
            raise InputError("BLEU order must be >= 1")


def _ngram_counts(ids: tuple, order: int) -> Counter:
    return Counter(ids[i: i + order] for i in range(len(ids) - order + 1))


def _closest_length(sorted_lengths: list, target: int) -> int:
    # nearest reference length; ties favor the shorter one
    pos = bisect_left(sorted_lengths, target)
    best = None
    for cand in (sorted_lengths[pos - 1] if pos else None,
                 sorted_lengths[pos] if pos < len(sorted_lengths) else None):
        if cand is None:
            continue
        if best is None or abs(cand - target) < abs(best - target) or (
                abs(cand - target) == abs(best - target) and cand < best):
            best = cand
    return best


def _brevity_penalty(hyp_len: int, ref_len: int) -> float:
    if hyp_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / hyp_len)


def _sentence_bleu(ids, max_counts_per_order, ref_len, cfg: BleuConfig) -> float:
    log_sum, orders = 0.0, 0
    for k in range(1, cfg.max_order + 1):
        possible = len(ids) - k + 1
        if possible < 1:
            continue
        counts = _ngram_counts(ids, k)
        matches = sum(min(c, max_counts_per_order[k](g)) for g, c in counts.items())
        numerator = matches if matches > 0 else cfg.epsilon
        log_sum += math.log(numerator / possible)
        orders += 1
    score = math.exp(log_sum / orders)
    return _brevity_penalty(len(ids), ref_len) * score


def bleu(hypotheses: Corpus, references: Corpus, cfg: BleuConfig | None = None) -> float:
    """Corpus-averaged sentence BLEU against the full reference set.

    Geometric mean of modified n-gram precisions (orders with no possible
    n-grams are skipped) times the brevity penalty against the closest
    reference length.
    """
    cfg = cfg or BleuConfig()
    if len(hypotheses) == 0 or len(references) == 0:
        raise InputError("hypotheses and references must be non-empty")
    max_counts = {}
    for k in range(1, cfg.max_order + 1):
        table: dict = {}
        for ref in references:
            for g, c in _ngram_counts(ref.ids, k).items():
                if c > table.get(g, 0):
                    table[g] = c
        max_counts[k] = lambda g, t=table: t.get(g, 0)
    ref_lengths = sorted(len(r) for r in references)
    scores = [
        _sentence_bleu(h.ids, max_counts, _closest_length(ref_lengths, len(h)), cfg)
        for h in hypotheses
    ]
    return float(np.mean(scores))


def self_bleu(samples: Corpus, cfg: BleuConfig | None = None) -> float:
    """Mean BLEU of each sample against all the others (lower = more diverse)."""
    cfg = cfg or BleuConfig()
    if len(samples) < 2:
        raise InputError("self-BLEU needs at least two samples")
    seqs = samples.sequences
    # per order: gram -> (best count, owner, runner-up count), so the
    # leave-one-out maximum is an O(1) lookup
    tables = {}
    for k in range(1, cfg.max_order + 1):
        table: dict = {}
        for i, seq in enumerate(seqs):
            for g, c in _ngram_counts(seq.ids, k).items():
                best, owner, second = table.get(g, (0, -1, 0))
                if c > best:
                    best, owner, second = c, i, best
                elif c > second:
                    second = c
                table[g] = (best, owner, second)
        tables[k] = table
    lengths = sorted(len(s) for s in seqs)
    length_count = Counter(len(s) for s in seqs)
    scores = []
    for i, seq in enumerate(seqs):
        max_counts = {}
        for k in range(1, cfg.max_order + 1):
            table = tables[k]

            def loo(g, t=table, me=i):
                best, owner, second = t.get(g, (0, -1, 0))
                return best if owner != me else second

            max_counts[k] = loo
        own = len(seq)
        if length_count[own] > 1:
            ref_len = own
        else:
            remaining = [l for l in lengths if l != own]
            ref_len = _closest_length(remaining, own)
        scores.append(_sentence_bleu(seq.ids, max_counts, ref_len, cfg))
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# Language-model scores
# ---------------------------------------------------------------------------


def lm_score(oracle_lm, samples: Corpus) -> float:
    """Mean per-token NLL of samples under a real-data LM (lower = better).

    By construction equals log(perplexity(oracle_lm, samples)).
    """
    if len(samples) == 0:
        raise InputError("samples must be non-empty")
    extra = 0 if oracle_lm.fixed_length is not None else 1
    rates = [-oracle_lm.seq_logprob(s) / (len(s) + extra) for s in samples]
    return float(np.mean(rates))


def reverse_lm_score(samples: Corpus, real_test: Corpus, lm_config,
                     min_samples: int = 1000) -> float:
    """NLL of real held-out text under an LM trained on the samples.

    Detects mode collapse: a degenerate sample set trains an LM that
    explains real text poorly. Refuses to train on fewer than
    ``min_samples`` sequences.
    """
    if len(samples) < min_samples:
        raise InputError(
            f"reverse LM needs >= {min_samples} samples, got {len(samples)}")
    model = train_mle(samples, None, lm_config)
    return lm_score(model, real_test)


def generator_config_of(model):
    """A training config matching a fitted generator's architecture."""
    if isinstance(model, NGramLM):
        return NGramConfig(model.order, model.delta, model.fixed_length)
    if isinstance(model, NeuralLM):
        return model.cfg
    # exact sources and other generators default to a smoothed bigram
    return NGramConfig(order=2, delta=0.01, fixed_length=model.fixed_length)


# ---------------------------------------------------------------------------
# Sentence embeddings and Frechet distance
# ---------------------------------------------------------------------------


class EmbeddingModel:
    """Sentence embedding = mean of per-token vectors."""

    def __init__(self, vectors: np.ndarray, provenance: str):
        vectors = np.asarray(vectors, dtype=np.float64)
        if not np.isfinite(vectors).all():
            raise InputError("embedding vectors must be finite")
        vectors.setflags(write=False)
        self.vectors = vectors
        self.provenance = provenance

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def fit_ppmi_svd(corpus: Corpus, dim: int = 64, window: int = 2) -> EmbeddingModel:
    """Token vectors from a PPMI-weighted co-occurrence factorization.

    Co-occurrence is counted within a symmetric in-sentence window that
    also sees the BOS/EOS boundary markers (so length-1 corpora still
    embed); the dimension is capped by the number of distinct tokens
    observed.
    """
    from .data import BOS, EOS

    seen = sorted({i for seq in corpus for i in seq.ids} | {BOS, EOS})
    index = {tok: j for j, tok in enumerate(seen)}
    k = len(seen)
    cooc = np.zeros((k, k))
    for seq in corpus:
        ids = (BOS,) + seq.ids + (EOS,)
        for a, tok in enumerate(ids):
            lo, hi = max(0, a - window), min(len(ids), a + window + 1)
            for b in range(lo, hi):
                if b != a:
                    cooc[index[tok], index[ids[b]]] += 1.0
    total = cooc.sum()
    if total == 0:
        raise InputError("corpus has no co-occurrences")
    joint = cooc / total
    marg = joint.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        pmi = np.log(joint / np.outer(marg, marg))
    ppmi = np.where(np.isfinite(pmi), np.maximum(pmi, 0.0), 0.0)
    u, s, _ = np.linalg.svd(ppmi, full_matrices=False)
    d = min(dim, k)
    vecs = u[:, :d] * np.sqrt(s[:d])
    # stabilize the SVD sign convention
    signs = np.where(np.abs(vecs).max(axis=0) == vecs.max(axis=0), 1.0, -1.0)
    vecs = vecs * signs
    vocab_size = len(corpus.vocab)
    table = np.zeros((vocab_size, d))
    table[seen] = vecs
    return EmbeddingModel(table, "ppmi-svd")


def from_neural_lm(model: NeuralLM) -> EmbeddingModel:
    return EmbeddingModel(model.params["embed"].copy(), "neural-lm-mean")


def embed(samples: Corpus, em: EmbeddingModel) -> np.ndarray:
    """One vector per sequence: the mean of its token embeddings."""
    out = np.empty((len(samples), em.dim))
    for i, seq in enumerate(samples):
        out[i] = em.vectors[list(seq.ids)].mean(axis=0)
    return out


def fed(real_emb: np.ndarray, gen_emb: np.ndarray, reg: float = 1e-6) -> float:
    """Frechet distance between Gaussians fitted to two embedding sets.

    Covariances get ``reg * I`` added before use; the matrix square root
    comes from a symmetric eigendecomposition with negative eigenvalues
    (roundoff) clipped at zero.
    """
    real_emb = np.atleast_2d(np.asarray(real_emb, dtype=np.float64))
    gen_emb = np.atleast_2d(np.asarray(gen_emb, dtype=np.float64))
    d = real_emb.shape[1]
    if gen_emb.shape[1] != d:
        raise InputError("embedding dimensions differ")
    if len(real_emb) < d + 1 or len(gen_emb) < d + 1:
        raise InputError(f"need at least {d + 1} rows per set for a {d}-dim FED")
    mu_r, mu_g = real_emb.mean(axis=0), gen_emb.mean(axis=0)
    cov_r = np.atleast_2d(np.cov(real_emb, rowvar=False)) + reg * np.eye(d)
    cov_g = np.atleast_2d(np.cov(gen_emb, rowvar=False)) + reg * np.eye(d)
    root_r = _sym_sqrt(cov_r)
    inner = root_r @ cov_g @ root_r
    eigs = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    tr_sqrt = np.sqrt(np.clip(eigs, 0.0, None)).sum()
    diff = mu_r - mu_g
    return float(diff @ diff + np.trace(cov_r) + np.trace(cov_g) - 2.0 * tr_sqrt)


def _sym_sqrt(mat: np.ndarray) -> np.ndarray:
    eigs, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    return (vecs * np.sqrt(np.clip(eigs, 0.0, None))) @ vecs.T


# ---------------------------------------------------------------------------
# Temperature sweep
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("temperature", "c", "stream", "bleu5", "self_bleu5",
                 "lm_score", "rev_lm_score", "fed", "error_rate")

KNOWN_METRICS = ("bleu", "selfbleu", "lm", "rlm", "fed", "err")


@dataclass
class SweepReport:
    """One row per (temperature, acceptance ratio, stream) grid point."""

    rows: list

    def csv_text(self) -> str:
        lines = [",".join(SWEEP_COLUMNS)]
        for row in self.rows:
            cells = []
            for col in SWEEP_COLUMNS:
                val = row.get(col)
                if val is None:
                    cells.append("")
                elif isinstance(val, str):
                    cells.append(val)
                else:
                    cells.append(f"{val:.6f}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.csv_text())


def compute_metric_row(samples: Corpus, metric_names, *, real_train: Corpus,
                       real_test: Corpus, oracle_lm, rlm_config=None,
                       embedding=None, real_test_emb=None,
                       bleu_cfg: BleuConfig | None = None,
                       disc_cfg: DiscConfig | None = None,
                       seed: int = 0) -> dict:
    """The metric cells shared by sweep rows and evaluation reports."""
    unknown = set(metric_names) - set(KNOWN_METRICS)
    if unknown:
        raise InputError(f"unknown metrics: {sorted(unknown)}")
    bleu_cfg = bleu_cfg or BleuConfig()
    row: dict = {}
    if "bleu" in metric_names:
        row["bleu5"] = bleu(samples, real_test, bleu_cfg)
    if "selfbleu" in metric_names:
        row["self_bleu5"] = self_bleu(samples, bleu_cfg)
    if "lm" in metric_names:
        row["lm_score"] = lm_score(oracle_lm, samples)
    if "rlm" in metric_names:
        cfg = rlm_config or generator_config_of(oracle_lm)
        row["rev_lm_score"] = reverse_lm_score(samples, real_test, cfg)
    if "fed" in metric_names:
        if embedding is None or real_test_emb is None:
            raise InputError("fed requested without a fitted embedding model")
        row["fed"] = fed(real_test_emb, embed(samples, embedding))
    if "err" in metric_names:
        row["error_rate"] = classification_error(
            real_train, real_test, samples, disc_cfg or DiscConfig(), seed)
    return row


def classification_error(real_train: Corpus, real_test: Corpus, samples: Corpus,
                         disc_cfg: DiscConfig, seed: int) -> float:
    """Error rate of a freshly trained classifier on held-out data.

    The sample set is split 70/30 into classifier-training and evaluation
    parts; higher error = real and sampled text are harder to tell apart.
    """
    n_eval = max(1, int(len(samples) * 0.3))
    if len(samples) - n_eval < 2:
        raise InputError("too few samples for a classification-error estimate")
    train_part = Corpus(samples.vocab, samples.sequences[:-n_eval], "disc-train")
    eval_part = Corpus(samples.vocab, samples.sequences[-n_eval:], "disc-eval")
    cfg = DiscConfig(**{**disc_cfg.__dict__, "seed": seed})
    rng = np.random.default_rng(seed)
    disc, _ = train_discriminator_corpora(real_train, train_part, cfg, rng)
    return error_rate(disc, real_test, eval_part)


def temperature_sweep(gen, real_train: Corpus, real_test: Corpus, temps,
                      metric_names, n_per_point: int, seed: int, *,
                      disc=None, c_values=(), bleu_cfg: BleuConfig | None = None,
                      embed_dim: int = 64, rlm_config=None, oracle_lm=None,
                      uc_cfg: BoundaryEstimateConfig | None = None,
                      disc_cfg: DiscConfig | None = None,
                      max_len: int = 64) -> SweepReport:
    """Metric grid over softmax temperatures for up to three streams.

    For every temperature: the unfiltered baseline, then per acceptance
    ratio the accepted and rejected streams. The boundary is re-estimated
    at each temperature because the proposal distribution changes with it.
    """
    temps = list(temps)
    if not temps or any(t <= 0 for t in temps):
        raise InputError("temperatures must be a non-empty list of positives")
    if c_values and disc is None:
        raise InputError("filtered streams need a discriminator")
    oracle_lm = oracle_lm if oracle_lm is not None else gen
    embedding = real_emb = None
    if "fed" in metric_names:
        embedding = fit_ppmi_svd(real_train, dim=embed_dim)
        real_emb = embed(real_test, embedding)

    def metrics_for(samples, stream_seed):
        return compute_metric_row(
            samples, metric_names, real_train=real_train, real_test=real_test,
            oracle_lm=oracle_lm, rlm_config=rlm_config, embedding=embedding,
            real_test_emb=real_emb, bleu_cfg=bleu_cfg, disc_cfg=disc_cfg,
            seed=stream_seed)

    rows = []
    for temp in temps:
        sampler = SamplerConfig(temperature=temp, max_len=max_len,
                                seed=derive_seed(seed, "sample", temp))
        base_rng = np.random.default_rng(sampler.seed)
        baseline = gen.sample_corpus(n_per_point, sampler, base_rng, split="baseline")
        rows.append({"temperature": temp, "c": 1.0, "stream": "baseline",
                     **metrics_for(baseline, derive_seed(seed, "err", temp, "baseline"))})
        for ratio in c_values:
            if ratio == 1.0:
                boundary = 0.0
            else:
                boundary, _ = estimate_boundary(
                    gen, disc, ratio, uc_cfg, sampler,
                    np.random.default_rng(derive_seed(seed, "uc", temp, ratio)))
            fg = FilteredGenerator(gen, disc, FilterParams(ratio, boundary))
            accepted, stats = sample_filtered(
                fg, n_per_point, sampler, np.random.default_rng(sampler.seed))
            rows.append({"temperature": temp, "c": ratio, "stream": "accepted",
                         **metrics_for(accepted, derive_seed(seed, "err", temp, ratio, "a"))})
            rejected = stats.rejected_corpus(gen.vocab)
            if rejected is not None:
                if len(rejected) > n_per_point:
                    rejected = Corpus(gen.vocab, rejected.sequences[:n_per_point],
                                      "rejected")
                rows.append({"temperature": temp, "c": ratio, "stream": "rejected",
                             **metrics_for(rejected, derive_seed(seed, "err", temp, ratio, "r"))})
    return SweepReport(rows)
