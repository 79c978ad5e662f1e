"""Exact verification layer for enumerable toy domains.

Everything here is brute force by design: enumerate every sequence of a
small domain, compute generator and source probabilities explicitly, derive
the ideal real-vs-generated scorer, and work out filtered distributions and
acceptance boundaries as exact sums. The sampling modules are tested
against these quantities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .data import NUM_RESERVED, Corpus, MarkovSource, Sequence, Vocab
from .errors import DegenerateError, InputError
from .filtering import raw_acceptance_probability

MAX_DOMAIN = 10**6


@dataclass(frozen=True)
class ExactDistribution:
    """All |V|^L sequences of a domain with an aligned probability vector."""

    vocab: Vocab
    length: int
    domain: tuple[Sequence, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if len(probs) != len(self.domain):
            raise InputError("probability vector does not match the domain")
        if (probs < 0).any():
            raise InputError("probabilities must be non-negative")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __len__(self):
        return len(self.domain)

    def index_of(self, seq: Sequence) -> int:
        return int(sequence_index(seq, self.vocab.content_size, self.length))

    def prob_of(self, seq: Sequence) -> float:
        return float(self.probs[self.index_of(seq)])

    def renormalized(self, probs: np.ndarray) -> "ExactDistribution":
        return ExactDistribution(self.vocab, self.length, self.domain, probs)


def sequence_index(seq: Sequence, base: int, length: int) -> int:
    """Position of a sequence in the lexicographic enumeration of V^L."""
    if len(seq) != length:
        raise InputError(f"expected a length-{length} sequence")
    idx = 0
    for token_id in seq.ids:
        state = token_id - NUM_RESERVED
        if not 0 <= state < base:
            raise InputError("sequence contains tokens outside the domain alphabet")
        idx = idx * base + state
    return idx


def sequence_indices(corpus: Corpus, base: int, length: int) -> np.ndarray:
    """Vectorized ``sequence_index`` over a corpus of equal-length sequences."""
    ids = np.array([s.ids for s in corpus], dtype=np.int64) - NUM_RESERVED
    if ids.shape[1] != length:
        raise InputError(f"expected length-{length} sequences")
    if ids.min() < 0 or ids.max() >= base:
        raise InputError("corpus contains tokens outside the domain alphabet")
    weights = base ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return ids @ weights


def enumerate_domain(vocab: Vocab, length: int) -> tuple[Sequence, ...]:
    content = list(vocab.content_ids)
    if len(content) ** length > MAX_DOMAIN:
        raise InputError("domain too large to enumerate")
    return tuple(Sequence(ids) for ids in itertools.product(content, repeat=length))


def enumerate_distribution(model_or_source, vocab: Vocab, length: int) -> ExactDistribution:
    """Exhaustive probability table of a model or Markov source over V^L."""
    domain = enumerate_domain(vocab, length)
    if isinstance(model_or_source, MarkovSource):
        probs = _markov_probs(model_or_source, vocab, length)
    else:
        probs = np.array(
            [math.exp(model_or_source.seq_logprob(s)) for s in domain])
    return ExactDistribution(vocab, length, domain, probs)


def _markov_probs(source: MarkovSource, vocab: Vocab, length: int) -> np.ndarray:
    if vocab != source.vocab:
        raise InputError("vocabulary does not match the source")
    k = len(source.tokens)
    grid = np.array(list(itertools.product(range(k), repeat=length)), dtype=np.int64)
    probs = source.initial[grid[:, 0]].copy()
    for t in range(1, length):
        probs *= source.transition[grid[:, t - 1], grid[:, t]]
    return probs


def empirical_distribution(corpus: Corpus, template: ExactDistribution) -> ExactDistribution:
    """Relative frequencies of corpus sequences over the template's domain."""
    idx = sequence_indices(corpus, template.vocab.content_size, template.length)
    counts = np.bincount(idx, minlength=len(template)).astype(np.float64)
    return template.renormalized(counts / counts.sum())


def optimal_discriminator(p_real: ExactDistribution,
                          p_model: ExactDistribution) -> np.ndarray:
    """Ideal real-vs-generated score p_r / (p_r + p_model), pointwise.

    Returns an array aligned with the shared domain; where both
    probabilities vanish the score is fixed at 0.5.
    """
    _check_same_domain(p_real, p_model)
    total = p_real.probs + p_model.probs
    out = np.full(len(total), 0.5)
    nz = total > 0
    out[nz] = p_real.probs[nz] / total[nz]
    return out


class ExactDiscriminator:
    """Lookup discriminator over an enumerated domain.

    Scores are clipped to the open interval (0, 1) so downstream filter
    arithmetic never sees the degenerate endpoints.
    """

    def __init__(self, dist: ExactDistribution, scores: np.ndarray,
                 clip: float = 1e-12):
        if len(scores) != len(dist):
            raise InputError("score vector does not match the domain")
        self.vocab = dist.vocab
        self.length = dist.length
        self._base = dist.vocab.content_size
        self.scores = np.clip(np.asarray(scores, dtype=np.float64), clip, 1.0 - clip)
        self.scores.setflags(write=False)

    def predict(self, seq: Sequence) -> float:
        return float(self.scores[sequence_index(seq, self._base, self.length)])

    def predict_corpus(self, corpus) -> np.ndarray:
        return self.scores[sequence_indices(corpus, self._base, self.length)]


def exact_filtered_distribution(p_model: ExactDistribution, scores, ratio: float,
                                boundary: float) -> tuple[ExactDistribution, float]:
    """Filtered law S(x)p(x)/c_exact and the exact acceptance ratio c_exact."""
    scores = _score_vector(scores, p_model)
    accept = raw_acceptance_probability(scores, ratio, boundary)
    c_exact = float(np.sum(accept * p_model.probs))
    if c_exact <= 0.0:
        raise DegenerateError("filter accepts nothing: zero acceptance mass")
    return p_model.renormalized(accept * p_model.probs / c_exact), c_exact


def exact_acceptance(p_model: ExactDistribution, scores, ratio: float,
                     boundary: float) -> float:
    scores = _score_vector(scores, p_model)
    accept = raw_acceptance_probability(scores, ratio, boundary)
    return float(np.sum(accept * p_model.probs))


@dataclass(frozen=True)
class BoundarySolution:
    """Result of the exact boundary search for a target acceptance ratio."""

    boundary: float
    acceptance: float
    floor_acceptance: float
    achievable: bool


def exact_boundary(p_model: ExactDistribution, scores, ratio: float,
                   grid_step: float = 1e-4, refine_tol: float = 1e-12) -> BoundarySolution:
    """Smallest boundary whose exact acceptance is <= ratio (and closest to it).

    Acceptance is piecewise constant in the boundary, so a grid scan picks
    the best plateau and bisection then walks to the plateau's lower edge.
    If even a boundary of 1.0 accepts more than ``ratio``, the floor is
    reported with ``achievable=False`` instead of failing.
    """
    if not 0.0 < ratio <= 1.0:
        raise InputError("acceptance ratio must be in (0, 1]")
    scores = _score_vector(scores, p_model)

    def acceptance(boundary: float) -> float:
        accept = raw_acceptance_probability(scores, ratio, boundary)
        return float(np.sum(accept * p_model.probs))

    floor = acceptance(1.0)
    grid = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
    values = np.array([acceptance(u) for u in grid])
    feasible = values <= ratio + 1e-12
    if not feasible.any():
        return BoundarySolution(1.0, floor, floor, False)
    errors = np.where(feasible, np.abs(values - ratio), np.inf)
    best = int(np.argmin(errors))  # first minimum == smallest boundary
    best_err = errors[best]
    lo, hi = max(grid[best] - grid_step, 0.0), float(grid[best])
    while hi - lo > refine_tol:
        mid = 0.5 * (lo + hi)
        a = acceptance(mid)
        if a <= ratio + 1e-12 and abs(a - ratio) <= best_err + 1e-15:
            hi = mid
        else:
            lo = mid
    return BoundarySolution(hi, acceptance(hi), floor, True)


def tv_distance(p: ExactDistribution, q: ExactDistribution) -> float:
    """Total variation distance, half the L1 difference."""
    _check_same_domain(p, q)
    return float(0.5 * np.abs(p.probs - q.probs).sum())


def js_divergence(p: ExactDistribution, q: ExactDistribution) -> float:
    """Jensen-Shannon divergence in nats."""
    _check_same_domain(p, q)
    m = 0.5 * (p.probs + q.probs)
    return float(0.5 * _kl(p.probs, m) + 0.5 * _kl(q.probs, m))


def kl_divergence(p: ExactDistribution, q: ExactDistribution) -> float:
    _check_same_domain(p, q)
    return _kl(p.probs, q.probs)


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    nz = p > 0
    if (q[nz] <= 0).any():
        return math.inf
    return float(np.sum(p[nz] * np.log(p[nz] / q[nz])))


def _check_same_domain(p: ExactDistribution, q: ExactDistribution) -> None:
    if p.vocab != q.vocab or p.length != q.length:
        raise InputError("distributions live on different domains")


def _score_vector(scores, p_model: ExactDistribution) -> np.ndarray:
    if isinstance(scores, ExactDiscriminator):
        return scores.scores
    if isinstance(scores, dict):
        return np.array([scores[s] for s in p_model.domain], dtype=np.float64)
    if hasattr(scores, "predict_corpus"):
        return np.asarray(scores.predict_corpus(p_model.domain), dtype=np.float64)
    arr = np.asarray(scores, dtype=np.float64)
    if arr.shape != (len(p_model),):
        raise InputError("score vector does not match the domain")
    return arr
