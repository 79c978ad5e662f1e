"""Rejection filter over a base generator, steered by a discriminator.

A candidate with discriminator score d is accepted outright when
d >= boundary, and otherwise with probability min(1, ratio * d / (1 - d)).
Composing this accept/reject loop with a generator yields a new generator
whose output law is the filtered, renormalized distribution; when the
discriminator equals the ideal score, the filtered law matches the real
distribution on the filtered region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Corpus
from .errors import BudgetError, InputError
from .genmodel import SamplerConfig

RATIO_CAP = 1e9  # keeps d/(1-d) finite as d approaches 1


def raw_acceptance_probability(scores, ratio, boundary):
    """Piecewise acceptance probability without input validation.

    Vectorized over ``scores``; tolerates the closed interval [0, 1] so the
    exact oracle can evaluate it on ideal score vectors.
    """
    scores = np.asarray(scores, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        odds = np.where(scores < 1.0, scores / (1.0 - scores), RATIO_CAP)
    clipped = np.minimum(ratio * np.minimum(odds, RATIO_CAP), 1.0)
    return np.where(scores >= boundary, 1.0, clipped)


def acceptance_probability(score, ratio: float, boundary: float):
    """Acceptance probability for score(s) strictly inside (0, 1)."""
    arr = np.asarray(score, dtype=np.float64)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise InputError("discriminator score must lie strictly in (0, 1)")
    _check_params(ratio, boundary)
    out = raw_acceptance_probability(arr, ratio, boundary)
    return float(out) if np.isscalar(score) or arr.ndim == 0 else out


def _check_params(ratio: float, boundary: float) -> None:
    if not 0.0 < ratio <= 1.0:
        raise InputError("acceptance ratio must be in (0, 1]")
    if not 0.0 <= boundary <= 1.0:
        raise InputError("sampling boundary must be in [0, 1]")


@dataclass(frozen=True)
class FilterParams:
    """Target acceptance ratio plus the score boundary realizing it.

    A ratio of 1 means the identity filter, which forces the boundary to 0
    so every candidate is accepted outright.
    """

    acceptance_ratio: float
    boundary: float

    def __post_init__(self):
        _check_params(self.acceptance_ratio, self.boundary)
        if self.acceptance_ratio == 1.0 and self.boundary != 0.0:
            raise InputError("ratio 1.0 is the identity filter; boundary must be 0")


def accept(seq, disc, params: FilterParams, rng) -> bool:
    """Single accept/reject decision; always consumes one uniform draw."""
    score = disc.predict(seq)
    z = rng.random()
    s = acceptance_probability(score, params.acceptance_ratio, params.boundary)
    return bool(score >= params.boundary or z <= s)


def _accept_mask(scores: np.ndarray, params: FilterParams, rng) -> np.ndarray:
    z = rng.random(len(scores))
    s = raw_acceptance_probability(scores, params.acceptance_ratio, params.boundary)
    return (scores >= params.boundary) | (z <= s)


@dataclass(frozen=True)
class BoundaryEstimateConfig:
    """Knobs of the iterative boundary search."""

    samples_per_round: int = 1000
    rounds: int = 100
    step: float = 0.01
    init: float = 0.5
    tail: int = 10  # rounds averaged into the returned boundary

    def __post_init__(self):
        if self.samples_per_round < 1 or self.rounds < 1:
            raise InputError("samples_per_round and rounds must be >= 1")
        if not 0.0 < self.step < 1.0:
            raise InputError("step must be in (0, 1)")
        if not 0.0 <= self.init <= 1.0:
            raise InputError("init must be in [0, 1]")


def estimate_boundary(gen, disc, ratio: float, cfg: BoundaryEstimateConfig | None = None,
                      sampler: SamplerConfig | None = None, rng=None,
                      ) -> tuple[float, list[dict]]:
    """Monte Carlo search for the boundary matching a target acceptance ratio.

    Each round draws a fresh batch from the generator, measures the
    empirical acceptance under the current boundary, and nudges the
    boundary down when acceptance falls short of the target, up when it
    overshoots. The raw iterate oscillates around the fixed point by
    construction, so the returned boundary averages the last ``cfg.tail``
    rounds. Returns the boundary plus the full per-round trace.

    A fixed point only exists when some boundary attains the target ratio:
    with a sharply bimodal score distribution the achievable acceptance
    set has gaps, the iterate oscillates across a gap, and no boundary is
    right. Inspect the trace (alternating acceptances far from the
    target), or ``oracle.exact_boundary`` on enumerable domains, to detect
    an unachievable target.
    """
    if not 0.0 < ratio <= 1.0:
        raise InputError("acceptance ratio must be in (0, 1]")
    cfg = cfg or BoundaryEstimateConfig()
    sampler = sampler or SamplerConfig()
    rng = np.random.default_rng(sampler.seed) if rng is None else rng
    boundary = cfg.init
    trace = []
    history = []
    for round_idx in range(cfg.rounds):
        batch = gen.sample_corpus(cfg.samples_per_round, sampler, rng)
        scores = np.asarray(disc.predict_corpus(batch), dtype=np.float64)
        accepted = _accept_mask_at(scores, ratio, boundary, rng)
        acc = float(accepted.mean())
        trace.append({"round": round_idx, "u_c": boundary, "acceptance": acc})
        history.append(boundary)
        # ties move down so the ratio-1 target settles at boundary 0
        boundary = boundary - cfg.step if acc <= ratio else boundary + cfg.step
        boundary = min(max(boundary, 0.0), 1.0)
    final = float(np.mean(history[-cfg.tail:]))
    return final, trace


def _accept_mask_at(scores, ratio, boundary, rng) -> np.ndarray:
    z = rng.random(len(scores))
    s = raw_acceptance_probability(scores, ratio, boundary)
    return (scores >= boundary) | (z <= s)


@dataclass
class FilterStats:
    """Bookkeeping of one filtered-sampling run."""

    attempts: int = 0
    acceptances: int = 0
    sum_score_accepted: float = 0.0
    sum_score_rejected: float = 0.0
    rejected_sequences: list = field(default_factory=list)

    @property
    def acceptance_rate(self) -> float:
        return self.acceptances / self.attempts if self.attempts else 0.0

    @property
    def mean_score_accepted(self) -> float:
        return self.sum_score_accepted / self.acceptances if self.acceptances else math.nan

    @property
    def mean_score_rejected(self) -> float:
        n = self.attempts - self.acceptances
        return self.sum_score_rejected / n if n else math.nan

    def merge(self, other: "FilterStats") -> "FilterStats":
        """Associative combination of stats from independent streams."""
        return FilterStats(
            self.attempts + other.attempts,
            self.acceptances + other.acceptances,
            self.sum_score_accepted + other.sum_score_accepted,
            self.sum_score_rejected + other.sum_score_rejected,
            self.rejected_sequences + other.rejected_sequences,
        )

    def rejected_corpus(self, vocab) -> Corpus | None:
        if not self.rejected_sequences:
            return None
        return Corpus(vocab, tuple(self.rejected_sequences), "rejected")

    def to_dict(self) -> dict:
        return {
            "attempts": self.attempts,
            "acceptances": self.acceptances,
            "acceptance_rate": self.acceptance_rate,
            "mean_score_accepted": self.mean_score_accepted,
            "mean_score_rejected": self.mean_score_rejected,
        }


@dataclass(frozen=True)
class FilteredGenerator:
    """A base generator composed with the rejection filter."""

    gen: object
    disc: object
    params: FilterParams
    max_attempts_per_sample: int = 10_000

    @property
    def vocab(self):
        return self.gen.vocab

    @property
    def fixed_length(self):
        return self.gen.fixed_length

    def sample_corpus(self, n: int, cfg: SamplerConfig, rng=None,
                      split: str = "") -> Corpus:
        corpus, _ = sample_filtered(self, n, cfg, rng, split=split)
        return corpus

    def sample(self, cfg: SamplerConfig, rng=None):
        return self.sample_corpus(1, cfg, rng).sequences[0]


def sample_filtered(fg: FilteredGenerator, n: int, cfg: SamplerConfig, rng=None,
                    split: str = "accepted") -> tuple[Corpus, FilterStats]:
    """Draw until ``n`` candidates are accepted; returns them plus stats.

    Generation and accept/reject decisions use two independent streams
    spawned from one rng, so with ratio 1 the accepted stream reproduces
    the base generator's output for the same seed bit for bit. Raises
    ``BudgetError`` (carrying partial results) if the attempt budget
    ``max_attempts_per_sample * n`` runs out.
    """
    if n < 1:
        raise InputError("n must be >= 1")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    accept_rng = rng.spawn(1)[0]
    stats = FilterStats()
    accepted: list = []
    budget = fg.max_attempts_per_sample * n
    while len(accepted) < n:
        want = n - len(accepted)
        batch_size = min(want, budget - stats.attempts)
        if batch_size <= 0:
            partial = Corpus(fg.vocab, tuple(accepted), split) if accepted else None
            raise BudgetError(
                f"attempt budget {budget} exhausted with {len(accepted)}/{n} accepted",
                partial=partial, stats=stats)
        batch = fg.gen.sample_corpus(batch_size, cfg, rng)
        scores = np.asarray(fg.disc.predict_corpus(batch), dtype=np.float64)
        mask = _accept_mask(scores, fg.params, accept_rng)
        stats.attempts += batch_size
        stats.acceptances += int(mask.sum())
        stats.sum_score_accepted += float(scores[mask].sum())
        stats.sum_score_rejected += float(scores[~mask].sum())
        for seq, ok in zip(batch.sequences, mask):
            (accepted if ok else stats.rejected_sequences).append(seq)
    return Corpus(fg.vocab, tuple(accepted), split), stats
