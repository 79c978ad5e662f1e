"""Corpora, vocabularies, and synthetic Markov sources.

Tokenization is whitespace splitting over pre-tokenized text; any
pre-processing (lowercasing etc.) is the caller's responsibility.
All containers are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

BOS, EOS, PAD, UNK = 0, 1, 2, 3
RESERVED_TOKENS = ("<bos>", "<eos>", "<pad>", "<unk>")
NUM_RESERVED = len(RESERVED_TOKENS)

DEFAULT_MAX_LEN = 64


class Vocab:
    """Bijective token <-> id map with reserved ids 0..3 (BOS, EOS, PAD, UNK)."""

    __slots__ = ("tokens", "_ids")

    def __init__(self, content_tokens):
        content = tuple(content_tokens)
        if len(set(content)) != len(content):
            raise InputError("vocabulary tokens must be distinct")
        if any(t in RESERVED_TOKENS for t in content):
            raise InputError("corpus tokens may not collide with reserved tokens")
        self.tokens = RESERVED_TOKENS + content
        self._ids = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.tokens == other.tokens

    def __hash__(self):
        return hash(self.tokens)

    def __repr__(self):
        return f"Vocab({len(self)} tokens)"

    @property
    def content_size(self) -> int:
        return len(self.tokens) - NUM_RESERVED

    @property
    def content_ids(self) -> range:
        return range(NUM_RESERVED, len(self.tokens))

    def id_of(self, token: str) -> int:
        """Id of ``token``, or UNK for out-of-vocabulary tokens."""
        return self._ids.get(token, UNK)

    def token_of(self, idx: int) -> str:
        return self.tokens[idx]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"tokens": list(self.tokens[NUM_RESERVED:])}, fh)

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict) or "tokens" not in doc:
            raise InputError(f"{path}: expected a JSON object with a 'tokens' list")
        return cls(doc["tokens"])


@dataclass(frozen=True)
class Sequence:
    """A non-empty list of token ids."""

    ids: tuple[int, ...]

    def __post_init__(self):
        ids = tuple(int(i) for i in self.ids)
        if len(ids) == 0:
            raise InputError("a sequence must contain at least one token")
        if any(i < 0 for i in ids):
            raise InputError("token ids must be non-negative")
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.ids)


@dataclass(frozen=True)
class Corpus:
    """Sequences sharing one vocabulary, tagged with a split name."""

    vocab: Vocab
    sequences: tuple[Sequence, ...]
    split: str = ""

    def __post_init__(self):
        seqs = tuple(self.sequences)
        if not seqs:
            raise InputError("a corpus must contain at least one sequence")
        size = len(self.vocab)
        for seq in seqs:
            if max(seq.ids) >= size:
                raise InputError("sequence contains ids outside the vocabulary")
        object.__setattr__(self, "sequences", seqs)

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def lengths(self) -> np.ndarray:
        return np.array([len(s) for s in self.sequences], dtype=np.int64)


def build_vocab(lines, max_size: int) -> Vocab:
    """Vocabulary of the ``max_size`` most frequent tokens.

    Ties are broken by first occurrence; tokens spelled like reserved
    markers are skipped (they encode to UNK).
    """
    if max_size < 1:
        raise InputError("max_size must be >= 1")
    counts: Counter = Counter()
    first_seen: dict[str, int] = {}
    for line in lines:
        for tok in line.split():
            counts[tok] += 1
            first_seen.setdefault(tok, len(first_seen))
    for tok in RESERVED_TOKENS:
        counts.pop(tok, None)
    if not counts:
        raise InputError("corpus is empty: no tokens found")
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    return Vocab(ranked[:max_size])


def encode(line: str, vocab: Vocab, max_len: int = DEFAULT_MAX_LEN) -> Sequence:
    """Encode a whitespace-tokenized line, truncating at ``max_len``."""
    ids = [vocab.id_of(tok) for tok in line.split()]
    if not ids:
        raise InputError("cannot encode an empty line")
    return Sequence(tuple(ids[:max_len]))


def decode(seq: Sequence, vocab: Vocab) -> str:
    return " ".join(vocab.token_of(i) for i in seq.ids)


def encode_corpus(lines, vocab: Vocab, split: str = "",
                  max_len: int = DEFAULT_MAX_LEN) -> Corpus:
    seqs = [encode(line, vocab, max_len) for line in lines if line.strip()]
    if not seqs:
        raise InputError("no non-empty lines to encode")
    return Corpus(vocab, tuple(seqs), split)


def split_tail(corpus: Corpus, n: int) -> tuple[Corpus, Corpus]:
    """Split off the last ``n`` sequences (head, tail); disjoint and covering."""
    if not 0 < n < len(corpus):
        raise InputError("tail size must leave both splits non-empty")
    head = Corpus(corpus.vocab, corpus.sequences[:-n], corpus.split)
    tail = Corpus(corpus.vocab, corpus.sequences[-n:], corpus.split)
    return head, tail


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in corpus:
            fh.write(decode(seq, corpus.vocab))
            fh.write("\n")


def load_corpus(path, vocab: Vocab, split: str = "",
                max_len: int = DEFAULT_MAX_LEN) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    return encode_corpus(lines, vocab, split=split, max_len=max_len)


def corpus_to_arrays(corpus_or_seqs, pad_id: int = PAD) -> tuple[np.ndarray, np.ndarray]:
    """Pad to a (N, Lmax) id matrix plus a length vector, for batched kernels."""
    seqs = list(corpus_or_seqs)
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    out = np.full((len(seqs), int(lengths.max())), pad_id, dtype=np.int64)
    for i, seq in enumerate(seqs):
        out[i, : len(seq)] = seq.ids
    return out, lengths


_STOCHASTIC_TOL = 1e-9


@dataclass(frozen=True)
class MarkovSource:
    """First-order Markov chain over content tokens, emitting fixed-length sequences."""

    tokens: tuple[str, ...]
    initial: np.ndarray
    transition: np.ndarray
    length: int
    vocab: Vocab = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        initial = np.asarray(self.initial, dtype=np.float64)
        transition = np.asarray(self.transition, dtype=np.float64)
        k = len(self.tokens)
        if initial.shape != (k,) or transition.shape != (k, k):
            raise InputError("initial/transition shapes do not match token count")
        if (initial < 0).any() or (transition < 0).any():
            raise InputError("probabilities must be non-negative")
        if abs(initial.sum() - 1.0) > _STOCHASTIC_TOL:
            raise InputError("initial distribution must sum to 1")
        if np.abs(transition.sum(axis=1) - 1.0).max() > _STOCHASTIC_TOL:
            raise InputError("transition rows must sum to 1")
        if self.length < 1:
            raise InputError("sequence length must be >= 1")
        initial.setflags(write=False)
        transition.setflags(write=False)
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "vocab", Vocab(self.tokens))

    @classmethod
    def load(cls, path) -> "MarkovSource":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        for key in ("initial", "transition", "length"):
            if key not in doc:
                raise InputError(f"{path}: missing '{key}'")
        k = len(doc["initial"])
        tokens = doc.get("tokens", [f"w{i}" for i in range(k)])
        return cls(tuple(tokens), np.array(doc["initial"]),
                   np.array(doc["transition"]), int(doc["length"]))

    def save(self, path) -> None:
        doc = {
            "initial": self.initial.tolist(),
            "transition": self.transition.tolist(),
            "length": self.length,
            "tokens": list(self.tokens),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    def states_of(self, seq: Sequence) -> np.ndarray:
        states = np.array(seq.ids, dtype=np.int64) - NUM_RESERVED
        if states.min() < 0 or states.max() >= len(self.tokens):
            raise InputError("sequence contains tokens outside the source alphabet")
        return states


def synth_markov(source: MarkovSource, n: int, rng, split: str = "") -> Corpus:
    """Draw ``n`` i.i.d. length-L sequences from the chain."""
    if n < 1:
        raise InputError("n must be >= 1")
    states = _sample_chain(source, n, source.length, rng)
    ids = states + NUM_RESERVED
    seqs = tuple(Sequence(tuple(row)) for row in ids)
    return Corpus(source.vocab, seqs, split)


def _sample_chain(source: MarkovSource, n: int, length: int, rng) -> np.ndarray:
    k = len(source.tokens)
    out = np.empty((n, length), dtype=np.int64)
    cum_init = np.cumsum(source.initial)
    out[:, 0] = np.minimum((cum_init < rng.random(n)[:, None]).sum(axis=1), k - 1)
    cum_rows = np.cumsum(source.transition, axis=1)
    for t in range(1, length):
        rows = cum_rows[out[:, t - 1]]
        out[:, t] = np.minimum((rows < rng.random(n)[:, None]).sum(axis=1), k - 1)
    return out


def exact_prob(source: MarkovSource, seq: Sequence) -> float:
    """Exact chain probability: initial[x1] * prod transition[x_{t-1}, x_t]."""
    states = source.states_of(seq)
    p = source.initial[states[0]]
    for prev, cur in zip(states[:-1], states[1:]):
        p *= source.transition[prev, cur]
    return float(p)
