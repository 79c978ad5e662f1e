"""Model persistence: one JSON document per checkpoint.

Layout: {"format_version": 1, "kind": "ngram" | "neural" | "markov" |
"textcnn", "vocab": {"tokens": [...]}, "params": {...}} where params maps
names to (nested) lists of 64-bit floats plus the scalars needed to
rebuild the model. Reserved tokens are implicit at ids 0..3.
"""

from __future__ import annotations

import json

import numpy as np

from .data import NUM_RESERVED, MarkovSource, Vocab
from .disc import DiscConfig, TextCNN
from .errors import InputError
from .genmodel import MarkovModel, NeuralConfig, NeuralLM, NGramLM

FORMAT_VERSION = 1


def save_model(model, path) -> None:
    kind = getattr(model, "kind", None)
    writer = _WRITERS.get(kind)
    if writer is None:
        raise InputError(f"cannot checkpoint a model of kind {kind!r}")
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "vocab": {"tokens": list(model.vocab.tokens[NUM_RESERVED:])},
        "params": writer(model),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported checkpoint format")
    kind = doc.get("kind")
    reader = _READERS.get(kind)
    if reader is None:
        raise InputError(f"{path}: unknown model kind {kind!r}")
    vocab = Vocab(doc["vocab"]["tokens"])
    return reader(vocab, doc["params"])


# -- ngram ------------------------------------------------------------------


def _write_ngram(model: NGramLM) -> dict:
    contexts = sorted(model._counts)
    return {
        "order": model.order,
        "delta": model.delta,
        "fixed_length": model.fixed_length,
        "contexts": [list(c) for c in contexts],
        "rows": [model._counts[c].tolist() for c in contexts],
    }


def _read_ngram(vocab: Vocab, params: dict) -> NGramLM:
    model = NGramLM(vocab, params["order"], params["delta"], params["fixed_length"])
    for ctx, row in zip(params["contexts"], params["rows"]):
        model._counts[tuple(int(t) for t in ctx)] = np.array(row, dtype=np.float64)
    return model


# -- neural -----------------------------------------------------------------

_NEURAL_ARRAYS = ("embed", "w_xh", "w_hh", "b_h", "w_hy", "b_y")


def _write_neural(model: NeuralLM) -> dict:
    out = {name: model.params[name].tolist() for name in _NEURAL_ARRAYS}
    out["config"] = {
        "embed_dim": model.cfg.embed_dim,
        "hidden_dim": model.cfg.hidden_dim,
        "lr": model.cfg.lr,
        "momentum": model.cfg.momentum,
        "batch_size": model.cfg.batch_size,
        "max_epochs": model.cfg.max_epochs,
        "patience": model.cfg.patience,
        "fixed_length": model.cfg.fixed_length,
        "seed": model.cfg.seed,
    }
    return out


def _read_neural(vocab: Vocab, params: dict) -> NeuralLM:
    cfg = NeuralConfig(**params["config"])
    model = NeuralLM(vocab, cfg)
    for name in _NEURAL_ARRAYS:
        model.params[name] = np.array(params[name], dtype=np.float64)
    return model


# -- markov -----------------------------------------------------------------


def _write_markov(model: MarkovModel) -> dict:
    return {
        "initial": model.source.initial.tolist(),
        "transition": model.source.transition.tolist(),
        "length": model.source.length,
    }


def _read_markov(vocab: Vocab, params: dict) -> MarkovModel:
    source = MarkovSource(vocab.tokens[NUM_RESERVED:],
                          np.array(params["initial"]),
                          np.array(params["transition"]),
                          int(params["length"]))
    return MarkovModel(source)


# -- textcnn ----------------------------------------------------------------


def _write_textcnn(model: TextCNN) -> dict:
    out = {name: arr.tolist() for name, arr in model.params.items()}
    out["config"] = {
        "embed_dim": model.params["embed"].shape[1],
        "kernels2": model.cfg.kernels2,
        "kernels3": model.cfg.kernels3,
        "lr": model.cfg.lr,
        "momentum": model.cfg.momentum,
        "batch_size": model.cfg.batch_size,
        "max_epochs": model.cfg.max_epochs,
        "patience": model.cfg.patience,
        "temperature": model.cfg.temperature,
        "seed": model.cfg.seed,
    }
    out["embed_frozen"] = model.embed_frozen
    return out


def _read_textcnn(vocab: Vocab, params: dict) -> TextCNN:
    cfg = DiscConfig(**params["config"])
    model = TextCNN(vocab, cfg)
    model.embed_frozen = bool(params.get("embed_frozen", False))
    for name in list(model.params):
        model.params[name] = np.array(params[name], dtype=np.float64)
    return model


_WRITERS = {
    "ngram": _write_ngram,
    "neural": _write_neural,
    "markov": _write_markov,
    "textcnn": _write_textcnn,
}

_READERS = {
    "ngram": _read_ngram,
    "neural": _read_neural,
    "markov": _read_markov,
    "textcnn": _read_textcnn,
}
