"""Command-line interface and experiment pipeline.

Subcommands: train-gen, train-disc, estimate-uc, sample, evaluate, sweep,
oracle-check, pipeline. Exit codes: 0 success, 2 configuration error,
3 stage failure, 4 attempt budget exhausted.

The pipeline persists one artifact set per stage under the output
directory, keyed by a hash of the configuration, so deleting a late
artifact and re-running recomputes only that stage. With a single worker
every run is bit-reproducible for a given (config, seed).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_model, save_model
from .data import (Corpus, Vocab, build_vocab, load_corpus, save_corpus,
                   synth_markov)
from .disc import DiscConfig, error_rate, train_discriminator
from .errors import BudgetError, ConfigError, FiltergenError, InputError
from .filtering import (BoundaryEstimateConfig, FilteredGenerator, FilterParams,
                        estimate_boundary, sample_filtered)
from .genmodel import NeuralConfig, NGramConfig, SamplerConfig, train_mle
from .metrics import (KNOWN_METRICS, SWEEP_COLUMNS, BleuConfig, SweepReport,
                      compute_metric_row, embed, fit_ppmi_svd)
from .oracle import exact_boundary, exact_filtered_distribution, tv_distance
from .scenarios import SCENARIO_NAMES, build_scenario, load_spec
from .seeding import derive_seed

# ---------------------------------------------------------------------------
# Experiment configuration (strict schema: unknown keys are errors).
# ---------------------------------------------------------------------------

_EVAL_DEFAULTS = {"n_samples": 2000, "bleu_order": 5, "embed_dim": 64,
                  "rlm_min_samples": 1000, "max_len": 64}


@dataclass
class ExperimentConfig:
    seed: int
    scenario: str | None
    data: dict | None
    data_sizes: dict | None
    generator: dict | None
    discriminator: DiscConfig
    filter_ratios: list
    max_attempts_per_sample: int
    temperatures: list
    metrics: list
    eval: dict
    uc: BoundaryEstimateConfig
    raw: dict = field(repr=False, default_factory=dict)

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


_SCHEMA_SECTIONS = {
    "seed", "scenario", "data", "data_sizes", "generator", "discriminator",
    "filter", "temperatures", "metrics", "eval", "uc",
}
_DATA_KEYS = {"train", "valid", "test", "vocab_size", "max_len"}
_SIZE_KEYS = {"train", "valid", "test"}
_GEN_KEYS = {"kind", "order", "delta", "fixed_length", "embed_dim", "hidden_dim",
             "lr", "momentum", "batch_size", "max_epochs", "patience", "train_n",
             "initial", "transition"}
_DISC_KEYS = {"embed_dim", "kernels2", "kernels3", "lr", "momentum", "batch_size",
              "max_epochs", "patience", "temperature"}
_FILTER_KEYS = {"c", "max_attempts_per_sample"}
_UC_KEYS = {"samples_per_round", "rounds", "step", "init", "tail"}


def validate_config(path) -> ExperimentConfig:
    """Parse and validate; raises ConfigError carrying every problem found."""
    problems: list[str] = []
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read config: {exc}"])
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a JSON object"])

    for key in doc:
        if key not in _SCHEMA_SECTIONS:
            problems.append(f"unknown key '{key}'")

    seed = doc.get("seed")
    if not isinstance(seed, int):
        problems.append("seed required (integer)")
        seed = 0

    scenario = doc.get("scenario")
    data = doc.get("data")
    if scenario is not None and scenario not in SCENARIO_NAMES:
        problems.append(f"unknown scenario '{scenario}'")
    if (scenario is None) == (data is None):
        problems.append("exactly one of 'scenario' or 'data' is required")
    _check_keys(problems, data, _DATA_KEYS, "data")
    if data is not None:
        for key in ("train", "valid", "test"):
            if key not in data:
                problems.append(f"data.{key} required")
            elif not Path(data[key]).exists():
                problems.append(f"data.{key}: file not found: {data[key]}")
    data_sizes = doc.get("data_sizes")
    _check_keys(problems, data_sizes, _SIZE_KEYS, "data_sizes")
    if data_sizes is not None and scenario is None:
        problems.append("data_sizes only applies to scenario mode")

    generator = doc.get("generator")
    _check_keys(problems, generator, _GEN_KEYS, "generator")
    if generator is not None and generator.get("kind") not in ("ngram", "neural", "markov"):
        problems.append("generator.kind must be one of ngram|neural|markov")
    if generator is None and scenario is None:
        problems.append("generator section required in data mode")

    disc_doc = doc.get("discriminator") or {}
    _check_keys(problems, disc_doc, _DISC_KEYS, "discriminator")
    try:
        disc_cfg = DiscConfig(**disc_doc, seed=seed)
    except (TypeError, InputError) as exc:
        problems.append(f"discriminator: {exc}")
        disc_cfg = DiscConfig(seed=seed)

    filt = doc.get("filter") or {"c": [0.5]}
    _check_keys(problems, filt, _FILTER_KEYS, "filter")
    ratios = filt.get("c", [0.5])
    if not isinstance(ratios, list) or not ratios:
        problems.append("filter.c must be a non-empty list")
        ratios = [0.5]
    for c in ratios:
        if not isinstance(c, (int, float)) or not 0.0 < c <= 1.0:
            problems.append(f"filter.c entries must lie in (0, 1], got {c!r}")
    max_attempts = filt.get("max_attempts_per_sample", 10_000)

    temps = doc.get("temperatures", [1.0])
    if not isinstance(temps, list) or not temps:
        problems.append("temperatures must be a non-empty list")
        temps = [1.0]
    for t in temps:
        if not isinstance(t, (int, float)) or t <= 0:
            problems.append(f"temperature must be > 0, got {t!r}")

    metrics = doc.get("metrics", ["bleu", "selfbleu", "lm", "fed"])
    for m in metrics:
        if m not in KNOWN_METRICS:
            problems.append(f"unknown metric '{m}' (known: {', '.join(KNOWN_METRICS)})")

    eval_doc = dict(_EVAL_DEFAULTS)
    _check_keys(problems, doc.get("eval"), set(_EVAL_DEFAULTS), "eval")
    eval_doc.update(doc.get("eval") or {})
    if "rlm" in metrics and eval_doc["n_samples"] < eval_doc["rlm_min_samples"]:
        problems.append("eval.n_samples must be >= eval.rlm_min_samples when 'rlm' is requested")

    uc_doc = doc.get("uc") or {}
    _check_keys(problems, uc_doc, _UC_KEYS, "uc")
    try:
        uc_cfg = BoundaryEstimateConfig(**uc_doc)
    except (TypeError, InputError) as exc:
        problems.append(f"uc: {exc}")
        uc_cfg = BoundaryEstimateConfig()

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(seed=seed, scenario=scenario, data=data,
                            data_sizes=data_sizes, generator=generator,
                            discriminator=disc_cfg, filter_ratios=list(ratios),
                            max_attempts_per_sample=int(max_attempts),
                            temperatures=list(temps), metrics=list(metrics),
                            eval=eval_doc, uc=uc_cfg, raw=doc)


def _check_keys(problems, section, allowed, name) -> None:
    if section is None:
        return
    if not isinstance(section, dict):
        problems.append(f"{name} must be an object")
        return
    for key in section:
        if key not in allowed:
            problems.append(f"unknown key '{name}.{key}'")


def _generator_config(gen_doc: dict, fixed_length, seed: int):
    kind = gen_doc.get("kind", "ngram")
    if kind == "ngram":
        return NGramConfig(order=gen_doc.get("order", 2),
                           delta=gen_doc.get("delta", 0.01),
                           fixed_length=gen_doc.get("fixed_length", fixed_length),
                           seed=seed)
    if kind == "neural":
        return NeuralConfig(
            embed_dim=gen_doc.get("embed_dim", 32),
            hidden_dim=gen_doc.get("hidden_dim", 64),
            lr=gen_doc.get("lr", 0.1),
            momentum=gen_doc.get("momentum", 0.9),
            batch_size=gen_doc.get("batch_size", 32),
            max_epochs=gen_doc.get("max_epochs", 50),
            patience=gen_doc.get("patience", 3),
            fixed_length=gen_doc.get("fixed_length", fixed_length),
            seed=seed)
    raise ConfigError([f"generator.kind '{kind}' not trainable from corpora"])


# ---------------------------------------------------------------------------
# Pipeline.
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    config_hash: str
    versions: dict
    stages: list

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "versions": self.versions,
                "stages": self.stages}

    def artifact_digests(self) -> dict:
        return {a["path"]: a["sha256"] for st in self.stages for a in st["artifacts"]}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class _Pipeline:
    def __init__(self, config: ExperimentConfig, out_dir: Path):
        self.cfg = config
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.hash = config.config_hash()
        self.state_path = self.out / "checkpoints.json"
        self.state = self._load_state()
        self.stages: list[dict] = []
        self.scenario = build_scenario(config.scenario) if config.scenario else None

    def _load_state(self) -> dict:
        if self.state_path.exists():
            state = json.loads(self.state_path.read_text())
            if state.get("config_hash") == self.hash:
                return state
        return {"config_hash": self.hash, "stages": {}}

    def _save_state(self) -> None:
        self.state_path.write_text(json.dumps(self.state, indent=1, sort_keys=True))

    def _stage(self, name: str, artifacts: list[str], runner) -> None:
        paths = [self.out / a for a in artifacts]
        recorded = self.state["stages"].get(name)
        if recorded is not None and all(p.exists() for p in paths):
            digests = {a: _sha256(p) for a, p in zip(artifacts, paths)}
            if digests == recorded.get("artifacts"):
                self.stages.append({"name": name, "skipped": True, "wall_clock_s": 0.0,
                                    "artifacts": [{"path": a, "sha256": d}
                                                  for a, d in digests.items()]})
                return
        t0 = time.perf_counter()
        try:
            runner()
        except FiltergenError:
            raise
        except Exception as exc:  # surface the failing stage
            raise FiltergenError(f"stage '{name}' failed: {exc}") from exc
        elapsed = time.perf_counter() - t0
        digests = {a: _sha256(p) for a, p in zip(artifacts, paths)}
        self.state["stages"][name] = {"artifacts": digests}
        self._save_state()
        self.stages.append({"name": name, "skipped": False,
                            "wall_clock_s": round(elapsed, 3),
                            "artifacts": [{"path": a, "sha256": d}
                                          for a, d in digests.items()]})

    # -- stage bodies -----------------------------------------------------

    def run(self) -> RunManifest:
        cfg = self.cfg
        self._stage("data", ["train.txt", "valid.txt", "test.txt", "vocab.json"],
                    self._stage_data)
        self._stage("train-gen", ["gen.json"], self._stage_train_gen)
        self._stage("train-disc", ["disc.json", "disc_report.json"], self._stage_train_disc)
        uc_files = [self._uc_name(t, c) for t in cfg.temperatures
                    for c in cfg.filter_ratios]
        self._stage("estimate-uc", uc_files, self._stage_uc)
        sample_files = []
        for t in cfg.temperatures:
            sample_files.append(self._sample_name(t, None, "baseline"))
            for c in cfg.filter_ratios:
                sample_files.append(self._sample_name(t, c, "accepted"))
                sample_files.append(self._sample_name(t, c, "rejected"))
                sample_files.append(self._sample_name(t, c, "stats"))
        self._stage("sample", sample_files, self._stage_sample)
        final = ["sweep.csv", "report.json"]
        if self.scenario is not None:
            final.append("oracle_report.json")
        self._stage("evaluate", final, self._stage_evaluate)
        manifest = RunManifest(self.hash,
                               {"filtergen": __version__, "numpy": np.__version__},
                               self.stages)
        (self.out / "manifest.json").write_text(
            json.dumps(manifest.to_dict(), indent=1, sort_keys=True))
        return manifest

    def _uc_name(self, temp, ratio) -> str:
        return f"uc_T{temp:g}_c{ratio:g}.json"

    def _sample_name(self, temp, ratio, stream) -> str:
        if stream == "baseline":
            return f"samples_T{temp:g}_baseline.txt"
        ext = "json" if stream == "stats" else "txt"
        return f"samples_T{temp:g}_c{ratio:g}_{stream}.{ext}"

    def _stage_data(self) -> None:
        cfg = self.cfg
        if self.scenario is not None:
            s = self.scenario
            corpora = {"train": s.train, "valid": s.valid, "test": s.test}
            if cfg.data_sizes:
                spec_seed = load_spec(cfg.scenario)["seed"]
                corpora = {
                    name: synth_markov(
                        s.source, cfg.data_sizes[name],
                        np.random.default_rng(derive_seed(spec_seed, name, s.length)),
                        name)
                    for name in ("train", "valid", "test")
                }
            for name, corpus in corpora.items():
                save_corpus(corpus, self.out / f"{name}.txt")
            s.vocab.save(self.out / "vocab.json")
        else:
            with open(cfg.data["train"], encoding="utf-8") as fh:
                lines = fh.readlines()
            vocab = build_vocab(lines, cfg.data.get("vocab_size", 10_000))
            vocab.save(self.out / "vocab.json")
            max_len = cfg.data.get("max_len", 64)
            for name in ("train", "valid", "test"):
                corpus = load_corpus(cfg.data[name], vocab, name, max_len)
                save_corpus(corpus, self.out / f"{name}.txt")

    def _corpora(self):
        vocab = Vocab.load(self.out / "vocab.json")
        max_len = self.cfg.eval["max_len"]
        return {name: load_corpus(self.out / f"{name}.txt", vocab, name, max_len)
                for name in ("train", "valid", "test")}

    def _stage_train_gen(self) -> None:
        if self.scenario is not None:
            save_model(self.scenario.generator, self.out / "gen.json")
            return
        corpora = self._corpora()
        gen_cfg = _generator_config(self.cfg.generator, None,
                                    derive_seed(self.cfg.seed, "train-gen"))
        model = train_mle(corpora["train"], corpora["valid"], gen_cfg)
        save_model(model, self.out / "gen.json")

    def _stage_train_disc(self) -> None:
        corpora = self._corpora()
        gen = load_model(self.out / "gen.json")
        rng = np.random.default_rng(derive_seed(self.cfg.seed, "train-disc"))
        disc, report = train_discriminator(corpora["train"], gen,
                                           self.cfg.discriminator, rng)
        save_model(disc, self.out / "disc.json")
        (self.out / "disc_report.json").write_text(json.dumps({
            "train_loss": report.train_loss,
            "valid_accuracy": report.valid_accuracy,
            "best_epoch": report.best_epoch,
            "final_valid_accuracy": report.final_valid_accuracy,
            "converged": report.converged,
        }))

    def _sampler(self, temp: float) -> SamplerConfig:
        return SamplerConfig(temperature=temp, max_len=self.cfg.eval["max_len"],
                             seed=derive_seed(self.cfg.seed, "sample", temp))

    def _stage_uc(self) -> None:
        gen = load_model(self.out / "gen.json")
        disc = load_model(self.out / "disc.json")
        for temp in self.cfg.temperatures:
            for ratio in self.cfg.filter_ratios:
                if ratio == 1.0:
                    doc = {"c": 1.0, "u_c": 0.0, "trace": []}
                else:
                    rng = np.random.default_rng(
                        derive_seed(self.cfg.seed, "uc", temp, ratio))
                    boundary, trace = estimate_boundary(
                        gen, disc, ratio, self.cfg.uc, self._sampler(temp), rng)
                    doc = {"c": ratio, "u_c": boundary, "trace": trace}
                (self.out / self._uc_name(temp, ratio)).write_text(json.dumps(doc))

    def _stage_sample(self) -> None:
        cfg = self.cfg
        gen = load_model(self.out / "gen.json")
        disc = load_model(self.out / "disc.json")
        n = cfg.eval["n_samples"]
        for temp in cfg.temperatures:
            sampler = self._sampler(temp)
            baseline = gen.sample_corpus(n, sampler, np.random.default_rng(sampler.seed))
            save_corpus(baseline, self.out / self._sample_name(temp, None, "baseline"))
            for ratio in cfg.filter_ratios:
                uc_doc = json.loads((self.out / self._uc_name(temp, ratio)).read_text())
                params = FilterParams(ratio, uc_doc["u_c"] if ratio < 1.0 else 0.0)
                fg = FilteredGenerator(gen, disc, params, cfg.max_attempts_per_sample)
                accepted, stats = sample_filtered(
                    fg, n, sampler, np.random.default_rng(sampler.seed))
                save_corpus(accepted, self.out / self._sample_name(temp, ratio, "accepted"))
                rejected = stats.rejected_corpus(gen.vocab)
                rej_path = self.out / self._sample_name(temp, ratio, "rejected")
                if rejected is not None:
                    save_corpus(rejected, rej_path)
                else:
                    rej_path.write_text("")
                (self.out / self._sample_name(temp, ratio, "stats")).write_text(
                    json.dumps(stats.to_dict()))

    def _stage_evaluate(self) -> None:
        cfg = self.cfg
        corpora = self._corpora()
        vocab = corpora["train"].vocab
        gen = load_model(self.out / "gen.json")
        oracle_cfg = NGramConfig(order=2, delta=0.01, fixed_length=gen.fixed_length)
        oracle_lm = train_mle(corpora["train"], None, oracle_cfg)
        bleu_cfg = BleuConfig(max_order=cfg.eval["bleu_order"])
        embedding = real_emb = None
        if "fed" in cfg.metrics:
            embedding = fit_ppmi_svd(corpora["train"], dim=cfg.eval["embed_dim"])
            real_emb = embed(corpora["test"], embedding)

        def metrics_for(samples, seed_parts):
            return compute_metric_row(
                samples, cfg.metrics, real_train=corpora["train"],
                real_test=corpora["test"], oracle_lm=oracle_lm,
                rlm_config=oracle_cfg, embedding=embedding, real_test_emb=real_emb,
                bleu_cfg=bleu_cfg, disc_cfg=cfg.discriminator,
                seed=derive_seed(cfg.seed, "err", *seed_parts))

        rows = []
        max_len = cfg.eval["max_len"]
        for temp in cfg.temperatures:
            baseline = load_corpus(self.out / self._sample_name(temp, None, "baseline"),
                                   vocab, "baseline", max_len)
            rows.append({"temperature": temp, "c": 1.0, "stream": "baseline",
                         **metrics_for(baseline, (temp, "baseline"))})
            for ratio in cfg.filter_ratios:
                accepted = load_corpus(
                    self.out / self._sample_name(temp, ratio, "accepted"),
                    vocab, "accepted", max_len)
                rows.append({"temperature": temp, "c": ratio, "stream": "accepted",
                             **metrics_for(accepted, (temp, ratio, "a"))})
                rej_path = self.out / self._sample_name(temp, ratio, "rejected")
                if rej_path.read_text().strip():
                    rejected = load_corpus(rej_path, vocab, "rejected", max_len)
                    if len(rejected) > cfg.eval["n_samples"]:
                        rejected = Corpus(vocab,
                                          rejected.sequences[:cfg.eval["n_samples"]],
                                          "rejected")
                    rows.append({"temperature": temp, "c": ratio, "stream": "rejected",
                                 **metrics_for(rejected, (temp, ratio, "r"))})
        report = SweepReport(rows)
        report.to_csv(self.out / "sweep.csv")
        (self.out / "report.json").write_text(json.dumps(
            {"rows": rows, "columns": list(SWEEP_COLUMNS)}, sort_keys=True))
        if self.scenario is not None:
            doc = oracle_check(self.scenario, self.cfg.filter_ratios[0])
            (self.out / "oracle_report.json").write_text(json.dumps(doc, sort_keys=True))


def run_pipeline(config: ExperimentConfig, out_dir) -> RunManifest:
    return _Pipeline(config, Path(out_dir)).run()


def oracle_check(scenario, ratio: float) -> dict:
    """Exact-filter invariant report for a bundled scenario.

    On the unclamped filtered region the filtered law must be exactly
    proportional to the real law; it is exactly equal whenever the target
    acceptance ratio is attained exactly (possible only when an acceptance
    plateau coincides with the target, as on s1).
    """
    sol = exact_boundary(scenario.p_model, scenario.ideal_scores, ratio)
    filtered, c_exact = exact_filtered_distribution(
        scenario.p_model, scenario.ideal_scores, ratio, sol.boundary)
    tv_before = tv_distance(scenario.p_model, scenario.p_real)
    tv_after = tv_distance(filtered, scenario.p_real)
    region = scenario.ideal_scores < min(sol.boundary, 1.0 / (1.0 + ratio))
    if region.any():
        scaled = (ratio / c_exact) * scenario.p_real.probs[region]
        proportional_err = float(np.abs(filtered.probs[region] - scaled).max())
        corrected = float(
            np.abs(filtered.probs[region] - scenario.p_real.probs[region]).max())
    else:
        proportional_err = corrected = 0.0
    target_attained = abs(c_exact - ratio) <= 1e-12
    boundaries = [exact_boundary(scenario.p_model, scenario.ideal_scores, c).boundary
                  for c in sorted(scenario.target_ratios)]
    checks = {
        "normalized": bool(abs(filtered.probs.sum() - 1.0) <= 1e-12),
        "filtered_region_proportional_to_real": bool(proportional_err <= 1e-9),
        "exact_correction_when_target_attained": bool(
            corrected <= 1e-9 if target_attained else True),
        "tv_not_increased": bool(tv_after <= tv_before + 1e-12),
        "acceptance_matches_target": bool(abs(c_exact - ratio) <= 0.05),
        "boundary_monotone_in_target": bool(
            all(boundaries[i] >= boundaries[i + 1] - 1e-9
                for i in range(len(boundaries) - 1))),
    }
    return {
        "scenario": scenario.name,
        "c": ratio,
        "u_c": sol.boundary,
        "c_exact": c_exact,
        "achievable": sol.achievable,
        "target_attained": target_attained,
        "tv_before": tv_before,
        "tv_after": tv_after,
        "max_correction_error": float(corrected),
        "checks": checks,
        "pass": all(checks.values()),
    }


# ---------------------------------------------------------------------------
# Subcommand handlers.
# ---------------------------------------------------------------------------


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read {path}: {exc}"])


def _cmd_train_gen(args) -> int:
    gen_doc = _load_json(args.config)
    allowed = _GEN_KEYS | {"vocab_size", "max_len"}
    unknown = set(gen_doc) - allowed
    if unknown:
        raise ConfigError([f"unknown generator config key '{k}'" for k in sorted(unknown)])
    with open(args.train, encoding="utf-8") as fh:
        lines = fh.readlines()
    vocab = build_vocab(lines, gen_doc.get("vocab_size", 10_000))
    max_len = gen_doc.get("max_len", 64)
    train = load_corpus(args.train, vocab, "train", max_len)
    valid = load_corpus(args.valid, vocab, "valid", max_len) if args.valid else None
    cfg = _generator_config(gen_doc, gen_doc.get("fixed_length"), args.seed)
    model = train_mle(train, valid, cfg)
    save_model(model, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_train_disc(args) -> int:
    gen = load_model(args.gen_model)
    disc_doc = _load_json(args.config) if args.config else {}
    unknown = set(disc_doc) - _DISC_KEYS
    if unknown:
        raise ConfigError([f"unknown discriminator config key '{k}'" for k in sorted(unknown)])
    cfg = DiscConfig(**disc_doc, seed=args.seed)
    real = load_corpus(args.real, gen.vocab, "train")
    disc, report = train_discriminator(real, gen, cfg,
                                       np.random.default_rng(args.seed))
    save_model(disc, args.out)
    print(f"wrote {args.out} (valid accuracy {report.final_valid_accuracy:.4f}, "
          f"converged={report.converged})")
    return 0


def _cmd_estimate_uc(args) -> int:
    gen = load_model(args.gen)
    disc = load_model(args.disc)
    sampler = SamplerConfig(temperature=args.temperature, seed=args.seed)
    boundary, trace = estimate_boundary(gen, disc, args.c, None, sampler,
                                        np.random.default_rng(args.seed))
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"c": args.c, "u_c": boundary, "trace": trace}, fh)
    print(f"u_c = {boundary:.4f} (written to {args.out})")
    return 0


def _cmd_sample(args) -> int:
    gen = load_model(args.gen)
    disc = load_model(args.disc)
    params = FilterParams(args.c, args.u_c if args.c < 1.0 else 0.0)
    fg = FilteredGenerator(gen, disc, params, args.max_attempts)
    sampler = SamplerConfig(temperature=args.temperature, seed=args.seed)
    corpus, stats = sample_filtered(fg, args.n, sampler,
                                    np.random.default_rng(args.seed))
    save_corpus(corpus, args.out)
    if args.rejected_out:
        rejected = stats.rejected_corpus(gen.vocab)
        if rejected is not None:
            save_corpus(rejected, args.rejected_out)
        else:
            Path(args.rejected_out).write_text("")
    stats_path = args.stats_out or f"{args.out}.stats.json"
    with open(stats_path, "w", encoding="utf-8") as fh:
        json.dump(stats.to_dict(), fh)
    print(f"accepted {stats.acceptances}/{stats.attempts} "
          f"(rate {stats.acceptance_rate:.4f})")
    return 0


def _cmd_evaluate(args) -> int:
    gen = load_model(args.gen)
    real = load_corpus(args.real, gen.vocab, "real")
    samples = load_corpus(args.samples, gen.vocab, "samples")
    metric_names = [m for m in args.metrics.split(",") if m]
    unknown = set(metric_names) - set(KNOWN_METRICS)
    if unknown:
        raise ConfigError([f"unknown metric '{m}'" for m in sorted(unknown)])
    embedding = real_emb = None
    if "fed" in metric_names:
        embedding = fit_ppmi_svd(real)
        real_emb = embed(real, embedding)
    row = compute_metric_row(samples, metric_names, real_train=real,
                             real_test=real, oracle_lm=gen,
                             embedding=embedding, real_test_emb=real_emb,
                             seed=args.seed)
    if args.disc:
        disc = load_model(args.disc)
        row["disc_error_rate"] = error_rate(disc, real, samples)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(row, fh, sort_keys=True)
    print(json.dumps(row, sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    config = validate_config(args.config)
    out_dir = Path(args.out_dir or Path(args.out).parent or ".")
    manifest = run_pipeline(config, out_dir)
    sweep_path = out_dir / "sweep.csv"
    if Path(args.out) != sweep_path:
        Path(args.out).write_text(sweep_path.read_text())
    print(f"wrote {args.out} ({len(manifest.stages)} stages)")
    return 0


def _cmd_oracle_check(args) -> int:
    scenario = build_scenario(args.scenario)
    doc = oracle_check(scenario, args.c)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
    status = "PASS" if doc["pass"] else "FAIL"
    for name, ok in doc["checks"].items():
        print(f"{'ok ' if ok else 'FAIL'} {name}")
    print(f"{status}: tv {doc['tv_before']:.4f} -> {doc['tv_after']:.4f}, "
          f"u_c={doc['u_c']:.4f}, c_exact={doc['c_exact']:.4f}")
    return 0 if doc["pass"] else 3


def _cmd_pipeline(args) -> int:
    config = validate_config(args.config)
    out_dir = args.out_dir or "runs"
    manifest = run_pipeline(config, out_dir)
    print(json.dumps(manifest.to_dict(), indent=1, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="filtergen",
        description="Discriminator-guided rejection sampling for sequence generators")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--workers", type=int, default=1,
                        help="worker count; 1 (the default and only in-process mode) "
                             "guarantees bit-reproducible runs")
    common.add_argument("--out-dir", default=None, help="artifact directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-gen", parents=[common],
                       help="fit a generator by maximum likelihood")
    p.add_argument("--train", required=True)
    p.add_argument("--valid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_gen)

    p = sub.add_parser("train-disc", parents=[common],
                       help="train the real-vs-generated classifier to convergence")
    p.add_argument("--real", required=True)
    p.add_argument("--gen-model", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_disc)

    p = sub.add_parser("estimate-uc", parents=[common],
                       help="search the sampling boundary for a target acceptance ratio")
    p.add_argument("--gen", required=True)
    p.add_argument("--disc", required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_estimate_uc)

    p = sub.add_parser("sample", parents=[common],
                       help="draw filtered samples (accepted plus optional rejected)")
    p.add_argument("--gen", required=True)
    p.add_argument("--disc", required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--u-c", dest="u_c", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--rejected-out")
    p.add_argument("--stats-out")
    p.add_argument("--max-attempts", type=int, default=10_000,
                   help="attempt budget per emitted sample")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score a sample corpus against real data")
    p.add_argument("--real", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--gen", required=True)
    p.add_argument("--disc")
    p.add_argument("--metrics", default="bleu,selfbleu,lm,fed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common],
                       help="run the pipeline and emit the temperature-sweep CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("oracle-check", parents=[common],
                       help="exact-filter invariant report for a bundled scenario")
    p.add_argument("--scenario", required=True, choices=SCENARIO_NAMES)
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_oracle_check)

    p = sub.add_parser("pipeline", parents=[common],
                       help="end-to-end staged run: data, models, boundary, samples, metrics")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except BudgetError as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return 4
    except (FiltergenError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
