"""Pipeline orchestration: distill -> embed -> evaluate, with persisted
stage artifacts.

Subcommands: distill, embed, evaluate, run-all, stats. Configuration comes
from a JSON file (--config or the CONCEPT_DISTILL_CONFIG environment
variable); --workdir/--seed/--jobs/--force override individual settings.
Stages are skipped when their outputs are newer than their inputs unless
--force is given. Errors print one machine-readable JSON line on stderr and
exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import concepts, corpus as corpus_mod, distill, embedding, evaluation, sectionizer
from .errors import ConfigError, MissingArtifact, PipelineError
from .gbdt import TrainConfig

log = logging.getLogger("concept_distill")

ENV_CONFIG = "CONCEPT_DISTILL_CONFIG"
ALL_VARIANTS = ("full", "boc", "uc")


@dataclass(frozen=True)
class CvConfig:
    k: int = 2
    runs: int = 20
    seed: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    corpus: Path
    lexicon: Path
    workdir: Path
    rules: Path | None = None          # None -> bundled defaults
    triggers: Path | None = None
    section_allowlist: tuple[str, ...] = sectionizer.DEFAULT_ALLOWLIST
    negation_window: int = concepts.DEFAULT_NEGATION_WINDOW
    max_ngram: int = concepts.DEFAULT_MAX_NGRAM
    tfidf_filter: bool = True
    variants: tuple[str, ...] = ALL_VARIANTS
    providers: tuple[embedding.ProviderConfig, ...] = ()
    train: TrainConfig = field(default_factory=TrainConfig)
    nearmiss_k: int = 3
    cv: CvConfig = field(default_factory=CvConfig)
    batch_size: int = embedding.DEFAULT_BATCH_SIZE

    def snapshot(self) -> dict:
        return {
            "corpus": str(self.corpus),
            "lexicon": str(self.lexicon),
            "rules": str(self.rules) if self.rules else None,
            "triggers": str(self.triggers) if self.triggers else None,
            "workdir": str(self.workdir),
            "section_allowlist": list(self.section_allowlist),
            "negation_window": self.negation_window,
            "max_ngram": self.max_ngram,
            "tfidf_filter": self.tfidf_filter,
            "variants": list(self.variants),
            "providers": [
                {
                    "kind": p.kind, "model_name": p.model_name, "dim": p.dim,
                    "endpoint": p.endpoint, "chunk_count": p.chunk_count, "seed": p.seed,
                }
                for p in self.providers
            ],
            "train": {
                "n_trees": self.train.n_trees, "max_depth": self.train.max_depth,
                "learning_rate": self.train.learning_rate, "reg_lambda": self.train.reg_lambda,
                "gamma": self.train.gamma, "min_child_weight": self.train.min_child_weight,
                "base_score": self.train.base_score, "seed": self.train.seed,
            },
            "nearmiss_k": self.nearmiss_k,
            "cv": {"k": self.cv.k, "runs": self.cv.runs, "seed": self.cv.seed},
            "batch_size": self.batch_size,
        }


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    base = path.parent

    def resolve(key, required=False):
        value = raw.get(key)
        if value is None:
            if required:
                raise ConfigError(f"config missing required path {key!r}")
            return None
        p = Path(value)
        return p if p.is_absolute() else base / p

    providers = []
    for i, pr in enumerate(raw.get("providers", [])):
        try:
            providers.append(embedding.ProviderConfig(
                kind=pr["kind"],
                model_name=pr["model_name"],
                dim=pr.get("dim", embedding.DEFAULT_DIM),
                endpoint=pr.get("endpoint"),
                chunk_count=pr.get("chunk_count", embedding.DEFAULT_CHUNK_COUNT),
                seed=pr.get("seed", 0),
            ))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"providers[{i}]: {e}") from None

    train_raw = raw.get("train", {})
    cv_raw = raw.get("cv", {})
    try:
        train = TrainConfig(**train_raw)
        cv = CvConfig(**cv_raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"train/cv settings: {e}") from None

    cfg = PipelineConfig(
        corpus=resolve("corpus", required=True),
        lexicon=resolve("lexicon", required=True),
        workdir=resolve("workdir") or base / "workdir",
        rules=resolve("rules"),
        triggers=resolve("triggers"),
        section_allowlist=tuple(raw.get("section_allowlist", sectionizer.DEFAULT_ALLOWLIST)),
        negation_window=raw.get("negation_window", concepts.DEFAULT_NEGATION_WINDOW),
        max_ngram=raw.get("max_ngram", concepts.DEFAULT_MAX_NGRAM),
        tfidf_filter=raw.get("tfidf_filter", True),
        variants=tuple(raw.get("variants", ALL_VARIANTS)),
        providers=tuple(providers),
        train=train,
        nearmiss_k=raw.get("nearmiss_k", 3),
        cv=cv,
        batch_size=raw.get("batch_size", embedding.DEFAULT_BATCH_SIZE),
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg: PipelineConfig) -> None:
    for label, p in (("corpus", cfg.corpus), ("lexicon", cfg.lexicon),
                     ("rules", cfg.rules), ("triggers", cfg.triggers)):
        if p is not None and not Path(p).is_file():
            raise ConfigError(f"{label} file not found: {p}")
    bad = set(cfg.variants) - set(ALL_VARIANTS)
    if bad:
        raise ConfigError(f"unknown variants: {sorted(bad)}")
    unknown = set(cfg.section_allowlist) - sectionizer.CANONICAL_SECTIONS
    if unknown:
        raise ConfigError(f"allowlist ids not in canonical registry: {sorted(unknown)}")
    names = [p.model_name for p in cfg.providers]
    if len(names) != len(set(names)):
        raise ConfigError("provider names must be unique")
    if len({_sanitize(n) for n in names}) != len(names):
        raise ConfigError("provider names collide after filename sanitization")
    if cfg.negation_window < 1 or cfg.max_ngram < 1 or cfg.nearmiss_k < 1 or cfg.batch_size < 1:
        raise ConfigError("negation_window, max_ngram, nearmiss_k, batch_size must be >= 1")


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def distilled_path(cfg: PipelineConfig, variant: str) -> Path:
    return cfg.workdir / f"distilled.{variant}.jsonl"


def matrix_path(cfg: PipelineConfig, provider_name: str, variant: str) -> Path:
    return cfg.workdir / f"emb.{_sanitize(provider_name)}.{variant}.jsonl"


def _write_snapshot(cfg: PipelineConfig) -> None:
    cfg.workdir.mkdir(parents=True, exist_ok=True)
    path = cfg.workdir / "config.snapshot.json"
    path.write_text(json.dumps(cfg.snapshot(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fresh(outputs: list[Path], inputs: list[Path]) -> bool:
    if not all(p.is_file() for p in outputs):
        return False
    newest_input = max(p.stat().st_mtime for p in inputs if p.is_file())
    return min(p.stat().st_mtime for p in outputs) >= newest_input


def _load_resources(cfg: PipelineConfig):
    rules = (sectionizer.load_section_rules(cfg.rules) if cfg.rules
             else sectionizer.default_section_rules())
    triggers = (concepts.load_triggers(cfg.triggers) if cfg.triggers
                else concepts.default_triggers())
    lexicon = concepts.load_lexicon(cfg.lexicon, max_ngram=cfg.max_ngram)
    return rules, triggers, lexicon


def cmd_distill(cfg: PipelineConfig, jobs: int = 1) -> dict[str, Path]:
    """Produce distilled.<variant>.jsonl per configured variant plus stats.json."""
    rules, triggers, lexicon = _load_resources(cfg)
    corpus = corpus_mod.load_corpus(cfg.corpus)
    cfg.workdir.mkdir(parents=True, exist_ok=True)

    def extract_one(record):
        sections = sectionizer.sectionize(record.text, rules)
        selected = sectionizer.select_sections(sections, cfg.section_allowlist)
        return concepts.extract(selected, lexicon, triggers, window=cfg.negation_window)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            mentions_per_patient = list(pool.map(extract_one, corpus.records))
    else:
        mentions_per_patient = [extract_one(r) for r in corpus.records]
    log.info("stage=distill patients=%d jobs=%d", len(corpus), jobs)

    boc_docs = [distill.build_boc(r.patient_id, ms)
                for r, ms in zip(corpus.records, mentions_per_patient)]
    tfidf = None
    if cfg.tfidf_filter and len(corpus) > 0:
        tfidf = distill.compute_tfidf({d.patient_id: list(d.concept_keys) for d in boc_docs})

    outputs: dict[str, Path] = {}
    stats: dict[str, dict] = {}
    for variant in cfg.variants:
        if variant == "full":
            docs = [distill.build_full(r) for r in corpus.records]
        elif variant == "boc":
            docs = boc_docs
        else:
            docs = [distill.build_uc(r.patient_id, ms, tfidf)
                    for r, ms in zip(corpus.records, mentions_per_patient)]
        path = distilled_path(cfg, variant)
        distill.write_distilled(docs, path)
        outputs[variant] = path
        stats[variant] = corpus_mod.corpus_stats([d.text for d in docs]).to_dict()
        log.info("stage=distill variant=%s file=%s", variant, path)

    stats_path = cfg.workdir / "stats.json"
    stats_path.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    outputs["stats"] = stats_path
    _write_snapshot(cfg)
    return outputs


def cmd_embed(cfg: PipelineConfig, provider_name: str, variant: str, jobs: int = 1) -> Path:
    """Embed one distilled variant with one provider into emb.<provider>.<variant>.jsonl."""
    provider_cfg = next((p for p in cfg.providers if p.model_name == provider_name), None)
    if provider_cfg is None:
        raise ConfigError(f"provider {provider_name!r} not in config")
    src = distilled_path(cfg, variant)
    if not src.is_file():
        raise MissingArtifact(f"distilled file missing for variant {variant!r}: {src} (run distill)")
    docs = distill.read_distilled(src)
    provider = embedding.make_provider(provider_cfg)
    rows = embedding.embed_corpus(docs, provider, provider_cfg, batch_size=cfg.batch_size)
    out = matrix_path(cfg, provider_name, variant)
    embedding.write_embedding_matrix(rows, out)
    log.info("stage=embed provider=%s variant=%s rows=%d", provider_name, variant, len(rows))
    _write_snapshot(cfg)
    return out


def cmd_evaluate(cfg: PipelineConfig, runs: int | None = None) -> dict[str, Path]:
    """Run the repeated fixed-fold protocol for every (provider, variant) cell."""
    if not cfg.providers:
        raise ConfigError("no providers configured")
    corpus = corpus_mod.load_corpus(cfg.corpus)
    ids = corpus.patient_ids
    labels = {r.patient_id: r.label for r in corpus.records}
    folds = evaluation.make_folds(ids, k=cfg.cv.k, seed=cfg.cv.seed)
    fingerprint = evaluation.fold_fingerprint(folds)
    row_of = {pid: i for i, pid in enumerate(ids)}
    fold_indices = [[row_of[pid] for pid in fold] for fold in folds]
    n_runs = cfg.cv.runs if runs is None else runs

    cells = {}
    for provider_cfg in cfg.providers:
        for variant in cfg.variants:
            path = matrix_path(cfg, provider_cfg.model_name, variant)
            if not path.is_file():
                raise MissingArtifact(
                    f"embedding matrix missing for provider={provider_cfg.model_name!r} "
                    f"variant={variant!r}: {path} (run embed)"
                )
            rows = embedding.read_embedding_matrix(path)
            if [pid for pid, _ in rows] != ids:
                raise ConfigError(f"matrix {path} does not align with corpus patient ids")
            X = [vec for _, vec in rows]
            y = [labels[pid] for pid, _ in rows]
            log.info("stage=evaluate provider=%s variant=%s", provider_cfg.model_name, variant)
            cells[(provider_cfg.model_name, variant)] = evaluation.run_experiment(
                X, y, fold_indices,
                runs=n_runs,
                train_config=cfg.train,
                nearmiss_k=cfg.nearmiss_k,
                fingerprint=fingerprint,
            )

    report = evaluation.EvalReport(
        cells=cells,
        runs=n_runs,
        cv_k=cfg.cv.k,
        fold_seed=cfg.cv.seed,
        fold_fingerprint=fingerprint,
        config_snapshot=cfg.snapshot(),
    )
    _write_snapshot(cfg)
    return evaluation.render_report(report, cfg.workdir)


def cmd_stats(cfg: PipelineConfig) -> dict:
    """Recompute stats.json from the distilled files present in the workdir."""
    stats = {}
    for variant in cfg.variants:
        path = distilled_path(cfg, variant)
        if not path.is_file():
            raise MissingArtifact(f"distilled file missing for variant {variant!r}: {path}")
        docs = distill.read_distilled(path)
        stats[variant] = corpus_mod.corpus_stats([d.text for d in docs]).to_dict()
    stats_path = cfg.workdir / "stats.json"
    stats_path.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return stats


def cmd_run_all(cfg: PipelineConfig, jobs: int = 1, force: bool = False,
                runs: int | None = None) -> None:
    """distill -> embed (all provider/variant pairs) -> evaluate, skipping
    stages whose outputs are newer than their inputs."""
    config_inputs = [cfg.corpus, cfg.lexicon]
    if cfg.rules:
        config_inputs.append(cfg.rules)
    if cfg.triggers:
        config_inputs.append(cfg.triggers)

    distill_outputs = [distilled_path(cfg, v) for v in cfg.variants]
    if force or not _fresh(distill_outputs, config_inputs):
        cmd_distill(cfg, jobs=jobs)
    else:
        log.info("stage=distill skipped (fresh)")

    matrix_paths = []
    for provider_cfg in cfg.providers:
        for variant in cfg.variants:
            out = matrix_path(cfg, provider_cfg.model_name, variant)
            matrix_paths.append(out)
            if force or not _fresh([out], [distilled_path(cfg, variant)]):
                cmd_embed(cfg, provider_cfg.model_name, variant, jobs=jobs)
            else:
                log.info("stage=embed provider=%s variant=%s skipped (fresh)",
                         provider_cfg.model_name, variant)

    report_outputs = [cfg.workdir / name for name in ("report.json", "report.csv", "plotdata.csv")]
    if force or not _fresh(report_outputs, matrix_paths):
        cmd_evaluate(cfg, runs=runs)
    else:
        log.info("stage=evaluate skipped (fresh)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="concept-distill",
        description="Distill clinical notes into concept representations and "
                    "benchmark embeddings for mortality prediction.",
    )
    parser.add_argument("--config", help=f"pipeline config JSON (or ${ENV_CONFIG})")
    parser.add_argument("--workdir", help="override the config workdir")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="bounded stage parallelism (default: logical CPUs)")
    parser.add_argument("--force", action="store_true", help="re-run stages even when fresh")
    parser.add_argument("--seed", type=int, help="override the cross-validation seed")
    parser.add_argument("--verbose", "-v", action="store_true", help="per-batch log lines")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("distill", help="write distilled.<variant>.jsonl and stats.json")
    p_embed = sub.add_parser("embed", help="embed distilled docs into matrices")
    p_embed.add_argument("--provider", help="provider model_name (default: all configured)")
    p_embed.add_argument("--variant", choices=ALL_VARIANTS, help="variant (default: all configured)")
    p_eval = sub.add_parser("evaluate", help="run CV protocol and write reports")
    p_eval.add_argument("--runs", type=int, help="override cv.runs")
    p_all = sub.add_parser("run-all", help="distill, embed, evaluate in sequence")
    p_all.add_argument("--runs", type=int, help="override cv.runs")
    sub.add_parser("stats", help="recompute stats.json from distilled files")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s %(message)s",
    )
    config_path = args.config or os.environ.get(ENV_CONFIG)
    try:
        if not config_path:
            raise ConfigError(f"no config given: pass --config or set ${ENV_CONFIG}")
        cfg = load_config(config_path)
        if args.workdir:
            cfg = replace(cfg, workdir=Path(args.workdir))
        if args.seed is not None:
            cfg = replace(cfg, cv=replace(cfg.cv, seed=args.seed))

        if args.command == "distill":
            cmd_distill(cfg, jobs=args.jobs)
        elif args.command == "embed":
            providers = [args.provider] if args.provider else [p.model_name for p in cfg.providers]
            variants = [args.variant] if args.variant else list(cfg.variants)
            for provider_name in providers:
                for variant in variants:
                    cmd_embed(cfg, provider_name, variant, jobs=args.jobs)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, runs=args.runs)
        elif args.command == "run-all":
            cmd_run_all(cfg, jobs=args.jobs, force=args.force, runs=args.runs)
        elif args.command == "stats":
            print(json.dumps(cmd_stats(cfg), indent=2, sort_keys=True))
    except (PipelineError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
