"""Command-line front end wiring the pipeline stages together.

Subcommands mirror the stages (ingest, corpus, prevalence, mine, graph,
eval) plus ``all``. Each stage reads the upstream artifact files from the
output directory, writes its own artifacts atomically, and a run manifest
records the configuration, input digests, and tool version. Fixed inputs,
configuration and seed give byte-identical artifacts, regardless of the
``--jobs`` level.

Exit codes: 0 success, 1 validation/configuration error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import difflib
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from . import artifacts, corpus_builder, eval_harness, graph_analysis, prevalence, rule_miner
from .errors import ConfigError, ParameterError, TTPMinerError
from .io_utils import atomic_write_text, canonical_json, sha256_file, write_csv
from .stix_ingest import catalog_from_json, catalog_to_json, parse_bundle

logger = logging.getLogger(__name__)

COMMANDS = ("ingest", "corpus", "prevalence", "mine", "graph", "eval", "all")


@dataclass
class PipelineConfig:
    """Shared pipeline configuration; defaults carry the published parameters."""

    bundle_path: Path | None = None
    manifest_path: Path | None = None
    unseen_manifest_path: Path | None = None
    annotation_path: Path | None = None
    tau: int = 2
    min_support: float = 0.005
    phi_min: float = 0.20
    alpha_rules: float = 0.05
    alpha_trend: float = 0.05
    trend_years: int = 5
    seed: int = 0
    output_dir: Path = Path("out")
    output_format: str = "csv"

    def validate(self) -> None:
        if not 0.0 < self.min_support <= 1.0:
            raise ConfigError(f"min_support must be in (0, 1], got {self.min_support}")
        if not 0.0 <= self.phi_min <= 1.0:
            raise ConfigError(f"phi_min must be in [0, 1], got {self.phi_min}")
        for name in ("alpha_rules", "alpha_trend"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must be in (0, 1), got {value}")
        if self.tau < 1:
            raise ConfigError(f"tau must be >= 1, got {self.tau}")
        if self.trend_years < 1:
            raise ConfigError(f"trend_years must be >= 1, got {self.trend_years}")
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"output_format must be csv or json, got {self.output_format!r}")


_PATH_KEYS = ("bundle_path", "manifest_path", "unseen_manifest_path", "annotation_path", "output_dir")
_INT_KEYS = ("tau", "trend_years", "seed")
_FLOAT_KEYS = ("min_support", "phi_min", "alpha_rules", "alpha_trend")


def validate_config(path: Path | str) -> PipelineConfig:
    """Parse a ``key = value`` config file; unknown keys and bad types are errors.

    Relative paths are resolved against the config file's directory.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    known = {f.name for f in fields(PipelineConfig)}
    config = PipelineConfig()
    for lineno, raw_line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in known:
            hint = difflib.get_close_matches(key, known, n=1)
            suggestion = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}{suggestion}")
        if key in _PATH_KEYS:
            resolved = Path(value)
            if not resolved.is_absolute():
                resolved = path.parent / resolved
            setattr(config, key, resolved)
        elif key in _INT_KEYS:
            try:
                setattr(config, key, int(value))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: {key} must be an integer, got {value!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                setattr(config, key, float(value))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: {key} must be a number, got {value!r}") from None
        else:  # output_format
            setattr(config, key, value)
    config.validate()
    return config


@dataclass
class StageOptions:
    """Per-stage knobs that are not part of the shared configuration."""

    elbow_labels: Path | None = None
    sample_pairs: Path | None = None
    n_buckets: int = 5
    sample_size: int = 20
    universe: str = "catalog"  # "catalog" bins zero-mention techniques too
    yates: bool = False
    relation: str | None = None
    top_k: int | None = None
    conventional_normalization: bool = False
    parent_match: bool = False
    dot_path: Path | None = None
    jobs: int = 1
    inputs: dict[str, Path] = field(default_factory=dict)
    artifacts_written: list[Path] = field(default_factory=list)


def _require_file(path: Path | None, role: str) -> Path:
    if path is None:
        raise ConfigError(f"no {role} configured; pass the flag or set it in the config file")
    if not path.exists():
        raise ConfigError(f"missing {role} file: {path}")
    return path


def _artifact(config: PipelineConfig, stem: str, suffix: str | None = None) -> Path:
    suffix = suffix if suffix is not None else f".{config.output_format}"
    return config.output_dir / f"{stem}{suffix}"


def _load_catalog(config: PipelineConfig):
    path = _require_file(_artifact(config, "catalog", ".json"), "catalog artifact")
    return catalog_from_json(path.read_text(encoding="utf-8"))


def _load_corpus(config: PipelineConfig):
    path = _require_file(_artifact(config, "corpus", ".json"), "corpus artifact")
    return corpus_builder.corpus_from_json(path.read_text(encoding="utf-8"))


def _write(path: Path, writer, options: StageOptions) -> None:
    writer(path)
    options.artifacts_written.append(path)
    logger.info("wrote %s", path)


def stage_ingest(config: PipelineConfig, options: StageOptions) -> None:
    bundle_path = _require_file(config.bundle_path, "STIX bundle")
    options.inputs["bundle"] = bundle_path
    catalog = parse_bundle(bundle_path.read_bytes())
    logger.info(
        "parsed %d tactics, %d techniques (%d sub-techniques), %d citations",
        len(catalog.tactics),
        len(catalog.techniques),
        sum(t.is_subtechnique for t in catalog.techniques),
        len(catalog.citations),
    )
    path = _artifact(config, "catalog", ".json")
    _write(path, lambda p: atomic_write_text(p, catalog_to_json(catalog)), options)


def stage_corpus(config: PipelineConfig, options: StageOptions) -> None:
    manifest_path = _require_file(config.manifest_path, "report manifest")
    options.inputs["manifest"] = manifest_path
    catalog = _load_catalog(config)
    records = corpus_builder.load_manifest(manifest_path, catalog)
    included = corpus_builder.included_records(records)
    pairs = corpus_builder.find_candidate_pairs(included)

    if options.sample_pairs is not None:
        samples = corpus_builder.sample_buckets(
            pairs, n=options.n_buckets, s=options.sample_size, seed=config.seed
        )
        rows = [
            [sample.month_bucket, key, ""]
            for sample in samples
            for key in sample.sampled_pairs
        ]
        write_csv(options.sample_pairs, ("bucket", "pair_key", "is_duplicate"), rows)
        options.artifacts_written.append(options.sample_pairs)
        logger.info(
            "wrote %s: %s sampled pairs per bucket for manual duplicate labeling",
            options.sample_pairs,
            "/".join(str(len(s.sampled_pairs)) for s in samples),
        )

    tau = config.tau
    if options.elbow_labels is not None:
        labels_path = _require_file(options.elbow_labels, "elbow labels")
        options.inputs["elbow_labels"] = labels_path
        fractions = corpus_builder.read_elbow_labels(labels_path)
        tau = corpus_builder.estimate_tau(fractions)
        logger.info("estimated tau=%d month(s) from %d labeled buckets", tau, len(fractions))

    sets = corpus_builder.merge_duplicates(included, pairs, tau)
    stats = corpus_builder.corpus_stats(sets)
    merged = sum(1 for ts in sets if len(ts.member_citations) > 1)
    logger.info(
        "corpus: %d included citations -> %d technique-sets (%d merged), "
        "%d mentions, %d distinct techniques",
        len(included),
        stats.report_count,
        merged,
        stats.total_mentions,
        stats.distinct_techniques,
    )
    path = _artifact(config, "corpus", ".json")
    _write(path, lambda p: atomic_write_text(p, corpus_builder.corpus_to_json(sets)), options)


def stage_prevalence(config: PipelineConfig, options: StageOptions) -> None:
    corpus = _load_corpus(config)
    if options.universe == "catalog":
        catalog = _load_catalog(config)
        universe = catalog.technique_ids()
    else:
        # catalog still supplies names/tactics for the prevalent listing when present
        catalog_path = _artifact(config, "catalog", ".json")
        catalog = (
            catalog_from_json(catalog_path.read_text(encoding="utf-8"))
            if catalog_path.exists()
            else None
        )
        universe = None
    frequencies = prevalence.technique_frequency(corpus, universe=universe)
    bins = prevalence.percentile_bins(frequencies)
    series = prevalence.yearly_series(corpus, bins.keys(), trend_years=config.trend_years)
    trends = {
        tid: prevalence.mann_kendall(series[tid], alpha=config.alpha_trend) for tid in series
    }
    matrix = prevalence.build_matrix(bins, trends, corpus)
    prevalent = prevalence.prevalent_techniques(matrix)
    logger.info("prevalent techniques: %d of %d analyzed", len(prevalent), len(bins))
    _write(_artifact(config, "prevalence_matrix"), lambda p: artifacts.write_matrix(p, matrix), options)
    _write(
        _artifact(config, "prevalent_techniques"),
        lambda p: artifacts.write_prevalent(p, prevalent, matrix, catalog),
        options,
    )


def _filter_parallel(candidates, config: PipelineConfig, options: StageOptions):
    if options.jobs <= 1 or len(candidates) < 2:
        return rule_miner.filter_pairs(
            candidates, phi_min=config.phi_min, alpha=config.alpha_rules, yates=options.yates
        )
    # Chunked scoring merged in chunk order: byte-identical to the sequential run.
    chunk_size = -(-len(candidates) // options.jobs)
    chunks = [candidates[i : i + chunk_size] for i in range(0, len(candidates), chunk_size)]
    with ThreadPoolExecutor(max_workers=options.jobs) as pool:
        results = pool.map(
            lambda chunk: rule_miner.filter_pairs(
                chunk, phi_min=config.phi_min, alpha=config.alpha_rules, yates=options.yates
            ),
            chunks,
        )
    return [pair for chunk in results for pair in chunk]


def stage_mine(config: PipelineConfig, options: StageOptions) -> None:
    corpus = _load_corpus(config)
    itemsets = [ts.techniques for ts in corpus]
    candidates = rule_miner.mine_pairs(itemsets, config.min_support)
    pairs = _filter_parallel(candidates, config, options)
    if config.annotation_path is not None:
        annotation_path = _require_file(config.annotation_path, "relation annotations")
        options.inputs["annotations"] = annotation_path
        annotations = graph_analysis.load_annotations(annotation_path)
        pairs = rule_miner.attach_relation_labels(
            pairs, graph_analysis.relation_label_map(annotations)
        )
    logger.info("mined %d candidate pairs, %d recurring pairs kept", len(candidates), len(pairs))
    _write(_artifact(config, "recurring_pairs"), lambda p: artifacts.write_pairs(p, pairs), options)


def stage_graph(config: PipelineConfig, options: StageOptions) -> None:
    pairs_path = _require_file(_artifact(config, "recurring_pairs"), "recurring pairs artifact")
    pairs = artifacts.read_pairs(pairs_path)
    annotations = []
    if config.annotation_path is not None:
        annotation_path = _require_file(config.annotation_path, "relation annotations")
        options.inputs["annotations"] = annotation_path
        annotations = graph_analysis.load_annotations(annotation_path)

    if options.relation is not None:
        relations = [options.relation]
    else:
        relations = sorted({a.relation for a in annotations})

    rows: list[list] = []
    all_pairs_graph = graph_analysis.build_graph(pairs, annotations, relation=None)
    etas = graph_analysis.partner_count(all_pairs_graph)
    deltas = graph_analysis.degree_centrality(
        all_pairs_graph, conventional=options.conventional_normalization
    )
    for node in sorted(all_pairs_graph.nodes):
        rows.append([node, "all_pairs", deltas[node], "", "", etas[node]])
    if options.top_k:
        _print_top_k("all_pairs (eta)", etas, options.top_k)

    for relation in relations:
        graph = graph_analysis.build_graph(pairs, annotations, relation=relation)
        if graph.directed:
            scores = graph_analysis.directed_centrality(
                graph, conventional=options.conventional_normalization
            )
            for node in sorted(graph.nodes):
                d_in, d_out = scores[node]
                rows.append([node, relation, "", d_in, d_out, ""])
            if options.top_k:
                _print_top_k(
                    f"{relation} (delta_out)", {n: s[1] for n, s in scores.items()}, options.top_k
                )
        else:
            scores = graph_analysis.degree_centrality(
                graph, conventional=options.conventional_normalization
            )
            for node in sorted(graph.nodes):
                rows.append([node, relation, scores[node], "", "", ""])
            if options.top_k:
                _print_top_k(f"{relation} (delta)", scores, options.top_k)

    rows.sort(key=lambda row: (row[1], row[0]))
    _write(_artifact(config, "graph_centrality"), lambda p: artifacts.write_centrality(p, rows), options)
    if options.dot_path is not None:
        target = graph_analysis.build_graph(pairs, annotations, relation=options.relation)
        _write(options.dot_path, lambda p: atomic_write_text(p, graph_analysis.to_dot(target)), options)


def _print_top_k(label: str, scores: dict, k: int) -> None:
    ranked = graph_analysis.top_k(scores, k)
    print(f"top {min(k, len(ranked))} {label}:")
    for node in ranked:
        print(f"  {node}\t{scores[node]}")


def stage_eval(config: PipelineConfig, options: StageOptions) -> None:
    unseen_path = _require_file(config.unseen_manifest_path, "unseen manifest")
    options.inputs["unseen_manifest"] = unseen_path
    corpus = _load_corpus(config)
    prevalent_path = _require_file(
        _artifact(config, "prevalent_techniques"), "prevalent techniques artifact"
    )
    prevalent = artifacts.read_prevalent(prevalent_path)
    pairs_path = _require_file(_artifact(config, "recurring_pairs"), "recurring pairs artifact")
    pairs = artifacts.read_pairs(pairs_path)

    cutoff = eval_harness.cutoff_date(corpus)
    unseen = eval_harness.load_unseen_manifest(unseen_path, cutoff=cutoff)
    summary = eval_harness.evaluate(
        prevalent, pairs, unseen, cutoff=cutoff, parent_match=options.parent_match
    )
    logger.info(
        "EV-A %d/%d prevalent found; EV-B %d valid / %d matched pairs",
        summary.prevalent_found_count,
        len(prevalent),
        summary.valid_pair_count,
        summary.matched_pair_count,
    )
    doc = eval_harness.summary_to_dict(summary)
    _write(
        _artifact(config, "evaluation", ".json"),
        lambda p: atomic_write_text(p, canonical_json(doc)),
        options,
    )
    text = eval_harness.summary_to_text(summary, len(prevalent), len(pairs))
    _write(
        _artifact(config, "evaluation", ".txt"), lambda p: atomic_write_text(p, text), options
    )


_STAGES = {
    "ingest": stage_ingest,
    "corpus": stage_corpus,
    "prevalence": stage_prevalence,
    "mine": stage_mine,
    "graph": stage_graph,
    "eval": stage_eval,
}


def _write_run_manifest(command: str, config: PipelineConfig, options: StageOptions) -> None:
    # No timestamps and no output locations: the manifest itself is part of
    # the byte-determinism contract.
    manifest = {
        "tool": "ttpminer",
        "tool_version": __version__,
        "command": command,
        "config": {
            "tau": config.tau,
            "min_support": config.min_support,
            "phi_min": config.phi_min,
            "alpha_rules": config.alpha_rules,
            "alpha_trend": config.alpha_trend,
            "trend_years": config.trend_years,
            "seed": config.seed,
            "output_format": config.output_format,
        },
        "inputs": {
            role: {"path": path.as_posix(), "sha256": sha256_file(path)}
            for role, path in sorted(options.inputs.items())
        },
        "artifacts": sorted(p.name for p in options.artifacts_written),
    }
    atomic_write_text(config.output_dir / "run_manifest.json", canonical_json(manifest))


def run(command: str, config: PipelineConfig, options: StageOptions | None = None) -> list[Path]:
    """Run one subcommand (or ``all``); returns the artifact paths written."""
    if command not in COMMANDS:
        raise ParameterError(f"unknown command {command!r}")
    config.validate()
    options = options if options is not None else StageOptions()
    config.output_dir.mkdir(parents=True, exist_ok=True)
    if command == "all":
        stages = ["ingest", "corpus", "prevalence", "mine", "graph"]
        if config.unseen_manifest_path is not None:
            stages.append("eval")
        for stage in stages:
            _STAGES[stage](config, options)
    else:
        _STAGES[command](config, options)
    _write_run_manifest(command, config, options)
    return options.artifacts_written


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttpminer",
        description="Mine prevalent techniques and recurring technique pairs from "
        "an ATT&CK catalog plus CTI report metadata.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="pipeline config file (key = value lines)")
        p.add_argument("--output-dir", type=Path, help="artifact directory (default: out)")
        p.add_argument("--format", choices=("csv", "json"), dest="output_format",
                       help="tabular artifact format (default: csv)")
        p.add_argument("--seed", type=int, help="seed for all randomized steps")
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    p = sub.add_parser("ingest", help="parse a STIX bundle into the catalog artifact")
    p.add_argument("--bundle", type=Path, help="ATT&CK STIX bundle JSON path")
    add_common(p)

    p = sub.add_parser("corpus", help="build the deduplicated technique-set corpus")
    p.add_argument("--manifest", type=Path, help="report manifest JSON path")
    p.add_argument("--tau", type=int, help="duplicate merge threshold in 30-day months")
    p.add_argument("--elbow-labels", type=Path,
                   help="bucket,pair_key,is_duplicate CSV; estimates tau from the labels")
    p.add_argument("--sample-pairs", type=Path,
                   help="write a bucketed pair sample here for manual duplicate labeling")
    p.add_argument("--n-buckets", type=int, default=5, help="elbow buckets to sample")
    p.add_argument("--sample-size", type=int, default=20, help="pairs sampled per bucket")
    add_common(p)

    p = sub.add_parser("prevalence", help="frequency-trend matrix and prevalent techniques")
    p.add_argument("--alpha", type=float, dest="alpha_trend", help="trend significance level")
    p.add_argument("--trend-years", type=int, help="trailing trend window in years")
    p.add_argument("--universe", choices=("catalog", "corpus"), default="catalog",
                   help="bin all cataloged techniques (with zeros) or mentioned ones only")
    add_common(p)

    p = sub.add_parser("mine", help="mine recurring technique pairs")
    p.add_argument("--min-support", type=float, help="minimum pair support")
    p.add_argument("--phi-min", type=float, help="minimum phi correlation")
    p.add_argument("--alpha", type=float, dest="alpha_rules", help="chi-square significance level")
    p.add_argument("--yates", action="store_true", help="apply the Yates continuity correction")
    p.add_argument("--annotations", type=Path, help="relation annotation CSV to attach as labels")
    p.add_argument("--jobs", type=int, default=1, help="parallel scoring workers")
    add_common(p)

    p = sub.add_parser("graph", help="relation graphs and centrality scores")
    p.add_argument("--annotations", type=Path, help="relation annotation CSV")
    p.add_argument("--relation", choices=sorted(graph_analysis.RELATION_TYPES),
                   help="restrict to one relation type")
    p.add_argument("--top-k", type=int, help="print the top-k techniques per graph to stdout")
    p.add_argument("--conventional-normalization", action="store_true",
                   help="normalize centrality by node count - 1")
    p.add_argument("--dot", type=Path, dest="dot_path", help="also write a DOT export here")
    add_common(p)

    p = sub.add_parser("eval", help="evaluate findings against unseen reports")
    p.add_argument("--unseen", type=Path, help="unseen report manifest JSON path")
    p.add_argument("--parent-match", action="store_true",
                   help="match sub-techniques to their base technique id")
    add_common(p)

    p = sub.add_parser("all", help="run every stage in order")
    p.add_argument("--bundle", type=Path)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--unseen", type=Path)
    p.add_argument("--annotations", type=Path)
    p.add_argument("--elbow-labels", type=Path)
    p.add_argument("--n-buckets", type=int, default=5)
    p.add_argument("--sample-size", type=int, default=20)
    p.add_argument("--tau", type=int)
    p.add_argument("--min-support", type=float)
    p.add_argument("--phi-min", type=float)
    p.add_argument("--alpha-rules", type=float)
    p.add_argument("--alpha-trend", type=float)
    p.add_argument("--trend-years", type=int)
    p.add_argument("--universe", choices=("catalog", "corpus"), default="catalog")
    p.add_argument("--yates", action="store_true")
    p.add_argument("--parent-match", action="store_true")
    p.add_argument("--conventional-normalization", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    add_common(p)

    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    config = validate_config(args.config) if args.config else PipelineConfig()
    overrides = {
        "bundle_path": getattr(args, "bundle", None),
        "manifest_path": getattr(args, "manifest", None),
        "unseen_manifest_path": getattr(args, "unseen", None),
        "annotation_path": getattr(args, "annotations", None),
        "tau": getattr(args, "tau", None),
        "min_support": getattr(args, "min_support", None),
        "phi_min": getattr(args, "phi_min", None),
        "alpha_rules": getattr(args, "alpha_rules", None),
        "alpha_trend": getattr(args, "alpha_trend", None),
        "trend_years": getattr(args, "trend_years", None),
        "seed": args.seed,
        "output_dir": args.output_dir,
        "output_format": args.output_format,
    }
    config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    config.validate()
    return config


def _options_from_args(args: argparse.Namespace) -> StageOptions:
    return StageOptions(
        elbow_labels=getattr(args, "elbow_labels", None),
        sample_pairs=getattr(args, "sample_pairs", None),
        n_buckets=getattr(args, "n_buckets", 5),
        sample_size=getattr(args, "sample_size", 20),
        universe=getattr(args, "universe", "catalog"),
        yates=getattr(args, "yates", False),
        relation=getattr(args, "relation", None),
        top_k=getattr(args, "top_k", None),
        conventional_normalization=getattr(args, "conventional_normalization", False),
        parent_match=getattr(args, "parent_match", False),
        dot_path=getattr(args, "dot_path", None),
        jobs=getattr(args, "jobs", 1),
    )


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _config_from_args(args)
        run(args.command, config, _options_from_args(args))
    except TTPMinerError as exc:
        logger.error("%s", exc)
        return 1
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
