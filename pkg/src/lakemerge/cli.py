"""Command-line pipeline: benchmark, train, judge, discover, resolve, evaluate.

Each subcommand reads its stage inputs from the run directory and writes
one stage artifact; `pipeline` chains all six and prints the evaluation
report. All randomness flows from the single run.seed via per-stage
derived seeds, so re-running any stage with identical inputs produces
byte-identical outputs. Exit codes: 0 success, 1 input or configuration
error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import BenchParams, Bundle, generate, load_bundle, write_bundle
from .config import ConfigError, PipelineConfig, load_config
from .core import NULL, Value
from .discover import (
    Partition,
    bron_kerbosch,
    build_graph,
    cliques_to_partition,
    label_propagation,
    load_partition,
    louvain,
    save_partition,
)
from .embed import EmbeddingCache, HashedNgramProvider, HttpEmbeddingProvider, embed_table
from .evaluate import (
    align_resolved,
    build_report,
    exact_match_pairs,
    pairwise_f1,
    partition_similarity,
    render_text,
    resolution_accuracy,
)
from .judge import BlockingConfig, judge_all, load_judgments, lsh_blocks, save_judgments
from .match import load_checkpoint, save_checkpoint
from .resolve import (
    HttpLlmClient,
    MockLlmClient,
    ResolvedTuple,
    ResolverContext,
    load_resolved,
    mi_table,
    resolve_all,
    save_resolved,
)
from .seeds import derive_seed, rng_for
from .train import TrainConfig, train

_STAGES = ("gen-bench", "train", "judge", "discover", "resolve", "evaluate")


def _out_dir(cfg: PipelineConfig) -> Path:
    return Path(cfg.run["out_dir"])


def _bench_dir(cfg: PipelineConfig) -> Path:
    return _out_dir(cfg) / "bench"


def _provider(cfg: PipelineConfig):
    e = cfg.embed
    seed = derive_seed(cfg.run["seed"], "embed")
    if e["provider"] == "builtin":
        return HashedNgramProvider(dim=e["dimension"], seed=seed)
    if not e["url"]:
        raise ConfigError("embed.url is required when embed.provider=http")
    return HttpEmbeddingProvider(e["url"], dim=e["dimension"], seed=seed)


def run_gen_bench(cfg: PipelineConfig) -> Bundle:
    b = cfg.bench
    params = BenchParams(
        entities=b["entities"],
        tables=b["tables"],
        attrs_per_table=b["attrs_per_table"],
        overlap=b["overlap"],
        drop_prob=b["drop_prob"],
        missing_prob=b["missing_prob"],
        noise_rate=b["noise_rate"],
        noise_mix=b["noise_mix"],
        conflict_sources=b["conflict_sources"],
        conflicts_before_noise=b["conflicts_before_noise"],
        key_attrs=b["key_attrs"],
        seed=derive_seed(cfg.run["seed"], "bench"),
    )
    bundle = generate(params)
    write_bundle(bundle, _bench_dir(cfg))
    print(
        f"gen-bench: {bundle.dirty.n_rows} rows, "
        f"{len(bundle.truth.partition.sets)} truth sets -> {_bench_dir(cfg)}"
    )
    return bundle


def run_train(cfg: PipelineConfig) -> None:
    provider = _provider(cfg)
    bundle = load_bundle(_bench_dir(cfg))
    t = cfg.train
    config = TrainConfig(
        n_pos=t["n_pos"],
        n_neg=t["n_neg"],
        epochs=t["epochs"],
        learning_rate=t["learning_rate"],
        epsilon=t["epsilon"],
        adv_sign=t["adv_sign"],
        optimizer=t["optimizer"],
        hidden=t["hidden"],
        seed=derive_seed(cfg.run["seed"], "train"),
    )
    out = _out_dir(cfg)
    result = train(
        bundle.dirty, provider, config, log_path=out / "train_log.jsonl"
    )
    save_checkpoint(result.params, out / "matcher.json")
    last = result.log[-1]["mean_loss"] if result.log else float("nan")
    print(f"train: {config.epochs} epochs, final mean loss {last:.4f} -> {out / 'matcher.json'}")


def run_judge(cfg: PipelineConfig) -> None:
    bundle = load_bundle(_bench_dir(cfg))
    out = _out_dir(cfg)
    params = load_checkpoint(out / "matcher.json")
    cache = EmbeddingCache(_provider(cfg))
    embeddings = embed_table(cache, bundle.dirty)
    j = cfg.judge
    blocks = lsh_blocks(
        embeddings,
        BlockingConfig(
            planes_per_band=j["planes_per_band"],
            bands=j["bands"],
            seed=derive_seed(cfg.run["seed"], "judge"),
        ),
    )
    judgments = judge_all(
        params, embeddings, blocks, threshold=j["threshold"], combine=j["combine"]
    )
    save_judgments(judgments, out / "judgments.json")
    pos = sum(1 for _, _, _, lab in judgments.pairs if lab == 1)
    print(
        f"judge: {len(blocks)} blocks, {len(judgments.pairs)} candidate pairs, "
        f"{pos} positive -> {out / 'judgments.json'}"
    )


def run_discover(cfg: PipelineConfig, method: str | None = None) -> None:
    out = _out_dir(cfg)
    judgments = load_judgments(out / "judgments.json")
    graph = build_graph(judgments)
    method = method or cfg.discover["method"]
    seed = derive_seed(cfg.run["seed"], "discover")
    if method == "bk":
        partition = cliques_to_partition(
            bron_kerbosch(graph, max_component=cfg.discover["max_component"]), graph.n
        )
    elif method == "louvain":
        partition = louvain(graph, seed=seed)
    elif method == "labelprop":
        partition = label_propagation(graph, seed=seed)
    else:
        raise ConfigError(f"unknown discover.method {method!r}")
    save_partition(partition, method, out / "partition.json")
    print(
        f"discover: {method} found {len(partition.sets)} sets over "
        f"{graph.n} rows -> {out / 'partition.json'}"
    )


def _llm_client(cfg: PipelineConfig):
    r = cfg.resolve
    if r["client"] == "mock":
        return MockLlmClient()
    if not r["llm_url"] or not r["llm_model"]:
        raise ConfigError(
            "resolve.llm_url and resolve.llm_model are required when resolve.client=http"
        )
    return HttpLlmClient(r["llm_url"], r["llm_model"])


def run_resolve(cfg: PipelineConfig) -> None:
    client = _llm_client(cfg)
    bundle = load_bundle(_bench_dir(cfg))
    out = _out_dir(cfg)
    partition, _method = load_partition(out / "partition.json")
    cache = EmbeddingCache(_provider(cfg))
    r = cfg.resolve
    ctx = ResolverContext(
        table=bundle.dirty,
        rng=rng_for(derive_seed(cfg.run["seed"], "resolve"), "resolve"),
        embeddings=embed_table(cache, bundle.dirty),
        cache=cache,
        mi=mi_table(bundle.dirty),
        client=client,
        strategy=r["demo_strategy"],
        k=r["k"],
        beta=r["beta"],
        token_budget=r["token_budget"],
        tnew_mode=r["tnew"],
    )
    resolved = resolve_all(partition.sets, r["resolver"], ctx)
    save_resolved(resolved, partition.sets, out / "resolved.json")
    note = f", {ctx.fallbacks} fallbacks" if ctx.fallbacks else ""
    print(
        f"resolve: {r['resolver']} over {len(partition.sets)} sets{note} "
        f"-> {out / 'resolved.json'}"
    )


def _load_resolved_tuples(path: Path) -> list[ResolvedTuple]:
    out = []
    for doc in load_resolved(path):
        cells = tuple(
            NULL if c is None else Value(c[0], c[1]) for c in doc["cells"]
        )
        out.append(ResolvedTuple(cells=cells, provenance=tuple(doc["provenance"])))
    return out


def run_evaluate(cfg: PipelineConfig) -> dict:
    bundle = load_bundle(_bench_dir(cfg))
    out = _out_dir(cfg)
    judgments = load_judgments(out / "judgments.json")
    partition, _method = load_partition(out / "partition.json")
    resolved = _load_resolved_tuples(out / "resolved.json")

    truth = bundle.truth
    f1 = pairwise_f1(judgments.positive_pairs(), truth.pairs)
    similarity = partition_similarity(partition, truth.partition)
    accuracy = None
    if truth.conflicts is not None:
        aligned = align_resolved(resolved, partition, truth.conflicts)
        accuracy = resolution_accuracy(aligned, truth.conflicts)

    report = build_report(f1, similarity, accuracy, config=cfg.echo())
    report["baseline"] = pairwise_f1(exact_match_pairs(bundle.dirty), truth.pairs).to_json()
    path = out / "report.json"
    path.write_text(json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n")
    print(f"evaluate: report -> {path}")
    return report


def run_pipeline(cfg: PipelineConfig) -> dict:
    run_gen_bench(cfg)
    run_train(cfg)
    run_judge(cfg)
    run_discover(cfg)
    run_resolve(cfg)
    report = run_evaluate(cfg)
    print(render_text(report))
    return report


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-c", "--config", metavar="PATH", default=None, help="INI configuration file"
    )
    common.add_argument(
        "--set",
        metavar="SECTION.KEY=VALUE",
        action="append",
        default=[],
        help="override one config value (repeatable)",
    )
    parser = argparse.ArgumentParser(
        prog="lakemerge",
        description="Integrate data-lake tables: benchmark, match, discover, resolve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-bench", parents=[common], help="generate a benchmark bundle")
    sub.add_parser("train", parents=[common], help="train the pair matcher")
    sub.add_parser("judge", parents=[common], help="block and judge candidate pairs")
    disc = sub.add_parser("discover", parents=[common], help="partition judged pairs into sets")
    disc.add_argument(
        "--method",
        choices=("bk", "louvain", "labelprop"),
        default=None,
        help="override discover.method for this run",
    )
    sub.add_parser("resolve", parents=[common], help="resolve conflicts within each set")
    sub.add_parser("evaluate", parents=[common], help="score the run against ground truth")
    sub.add_parser("pipeline", parents=[common], help="run all six stages and print the report")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        _out_dir(cfg).mkdir(parents=True, exist_ok=True)
        if args.command == "gen-bench":
            run_gen_bench(cfg)
        elif args.command == "train":
            run_train(cfg)
        elif args.command == "judge":
            run_judge(cfg)
        elif args.command == "discover":
            run_discover(cfg, method=args.method)
        elif args.command == "resolve":
            run_resolve(cfg)
        elif args.command == "evaluate":
            run_evaluate(cfg)
        elif args.command == "pipeline":
            run_pipeline(cfg)
        else:  # pragma: no cover - argparse enforces choices
            raise AssertionError(args.command)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
