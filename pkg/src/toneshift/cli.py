"""Command-line entry point: each pipeline stage as a subcommand plus an
end-to-end `pipeline` driver with checksum-based stage skipping."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import baselines, corpus, embed, evaluation, regressor, synth, threadsel, train
from .regressor import ModelConfig
from .tone import RuleBasedToneScorer


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path):
    return json.loads(Path(path).read_text())


def segment_features(segments, provider, cache=None):
    """Per-segment raw feature arrays (n, 770) and the target vector."""
    seqs, ys = [], []
    for seg in segments:
        texts = [m.text for m in seg.messages]
        tones = [m.emt for m in seg.messages]
        flags = [m.is_post_author for m in seg.messages]
        seqs.append(embed.message_features(texts, tones, flags, provider, cache))
        ys.append(seg.target.emt)
    return seqs, np.array(ys, dtype=float)


# -- stage implementations -------------------------------------------------

def run_synth(out: Path, n_threads: int, seed: int, subreddit: str) -> None:
    synth.write_synthetic_dump(out, n_threads=n_threads, seed=seed, subreddit=subreddit)


def run_select(corpus_path: Path, out: Path) -> dict:
    pubs = list(corpus.read_corpus(corpus_path))
    trees, orphans = corpus.build_threads(pubs)
    segments, rejections = threadsel.select_all(trees)
    threadsel.write_segments(segments, out)
    summary = {
        "threads": len(trees),
        "segments": len(segments),
        "orphan_comments": orphans,
        "rejections": dict(sorted(rejections.items())),
    }
    _write_json(Path(str(out) + ".manifest.json"), summary)
    return summary


def run_score(segments_path: Path, out: Path) -> int:
    scorer = RuleBasedToneScorer()
    scored = [
        threadsel.with_scores(seg, scorer.score_text)
        for seg in threadsel.read_segments(segments_path)
    ]
    threadsel.write_segments(scored, out)
    return len(scored)


def run_embed(segments_path: Path, cache_path: Path, provider_name: str, seed: int) -> int:
    provider = embed.get_provider(provider_name, seed=seed)
    cache = embed.EmbeddingCache(cache_path)
    n = 0
    for seg in threadsel.read_segments(segments_path):
        for m in list(seg.messages) + [seg.target]:
            embed.get_or_compute(cache, m.text, provider)
            n += 1
    return n


def run_split(segments_path: Path, out: Path, seed: int) -> dict:
    segments = list(threadsel.read_segments(segments_path))
    y = np.array([s.target.emt for s in segments])
    tr, va, te = train.stratified_split(y, seed=seed)
    ids = [s.segment_id for s in segments]
    split = {
        "seed": seed,
        "train": [ids[i] for i in tr],
        "val": [ids[i] for i in va],
        "test": [ids[i] for i in te],
    }
    _write_json(out, split)
    return split


def _load_split(segments_path: Path, split_path: Path):
    segments = {s.segment_id: s for s in threadsel.read_segments(segments_path)}
    split = _read_json(split_path)
    return (
        [segments[i] for i in split["train"]],
        [segments[i] for i in split["val"]],
        [segments[i] for i in split["test"]],
    )


def run_train(
    segments_path: Path, split_path: Path, cache_path: Path, out: Path,
    history_out: Path, provider_name: str, seed: int,
    model_cfg: ModelConfig, epochs: int,
) -> dict:
    provider = embed.get_provider(provider_name, seed=seed)
    cache = embed.EmbeddingCache(cache_path) if cache_path else None
    tr, va, _ = _load_split(segments_path, split_path)
    tr_x, tr_y = segment_features(tr, provider, cache)
    va_x, va_y = segment_features(va, provider, cache)
    bw = train.compute_bin_weights(tr_y)
    cfg = train.TrainConfig(seed=seed, epochs=epochs)
    result = train.fit(model_cfg, tr_x, tr_y, va_x, va_y, train_cfg=cfg, bin_weights=bw)
    model_id = regressor.save_checkpoint(
        out, result.params, model_cfg, seed=seed,
        bin_weights=bw.to_json(), provider_id=provider.provider_id,
    )
    history = {
        "model_id": model_id,
        "seed": seed,
        "config": asdict(model_cfg),
        "best_epoch": result.best_epoch,
        "best_val_loss": result.best_val_loss,
        "stopped_early": result.stopped_early,
        "epochs": result.history,
    }
    _write_json(history_out, history)
    return history


def run_gridsearch(
    segments_path: Path, split_path: Path, cache_path: Path, out: Path,
    provider_name: str, seed: int, epochs: int, limit: int | None = None,
) -> list:
    provider = embed.get_provider(provider_name, seed=seed)
    cache = embed.EmbeddingCache(cache_path) if cache_path else None
    tr, va, _ = _load_split(segments_path, split_path)
    tr_x, tr_y = segment_features(tr, provider, cache)
    va_x, va_y = segment_features(va, provider, cache)
    configs = train.grid_configs()
    if limit is not None:
        configs = configs[:limit]
    cfg = train.TrainConfig(seed=seed, epochs=epochs)
    rows, _best = train.grid_search(tr_x, tr_y, va_x, va_y, train_cfg=cfg, configs=configs)
    _write_json(out, rows)
    return rows


def run_baselines(
    segments_path: Path, split_path: Path, cache_path: Path, out: Path,
    provider_name: str, seed: int, which: list[str],
) -> dict:
    tr, va, te = _load_split(segments_path, split_path)
    preds: dict[str, dict[str, float]] = {}
    if "unchanged" in which:
        preds["unchanged"] = {s.segment_id: baselines.predict_unchanged(s) for s in te}
    if "mean" in which:
        preds["mean"] = {s.segment_id: baselines.predict_mean(s) for s in te}
    if "last" in which:
        preds["last"] = {s.segment_id: baselines.predict_last(s) for s in te}
    if "gbt" in which:
        provider = embed.get_provider(provider_name, seed=seed)
        cache = embed.EmbeddingCache(cache_path) if cache_path else None
        tr_x, tr_y = segment_features(tr, provider, cache)
        te_x, _ = segment_features(te, provider, cache)
        pooled_tr = np.stack([baselines.pool_features(s) for s in tr_x])
        pooled_te = np.stack([baselines.pool_features(s) for s in te_x])
        model = baselines.fit_gbt(pooled_tr, tr_y, baselines.GBTConfig(seed=seed))
        yhat = baselines.predict_gbt(model, pooled_te)
        preds["gbt"] = {s.segment_id: float(v) for s, v in zip(te, yhat)}
    _write_json(out, preds)
    return preds


def run_evaluate(
    segments_path: Path, split_path: Path, cache_path: Path,
    checkpoint: Path, baselines_path: Path,
    report_json: Path, report_txt: Path, provider_name: str, seed: int,
) -> evaluation.EvaluationReport:
    tr, _va, te = _load_split(segments_path, split_path)
    params, model_cfg, header = regressor.load_checkpoint(checkpoint)
    bw = train.BinWeights.from_json(header["bin_weights"])
    provider = embed.get_provider(provider_name, seed=seed)
    cache = embed.EmbeddingCache(cache_path) if cache_path else None

    te_x, te_y = segment_features(te, provider, cache)
    model_pred = np.zeros(len(te_x))
    for start in range(0, len(te_x), 64):
        raw, lengths = train.pad_batch(te_x[start : start + 64])
        yhat, _ = regressor.forward(params, model_cfg, raw, lengths)
        model_pred[start : start + 64] = np.clip(yhat, -1.0, 1.0)

    base_preds = _read_json(baselines_path) if baselines_path.exists() else {}
    predictions = {"model": model_pred}
    for name, table in base_preds.items():
        predictions[name] = np.array([table[s.segment_id] for s in te])

    scores: dict = {}
    subs = sorted({s.subreddit for s in te}) + ["ALL"]
    for sub in subs:
        mask = np.array([sub == "ALL" or s.subreddit == sub for s in te])
        if not mask.any():
            continue
        scores[sub] = {
            name: evaluation.metrics(np.asarray(p)[mask], te_y[mask], bw)
            for name, p in predictions.items()
        }

    last_tone = np.array([s.messages[-1].emt for s in te])
    prev_author = np.array([
        next((m.emt for m in reversed(s.messages) if m.is_post_author and m.kind == "comment"),
             np.nan)
        for s in te
    ])
    subsets = evaluation.extreme_subsets(te_y, predictions, last_tone, prev_author)
    report = evaluation.EvaluationReport(
        scores=scores, subsets=subsets, bin_weights=bw.to_json()
    )
    report_json.parent.mkdir(parents=True, exist_ok=True)
    report.save(report_json)
    report_txt.write_text(
        evaluation.render_scores(report) + "\n" + evaluation.render_subsets(report) + "\n"
    )
    return report


def run_export_plots(
    segments_path: Path, split_path: Path, out_dir: Path, seed: int
) -> None:
    _tr, _va, te = _load_split(segments_path, split_path)
    post = np.array([s.messages[0].emt for s in te])
    target = np.array([s.target.emt for s in te])
    grid = evaluation.joint_density(post, target, seed=seed,
                                    sizes=np.array([len(s.messages) for s in te]))
    out_dir.mkdir(parents=True, exist_ok=True)
    density = np.array(grid.density)
    header = "," + ",".join(f"{v:.6f}" for v in grid.y_axis)
    rows = [header]
    for i, xv in enumerate(grid.x_axis):
        rows.append(f"{xv:.6f}," + ",".join(f"{d:.8g}" for d in density[i]))
    (out_dir / "density.csv").write_text("\n".join(rows) + "\n")
    scatter = ["x,y,size"] + [f"{x:.6f},{y:.6f},{s:g}" for x, y, s in grid.scatter]
    (out_dir / "scatter.csv").write_text("\n".join(scatter) + "\n")


# -- pipeline driver -------------------------------------------------------

def _checksums(paths: list[Path]) -> dict:
    return {str(p): corpus.file_sha256(p) for p in paths if Path(p).exists()}


def run_pipeline(args) -> None:
    """ingest -> select -> score -> embed -> split -> train -> baselines ->
    evaluate -> export-plots, skipping stages whose inputs are unchanged."""
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    state_path = out / "pipeline_state.json"
    state = _read_json(state_path) if state_path.exists() else {}

    paths = {
        "dump": Path(args.input) if args.input else out / "synthetic_dump.jsonl",
        "corpus": out / "corpus.jsonl",
        "segments": out / "segments.jsonl",
        "scored": out / "segments_scored.jsonl",
        "cache": out / "embeddings.cache",
        "split": out / "split.json",
        "ckpt": out / "model.ckpt",
        "history": out / "train_history.json",
        "baselines": out / "baselines.json",
        "report_json": out / "report.json",
        "report_txt": out / "report.txt",
        "plots": out / "plots",
    }

    def stage(name, inputs, outputs, fn):
        sums = _checksums(inputs)
        done = all(Path(o).exists() for o in outputs)
        if done and state.get(name) == sums:
            print(f"[skip] {name}")
            return
        print(f"[run ] {name}")
        try:
            fn()
        except Exception as exc:
            _write_json(state_path, state)
            raise SystemExit(f"stage {name!r} failed: {exc}")
        state[name] = sums
        _write_json(state_path, state)

    if args.input is None:
        stage("synth", [], [paths["dump"]],
              lambda: run_synth(paths["dump"], args.threads, args.seed, args.subreddit or "DEP"))
    stage("ingest", [paths["dump"]], [paths["corpus"]],
          lambda: corpus.ingest(str(paths["dump"]), paths["corpus"], subreddit=args.subreddit))
    stage("select", [paths["corpus"]], [paths["segments"]],
          lambda: run_select(paths["corpus"], paths["segments"]))
    stage("score", [paths["segments"]], [paths["scored"]],
          lambda: run_score(paths["segments"], paths["scored"]))
    stage("embed", [paths["scored"]], [paths["cache"]],
          lambda: run_embed(paths["scored"], paths["cache"], args.provider, args.seed))
    stage("split", [paths["scored"]], [paths["split"]],
          lambda: run_split(paths["scored"], paths["split"], args.seed))
    model_cfg = ModelConfig(
        fc_out=args.fc_out, num_layers=args.layers,
        bidirectional=args.bidirectional, dropout=args.dropout,
    )
    stage("train", [paths["scored"], paths["split"]], [paths["ckpt"], paths["history"]],
          lambda: run_train(paths["scored"], paths["split"], paths["cache"],
                            paths["ckpt"], paths["history"], args.provider,
                            args.seed, model_cfg, args.epochs))
    stage("baselines", [paths["scored"], paths["split"]], [paths["baselines"]],
          lambda: run_baselines(paths["scored"], paths["split"], paths["cache"],
                                paths["baselines"], args.provider, args.seed,
                                ["unchanged", "mean", "last", "gbt"]))
    stage("evaluate", [paths["scored"], paths["split"], paths["ckpt"], paths["baselines"]],
          [paths["report_json"], paths["report_txt"]],
          lambda: run_evaluate(paths["scored"], paths["split"], paths["cache"],
                               paths["ckpt"], paths["baselines"],
                               paths["report_json"], paths["report_txt"],
                               args.provider, args.seed))
    stage("export-plots", [paths["scored"], paths["split"]],
          [paths["plots"] / "density.csv", paths["plots"] / "scatter.csv"],
          lambda: run_export_plots(paths["scored"], paths["split"], paths["plots"], args.seed))


# -- argument parsing ------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toneshift")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file with default values for any flag")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.command_parsers = {}

    real_add_parser = sub.add_parser

    def add_parser(name, **kwargs):
        p = real_add_parser(name, **kwargs)
        parser.command_parsers[name] = p
        return p

    sub.add_parser = add_parser

    p = sub.add_parser("synth", help="generate a synthetic raw dump")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--threads", type=int, default=50)
    p.add_argument("--subreddit", default="DEP")

    p = sub.add_parser("ingest", help="parse raw dumps into the corpus file")
    p.add_argument("--input", required=True, help="glob of dump files")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--subreddit", default=None)

    p = sub.add_parser("select", help="extract prediction segments")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("score", help="fill per-message tone scores")
    p.add_argument("--segments", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("embed", help="warm the embedding cache")
    p.add_argument("--segments", type=Path, required=True)
    p.add_argument("--cache", type=Path, required=True)
    p.add_argument("--provider", choices=("hash", "transformer"), default="hash")

    p = sub.add_parser("split", help="stratified train/val/test split")
    p.add_argument("--segments", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", help="train the sequence model")
    p.add_argument("--segments", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--cache", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--history", type=Path, required=True)
    p.add_argument("--provider", choices=("hash", "transformer"), default="hash")
    p.add_argument("--fc-out", type=int, default=62)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--bidirectional", action="store_true")
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--epochs", type=int, default=20)

    p = sub.add_parser("gridsearch", help="train every architecture grid point")
    p.add_argument("--segments", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--cache", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--provider", choices=("hash", "transformer"), default="hash")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--limit", type=int, default=None)

    p = sub.add_parser("baselines", help="reference predictor outputs")
    p.add_argument("--segments", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--cache", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--provider", choices=("hash", "transformer"), default="hash")
    p.add_argument("--which", default="unchanged,mean,last,gbt")

    p = sub.add_parser("evaluate", help="loss tables and hard-case analysis")
    p.add_argument("--segments", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--cache", type=Path, default=None)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--baselines", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--report-txt", type=Path, required=True)
    p.add_argument("--provider", choices=("hash", "transformer"), default="hash")

    p = sub.add_parser("export-plots", help="density and scatter CSVs")
    p.add_argument("--segments", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("serve", help="start the prediction service")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--provider", choices=("hash", "transformer"), default="hash")
    p.add_argument("--cache", type=Path, default=None)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    p.add_argument("--input", default=None, help="glob of dump files (default: synthesize)")
    p.add_argument("--outdir", type=Path, required=True)
    p.add_argument("--subreddit", default=None)
    p.add_argument("--threads", type=int, default=50)
    p.add_argument("--provider", choices=("hash", "transformer"), default="hash")
    p.add_argument("--fc-out", type=int, default=2)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--bidirectional", action="store_true")
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--epochs", type=int, default=2)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        # config values become defaults; explicit flags still win
        defaults = {
            k.replace("-", "_"): v for k, v in _read_json(args.config).items()
        }
        parser.set_defaults(**defaults)
        for p in parser.command_parsers.values():
            p.set_defaults(**defaults)
        args = parser.parse_args(argv)

    if args.command == "synth":
        run_synth(args.out, args.threads, args.seed, args.subreddit)
    elif args.command == "ingest":
        manifest = corpus.ingest(args.input, args.out, subreddit=args.subreddit)
        print(json.dumps(manifest, indent=2, sort_keys=True))
    elif args.command == "select":
        print(json.dumps(run_select(args.corpus, args.out), indent=2))
    elif args.command == "score":
        print(f"scored {run_score(args.segments, args.out)} segments")
    elif args.command == "embed":
        print(f"embedded {run_embed(args.segments, args.cache, args.provider, args.seed)} texts")
    elif args.command == "split":
        split = run_split(args.segments, args.out, args.seed)
        print({k: len(v) for k, v in split.items() if isinstance(v, list)})
    elif args.command == "train":
        cfg = ModelConfig(fc_out=args.fc_out, num_layers=args.layers,
                          bidirectional=args.bidirectional, dropout=args.dropout)
        history = run_train(args.segments, args.split, args.cache, args.out,
                            args.history, args.provider, args.seed, cfg, args.epochs)
        print(f"model {history['model_id']} best val loss {history['best_val_loss']:.4f}")
    elif args.command == "gridsearch":
        rows = run_gridsearch(args.segments, args.split, args.cache, args.out,
                              args.provider, args.seed, args.epochs, args.limit)
        print(f"best val loss {rows[0]['val_loss']:.4f}")
    elif args.command == "baselines":
        run_baselines(args.segments, args.split, args.cache, args.out,
                      args.provider, args.seed, args.which.split(","))
    elif args.command == "evaluate":
        run_evaluate(args.segments, args.split, args.cache, args.checkpoint,
                     args.baselines, args.report, args.report_txt,
                     args.provider, args.seed)
    elif args.command == "export-plots":
        run_export_plots(args.segments, args.split, args.out, args.seed)
    elif args.command == "serve":
        import uvicorn

        from .serve import create_app

        app = create_app(args.checkpoint, args.provider, args.cache, args.seed)
        uvicorn.run(app, host=args.host, port=args.port)
    elif args.command == "pipeline":
        run_pipeline(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
