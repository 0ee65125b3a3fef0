"""Command-line interface.

Subcommands:

* ``embed``   — precompute text/frame embedding stores from a manifest
* ``gar``     — emit keyword titles and selected frame indices
* ``train``   — run the desk-scale objectives trainer
* ``eval``    — baseline two-stage retrieval with a recall report
* ``repeval`` — the entropy-gated repetition pipeline
* ``report``  — compare run files: text table, CSV, and figures

Config-file values are overridden by command-line flags; the
``REFRAIN_ENDPOINT`` environment variable supplies the default remote
endpoint.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .core import EngineConfig, load_config
from .dataset import build_eval_dataset, sample_uniform
from .errors import EngineError, ValidationError
from .gar import FrameSet, select_frame, title_with_fallback
from .manifest import load_manifest
from .objectives import TrainingCorpus, train_linear_towers, write_loss_trace
from .providers import (
    FileProvider,
    MatchScorer,
    RemoteProvider,
    SyntheticProvider,
    text_key,
)
from .repetition import augment_caption, repetition_pipeline
from .reporting import (
    format_recall_table,
    read_diagnostics,
    read_run_report,
    render_me_histogram,
    render_recall_figure,
    write_comparison_csv,
    write_diagnostics,
    write_run_report,
)
from .retrieval import candidate_select, evaluate
from .store import EmbeddingStore
from .tagger import Caption, default_lexicon, extract_keywords

TEXT_STORE = "text.emb"
FRAME_STORE = "frames.emb"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", required=True, help="manifest JSONL path")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--provider", choices=("synthetic", "remote", "file"),
                        default="synthetic")
    parser.add_argument("--endpoint",
                        default=os.environ.get("REFRAIN_ENDPOINT"),
                        help="remote provider URL (default: $REFRAIN_ENDPOINT)")
    parser.add_argument("--stores", help="directory with precomputed stores "
                                         "(required for --provider file)")
    parser.add_argument("--seed", type=int, help="override rng_seed")
    parser.add_argument("--dim", type=int, default=64,
                        help="synthetic provider dimension")
    parser.add_argument("--candidates", type=int, help="override candidates k")
    parser.add_argument("--clips", type=int, help="override clip count w")


def _load_engine_config(args) -> EngineConfig:
    config = load_config(args.config) if args.config else EngineConfig()
    return config.with_overrides(
        rng_seed=getattr(args, "seed", None),
        candidates=getattr(args, "candidates", None),
        clips=getattr(args, "clips", None),
        me_threshold=getattr(args, "delta", None),
    )


def _make_provider(args):
    if args.provider == "synthetic":
        seed = args.seed if args.seed is not None else 0
        return SyntheticProvider(seed=seed, dim=args.dim)
    if args.provider == "remote":
        if not args.endpoint:
            raise ValidationError(
                "remote provider needs --endpoint or REFRAIN_ENDPOINT")
        return RemoteProvider(args.endpoint)
    if not args.stores:
        raise ValidationError("file provider needs --stores DIR")
    stores = Path(args.stores)
    return FileProvider(EmbeddingStore.load(stores / TEXT_STORE),
                        EmbeddingStore.load(stores / FRAME_STORE))


def _cmd_embed(args) -> int:
    config = _load_engine_config(args)
    manifest = load_manifest(args.manifest)
    provider = _make_provider(args)
    lexicon = default_lexicon()

    text_store = EmbeddingStore("text", provider.dim)
    frame_store = EmbeddingStore("frame", provider.dim)

    def put_texts(store: EmbeddingStore, texts, embed) -> None:
        fresh, seen = [], set()
        for t in texts:
            key = text_key(t)
            if key not in store and key not in seen:
                seen.add(key)
                fresh.append((t, key))
        if fresh:
            vectors = embed([t for t, _ in fresh])
            for (t, key), vec in zip(fresh, vectors):
                store.add(key, vec)

    for record in manifest.records:
        put_texts(frame_store, record.frames, provider.embed_frames)

    # Captions, their augmented variants, keywords, and titles all land
    # in the text store so a later file-provider run can replay them.
    for record in manifest.records:
        descriptors = sample_uniform(list(record.frames), config.frames_per_video)
        frames = FrameSet(record.video_id, provider.embed_frames(descriptors))
        for c_index, text in enumerate(record.captions):
            caption = Caption.from_text(f"{record.video_id}#c{c_index}", text,
                                        lexicon)
            nouns, verbs = extract_keywords(caption, lexicon)
            put_texts(text_store, [text], provider.embed_text)
            put_texts(text_store, [augment_caption(caption, lexicon).augmented_text],
                      provider.embed_text)
            put_texts(text_store, nouns + verbs, provider.embed_text)
            title = title_with_fallback(caption, frames, provider.embed_text,
                                        config.title_nouns, config.title_verbs,
                                        lexicon=lexicon)
            put_texts(text_store, [title.text], provider.embed_text)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text_store.save(out / TEXT_STORE)
    frame_store.save(out / FRAME_STORE)
    print(f"wrote {len(text_store)} text and {len(frame_store)} frame "
          f"embeddings (dim {provider.dim}) to {out}")
    return 0


def _cmd_gar(args) -> int:
    import json

    config = _load_engine_config(args)
    manifest = load_manifest(args.manifest)
    provider = _make_provider(args)
    lexicon = default_lexicon()
    lines = []
    for record in manifest.records:
        descriptors = sample_uniform(list(record.frames), config.frames_per_video)
        frames = FrameSet(record.video_id, provider.embed_frames(descriptors))
        for c_index, text in enumerate(record.captions):
            cid = f"{record.video_id}#c{c_index}"
            caption = Caption.from_text(cid, text, lexicon)
            title = title_with_fallback(caption, frames, provider.embed_text,
                                        config.title_nouns, config.title_verbs,
                                        lexicon=lexicon)
            frame_index = select_frame(title, frames)
            lines.append(json.dumps({
                "video_id": record.video_id,
                "caption_id": cid,
                "title": title.text,
                "words": list(title.words),
                "frame_index": frame_index,
            }))
            print(f"{cid}\t{title.text}\tframe={frame_index}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def _build_corpus(manifest, provider, config, lexicon) -> TrainingCorpus:
    records = manifest.train_records or manifest.test_records
    records = [r for r in records if r.captions]
    if len(records) < 2:
        raise ValidationError("training needs at least 2 captioned records")
    video_rows, text_rows, frame_rows, title_rows = [], [], [], []
    for record in records:
        descriptors = sample_uniform(list(record.frames), config.frames_per_video)
        frames = FrameSet(record.video_id, provider.embed_frames(descriptors))
        caption = Caption.from_text(record.video_id, record.captions[0], lexicon)
        title = title_with_fallback(caption, frames, provider.embed_text,
                                    config.title_nouns, config.title_verbs,
                                    lexicon=lexicon)
        video_rows.append(frames.pooled())
        text_rows.append(provider.embed_text([caption.text])[0])
        frame_rows.append(frames.frames[select_frame(title, frames)])
        title_rows.append(title.embedding)
    return TrainingCorpus(video_raw=np.stack(video_rows),
                          text_raw=np.stack(text_rows),
                          frame_raw=np.stack(frame_rows),
                          title_raw=np.stack(title_rows))


def _corpus_recall_at_1(video_feats: np.ndarray, text_feats: np.ndarray) -> float:
    hits = 0
    for i in range(text_feats.shape[0]):
        top = candidate_select(text_feats[i], video_feats, 1)
        hits += int(top[0] == i)
    return hits / text_feats.shape[0]


def _cmd_train(args) -> int:
    config = _load_engine_config(args)
    manifest = load_manifest(args.manifest)
    provider = _make_provider(args)
    corpus = _build_corpus(manifest, provider, config, default_lexicon())

    before = _corpus_recall_at_1(corpus.video_raw, corpus.text_raw)
    result = train_linear_towers(corpus, config, epochs=args.epochs, lr=args.lr)
    after = _corpus_recall_at_1(result.project_video(corpus.video_raw),
                                result.project_text(corpus.text_raw))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_loss_trace(result.trace, out / "loss_trace.csv")
    np.savez(out / "towers.npz",
             video_projection=result.video_projection,
             text_projection=result.text_projection,
             match_head_weights=result.match_head[0],
             match_head_bias=result.match_head[1],
             fine_match_head_weights=result.fine_match_head[0],
             fine_match_head_bias=result.fine_match_head[1])
    first, last = result.trace[0], result.trace[-1]
    print(f"trained {len(result.trace)} steps on {corpus.size} pairs")
    print(f"total loss: {first.total:.4f} -> {last.total:.4f}")
    print(f"train-set R@1: {before:.4f} -> {after:.4f}")
    return 0


def _run_report_lines(run) -> None:
    entries = [(run.direction, run.recall)]
    print(format_recall_table(entries))


def _cmd_eval(args) -> int:
    config = _load_engine_config(args)
    manifest = load_manifest(args.manifest)
    provider = _make_provider(args)
    dataset = build_eval_dataset(manifest, provider, config,
                                 include_train_gallery=True)
    run = evaluate(dataset, config, MatchScorer(provider),
                   direction=args.direction)
    _run_report_lines(run)
    if args.out:
        write_run_report(run, args.out)
    return 0


def _cmd_repeval(args) -> int:
    config = _load_engine_config(args)
    manifest = load_manifest(args.manifest)
    provider = _make_provider(args)
    dataset = build_eval_dataset(manifest, provider, config,
                                 include_train_gallery=True)
    run, diagnostics = repetition_pipeline(dataset, config,
                                           MatchScorer(provider),
                                           mode=args.mode,
                                           direction=args.direction)
    triggered = sum(d.report.triggered for d in diagnostics)
    _run_report_lines(run)
    print(f"triggered {triggered}/{len(diagnostics)} queries "
          f"(delta={config.me_threshold}, mode={args.mode})")
    if args.out:
        write_run_report(run, args.out)
    if args.diagnostics:
        write_diagnostics(diagnostics, args.diagnostics)
    return 0


def _cmd_report(args) -> int:
    if args.labels and len(args.labels) != len(args.runs):
        raise ValidationError("--labels must match --runs in count")
    labels = args.labels or [Path(p).stem for p in args.runs]
    entries = []
    for label, path in zip(labels, args.runs):
        summary = read_run_report(path)
        recall = {int(k): v for k, v in summary["recall"].items()}
        entries.append((label, recall))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print(format_recall_table(entries))
    write_comparison_csv(entries, out / "comparison.csv")
    render_recall_figure(entries, out / "recall_comparison.png")
    written = ["comparison.csv", "recall_comparison.png"]
    if args.diagnostics:
        records = read_diagnostics(args.diagnostics)
        render_me_histogram(records, out / "me_histogram.png")
        written.append("me_histogram.png")
    print(f"wrote {', '.join(written)} to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refrain",
        description="Video-language retrieval with entropy-gated "
                    "keyword repetition.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_embed = sub.add_parser("embed", help="precompute embedding stores")
    _add_common(p_embed)
    p_embed.add_argument("--out", required=True, help="output directory")
    p_embed.set_defaults(func=_cmd_embed)

    p_gar = sub.add_parser("gar", help="emit titles and key frames")
    _add_common(p_gar)
    p_gar.add_argument("--out", help="output JSONL path")
    p_gar.set_defaults(func=_cmd_gar)

    p_train = sub.add_parser("train", help="desk-scale objectives trainer")
    _add_common(p_train)
    p_train.add_argument("--epochs", type=int, default=30)
    p_train.add_argument("--lr", type=float, default=0.05)
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="baseline two-stage retrieval")
    _add_common(p_eval)
    p_eval.add_argument("--direction", choices=("t2v", "v2t"), default="t2v")
    p_eval.add_argument("--out", help="run report JSONL path")
    p_eval.set_defaults(func=_cmd_eval)

    p_rep = sub.add_parser("repeval", help="repetition inference pipeline")
    _add_common(p_rep)
    p_rep.add_argument("--direction", choices=("t2v", "v2t"), default="t2v")
    p_rep.add_argument("--delta", type=float,
                       help="matching-entropy threshold (inf disables)")
    p_rep.add_argument("--mode", choices=("target", "all"), default="target")
    p_rep.add_argument("--out", help="run report JSONL path")
    p_rep.add_argument("--diagnostics", help="per-query diagnostics JSONL path")
    p_rep.set_defaults(func=_cmd_repeval)

    p_report = sub.add_parser("report", help="compare run reports")
    p_report.add_argument("--runs", nargs="+", required=True)
    p_report.add_argument("--labels", nargs="+")
    p_report.add_argument("--diagnostics",
                          help="diagnostics JSONL for the entropy histogram")
    p_report.add_argument("--out", required=True, help="output directory")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
