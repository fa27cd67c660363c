"""Command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .audio import load_wav, mix_to_mono, resample, save_wav
from .config import RunConfig, load_config
from .dataset import (BuildSettings, ClipMedia, FrameStack, Window, build_dataset, clip_tokens, load_clipset,
                      load_frames, load_manifest, pad_or_crop, parse_transcript, read_dataset_index,
                      slice_media, stack_tokens, transcript_for_window, write_funny_dataset)
from .encoders import MODALITIES
from .errors import ConfigError, DataError, DimensionError, LaughcafError, NumericError
from .fnwm import load_checkpoint, save_checkpoint
from .laughter import detect_laughter_corpus, detect_laughter_waveform
from .metrics import (classification_metrics, detection_counts, dumps, format_laughter_table, laughter_report,
                      temporal_counts)
from .model import FusionModel, ModelConfig, modality_contributions
from .spans import LaughterAnnotation, load_annotation, save_annotation
from .synth import make_laughter_file
from .train import TrainConfig, history_csv, predict_proba, train

log = logging.getLogger("laughcaf")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(LaughcafError):
    pass


# ---------------------------------------------------------------------------
# helpers

def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _write_text(path: str | Path | None, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _load_one(path: str):
    return load_wav(path)


def _load_waveforms(paths: Sequence[str], jobs: int) -> dict:
    ids = [Path(p).stem for p in paths]
    if len(set(ids)) != len(ids):
        raise UsageError("input files must have distinct names")
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            waves = list(pool.map(_load_one, paths))
    else:
        waves = [load_wav(p) for p in paths]
    return dict(zip(ids, waves))


def _detect_one(job):
    media_id, w, cfg, k, seed = job
    return detect_laughter_waveform(w, media_id, cfg.peaks, cfg.mel, k, seed)


def _load_annotations(path: str | Path) -> dict[str, LaughterAnnotation]:
    """An annotation JSON file or a directory of them, keyed by media_id."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.json"))
        if not files:
            raise DataError(f"no annotation files in {path}")
    elif path.exists():
        files = [path]
    else:
        raise DataError(f"annotation path not found: {path}")
    out = {}
    for f in files:
        a = load_annotation(f)
        out[a.media_id] = a
    return out


def _checkpoint_model(stem: str) -> tuple[FusionModel, dict]:
    state, meta = load_checkpoint(stem)
    try:
        mc = dict(meta["model"])
        mc["d_raw"] = dict(mc["d_raw"])
        cfg = ModelConfig(**mc)
    except (KeyError, TypeError) as exc:
        raise DataError(f"checkpoint {stem} has no usable model metadata") from exc
    return FusionModel.from_state(cfg, state), meta


def _model_dims(model: FusionModel) -> dict[str, int]:
    return {m: int(model.cfg.d_raw[m]) for m in MODALITIES}


# ---------------------------------------------------------------------------
# commands

def cmd_detect_laughter(args, cfg: RunConfig) -> int:
    k = args.k if args.k is not None else cfg.cluster.k
    seed = args.seed if args.seed is not None else cfg.seed
    waves = _load_waveforms(args.wavs, args.jobs)
    if args.per_file or not cfg.cluster.pooled:
        jobs = [(m, w, cfg, k, seed) for m, w in waves.items()]
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                anns = list(pool.map(_detect_one, jobs))
        else:
            anns = [_detect_one(j) for j in jobs]
        result = {a.media_id: a for a in anns}
    else:
        result = detect_laughter_corpus(waves, cfg.peaks, cfg.mel, (k,), seed)[k]
    out = Path(args.out)
    if len(result) == 1 and out.suffix == ".json":
        out.parent.mkdir(parents=True, exist_ok=True)
        save_annotation(next(iter(result.values())), out)
    else:
        out.mkdir(parents=True, exist_ok=True)
        for media_id, ann in result.items():
            save_annotation(ann, out / f"{media_id}.json")
    n = sum(len(a.laughter_spans()) for a in result.values())
    log.info("detected %d laughter events in %d files", n, len(result))
    return EXIT_OK


def cmd_build_dataset(args, cfg: RunConfig) -> int:
    entries = load_manifest(args.manifest)
    anns = _load_annotations(args.ann) if args.ann else {}
    ds = cfg.dataset
    settings = BuildSettings(
        n_s=args.n_sec if args.n_sec is not None else ds.n_s,
        fps=ds.fps,
        neg_ratio=args.neg_ratio if args.neg_ratio is not None else ds.neg_ratio,
        guard_s=ds.guard_s, augment_copies=ds.augment_copies, max_shift_s=ds.max_shift_s,
        max_noise=ds.max_noise, mel=cfg.mel, m=tuple(cfg.token_counts().items()), d_text=cfg.model.d_text)
    seed = args.seed if args.seed is not None else cfg.seed
    clips = build_dataset(entries, anns, settings, args.out, seed, ds.test_fraction, args.jobs)
    log.info("%d clips (%d funny)", len(clips), sum(c.label for c in clips))
    return EXIT_OK


def cmd_synth_corpus(args, cfg: RunConfig) -> int:
    seed = args.seed if args.seed is not None else cfg.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "laughter":
        (out / "gt").mkdir(exist_ok=True)
        manifest = []
        for i in range(args.files):
            media_id = f"synth_{seed:04d}_{i:03d}"
            w, ann = make_laughter_file(seed * 1000 + i, args.duration, args.sample_rate, args.laughs, media_id)
            save_wav(w, out / f"{media_id}.wav")
            save_annotation(ann, out / "gt" / f"{media_id}.json")
            manifest.append({"media_id": media_id, "wav_path": f"{media_id}.wav"})
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    else:
        n_test = args.test_clips if args.test_clips is not None else max(1, args.files // 4)
        write_funny_dataset(out, args.files, n_test, seed, cfg.token_counts(), cfg.model.d_text, args.signal)
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    mcfg = cfg.model_config()
    dims = {m: int(mcfg.d_raw[m]) for m in MODALITIES}
    counts = cfg.token_counts()
    train_set = load_clipset(args.dataset, counts, "train", dims)
    entries, _ = read_dataset_index(args.dataset)
    test_set = load_clipset(args.dataset, counts, "test", dims) if any(e.split == "test" for e in entries) else None
    tcfg = cfg.train if args.epochs is None else replace(cfg.train, epochs=args.epochs)
    model = FusionModel(mcfg)
    model.fit_input_norm(train_set.features)
    history = train(model, train_set, cfg.loss, tcfg, test_set)
    meta = {"model": mcfg.to_dict(), "token_counts": counts, "config": cfg.to_dict(),
            "epochs_run": len(history), "format": "laughcaf-checkpoint-1"}
    stem = Path(args.out)
    if stem.suffix in (".json", ".fnwm"):
        stem = stem.with_suffix("")
    stem.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(stem, model.state_dict(), meta)
    _write_text(args.log or stem.with_suffix(".log.csv"), history_csv(history))
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    model, meta = _checkpoint_model(args.checkpoint)
    split = None if args.split == "all" else args.split
    data = load_clipset(args.dataset, meta.get("token_counts", cfg.token_counts()), split, _model_dims(model))
    probs = predict_proba(model, data, cfg.eval.batch_size)
    report = classification_metrics((probs > 0.5).astype(int), data.labels)
    doc = {"split": args.split, "n_clips": len(data), "metrics": report.to_dict()}
    _write_text(args.out, dumps(doc))
    return EXIT_OK


def cmd_eval_laughter(args, cfg: RunConfig) -> int:
    pred = _load_annotations(args.pred)
    gt = _load_annotations(args.gt)
    missing = sorted(set(gt) - set(pred))
    if missing:
        raise DataError(f"no prediction for media: {', '.join(missing)}")
    items, pairs = [], []
    for media_id in sorted(gt):
        g, p = gt[media_id], pred[media_id]
        dur = g.duration_s or p.duration_s
        if dur is None:
            dur = max([s.end_s for s in g.laughter_spans() + p.laughter_spans()] or [0.0])
        items.append((p.laughter_spans(), g.laughter_spans(), dur))
        pairs.append((p.laughter_spans(), g.laughter_spans()))
    temporal = temporal_counts(items, cfg.eval.resolution_s)
    det = {thr: detection_counts(pairs, thr) for thr in cfg.eval.iou_thresholds}
    _write_text(args.out, dumps(laughter_report(temporal, det)))
    table = format_laughter_table(temporal, det)
    if args.table:
        _write_text(args.table, table)
    else:
        sys.stderr.write(table)
    return EXIT_OK


def predict_windows(duration_s: float, n_s: float, stride_s: float) -> list[Window]:
    """Windows every ``stride_s`` seconds until one reaches the end of the media."""
    if stride_s <= 0:
        raise ConfigError("stride must be > 0")
    out = []
    start = 0.0
    while True:
        out.append(Window(start, start + n_s))
        if start + n_s >= duration_s - 1e-9:
            return out
        start = round(start + stride_s, 9)


def cmd_predict(args, cfg: RunConfig) -> int:
    model, meta = _checkpoint_model(args.checkpoint)
    counts = meta.get("token_counts", cfg.token_counts())
    mel_p = cfg.mel
    d_text = int(model.cfg.d_raw["text"])
    audio = load_wav(args.wav)
    audio = mix_to_mono(audio) if audio.layout != "mono" else audio
    if audio.sample_rate_hz != mel_p.sample_rate_hz:
        audio = resample(audio, mel_p.sample_rate_hz)
    frames = load_frames(args.frames, tuple(args.frames_hw) if args.frames_hw else None,
                         cfg.dataset.fps) if args.frames else None
    utts = []
    if args.transcript:
        try:
            utts = parse_transcript(Path(args.transcript).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise DataError(f"transcript not found: {args.transcript}") from exc
    n_s = cfg.dataset.n_s
    stride = args.stride if args.stride is not None else cfg.eval.stride_s
    windows = predict_windows(audio.duration_s, n_s, stride)
    toks = []
    for win in windows:
        media = slice_media(audio, frames, transcript_for_window(utts, win), win)
        toks.append(clip_tokens(pad_or_crop(media, n_s), mel_p, counts, d_text))
    batch = {m: stack_tokens([t[m] for t in toks], max(counts[m], max(t[m].shape[0] for t in toks)))
             for m in MODALITIES}
    probs = np.concatenate([model.forward({m: batch[m][i:i + cfg.eval.batch_size] for m in MODALITIES})
                            .probabilities() for i in range(0, len(windows), cfg.eval.batch_size)])
    lines = ["start_s,end_s,p_funny"] + [f"{w.start_s:.3f},{w.end_s:.3f},{_fmt(p)}" for w, p in zip(windows, probs)]
    _write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def parse_k_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
            ks = list(range(lo, hi + 1))
        else:
            ks = [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --k-range {text!r}; use e.g. 1..12 or 1,2,4") from exc
    if not ks or min(ks) < 1:
        raise UsageError("--k-range must list positive integers")
    return ks


def cmd_sweep_clusters(args, cfg: RunConfig) -> int:
    corpus = Path(args.corpus)
    ks = parse_k_range(args.k_range)
    wavs = sorted(str(p) for p in corpus.glob("*.wav"))
    if not wavs:
        raise DataError(f"no .wav files in {corpus}")
    gt = _load_annotations(args.gt or corpus / "gt")
    waves = _load_waveforms(wavs, args.jobs)
    missing = sorted(set(waves) - set(gt))
    if missing:
        raise DataError(f"no ground truth for: {', '.join(missing)}")
    seed = args.seed if args.seed is not None else cfg.seed
    per_k = detect_laughter_corpus(waves, cfg.peaks, cfg.mel, ks, seed)
    thrs = cfg.eval.iou_thresholds
    head = ["k", "temporal_precision", "temporal_recall", "temporal_f1"]
    for thr in thrs:
        head += [f"det{thr:g}_precision", f"det{thr:g}_recall", f"det{thr:g}_f1"]
    lines = [",".join(head)]
    for k in ks:
        pairs = [(per_k[k][m].laughter_spans(), gt[m].laughter_spans()) for m in sorted(waves)]
        items = [(p, g, waves[m].duration_s) for (p, g), m in zip(pairs, sorted(waves))]
        t = temporal_counts(items, cfg.eval.resolution_s)
        row = [str(k), _fmt(t.precision), _fmt(t.recall), _fmt(t.f1)]
        for thr in thrs:
            d = detection_counts(pairs, thr)
            row += [_fmt(d.precision), _fmt(d.recall), _fmt(d.f1)]
        lines.append(",".join(row))
    _write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_export_attention(args, cfg: RunConfig) -> int:
    model, meta = _checkpoint_model(args.checkpoint)
    counts = meta.get("token_counts", cfg.token_counts())
    data = load_clipset(args.dataset, counts, None, _model_dims(model))
    if args.clip:
        pos = {c: i for i, c in enumerate(data.clip_ids)}
        unknown = [c for c in args.clip if c not in pos]
        if unknown:
            raise DataError(f"unknown clip ids: {', '.join(unknown)}")
        data = data.subset([pos[c] for c in args.clip])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["clip_id,w_V,w_T,w_A"]
    for start in range(0, len(data), cfg.eval.batch_size):
        idx = np.arange(start, min(start + cfg.eval.batch_size, len(data)))
        batch = data.batch(idx)
        r = model.forward(batch)
        occl = model.occlusion_contributions(batch) if args.contrib == "occlusion" else None
        for j, i in enumerate(idx):
            cid = data.clip_ids[i]
            lines = ["block,query_row,key_col,weight"]
            blocks = [(f"cross_{m}", r.cross_maps[m].data[j]) for m in MODALITIES] + [("self", r.self_map.data[j])]
            for name, a in blocks:
                for q in range(a.shape[0]):
                    lines += [f"{name},{q},{k},{_fmt(a[q, k])}" for k in range(a.shape[1])]
            (out / f"attention_{cid}.csv").write_text("\n".join(lines) + "\n")
            if occl is None:
                w = modality_contributions({m: r.cross_maps[m].data[j] for m in MODALITIES})
            else:
                w = occl[j]
            rows.append(f"{cid},{_fmt(w['visual'])},{_fmt(w['text'])},{_fmt(w['audio'])}")
    (out / "contributions.csv").write_text("\n".join(rows) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    pass


def config_defaults_text() -> str:
    """The default run configuration in TOML form."""
    lines = ["configuration defaults (override with --config FILE.toml):"]
    for section, body in RunConfig().to_dict().items():
        lines.append(f"  [{section}]")
        for key, value in body.items():
            if value is None:
                lines.append(f"  # {key} unset")
                continue
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, str):
                text = json.dumps(value)
            elif isinstance(value, (list, tuple)):
                text = "[" + ", ".join(f"{v:g}" for v in value) + "]"
            else:
                text = f"{value:g}" if isinstance(value, float) else str(value)
            lines.append(f"  {key} = {text}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    epilog = config_defaults_text()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="TOML run configuration")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for per-file work")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="logging verbosity")

    parser = argparse.ArgumentParser(prog="laughcaf", formatter_class=fmt,
                                     description="Laughter detection and multimodal funny-moment classification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect-laughter", parents=[common], formatter_class=fmt, epilog=epilog,
                       help="find laughter in multichannel soundtracks")
    p.add_argument("wavs", nargs="+", help="stereo or 5.1 WAV files")
    p.add_argument("--k", type=int, default=None, help="number of clusters (config [cluster] k when unset)")
    p.add_argument("--seed", type=int, default=None, help="clustering seed (config seed when unset)")
    p.add_argument("--per-file", action="store_true", help="cluster each file on its own instead of jointly")
    p.add_argument("--out", required=True, help="annotation JSON (single input) or output directory")
    p.set_defaults(func=cmd_detect_laughter)

    p = sub.add_parser("build-dataset", parents=[common], formatter_class=fmt, epilog=epilog,
                       help="cut funny / not-funny clips and encode their features")
    p.add_argument("manifest", help="JSON list of media entries")
    p.add_argument("--ann", default=None, help="annotation JSON file or directory")
    p.add_argument("--n-sec", type=float, default=None, help="clip length in seconds (config n_s when unset)")
    p.add_argument("--neg-ratio", type=float, default=None, help="negatives per positive (config when unset)")
    p.add_argument("--seed", type=int, default=None, help="sampling seed (config seed when unset)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("synth-corpus", parents=[common], formatter_class=fmt, epilog=epilog,
                       help="generate a synthetic corpus with ground truth")
    p.add_argument("--kind", choices=["laughter", "funny"], required=True)
    p.add_argument("--files", type=int, default=10, help="WAV files (laughter) or training clips (funny)")
    p.add_argument("--test-clips", type=int, default=None, help="funny test clips (files/4 when unset)")
    p.add_argument("--signal", choices=["audio+text", "audio"], default="audio+text",
                   help="which modalities carry the funny label")
    p.add_argument("--duration", type=float, default=60.0, help="seconds per laughter file")
    p.add_argument("--sample-rate", type=int, default=48000, help="laughter file sample rate")
    p.add_argument("--laughs", type=int, default=5, help="laughter events per file")
    p.add_argument("--seed", type=int, default=None, help="corpus seed (config seed when unset)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth_corpus)

    p = sub.add_parser("train", parents=[common], formatter_class=fmt, epilog=epilog, help="train the fusion classifier")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--epochs", type=int, default=None, help="override config [train] epochs")
    p.add_argument("--out", required=True, help="checkpoint path stem (writes .fnwm and .json)")
    p.add_argument("--log", default=None, help="per-epoch CSV log (<out>.log.csv when unset)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], formatter_class=fmt, epilog=epilog, help="classification metrics")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["train", "test", "all"], default="test")
    p.add_argument("--out", default="-", help="metrics JSON ('-' for stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("eval-laughter", parents=[common], formatter_class=fmt, epilog=epilog,
                       help="temporal and detection metrics of laughter annotations")
    p.add_argument("pred", help="predicted annotation JSON file or directory")
    p.add_argument("gt", help="ground-truth annotation JSON file or directory")
    p.add_argument("--out", default="-", help="report JSON ('-' for stdout)")
    p.add_argument("--table", default=None, help="plain-text table file (stderr when unset)")
    p.set_defaults(func=cmd_eval_laughter)

    p = sub.add_parser("predict", parents=[common], formatter_class=fmt, epilog=epilog,
                       help="funny probability over sliding windows of one media file")
    p.add_argument("wav")
    p.add_argument("--frames", default=None, help="FNWM frame matrix, one flattened frame per row")
    p.add_argument("--frames-hw", type=int, nargs=2, default=None, metavar=("H", "W"))
    p.add_argument("--transcript", default=None, help="UTF-8 transcript, optional [start,end] stamps")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--stride", type=float, default=None, help="window stride in seconds (config when unset)")
    p.add_argument("--out", default="-", help="CSV timeline ('-' for stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep-clusters", parents=[common], formatter_class=fmt, epilog=epilog,
                       help="laughter F1 as a function of the cluster count")
    p.add_argument("corpus", help="directory of WAV files")
    p.add_argument("--gt", default=None, help="ground-truth annotations (<corpus>/gt when unset)")
    p.add_argument("--k-range", default="1..12", help="inclusive range a..b or comma list")
    p.add_argument("--seed", type=int, default=None, help="clustering seed (config seed when unset)")
    p.add_argument("--out", default="-", help="CSV output ('-' for stdout)")
    p.set_defaults(func=cmd_sweep_clusters)

    p = sub.add_parser("export-attention", parents=[common], formatter_class=fmt, epilog=epilog,
                       help="attention maps and modality contributions per clip")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clip", action="append", default=None, help="clip id (repeatable; all clips when unset)")
    p.add_argument("--contrib", choices=["attention", "occlusion"], default="attention",
                   help="mean attention weight or logit change when a modality is blanked")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_export_attention)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"laughcaf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"laughcaf: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, DimensionError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"laughcaf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
