"""Command-line interface.

Subcommands: segment, train, tune, eval, bio-fidelity, hand-bench, flow-dump.
Shared options resolve in three layers: built-in defaults, then a JSON config
file (--config or $SIGNSEG_CONFIG), then explicit flags. Every file-writing
run drops a `<command>.run.json` manifest with the resolved configuration
next to its outputs; no artifact embeds a timestamp, so reruns byte-match.
Errors carry a stage prefix on stderr and flip the exit code to 1.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

from . import train as training
from .decoding import DEFAULT_GRID, DecodeMode, DecodeParams, decode, tune_thresholds
from .flow import optical_flow
from .hands import HandGroup, Handedness, HandPose, cce, hand_normalize, mace
from .metrics import build_report, report_to_json, report_to_text
from .pipeline import PipelineOptions, parse_feature_flags, prepare_features, prepare_pose
from .pose import HAND_POINTS, load_pose
from .tagger import TaggerConfig, forward, init_model, load_model, save_model
from .tags import (SEGMENTS_TIERS, TagScheme, decode_gold_tags, fidelity_experiment,
                   load_segments, save_segments)
from .vtt import segments_to_vtt

_DEFAULTS = {
    "fps": 25.0,
    "selector": "body75",
    "features": "flow",
    "threshold_b": 50.0,
    "threshold_o": 50.0,
    "mode": "threshold",
    "seed": 0,
    "workers": 1,
}

_MODES = {"threshold": DecodeMode.THRESHOLD, "argmax": DecodeMode.ARGMAX}


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (ValueError, RuntimeError, OSError, KeyError, TypeError) as e:
        raise StageError(name, str(e)) from e


def _load_base_config(path_flag):
    path = path_flag or os.environ.get("SIGNSEG_CONFIG")
    if not path:
        return {}
    with _stage("config"):
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
        if not isinstance(doc, dict):
            raise ValueError(f"config file {path} must hold a JSON object")
        unknown = sorted(set(doc) - set(_DEFAULTS))
        if unknown:
            raise ValueError(f"config file {path} has unknown keys: {', '.join(unknown)}")
    return doc


def _resolve(args) -> dict:
    base = _load_base_config(args.config)
    opts = {}
    for key, builtin in _DEFAULTS.items():
        flag = getattr(args, key)
        opts[key] = flag if flag is not None else base.get(key, builtin)
    feats = opts["features"]
    if isinstance(feats, str):
        feats = list(parse_feature_flags(feats))
    if not isinstance(feats, list) or not all(isinstance(x, str) for x in feats):
        raise StageError("config", "features must be a comma list or list of strings")
    opts["features"] = feats
    with _stage("config"):
        if opts["mode"] not in _MODES:
            raise ValueError(f"unknown mode {opts['mode']!r}; expected threshold or argmax")
        if not (isinstance(opts["workers"], int) and opts["workers"] >= 1):
            raise ValueError("workers must be an integer >= 1")
        if not isinstance(opts["seed"], int):
            raise ValueError("seed must be an integer")
        _popts(opts)
        _dparams(opts, strict_bio=False)
    return opts


def _popts(opts) -> PipelineOptions:
    return PipelineOptions(float(opts["fps"]), opts["selector"], tuple(opts["features"]))


def _dparams(opts, strict_bio: bool) -> DecodeParams:
    return DecodeParams(
        threshold_b=float(opts["threshold_b"]),
        threshold_o=float(opts["threshold_o"]),
        mode=_MODES[opts["mode"]],
        strict_bio=strict_bio,
    )


def _stem(path) -> str:
    base = os.path.basename(path)
    for suffix in (training.POSE_SUFFIX, ".json"):
        if base.endswith(suffix):
            return base[:-len(suffix)]
    return os.path.splitext(base)[0]


def _map_files(items, worker, workers: int):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, items))
    return [worker(item) for item in items]


def _write_text(path, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def _write_manifest(out_dir, command: str, options: dict, inputs, outputs) -> str:
    doc = {"command": command, "options": options, "inputs": list(inputs),
           "outputs": list(outputs)}
    path = os.path.join(out_dir, f"{command}.run.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def cmd_segment(args, opts) -> int:
    with _stage("checkpoint"):
        model = load_model(args.checkpoint)
    popts = _popts(opts)
    dparams = _dparams(opts, strict_bio=args.strict_bio)

    def process(path):
        with _stage("parse"):
            seq = load_pose(path)
        if seq.num_frames == 0:
            return _stem(path), {tier: [] for tier in SEGMENTS_TIERS}
        with _stage("features"):
            feats = prepare_features(seq, popts)
        if feats.width != model.config.input_dim:
            raise StageError(
                "features",
                f"feature width {feats.width} does not match checkpoint "
                f"input width {model.config.input_dim}",
            )
        with _stage("forward"):
            probs = forward(model, feats.values)
        with _stage("decode"):
            tiers = {tier: decode(probs[tier] * 100.0, dparams)
                     for tier in SEGMENTS_TIERS}
        return _stem(path), tiers

    results = _map_files(args.poses, process, opts["workers"])
    os.makedirs(args.out_dir, exist_ok=True)
    outputs = []
    with _stage("emit"):
        for stem, tiers in results:
            seg_path = os.path.join(args.out_dir, f"{stem}.segments.json")
            save_segments(seg_path, opts["fps"], tiers)
            outputs.append(seg_path)
            for tier in SEGMENTS_TIERS:
                cue_path = os.path.join(args.out_dir, f"{stem}.{tier}.vtt")
                _write_text(cue_path, segments_to_vtt(tiers[tier], opts["fps"], tier))
                outputs.append(cue_path)
        options = dict(opts, checkpoint=args.checkpoint, strict_bio=args.strict_bio)
        _write_manifest(args.out_dir, "segment", options, args.poses, outputs)
    return 0


def cmd_train(args, opts) -> int:
    popts = _popts(opts)
    with _stage("data"):
        train_clips = training.load_corpus(args.data_dir, popts)
        val_clips = (training.load_corpus(args.val_dir, popts)
                     if args.val_dir else train_clips)
    with _stage("weights"):
        weights = training.corpus_class_weights(train_clips)
    with _stage("model"):
        config = TaggerConfig(
            input_dim=train_clips[0].features.shape[1],
            hidden_dim=args.hidden_dim,
            layers=args.layers,
            learning_rate=args.learning_rate,
            class_weights=weights,
            seed=opts["seed"],
            dropout=args.dropout,
            grad_clip=args.grad_clip,
        )
        model = init_model(config)
    with _stage("train"):
        result = training.train(
            model, train_clips, val_clips,
            max_steps=args.max_steps, patience=args.patience,
            val_every=args.val_every, shuffle_seed=opts["seed"],
        )
        train_f1 = training.mean_frame_f1(result.model, train_clips)
    os.makedirs(args.out_dir, exist_ok=True)
    with _stage("emit"):
        ckpt_path = os.path.join(args.out_dir, "model.ckpt")
        save_model(result.model, ckpt_path)
        log_path = os.path.join(args.out_dir, "training_log.csv")
        training.write_log(log_path, result.history)
        options = dict(
            opts, data_dir=args.data_dir, val_dir=args.val_dir,
            hidden_dim=args.hidden_dim, layers=args.layers,
            learning_rate=args.learning_rate, max_steps=args.max_steps,
            patience=args.patience, val_every=args.val_every,
            dropout=args.dropout, grad_clip=args.grad_clip,
        )
        options["results"] = {
            "best_val_f1": result.best_val_f1,
            "best_step": result.best_step,
            "steps": result.steps,
            "train_f1": train_f1,
            "stopped": result.stopped,
        }
        _write_manifest(args.out_dir, "train", options,
                        [args.data_dir], [ckpt_path, log_path])
    print(f"best_val_f1={result.best_val_f1:.6f} train_f1={train_f1:.6f} "
          f"steps={result.steps} stopped={result.stopped}")
    return 0


def cmd_tune(args, opts) -> int:
    with _stage("checkpoint"):
        model = load_model(args.checkpoint)
    popts = _popts(opts)
    with _stage("data"):
        clips = training.load_corpus(args.data_dir, popts)
    with _stage("forward"):
        dev = []
        for clip in clips:
            probs = forward(model, clip.features)
            gold = decode_gold_tags(clip.gold[args.tier], TagScheme.BIO)
            dev.append((probs[args.tier] * 100.0, gold))
    with _stage("tune"):
        best_b, best_o, table = tune_thresholds(dev, DEFAULT_GRID,
                                                strict_bio=args.strict_bio)
    best = next(c for c in table
                if c.threshold_b == best_b and c.threshold_o == best_o)
    os.makedirs(args.out_dir, exist_ok=True)
    with _stage("emit"):
        table_path = os.path.join(args.out_dir, f"tune_{args.tier}.csv")
        lines = ["threshold_b,threshold_o,iou,percentage"]
        lines += [f"{c.threshold_b:g},{c.threshold_o:g},{c.iou:.6f},{c.percentage:.6f}"
                  for c in table]
        _write_text(table_path, "\n".join(lines))
        options = dict(opts, data_dir=args.data_dir, checkpoint=args.checkpoint,
                       tier=args.tier, strict_bio=args.strict_bio)
        options["results"] = {
            "threshold_b": best_b, "threshold_o": best_o,
            "iou": best.iou, "percentage": best.percentage,
        }
        _write_manifest(args.out_dir, "tune", options, [args.data_dir], [table_path])
    print(f"tier={args.tier} threshold_b={best_b:g} threshold_o={best_o:g} "
          f"iou={best.iou:.6f} percentage={best.percentage:.6f}")
    return 0


def cmd_eval(args, opts) -> int:
    with _stage("parse"):
        pred_fps, pred_tiers = load_segments(args.pred)
        gold_fps, gold_tiers = load_segments(args.gold)
        if pred_fps != gold_fps:
            raise ValueError(f"pred fps {pred_fps:g} does not match gold fps {gold_fps:g}")
    num_frames = args.frames
    if num_frames is None:
        ends = [s.end for tiers in (pred_tiers, gold_tiers)
                for segs in tiers.values() for s in segs]
        num_frames = max(ends, default=0)
    with _stage("metrics"):
        if num_frames <= 0:
            raise ValueError("no frames to evaluate; pass --frames for empty inputs")
        report = build_report(pred_tiers, gold_tiers, num_frames, gold_fps,
                              bins=args.bins)
    print(report_to_text(report))
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with _stage("emit"):
            report_path = os.path.join(args.out_dir, "report.json")
            _write_text(report_path, report_to_json(report))
            options = dict(opts, pred=args.pred, gold=args.gold,
                           frames=num_frames, bins=args.bins)
            _write_manifest(args.out_dir, "eval", options,
                            [args.pred, args.gold], [report_path])
    return 0


def cmd_bio_fidelity(args, opts) -> int:
    with _stage("parse"):
        src_fps, tiers = load_segments(args.gold)
        if args.tier not in tiers:
            raise ValueError(f"gold file has no {args.tier!r} tier")
        fps_list = [float(x) for x in args.fps_list.split(",") if x]
        if not fps_list:
            raise ValueError("empty --fps-list")
    with _stage("fidelity"):
        rows = fidelity_experiment(tiers[args.tier], src_fps, fps_list)
    lines = ["fps,scheme,reproduced,exact"]
    lines += [f"{r.fps:g},{r.scheme.value},{r.reproduced:.6f},{r.exact:.6f}"
              for r in rows]
    text = "\n".join(lines)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with _stage("emit"):
            csv_path = os.path.join(args.out_dir, "fidelity.csv")
            _write_text(csv_path, text)
            options = dict(opts, gold=args.gold, tier=args.tier, fps_list=fps_list)
            _write_manifest(args.out_dir, "bio-fidelity", options,
                            [args.gold], [csv_path])
    else:
        print(text)
    return 0


def _load_bench_hand(path) -> HandPose:
    seq = load_pose(path)
    if seq.num_frames == 0:
        raise ValueError(f"{path}: pose has no frames")
    for name, handedness in (("RIGHT_HAND", Handedness.RIGHT),
                             ("LEFT_HAND", Handedness.LEFT)):
        if any(c.name == name for c in seq.components):
            off = seq.component_offset(name)
            count = len(seq.component(name).points)
            return HandPose(seq.coords[0, off:off + count], handedness)
    raise ValueError(f"{path}: pose has no hand component")


def cmd_hand_bench(args, opts) -> int:
    with _stage("manifest"):
        with open(args.manifest, encoding="utf-8") as f:
            doc = json.load(f)
        groups = doc.get("groups") if isinstance(doc, dict) else None
        if not isinstance(groups, list) or not groups:
            raise ValueError("manifest must hold {\"groups\": [{\"label\", \"files\"}, ...]}")
        base = os.path.dirname(os.path.abspath(args.manifest))
        parsed = []
        for g in groups:
            if not (isinstance(g, dict) and isinstance(g.get("label"), str)
                    and isinstance(g.get("files"), list) and len(g["files"]) >= 2):
                raise ValueError("each group needs a label and at least 2 files")
            files = [os.path.join(base, f) for f in g["files"]]
            parsed.append((g["label"], files))

    def process(entry):
        label, files = entry
        with _stage("data"):
            members = [_load_bench_hand(f) for f in files]
        with _stage("bench"):
            group = HandGroup(label, members)
            normalized = [hand_normalize(m).points for m in members]
            return label, files, mace(group), cce(group), normalized

    results = _map_files(parsed, process, opts["workers"])
    os.makedirs(args.out_dir, exist_ok=True)
    with _stage("emit"):
        bench_path = os.path.join(args.out_dir, "hand_bench.csv")
        bench_lines = ["label,mace,cce"]
        overlay_lines = ["label,member,landmark,x,y,z"]
        for label, files, group_mace, group_cce, normalized in results:
            bench_lines.append(f"{label},{group_mace:.9f},{group_cce:.9f}")
            for path, pts in zip(files, normalized):
                member = _stem(path)
                for li, name in enumerate(HAND_POINTS):
                    overlay_lines.append(
                        f"{label},{member},{name},"
                        f"{pts[li, 0]:.9f},{pts[li, 1]:.9f},{pts[li, 2]:.9f}"
                    )
        _write_text(bench_path, "\n".join(bench_lines))
        overlay_path = os.path.join(args.out_dir, "overlay.csv")
        _write_text(overlay_path, "\n".join(overlay_lines))
        options = dict(opts, manifest=args.manifest)
        _write_manifest(args.out_dir, "hand-bench", options,
                        [args.manifest], [bench_path, overlay_path])
    return 0


def cmd_flow_dump(args, opts) -> int:
    popts = _popts(opts)
    with _stage("parse"):
        seq = load_pose(args.pose)
    lines = ["frame,point,value"]
    if seq.num_frames > 0:
        with _stage("features"):
            prepared = prepare_pose(seq, popts)
            flow = optical_flow(prepared)
        labels = [f"{c.name}/{p}" for c in prepared.components for p in c.points]
        for t in range(flow.values.shape[0]):
            for k, label in enumerate(labels):
                lines.append(f"{t},{label},{flow.values[t, k]:.6f}")
    text = "\n".join(lines)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with _stage("emit"):
            csv_path = os.path.join(args.out_dir, "flow.csv")
            _write_text(csv_path, text)
            _write_manifest(args.out_dir, "flow-dump", dict(opts, pose=args.pose),
                            [args.pose], [csv_path])
    else:
        print(text)
    return 0


def _add_shared(p) -> None:
    p.add_argument("--fps", type=float, default=None, help="pipeline frame rate")
    p.add_argument("--selector", default=None, help="keypoint selector name")
    p.add_argument("--features", default=None,
                   help="comma list of feature flags: flow,handnorm")
    p.add_argument("--threshold-b", dest="threshold_b", type=float, default=None)
    p.add_argument("--threshold-o", dest="threshold_o", type=float, default=None)
    p.add_argument("--mode", choices=sorted(_MODES), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--config", default=None,
                   help="JSON config file; defaults to $SIGNSEG_CONFIG")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signseg", description="Pose-based sign and phrase segmentation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="decode segments from pose files")
    p.add_argument("poses", nargs="+", help="poseseq-json inputs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--strict-bio", action="store_true",
                   help="reopen a segment at a closing B frame")
    _add_shared(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("train", help="train a tagger on paired clips")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--val-dir", default=None,
                   help="validation clips; defaults to the training set")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--hidden-dim", type=int, default=256)
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--max-steps", type=int, default=0, help="0 = no cap")
    p.add_argument("--patience", type=int, default=20,
                   help="evaluations without improvement before stopping; 0 = off")
    p.add_argument("--val-every", type=int, default=1, help="epochs between evaluations")
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--grad-clip", type=float, default=0.0)
    _add_shared(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="grid-search decode thresholds on a dev set")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tier", choices=SEGMENTS_TIERS, required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--strict-bio", action="store_true")
    _add_shared(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("eval", help="score predicted against gold segments")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out-dir", default=None)
    _add_shared(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bio-fidelity", help="tag-scheme round-trip sweep over frame rates")
    p.add_argument("--gold", required=True, help="segments-json file")
    p.add_argument("--tier", default="sign")
    p.add_argument("--fps-list", default="3.125,6.25,12.5,25,50")
    p.add_argument("--out-dir", default=None)
    _add_shared(p)
    p.set_defaults(func=cmd_bio_fidelity)

    p = sub.add_parser("hand-bench", help="hand normalization consistency benchmark")
    p.add_argument("--manifest", required=True,
                   help="JSON {groups: [{label, files}]}; files relative to it")
    p.add_argument("--out-dir", default=".")
    _add_shared(p)
    p.set_defaults(func=cmd_hand_bench)

    p = sub.add_parser("flow-dump", help="per-point optical flow as CSV")
    p.add_argument("pose", help="poseseq-json input")
    p.add_argument("--out-dir", default=None)
    _add_shared(p)
    p.set_defaults(func=cmd_flow_dump)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = _resolve(args)
        return args.func(args, opts)
    except StageError as e:
        print(f"signseg {args.command}: {e.stage}: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # argparse exits are SystemExit and pass through
        print(f"signseg {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
