"""Command-line harness.

Subcommands: synth, preprocess, segment, features, train, eval, sweep,
rl-replay, pipeline. Every subcommand accepts --seed and --config (a flat
key=value text file whose values fill in unset options), writes its
delimited outputs plus a JSON-lines run log into --out-dir, and renders the
relevant matplotlib figure next to the CSV unless --no-figures is given.

Exit codes: 0 success, 2 input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .errors import HarError, InputError
from .evaluate import evaluate, write_confusion_csv
from .features import FEATURE_DIM, FeaturePipeline
from .ingest import parse_recording, preprocess, write_recording_csv
from .labels import ALL_LABELS, ActivityLabel
from .model import (
    TrainConfig,
    load_model,
    save_model,
    sweep_hidden,
    train_supervised,
)
from .online import EpisodeLog, LearnerConfig, RewardMode, run_feedback_session, session_accuracy
from .pipeline import build_labeled_dataset, run_pipeline
from .segment import segment_stream
from .synth import SynthConfig, UserProfile, default_script, generate_recording

RUN_LOG_NAME = "run_log.jsonl"


class RunLog:
    """Deterministic JSON-lines log: one record per event, no wall-clock."""

    def __init__(self, out_dir: Path, command: str, args: dict):
        self.path = out_dir / RUN_LOG_NAME
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        self.event(event="start", command=command, args=args)

    def event(self, **record) -> None:
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._fh.flush()

    def wrote(self, path: Path) -> None:
        self.event(event="wrote", path=path.name)

    def close(self, status: str = "ok") -> None:
        self.event(event="done", status=status)
        self._fh.close()


def _load_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    cfg: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"config {path}: line {lineno} is not key=value: {line!r}")
        key, _, value = line.partition("=")
        cfg[key.strip()] = value.strip()
    return cfg


def _resolve(args, cfg: dict[str, str], key: str, cast, default):
    """CLI value if given, else config-file value, else default."""
    cli = getattr(args, key, None)
    if cli is not None:
        return cli
    if key in cfg:
        try:
            return cast(cfg[key])
        except ValueError:
            raise InputError(f"config value for {key!r} is not a valid {cast.__name__}") from None
    return default


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_script(text: str) -> tuple[tuple[ActivityLabel, float], ...]:
    entries = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        code, _, dur = chunk.partition(":")
        try:
            entries.append((ActivityLabel.from_code(code.strip()), float(dur)))
        except ValueError as exc:
            raise InputError(f"bad script entry {chunk!r}: {exc}") from None
    if not entries:
        raise InputError("empty activity script")
    return tuple(entries)


FEATURE_HEADER = ",".join(f"f{k:03d}" for k in range(FEATURE_DIM))


def write_features_csv(path: Path, dataset, labeled: bool) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(FEATURE_HEADER + (",label\n" if labeled else "\n"))
        for x, label in dataset:
            row = ",".join(repr(float(v)) for v in x)
            if labeled:
                fh.write(row + f",{label.code}\n")
            else:
                fh.write(row + "\n")


def read_features_csv(path) -> list[tuple[np.ndarray, ActivityLabel | None]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().strip()
        labeled = header == FEATURE_HEADER + ",label"
        if not labeled and header != FEATURE_HEADER:
            raise InputError(f"features {path}: unexpected header")
        rows: list[tuple[np.ndarray, ActivityLabel | None]] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            want = FEATURE_DIM + (1 if labeled else 0)
            if len(parts) != want:
                raise InputError(f"features {path}: malformed row at line {lineno}")
            try:
                x = np.array([float(v) for v in parts[:FEATURE_DIM]])
            except ValueError:
                raise InputError(f"features {path}: malformed row at line {lineno}") from None
            label = ActivityLabel.from_code(parts[-1]) if labeled else None
            rows.append((x, label))
    return rows


def _require_labeled(rows, what: str) -> list[tuple[np.ndarray, ActivityLabel]]:
    if any(label is None for _, label in rows):
        raise InputError(f"{what} requires a features CSV with a label column")
    return rows


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def cmd_synth(args, cfg) -> int:
    out = _out_dir(args)
    seed = _resolve(args, cfg, "seed", int, 0)
    profile = UserProfile(
        gait_hz=_resolve(args, cfg, "gait_hz", float, 1.0),
        stretch_amp=_resolve(args, cfg, "stretch_amp", float, 1.0),
        accel_noise_g=_resolve(args, cfg, "accel_noise", float, 0.03),
        stretch_noise_pf=_resolve(args, cfg, "stretch_noise", float, 0.3),
        tilt_deg=_resolve(args, cfg, "tilt_deg", float, 0.0),
        level_scale=_resolve(args, cfg, "level_scale", float, 1.0),
    )
    script_text = _resolve(args, cfg, "script", str, None)
    script = _parse_script(script_text) if script_text else default_script()
    log = RunLog(out, "synth", {"seed": seed, "profile": dataclasses.asdict(profile)})
    try:
        result = generate_recording(SynthConfig(seed=seed, script=script, profile=profile))
        write_recording_csv(result.raw, out / "stretch.csv", out / "accel.csv",
                            labels=result.labels, labels_path=out / "labels.csv")
        for name in ("stretch.csv", "accel.csv", "labels.csv"):
            log.wrote(out / name)
        with open(out / "events.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t_ms,kind,activity\n")
            for ev in result.events:
                fh.write(f"{ev.t_ms},{ev.kind},{ev.activity.code}\n")
        log.wrote(out / "events.csv")
        if not args.no_figures:
            from . import report
            stream = preprocess(result.raw, labels=result.labels)
            report.save_stream_figure(stream, out / "stream.png")
            log.wrote(out / "stream.png")
        log.event(event="metric", samples_stretch=int(result.raw.stretch_t.size),
                  samples_accel=int(result.raw.accel_t.size), events=len(result.events))
        log.close()
        return 0
    except BaseException:
        log.close("error")
        raise


def _load_stream(args):
    raw, labels = parse_recording(args.stretch, args.accel, args.labels)
    return preprocess(raw, labels=labels)


def cmd_preprocess(args, cfg) -> int:
    out = _out_dir(args)
    log = RunLog(out, "preprocess", {"stretch": str(args.stretch), "accel": str(args.accel)})
    try:
        stream = _load_stream(args)
        with open(out / "stretch_norm.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t_ms,s\n")
            for t, s in zip(stream.stretch_t, stream.stretch):
                fh.write(f"{int(t)},{float(s)!r}\n")
        log.wrote(out / "stretch_norm.csv")
        with open(out / "accel_filtered.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t_ms,ax,ay,az\n")
            for t, (x, y, z) in zip(stream.accel_t, stream.accel_xyz):
                fh.write(f"{int(t)},{float(x)!r},{float(y)!r},{float(z)!r}\n")
        log.wrote(out / "accel_filtered.csv")
        log.close()
        return 0
    except BaseException:
        log.close("error")
        raise


def cmd_segment(args, cfg) -> int:
    out = _out_dir(args)
    log = RunLog(out, "segment", {"stretch": str(args.stretch), "accel": str(args.accel)})
    try:
        stream = _load_stream(args)
        segments = segment_stream(stream)
        with open(out / "segments.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("start_ms,end_ms,cause\n")
            for seg in segments:
                fh.write(f"{seg.start_ms},{seg.end_ms},{seg.cause.value}\n")
        log.wrote(out / "segments.csv")
        log.event(event="metric", segments=len(segments))
        log.close()
        return 0
    except BaseException:
        log.close("error")
        raise


def cmd_features(args, cfg) -> int:
    out = _out_dir(args)
    log = RunLog(out, "features", {"stretch": str(args.stretch), "accel": str(args.accel)})
    try:
        stream = _load_stream(args)
        if stream.labels is not None:
            dataset, _ = build_labeled_dataset(stream)
            write_features_csv(out / "features.csv", dataset, labeled=True)
        else:
            context = FeaturePipeline()
            rows = [(context.process(seg), None) for seg in segment_stream(stream)]
            write_features_csv(out / "features.csv", rows, labeled=False)
            dataset = rows
        log.wrote(out / "features.csv")
        log.event(event="metric", vectors=len(dataset), dims=FEATURE_DIM)
        log.close()
        return 0
    except BaseException:
        log.close("error")
        raise


def cmd_train(args, cfg) -> int:
    out = _out_dir(args)
    seed = _resolve(args, cfg, "seed", int, 0)
    config = TrainConfig(
        n_hidden=_resolve(args, cfg, "n_hidden", int, 4),
        epochs=_resolve(args, cfg, "epochs", int, TrainConfig.epochs),
        learning_rate=_resolve(args, cfg, "learning_rate", float, TrainConfig.learning_rate),
        momentum=_resolve(args, cfg, "momentum", float, TrainConfig.momentum),
        seed=seed,
        test_fraction=_resolve(args, cfg, "test_fraction", float, TrainConfig.test_fraction),
    )
    log = RunLog(out, "train", {"features": str(args.features), "seed": seed,
                                "n_hidden": config.n_hidden, "epochs": config.epochs})
    try:
        dataset = _require_labeled(read_features_csv(args.features), "train")
        params, rep = train_supervised(dataset, config)
        model_path = Path(args.model_out) if args.model_out else out / "model.harn"
        save_model(params, model_path)
        log.wrote(model_path)
        with open(out / "train_report.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("train_accuracy,test_accuracy,overall_accuracy,final_loss,n_train,n_test\n")
            fh.write(f"{rep.train_accuracy!r},{rep.test_accuracy!r},{rep.overall_accuracy!r},"
                     f"{rep.final_loss!r},{rep.n_train},{rep.n_test}\n")
        log.wrote(out / "train_report.csv")
        log.event(event="metric", train_accuracy=rep.train_accuracy,
                  test_accuracy=rep.test_accuracy, overall_accuracy=rep.overall_accuracy)
        print(f"train {rep.train_accuracy:.4f}  test {rep.test_accuracy:.4f}  "
              f"overall {rep.overall_accuracy:.4f}  ({rep.n_train} train / {rep.n_test} test)")
        log.close()
        return 0
    except BaseException:
        log.close("error")
        raise


def cmd_eval(args, cfg) -> int:
    out = _out_dir(args)
    log = RunLog(out, "eval", {"features": str(args.features), "model": str(args.model)})
    try:
        params = load_model(args.model)
        dataset = _require_labeled(read_features_csv(args.features), "eval")
        cm = evaluate(params, dataset)
        write_confusion_csv(cm, out / "confusion.csv")
        log.wrote(out / "confusion.csv")
        if not args.no_figures:
            from . import report
            report.save_confusion_figure(cm, out / "confusion.png")
            log.wrote(out / "confusion.png")
        recalls = {label.code: (None if np.isnan(r) else round(float(r), 6))
                   for label, r in zip(ALL_LABELS, cm.per_class_recall)}
        log.event(event="metric", overall_accuracy=cm.overall_accuracy, per_class_recall=recalls)
        print(f"overall accuracy {cm.overall_accuracy:.4f} over {cm.total} segments")
        log.close()
        return 0
    except BaseException:
        log.close("error")
        raise


def cmd_sweep(args, cfg) -> int:
    out = _out_dir(args)
    seed = _resolve(args, cfg, "seed", int, 0)
    config = TrainConfig(
        epochs=_resolve(args, cfg, "epochs", int, TrainConfig.epochs),
        learning_rate=_resolve(args, cfg, "learning_rate", float, TrainConfig.learning_rate),
        momentum=_resolve(args, cfg, "momentum", float, TrainConfig.momentum),
        seed=seed,
        test_fraction=_resolve(args, cfg, "test_fraction", float, TrainConfig.test_fraction),
    )
    n_max = _resolve(args, cfg, "n_hidden_max", int, 7)
    log = RunLog(out, "sweep", {"features": str(args.features), "seed": seed, "n_hidden_max": n_max})
    try:
        dataset = _require_labeled(read_features_csv(args.features), "sweep")
        points = sweep_hidden(dataset, range(1, n_max + 1), config)
        with open(out / "sweep.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("n_hidden,train_accuracy,test_accuracy,overall_accuracy,weight_count,weight_bytes\n")
            for p in points:
                fh.write(f"{p.n_hidden},{p.train_accuracy!r},{p.test_accuracy!r},"
                         f"{p.overall_accuracy!r},{p.weight_count},{p.weight_bytes}\n")
        log.wrote(out / "sweep.csv")
        if not args.no_figures:
            from . import report
            report.save_sweep_figure(points, out / "sweep.png")
            log.wrote(out / "sweep.png")
        for p in points:
            print(f"N_h={p.n_hidden}  overall {p.overall_accuracy:.4f}  {p.weight_bytes} bytes")
        log.close()
        return 0
    except BaseException:
        log.close("error")
        raise


def cmd_rl_replay(args, cfg) -> int:
    out = _out_dir(args)
    seed = _resolve(args, cfg, "seed", int, 0)
    mode_text = _resolve(args, cfg, "reward_mode", str, RewardMode.PER_SEGMENT.value)
    try:
        mode = RewardMode(mode_text)
    except ValueError:
        raise InputError(f"unknown reward mode {mode_text!r}") from None
    config = LearnerConfig(
        alpha=_resolve(args, cfg, "alpha", float, 0.01),
        reward_mode=mode,
        episodes=_resolve(args, cfg, "episodes", int, 100),
        runs=_resolve(args, cfg, "runs", int, 5),
        seed=seed,
    )
    log = RunLog(out, "rl-replay", {"features": str(args.features), "model": str(args.model),
                                    "alpha": config.alpha, "episodes": config.episodes,
                                    "runs": config.runs, "reward_mode": config.reward_mode.value})
    try:
        params = load_model(args.model)
        segments = _require_labeled(read_features_csv(args.features), "rl-replay")
        initial = session_accuracy(params, segments, config.closed_loop_prev)
        traces = np.empty((config.runs, config.episodes))
        updated = params
        for run in range(config.runs):
            rng = np.random.default_rng(config.seed + run)
            order = rng.permutation(len(segments))
            shuffled = [segments[i] for i in order]
            run_params, trace = run_feedback_session(params, shuffled, config)
            traces[run] = trace
            if run == 0:
                updated = run_params  # canonical adapted model
        elog = EpisodeLog(traces=traces, initial_accuracy=initial)
        with open(out / "episodes.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("run,episode,accuracy\n")
            for run in range(config.runs):
                for ep in range(config.episodes):
                    fh.write(f"{run},{ep + 1},{float(traces[run, ep])!r}\n")
        log.wrote(out / "episodes.csv")
        model_path = Path(args.model_out) if args.model_out else out / "model_adapted.harn"
        save_model(updated, model_path)
        log.wrote(model_path)
        if not args.no_figures:
            from . import report
            report.save_episode_figure({"session": elog}, out / "episodes.png")
            log.wrote(out / "episodes.png")
        log.event(event="metric", initial_accuracy=initial,
                  final_accuracy=elog.final_accuracy)
        print(f"initial {initial:.4f} -> final {elog.final_accuracy:.4f} "
              f"(mean over {config.runs} runs, {config.episodes} episodes)")
        log.close()
        return 0
    except BaseException:
        log.close("error")
        raise


def cmd_pipeline(args, cfg) -> int:
    out = _out_dir(args)
    alpha = _resolve(args, cfg, "alpha", float, 0.01)
    log = RunLog(out, "pipeline", {"stretch": str(args.stretch), "accel": str(args.accel),
                                   "model": str(args.model), "mode": args.mode})
    try:
        params = load_model(args.model)
        result = run_pipeline(
            args.stretch, args.accel, args.labels,
            params=params, mode=args.mode, learner=LearnerConfig(alpha=alpha),
        )
        with open(out / "recognized.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("activity,start_ms,end_ms\n")
            for rec in result.recognized:
                fh.write(f"{rec.activity.code},{rec.start_ms},{rec.end_ms}\n")
        log.wrote(out / "recognized.csv")
        if args.mode == "rl":
            model_path = Path(args.model_out) if args.model_out else out / "model_adapted.harn"
            save_model(result.params, model_path)
            log.wrote(model_path)
            log.event(event="metric", session_accuracy=result.session_accuracy,
                      segments=len(result.segments))
        else:
            log.event(event="metric", segments=len(result.segments))
        log.close()
        return 0
    except BaseException:
        log.close("error")
        raise


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def _add_trio(p: argparse.ArgumentParser, labels_required: bool = False) -> None:
    p.add_argument("--stretch", required=True, help="stretch CSV (t_ms,c_pf)")
    p.add_argument("--accel", required=True, help="accel CSV (t_ms,ax,ay,az)")
    p.add_argument("--labels", required=labels_required, default=None,
                   help="labels CSV (start_ms,end_ms,activity)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harkit", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled recording")
    _add_common(p)
    p.add_argument("--script", default=None, help='activity script, e.g. "W:10,T:2,S:8"')
    p.add_argument("--gait-hz", dest="gait_hz", type=float, default=None)
    p.add_argument("--stretch-amp", dest="stretch_amp", type=float, default=None)
    p.add_argument("--accel-noise", dest="accel_noise", type=float, default=None)
    p.add_argument("--stretch-noise", dest="stretch_noise", type=float, default=None)
    p.add_argument("--tilt-deg", dest="tilt_deg", type=float, default=None)
    p.add_argument("--level-scale", dest="level_scale", type=float, default=None)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("preprocess", help="align clocks, filter, normalize")
    _add_common(p)
    _add_trio(p)
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser("segment", help="cut a recording into activity windows")
    _add_common(p)
    _add_trio(p)
    p.set_defaults(handler=cmd_segment)

    p = sub.add_parser("features", help="extract 117-value feature vectors")
    _add_common(p)
    _add_trio(p)
    p.set_defaults(handler=cmd_features)

    p = sub.add_parser("train", help="offline supervised training")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--model-out", dest="model_out", default=None)
    p.add_argument("--n-hidden", dest="n_hidden", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--test-fraction", dest="test_fraction", type=float, default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="confusion matrix for a trained model")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sweep", help="accuracy vs hidden-layer size")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--n-hidden-max", dest="n_hidden_max", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--test-fraction", dest="test_fraction", type=float, default=None)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("rl-replay", help="online adaptation replay over labeled features")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--model-out", dest="model_out", default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--reward-mode", dest="reward_mode", default=None,
                   choices=[m.value for m in RewardMode])
    p.set_defaults(handler=cmd_rl_replay)

    p = sub.add_parser("pipeline", help="full chain: ingest -> segment -> features -> classify")
    _add_common(p)
    _add_trio(p)
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=["infer", "rl"], default="infer")
    p.add_argument("--model-out", dest="model_out", default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.set_defaults(handler=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return args.handler(args, cfg)
    except HarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
