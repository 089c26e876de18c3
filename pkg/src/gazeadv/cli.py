"""Command-line surface.

Subcommands: synth, detect, features, train, attack, transfer, defend,
report, run.  --config points at an INI experiment file; --seed and --out
override its [run] keys.  Exit status is 0 only when every requested stage
completed.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .attacks import AttackConfig, RawAttackConfig, minimal_sweep, raw_blackbox_attack
from .dataset import load_dataset, load_recording, save_recording
from .defense import DefenseConfig, adversarial_retrain
from .events import detect_events, min_frames_for_rate
from .evaluation import EvaluationReport, emit_report
from .experiment import ExperimentConfig, ExperimentError, run_experiment
from .features import (
    FeatureTable,
    WindowConfig,
    extract_features,
    extract_table,
    load_features,
    save_features,
    slide_windows,
)
from .forest import RfTrainConfig, rf_predict_batch, train_rf
from .serialize import load_model, save_model
from .svm import SvmRbfModel, SvmTrainConfig, svm_predict_batch, train_svm


def _window_config(args) -> WindowConfig:
    return WindowConfig(
        window_size=args.window_size,
        step=args.step,
        amplitude_threshold=args.amplitude_threshold,
    )


def _add_window_options(parser):
    parser.add_argument("--window-size", type=float, default=45.0)
    parser.add_argument("--step", type=float, default=1.0)
    parser.add_argument("--amplitude-threshold", type=float, default=0.1)


def _cmd_synth(args) -> int:
    from .synth import synth_generate

    written = synth_generate(
        args.out,
        participants=args.participants,
        duration=args.duration,
        seed=args.seed,
        sample_rate=args.sample_rate,
        min_duration=args.min_duration,
    )
    print(f"wrote {len(written)} recordings to {args.out}")
    return 0


def _cmd_detect(args) -> int:
    stream, meta = load_recording(args.recording)
    events = detect_events(
        stream,
        radius=args.radius,
        min_frames=min_frames_for_rate(meta.sample_rate_hz, args.min_duration),
        amplitude_threshold=args.amplitude_threshold,
        participant_id=meta.participant_id,
        label=meta.label,
    )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "start", "end", "duration", "x", "y", "dx", "dy",
                         "amplitude", "char_dir", "char_dir_amp"])
        for f in events.fixations:
            writer.writerow(["fixation", repr(f.start), repr(f.end), repr(f.duration),
                             repr(f.centroid_x), repr(f.centroid_y), "", "", "", "", ""])
        for b in events.blinks:
            writer.writerow(["blink", repr(b.start), repr(b.end), repr(b.duration),
                             "", "", "", "", "", "", ""])
        for s in events.saccades:
            writer.writerow(["saccade", repr(s.start), repr(s.end), repr(s.duration),
                             "", "", repr(s.dx), repr(s.dy), repr(s.amplitude),
                             s.char_dir, s.char_dir_amp])
    print(
        f"{len(events.fixations)} fixations, {len(events.blinks)} blinks, "
        f"{len(events.saccades)} saccades -> {args.out}"
    )
    return 0


def _events_from_dataset(args):
    records = load_dataset(args.data)
    return [
        detect_events(
            stream,
            radius=args.radius,
            min_frames=min_frames_for_rate(meta.sample_rate_hz, args.min_duration),
            amplitude_threshold=args.amplitude_threshold,
            participant_id=meta.participant_id,
            label=meta.label,
        )
        for stream, meta in records
    ]


def _cmd_features(args) -> int:
    table = extract_table(_events_from_dataset(args), _window_config(args))
    save_features(args.out, table)
    print(f"{len(table)} windows -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    table = load_features(args.features)
    if args.model == "svm":
        config = SvmTrainConfig(
            C=args.C,
            gamma=None if args.gamma is None else args.gamma,
            tolerance=args.tolerance,
        )
        model = train_svm(table.values, table.labels, config, standardize=args.standardize)
    else:
        model = train_rf(
            table.values,
            table.labels,
            RfTrainConfig(n_trees=args.trees, min_samples_leaf=args.leaf, seed=args.seed),
        )
    save_model(args.out, model)
    print(f"trained {args.model} on {len(table)} rows -> {args.out}")
    return 0


def _cmd_attack(args) -> int:
    model = load_model(args.model)
    if not isinstance(model, SvmRbfModel):
        raise ValueError("feature-level attacks need a gradient-bearing SVM model")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.level == "raw":
        if not args.recording:
            raise ValueError("--recording is required for raw-level attacks")
        stream, meta = load_recording(args.recording)
        window = WindowConfig(window_size=args.window_size, step=args.step,
                              amplitude_threshold=args.amplitude_threshold)

        def predictor(candidate):
            events = detect_events(
                candidate,
                participant_id=meta.participant_id,
                label=meta.label,
                amplitude_threshold=window.amplitude_threshold,
            )
            windows = slide_windows(events, window)
            if not windows:
                raise ValueError("recording is shorter than one window")
            vector = extract_features(windows[0], window)
            return svm_predict_batch(model, vector.values[None, :])[0]

        y_true = meta.label if args.label is None else args.label
        if y_true is None:
            raise ValueError("--label is required when the recording has no side-car label")
        config = RawAttackConfig(
            step_magnitude=args.raw_step,
            max_magnitude=args.raw_max,
            query_budget=args.budget,
            seed=args.seed,
        )
        perturbed, result = raw_blackbox_attack(stream, predictor, y_true, config)
        save_recording(out_dir / "perturbed_recording.csv", perturbed, meta)
        with open(out_dir / "attack_log.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample", "label", "eps_used", "success", "queries"])
            writer.writerow([0, y_true, repr(result.eps_used),
                             str(result.success).lower(), result.queries])
        print(f"raw attack success={result.success} queries={result.queries}")
        return 0

    if not args.features:
        raise ValueError("--features is required for feature-level attacks")
    table = load_features(args.features)
    config = AttackConfig(
        mode="minimal",
        eps_step=args.eps_step,
        eps_max=args.eps_max,
        target=args.target,
    )
    if args.target is not None:
        table = table.subset(table.labels != args.target)
    sweep = minimal_sweep(model, table.values, table.labels, config)
    adv = sweep.adversarial_at(args.eps_max)
    adv_table = FeatureTable(adv, table.labels, table.participant_ids, table.window_starts)
    save_features(out_dir / "adversarial.csv", adv_table)
    eps_used = sweep.eps_used_at(args.eps_max)
    success = sweep.success_at(args.eps_max)
    with open(out_dir / "attack_log.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "label", "benign_prediction", "eps_used",
                         "success", "queries"])
        for i in range(len(table)):
            writer.writerow([i, table.labels[i], sweep.benign_pred[i],
                             repr(float(eps_used[i])), str(bool(success[i])).lower(), 0])
    print(
        f"attacked {len(table)} samples, success rate "
        f"{float(np.mean(success)):.3f} -> {out_dir}"
    )
    return 0


def _cmd_transfer(args) -> int:
    model = load_model(args.model)
    adv = load_features(args.adversarial)
    if isinstance(model, SvmRbfModel):
        pred = svm_predict_batch(model, adv.values)
    else:
        pred = rf_predict_batch(model, adv.values)
    labels = np.asarray([str(v) for v in adv.labels], dtype=object)
    accuracy = float(np.mean(pred == labels))
    print(f"transfer accuracy: {accuracy!r}")
    return 0


def _cmd_defend(args) -> int:
    table = load_features(args.features)
    result = adversarial_retrain(
        table.values,
        table.labels,
        SvmTrainConfig(C=args.C),
        DefenseConfig(
            fraction=args.fraction,
            attack=AttackConfig(mode="minimal", eps_step=args.eps_step, eps_max=args.eps_max),
            seed=args.seed,
        ),
    )
    save_model(args.out, result.model)
    n_success = int(np.sum(result.success))
    print(
        f"retrained with {len(result.chosen_indices)} adversarial rows "
        f"({n_success} crossed a boundary) -> {args.out}"
    )
    return 0


def _cmd_report(args) -> int:
    run_dir = Path(args.run)
    report = EvaluationReport.load(run_dir / "report_data.json")
    out_dir = Path(args.out) if args.out else run_dir
    paths = emit_report(report, out_dir)
    print(f"report tables -> {', '.join(str(p) for p in paths.values())}")
    return 0


def _cmd_run(args) -> int:
    if args.config:
        config = ExperimentConfig.from_ini(args.config)
    else:
        config = ExperimentConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    paths = run_experiment(config, log=print if args.verbose else None)
    print(f"run complete: {paths['table3']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazeadv",
        description="Adversarial attacks on eye-movement document classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic gaze dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--participants", type=int, default=5)
    p.add_argument("--duration", type=float, default=120.0)
    p.add_argument("--sample-rate", type=float, default=30.0)
    p.add_argument("--min-duration", type=float, default=45.0)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("detect", help="dump detected events of one recording as CSV")
    p.add_argument("--recording", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--radius", type=float, default=0.05)
    p.add_argument("--min-duration", type=float, default=0.1)
    p.add_argument("--amplitude-threshold", type=float, default=0.1)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("features", help="extract window features from a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--radius", type=float, default=0.05)
    p.add_argument("--min-duration", type=float, default=0.1)
    _add_window_options(p)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="train a classifier on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--model", choices=("svm", "rf"), default="svm")
    p.add_argument("--out", required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--leaf", type=int, default=50)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("attack", help="craft adversarial examples against a model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--level", choices=("feature", "raw"), default="feature")
    p.add_argument("--features")
    p.add_argument("--recording")
    p.add_argument("--label")
    p.add_argument("--target")
    p.add_argument("--eps-step", type=float, default=0.1)
    p.add_argument("--eps-max", type=float, default=2.0)
    p.add_argument("--raw-step", type=float, default=0.01)
    p.add_argument("--raw-max", type=float, default=0.05)
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--seed", type=int, default=7)
    _add_window_options(p)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("transfer", help="evaluate adversarial examples on another model")
    p.add_argument("--model", required=True)
    p.add_argument("--adversarial", required=True)
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("defend", help="adversarially retrain an SVM")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--eps-step", type=float, default=0.1)
    p.add_argument("--eps-max", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_defend)

    p = sub.add_parser("report", help="re-emit report CSVs from a completed run")
    p.add_argument("--run", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("run", help="run the full experiment pipeline")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
