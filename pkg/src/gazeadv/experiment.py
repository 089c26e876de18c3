"""End-to-end experiment orchestration.

One config (INI file or ExperimentConfig) drives: data synthesis or
ingestion -> event detection -> windowed features -> leave-one-person-out
folds -> SVM and forest training -> attacks (untargeted plus every
directed class pair, with general / per-person / guess-level eps
selection) -> transfer and distance evaluation -> adversarial retraining
-> report CSVs.  A single seed determines every random choice, so reruns
are byte-identical.
"""
from __future__ import annotations

import configparser
import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .attacks import (
    AttackConfig,
    DEFAULT_EPS_GRID,
    EpsSelection,
    minimal_sweep,
    select_eps,
)
from .dataset import load_dataset
from .defense import DefenseConfig, adversarial_retrain
from .evaluation import (
    EvaluationReport,
    directed_scopes,
    emit_report,
    lopo_folds,
    scope_name,
    welch_t_test,
)
from .events import detect_events
from .features import WindowConfig, extract_table, save_features
from .forest import RF_LEAF_GRID, RF_TREE_GRID, rf_predict_batch, sweep_rf_grid
from .serialize import save_model
from .svm import SvmTrainConfig, train_svm
from .synth import DEFAULT_PROFILES, synth_generate

STAGES = (
    "dataset",
    "events",
    "features",
    "folds",
    "models",
    "attacks",
    "defense",
    "report",
)


class ExperimentError(RuntimeError):
    """A pipeline stage failed; the message carries the stage tag."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 7
    output_dir: str = "out"
    validation_count: int = 200
    save_models: bool = True
    dataset_dir: str | None = None
    participants: int = 5
    duration: float = 120.0
    sample_rate: float = 30.0
    window: WindowConfig = field(default_factory=WindowConfig)
    radius: float = 0.05
    min_event_duration: float = 0.1
    svm: SvmTrainConfig = field(default_factory=SvmTrainConfig)
    standardize: bool = False
    rf_tree_grid: tuple = RF_TREE_GRID
    rf_leaf_grid: tuple = RF_LEAF_GRID
    eps_step: float = 0.1
    eps_max: float = 2.0
    eps_grid: tuple = DEFAULT_EPS_GRID
    guess_accuracy: float = 0.3
    defense_fractions: tuple = (0.1, 0.5)

    @classmethod
    def from_ini(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ValueError(f"cannot read config file {path}")

        def get(section, key, fallback):
            return parser.get(section, key, fallback=None) or fallback

        def get_float(section, key, fallback):
            return float(get(section, key, fallback))

        def get_int(section, key, fallback):
            return int(get(section, key, fallback))

        def get_bool(section, key, fallback):
            raw = get(section, key, str(fallback))
            return str(raw).strip().lower() in ("1", "true", "yes", "on")

        def get_tuple(section, key, fallback, cast=float):
            raw = parser.get(section, key, fallback=None)
            if raw is None or not raw.strip():
                return fallback
            return tuple(cast(v.strip()) for v in raw.split(",") if v.strip())

        gamma_raw = get("svm", "gamma", "auto")
        gamma = None if str(gamma_raw).strip().lower() == "auto" else float(gamma_raw)
        eps_step = get_float("attack", "eps_step", 0.1)
        eps_max = get_float("attack", "eps_max", 2.0)
        grid_raw = parser.get("attack", "eps_grid", fallback=None)
        if grid_raw is None or grid_raw.strip().lower() in ("", "auto"):
            n = int(round(eps_max / eps_step))
            eps_grid = tuple(round(k * eps_step, 10) for k in range(1, n + 1))
        else:
            eps_grid = tuple(float(v.strip()) for v in grid_raw.split(",") if v.strip())

        return cls(
            seed=get_int("run", "seed", 7),
            output_dir=get("run", "output_dir", "out"),
            validation_count=get_int("run", "validation_count", 200),
            save_models=get_bool("run", "save_models", True),
            dataset_dir=parser.get("data", "dataset_dir", fallback=None) or None,
            participants=get_int("synth", "participants", 5),
            duration=get_float("synth", "duration", 120.0),
            sample_rate=get_float("synth", "sample_rate", 30.0),
            window=WindowConfig(
                window_size=get_float("window", "size", 45.0),
                step=get_float("window", "step", 1.0),
                amplitude_threshold=get_float("window", "amplitude_threshold", 0.1),
            ),
            radius=get_float("events", "radius", 0.05),
            min_event_duration=get_float("events", "min_duration", 0.1),
            svm=SvmTrainConfig(
                C=get_float("svm", "c", 1.0),
                gamma=gamma,
                tolerance=get_float("svm", "tolerance", 1e-3),
                max_iterations=get_int("svm", "max_iterations", 1_000_000),
            ),
            standardize=get_bool("svm", "standardize", False),
            rf_tree_grid=get_tuple("rf", "tree_grid", RF_TREE_GRID, int),
            rf_leaf_grid=get_tuple("rf", "leaf_grid", RF_LEAF_GRID, int),
            eps_step=eps_step,
            eps_max=eps_max,
            eps_grid=eps_grid,
            guess_accuracy=get_float("attack", "guess_accuracy", 0.3),
            defense_fractions=get_tuple("defense", "fractions", (0.1, 0.5)),
        )

    def to_ini(self, path) -> None:
        parser = configparser.ConfigParser()
        parser["run"] = {
            "seed": str(self.seed),
            "output_dir": self.output_dir,
            "validation_count": str(self.validation_count),
            "save_models": str(self.save_models).lower(),
        }
        parser["data"] = {"dataset_dir": self.dataset_dir or ""}
        parser["synth"] = {
            "participants": str(self.participants),
            "duration": repr(self.duration),
            "sample_rate": repr(self.sample_rate),
        }
        parser["window"] = {
            "size": repr(self.window.window_size),
            "step": repr(self.window.step),
            "amplitude_threshold": repr(self.window.amplitude_threshold),
        }
        parser["events"] = {
            "radius": repr(self.radius),
            "min_duration": repr(self.min_event_duration),
        }
        parser["svm"] = {
            "c": repr(self.svm.C),
            "gamma": "auto" if self.svm.gamma is None else repr(self.svm.gamma),
            "tolerance": repr(self.svm.tolerance),
            "max_iterations": str(self.svm.max_iterations),
            "standardize": str(self.standardize).lower(),
        }
        parser["rf"] = {
            "tree_grid": ", ".join(str(v) for v in self.rf_tree_grid),
            "leaf_grid": ", ".join(str(v) for v in self.rf_leaf_grid),
        }
        parser["attack"] = {
            "eps_step": repr(self.eps_step),
            "eps_max": repr(self.eps_max),
            "eps_grid": ", ".join(repr(v) for v in self.eps_grid),
            "guess_accuracy": repr(self.guess_accuracy),
        }
        parser["defense"] = {
            "fractions": ", ".join(repr(v) for v in self.defense_fractions),
        }
        with open(path, "w") as fh:
            parser.write(fh)


@dataclass
class _ScopeData:
    """Per (scope, fold) bundle of everything the report needs."""

    subset_values: np.ndarray
    subset_labels: np.ndarray
    svm_sweep: object
    rf_sweep: object
    benign_pairwise: np.ndarray  # pdist of the attacked benign subset


class _Manifest:
    def __init__(self, path: Path):
        self.path = path
        self.lines: list[str] = []
        self.t0 = time.perf_counter()
        self.path.write_text("")  # present even when the first stage fails

    def done(self, stage: str) -> None:
        elapsed = time.perf_counter() - self.t0
        self.lines.append(f"stage {stage} ok ({elapsed:.1f} s)")
        self.t0 = time.perf_counter()
        self.path.write_text("".join(line + "\n" for line in self.lines))


def _mean(values) -> float:
    return float(np.mean(values))


def run_experiment(config: ExperimentConfig, log=None) -> dict:
    """Execute the full pipeline; returns {artifact name: path}.

    Any stage failure raises ExperimentError tagged with the stage name;
    the MANIFEST file then lists the stages that did complete.
    """
    say = log if log is not None else (lambda *_: None)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(out_dir / "MANIFEST")
    paths: dict[str, Path] = {"manifest": manifest.path}
    root_seq = np.random.SeedSequence(config.seed)
    synth_seed, rf_seed, defense_seed = (
        int(s.generate_state(1)[0]) for s in root_seq.spawn(3)
    )

    # dataset
    stage = "dataset"
    try:
        if config.dataset_dir:
            records = load_dataset(config.dataset_dir)
        else:
            data_dir = out_dir / "dataset"
            synth_generate(
                data_dir,
                participants=config.participants,
                duration=config.duration,
                seed=synth_seed,
                profiles=DEFAULT_PROFILES,
                sample_rate=config.sample_rate,
                min_duration=config.window.window_size,
            )
            records = load_dataset(data_dir)
            paths["dataset"] = data_dir
        say(f"[{stage}] {len(records)} recordings")
        manifest.done(stage)
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(stage, exc) from exc

    # events
    stage = "events"
    try:
        from .events import min_frames_for_rate

        event_streams = [
            detect_events(
                stream,
                radius=config.radius,
                min_frames=min_frames_for_rate(meta.sample_rate_hz, config.min_event_duration),
                amplitude_threshold=config.window.amplitude_threshold,
                participant_id=meta.participant_id,
                label=meta.label,
            )
            for stream, meta in records
        ]
        manifest.done(stage)
    except Exception as exc:
        raise ExperimentError(stage, exc) from exc

    # features
    stage = "features"
    try:
        table = extract_table(event_streams, config.window)
        if len(table) == 0:
            raise ValueError("no windows extracted; recordings shorter than the window?")
        features_path = out_dir / "features.csv"
        save_features(features_path, table)
        paths["features"] = features_path
        say(f"[{stage}] {len(table)} windows")
        manifest.done(stage)
    except Exception as exc:
        raise ExperimentError(stage, exc) from exc

    # folds
    stage = "folds"
    try:
        folds = lopo_folds(table, config.validation_count)
        classes = tuple(sorted(set(table.labels)))
        scopes = ["untargeted"] + directed_scopes(classes)
        manifest.done(stage)
    except Exception as exc:
        raise ExperimentError(stage, exc) from exc

    # models
    stage = "models"
    svm_models, rf_models = [], []
    try:
        model_dir = out_dir / "models"
        rf_fold_seeds = np.random.SeedSequence(rf_seed).spawn(len(folds))
        for fi, fold in enumerate(folds):
            svm_model = train_svm(
                fold.train.values, fold.train.labels, config.svm,
                standardize=config.standardize,
            )
            _, rf_model, _ = sweep_rf_grid(
                fold.train.values,
                fold.train.labels,
                fold.validation.values,
                fold.validation.labels,
                tree_grid=config.rf_tree_grid,
                leaf_grid=config.rf_leaf_grid,
                seed=int(rf_fold_seeds[fi].generate_state(1)[0]),
            )
            svm_models.append(svm_model)
            rf_models.append(rf_model)
            if config.save_models:
                model_dir.mkdir(exist_ok=True)
                save_model(model_dir / f"fold_{fold.held_out_participant}_svm.json", svm_model)
                save_model(model_dir / f"fold_{fold.held_out_participant}_rf.json", rf_model)
            say(f"[{stage}] fold {fold.held_out_participant} trained")
        if config.save_models:
            paths["models"] = model_dir
        manifest.done(stage)
    except Exception as exc:
        raise ExperimentError(stage, exc) from exc

    # attacks + transfer + distances
    stage = "attacks"
    report = EvaluationReport(scopes=[scope_name(s) for s in scopes])
    try:
        grid = tuple(config.eps_grid)
        budget = max(config.eps_max, grid[-1])
        data: dict[tuple[str, int], _ScopeData] = {}
        for fi, fold in enumerate(folds):
            for scope in scopes:
                if scope == "untargeted":
                    subset = fold.test
                    attack = AttackConfig(
                        mode="minimal", eps_step=config.eps_step, eps_max=budget
                    )
                else:
                    mask = fold.test.labels == scope[0]
                    if not mask.any():
                        raise ValueError(
                            f"fold {fold.held_out_participant}: no {scope[0]!r} test windows"
                        )
                    subset = fold.test.subset(mask)
                    attack = AttackConfig(
                        mode="minimal",
                        eps_step=config.eps_step,
                        eps_max=budget,
                        target=scope[1],
                    )
                rf_model = rf_models[fi]
                data[(scope_name(scope), fi)] = _ScopeData(
                    subset_values=subset.values,
                    subset_labels=np.asarray([str(v) for v in subset.labels], dtype=object),
                    svm_sweep=minimal_sweep(
                        svm_models[fi], subset.values, subset.labels, attack
                    ),
                    rf_sweep=minimal_sweep(
                        svm_models[fi],
                        subset.values,
                        subset.labels,
                        attack,
                        judge=lambda pts, m=rf_model: rf_predict_batch(m, pts),
                    ),
                    benign_pairwise=pdist(subset.values),
                )
            say(f"[{stage}] fold {fold.held_out_participant} attacked")

        n_folds = len(folds)
        fold_names = [f.held_out_participant for f in folds]
        eps_general: dict[str, float] = {}
        eps_individual: dict[str, np.ndarray] = {}
        eps_guess: dict[str, float | None] = {}
        rf_guess: dict[str, float | None] = {}
        for scope in scopes:
            key = scope_name(scope)
            curves = np.array(
                [data[(key, fi)].svm_sweep.accuracy_curve(grid) for fi in range(n_folds)]
            )
            rf_curves = np.array(
                [data[(key, fi)].rf_sweep.accuracy_curve(grid) for fi in range(n_folds)]
            )
            eps_general[key] = select_eps(curves, grid, EpsSelection("general", grid))
            eps_individual[key] = select_eps(curves, grid, EpsSelection("per_person", grid))
            eps_guess[key] = select_eps(
                curves, grid,
                EpsSelection("guess_level", grid, target_accuracy=config.guess_accuracy),
            )
            rf_guess[key] = select_eps(
                rf_curves, grid,
                EpsSelection("guess_level", grid, target_accuracy=config.guess_accuracy),
            )

        def fold_eps(strategy, key, fi):
            if strategy == "general":
                return eps_general[key]
            if strategy == "individual":
                return float(eps_individual[key][fi])
            if strategy == "guess":
                return eps_guess[key]
            return rf_guess[key]

        # accuracy cells
        for scope in scopes:
            key = scope_name(scope)
            benign = [
                float(np.mean(data[(key, fi)].svm_sweep.correct[:, 0])) for fi in range(n_folds)
            ]
            report.set_cell("accuracy", "initial", "SVM", key, _mean(benign), benign)
            rf_benign = [
                float(
                    np.mean(
                        rf_predict_batch(rf_models[fi], data[(key, fi)].subset_values)
                        == data[(key, fi)].subset_labels
                    )
                )
                for fi in range(n_folds)
            ]
            report.set_cell("accuracy", "initial", "RF", key, _mean(rf_benign), rf_benign)

            for strategy, attack_name in (
                ("general", "general_eps_max"),
                ("individual", "individual_eps_max"),
            ):
                svm_acc, rf_acc = [], []
                for fi in range(n_folds):
                    eps = fold_eps(strategy, key, fi)
                    bundle = data[(key, fi)]
                    svm_acc.append(bundle.svm_sweep.accuracy_at(eps))
                    adv = bundle.svm_sweep.adversarial_at(eps)
                    rf_pred = rf_predict_batch(rf_models[fi], adv)
                    rf_acc.append(float(np.mean(rf_pred == bundle.subset_labels)))
                report.set_cell("accuracy", attack_name, "SVM", key, _mean(svm_acc), svm_acc)
                report.set_cell("accuracy", attack_name, "RF", key, _mean(rf_acc), rf_acc)
                if strategy == "general":
                    for fi in range(n_folds):
                        report.fig3.append(
                            {
                                "participant": fold_names[fi],
                                "scope": key,
                                "model": "SVM",
                                "benign": benign[fi],
                                "attack": svm_acc[fi],
                            }
                        )
                        report.fig3.append(
                            {
                                "participant": fold_names[fi],
                                "scope": key,
                                "model": "RF",
                                "benign": rf_benign[fi],
                                "attack": rf_acc[fi],
                            }
                        )

        # distance cells + Welch tests
        for scope in scopes:
            key = scope_name(scope)
            benign_means = [
                float(data[(key, fi)].benign_pairwise.mean()) for fi in range(n_folds)
            ]
            report.set_cell("distance", "benign", "SVM", key, _mean(benign_means), benign_means)
            report.set_cell("distance", "benign", "RF", key, _mean(benign_means), benign_means)
            for model_name in ("SVM", "RF"):
                for strategy, attack_name in (
                    ("individual", "individual_eps_max"),
                    ("general", "general_eps_max"),
                    ("guess" if model_name == "SVM" else "rf_guess", "guess"),
                ):
                    eps0 = fold_eps(strategy, key, 0)
                    if eps0 is None:
                        report.set_cell("distance", attack_name, model_name, key, None)
                        continue
                    means, diffs = [], []
                    pooled_pairs, pooled_adv = [], []
                    for fi in range(n_folds):
                        eps = fold_eps(strategy, key, fi)
                        bundle = data[(key, fi)]
                        sweep = bundle.svm_sweep if model_name == "SVM" else bundle.rf_sweep
                        adv = sweep.adversarial_at(eps)
                        dists = np.linalg.norm(adv - bundle.subset_values, axis=1)
                        means.append(float(dists.mean()))
                        diffs.append(float(dists.mean() - bundle.benign_pairwise.mean()))
                        pooled_pairs.append(bundle.benign_pairwise)
                        pooled_adv.append(dists)
                        welch = welch_t_test(bundle.benign_pairwise, dists)
                        report.welch_rows.append(
                            {
                                "attack_type": attack_name,
                                "model": model_name,
                                "scope": key,
                                "fold": fold_names[fi],
                                "t": welch.t_statistic,
                                "df": welch.degrees_of_freedom,
                                "p": welch.p_value,
                            }
                        )
                    welch = welch_t_test(np.concatenate(pooled_pairs), np.concatenate(pooled_adv))
                    report.welch_rows.append(
                        {
                            "attack_type": attack_name,
                            "model": model_name,
                            "scope": key,
                            "fold": "pooled",
                            "t": welch.t_statistic,
                            "df": welch.degrees_of_freedom,
                            "p": welch.p_value,
                        }
                    )
                    report.set_cell("distance", attack_name, model_name, key, _mean(means), means)
                    strategy_label = "guess" if attack_name == "guess" else strategy
                    report.fig4.append(
                        {
                            "scope": key,
                            "model": model_name,
                            "strategy": strategy_label,
                            "mean_diff": _mean(diffs),
                            "std_diff": float(np.std(diffs, ddof=1)) if len(diffs) > 1 else 0.0,
                        }
                    )

        # per-sample attack log at the full budget
        log_path = out_dir / "attack_log.csv"
        with open(log_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["participant", "scope", "sample", "label", "benign_prediction",
                 "eps_used", "success", "queries"]
            )
            for scope in scopes:
                key = scope_name(scope)
                for fi in range(n_folds):
                    bundle = data[(key, fi)]
                    sweep = bundle.svm_sweep
                    eps_used = sweep.eps_used_at(config.eps_max)
                    success = sweep.success_at(config.eps_max)
                    for si in range(len(bundle.subset_values)):
                        writer.writerow(
                            [fold_names[fi], key, si, bundle.subset_labels[si],
                             sweep.benign_pred[si], repr(float(eps_used[si])),
                             str(bool(success[si])).lower(), 0]
                        )
        paths["attack_log"] = log_path
        manifest.done(stage)
    except Exception as exc:
        raise ExperimentError(stage, exc) from exc

    # defense
    stage = "defense"
    try:
        defense_seeds = np.random.SeedSequence(defense_seed).spawn(
            len(config.defense_fractions) * len(folds)
        )
        seed_iter = iter(defense_seeds)
        for fraction in config.defense_fractions:
            tag = f"retrain {int(round(fraction * 100))}%"
            attack = AttackConfig(
                mode="minimal", eps_step=config.eps_step, eps_max=config.eps_max
            )
            per_scope_rows: dict[str, dict[str, list[float]]] = {}
            for fi, fold in enumerate(folds):
                result = adversarial_retrain(
                    fold.train.values,
                    fold.train.labels,
                    config.svm,
                    DefenseConfig(
                        fraction=fraction,
                        attack=attack,
                        seed=int(next(seed_iter).generate_state(1)[0]),
                    ),
                    standardize=config.standardize,
                )
                for scope in scopes:
                    key = scope_name(scope)
                    bundle = data[(key, fi)]
                    scope_attack = AttackConfig(
                        mode="minimal",
                        eps_step=config.eps_step,
                        eps_max=config.eps_max,
                        target=None if scope == "untargeted" else scope[1],
                    )
                    sweep = minimal_sweep(
                        result.model, bundle.subset_values, bundle.subset_labels, scope_attack
                    )
                    adv = sweep.adversarial_at(config.eps_max)
                    dists = np.linalg.norm(adv - bundle.subset_values, axis=1)
                    rows = per_scope_rows.setdefault(
                        key,
                        {"initial": [], "retrain": [], "attack": [], "dist": [], "diff": []},
                    )
                    rows["initial"].append(
                        float(np.mean(bundle.svm_sweep.correct[:, 0]))
                    )
                    rows["retrain"].append(float(np.mean(sweep.correct[:, 0])))
                    rows["attack"].append(sweep.accuracy_at(config.eps_max))
                    rows["dist"].append(float(dists.mean()))
                    rows["diff"].append(float(dists.mean() - bundle.benign_pairwise.mean()))
                    welch = welch_t_test(bundle.benign_pairwise, dists)
                    report.welch_rows.append(
                        {
                            "attack_type": f"{tag} attack",
                            "model": "SVM",
                            "scope": key,
                            "fold": fold_names[fi],
                            "t": welch.t_statistic,
                            "df": welch.degrees_of_freedom,
                            "p": welch.p_value,
                        }
                    )
                say(f"[{stage}] {tag} fold {fold.held_out_participant} done")
            for scope in scopes:
                key = scope_name(scope)
                rows = per_scope_rows[key]
                report.set_cell(
                    "accuracy", f"{tag} initial", "SVM", key, _mean(rows["initial"]), rows["initial"]
                )
                report.set_cell(
                    "accuracy", f"{tag} retrain", "SVM", key, _mean(rows["retrain"]), rows["retrain"]
                )
                report.set_cell(
                    "accuracy", f"{tag} attack", "SVM", key, _mean(rows["attack"]), rows["attack"]
                )
                benign_means = report.cells[("distance", "benign", "SVM")][key]
                report.set_cell("distance", f"{tag} benign", "SVM", key, benign_means)
                report.set_cell(
                    "distance", f"{tag} attack", "SVM", key, _mean(rows["dist"]), rows["dist"]
                )
                report.fig6.append(
                    {
                        "scope": key,
                        "fraction": fraction,
                        "retrain_accuracy": _mean(rows["retrain"]),
                        "attack_accuracy": _mean(rows["attack"]),
                        "mean_diff": _mean(rows["diff"]),
                        "std_diff": float(np.std(rows["diff"], ddof=1))
                        if len(rows["diff"]) > 1
                        else 0.0,
                    }
                )
        manifest.done(stage)
    except Exception as exc:
        raise ExperimentError(stage, exc) from exc

    # report
    stage = "report"
    try:
        report_path = out_dir / "report_data.json"
        report.save(report_path)
        paths["report_data"] = report_path
        paths.update(emit_report(report, out_dir))
        manifest.done(stage)
    except Exception as exc:
        raise ExperimentError(stage, exc) from exc

    say("experiment complete")
    return paths
