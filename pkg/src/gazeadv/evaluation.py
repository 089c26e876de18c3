"""Leave-one-person-out evaluation: attack success, transfer, distances.

Fold accuracies are per held-out participant; reported means average the
per-fold values (macro over participants).  Distance populations per cell
are the pairwise L2 distances between the attacked benign samples and the
benign-to-adversarial distances, compared with Welch's t-test.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import betainc

from .attacks import AttackConfig, MinimalSweep, minimal_sweep
from .features import FeatureTable
from .forest import RandomForestModel, rf_predict_batch
from .svm import SvmRbfModel, svm_predict_batch

REFERENCE_TEST_COUNT = 600  # typical test windows per participant and class

DOC_CLASSES = ("comic", "newspaper", "textbook")
DIRECTED_PAIRS = (
    ("comic", "newspaper"),
    ("comic", "textbook"),
    ("newspaper", "comic"),
    ("newspaper", "textbook"),
    ("textbook", "comic"),
    ("textbook", "newspaper"),
)


def scope_name(scope) -> str:
    if scope == "untargeted":
        return "untargeted"
    src, dst = scope
    return f"{src}_as_{dst}"


def directed_scopes(classes) -> list:
    """All ordered class pairs, in class order."""
    return [(a, b) for a in classes for b in classes if a != b]


@dataclass(frozen=True)
class Fold:
    held_out_participant: str
    train: FeatureTable
    validation: FeatureTable
    test: FeatureTable


def lopo_folds(table: FeatureTable, validation_count: int = 200) -> list[Fold]:
    """One fold per participant; the held-out windows split by time order.

    The first ``validation_count`` windows per class go to validation, the
    remainder to test.  Participants with too few windows per class fall
    back to a proportional split (the paper-scale ratio of
    validation_count : 600 test windows) with a warning.
    """
    if validation_count < 1:
        raise ValueError("validation_count must be at least 1")
    participants = sorted(set(table.participant_ids))
    if len(participants) < 2:
        raise ValueError("leave-one-person-out needs at least 2 participants")
    fraction = validation_count / (validation_count + REFERENCE_TEST_COUNT)

    folds = []
    for participant in participants:
        held_mask = table.participant_ids == participant
        train = table.subset(~held_mask)
        held = table.subset(held_mask)
        val_rows, test_rows = [], []
        for cls in sorted(set(held.labels)):
            rows = np.nonzero(held.labels == cls)[0]
            rows = rows[np.argsort(held.window_starts[rows], kind="stable")]
            n = len(rows)
            if n > validation_count:
                n_val = validation_count
            else:
                n_val = min(max(1, round(n * fraction)), n - 1)
                if n == 1:
                    n_val = 0
                warnings.warn(
                    f"participant {participant!r} class {cls!r} has only {n} "
                    f"windows; using a proportional validation split ({n_val})"
                )
            val_rows.extend(rows[:n_val])
            test_rows.extend(rows[n_val:])
        folds.append(
            Fold(
                held_out_participant=participant,
                train=train,
                validation=held.subset(np.array(sorted(val_rows), dtype=int)),
                test=held.subset(np.array(sorted(test_rows), dtype=int)),
            )
        )
    return folds


@dataclass(frozen=True)
class WelchResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value: float


def welch_t_test(sample_a, sample_b) -> WelchResult:
    """Two-sided Welch's t-test.

    The p-value comes from the regularized incomplete beta identity for the
    Student-t tail.  Zero variance in both samples degenerates to t = 0,
    p = 1 for equal means and to an infinite t with p = 0 otherwise.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least 2 elements")
    na, nb = len(a), len(b)
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    pooled = va / na + vb / nb
    if pooled == 0.0:
        if ma == mb:
            return WelchResult(0.0, float(na + nb - 2), 1.0)
        t = math.inf if ma > mb else -math.inf
        return WelchResult(t, float(na + nb - 2), 0.0)
    t = float((ma - mb) / math.sqrt(pooled))
    df = float(pooled**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)))
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return WelchResult(t, df, min(max(p, 0.0), 1.0))


@dataclass(frozen=True)
class DistanceStats:
    mean_benign_pairwise: float
    mean_adversarial: float
    std_benign: float
    std_adv: float
    welch: WelchResult


def distance_stats(benign, adversarial) -> DistanceStats:
    """L2 distance populations: all unordered benign pairs vs. each
    benign-to-adversarial pair, plus the Welch comparison of the two."""
    benign = np.asarray(benign, dtype=float)
    adversarial = np.asarray(adversarial, dtype=float)
    if benign.shape != adversarial.shape:
        raise ValueError("benign and adversarial sets must pair 1:1")
    if len(benign) < 2:
        raise ValueError("need at least 2 benign points")
    pair_dists = pdist(benign)
    adv_dists = np.linalg.norm(adversarial - benign, axis=1)
    return DistanceStats(
        mean_benign_pairwise=float(pair_dists.mean()),
        mean_adversarial=float(adv_dists.mean()),
        std_benign=float(pair_dists.std(ddof=1)),
        std_adv=float(adv_dists.std(ddof=1)),
        welch=welch_t_test(pair_dists, adv_dists),
    )


@dataclass(frozen=True)
class AttackEvaluation:
    scope: object
    accuracy_before: float
    accuracy_after: float
    sweep: MinimalSweep


def evaluate_attack(
    model: SvmRbfModel, test: FeatureTable, config: AttackConfig, scope="untargeted"
) -> AttackEvaluation:
    """Attack one fold's test windows under one scope.

    Untargeted attacks perturb every test sample; a directed scope
    (from_class, to_class) attacks only from_class samples toward
    to_class.  Accuracy-after counts samples still classified correctly.
    """
    if scope == "untargeted":
        subset = test
        attack = AttackConfig(
            mode="minimal", eps_step=config.eps_step, eps_max=config.eps_max
        )
    else:
        src, dst = scope
        mask = test.labels == src
        if not mask.any():
            raise ValueError(f"no test samples of class {src!r}")
        subset = test.subset(mask)
        attack = AttackConfig(
            mode="minimal", eps_step=config.eps_step, eps_max=config.eps_max, target=dst
        )
    sweep = minimal_sweep(model, subset.values, subset.labels, attack)
    before = float(np.mean(sweep.benign_pred == sweep.y_true))
    after = sweep.accuracy_at(config.eps_max)
    return AttackEvaluation(scope, before, after, sweep)


def transfer_evaluate(adversarial, y_true, rf_model: RandomForestModel) -> float:
    """Accuracy of the forest on examples crafted against the SVM."""
    y_true = np.asarray([str(v) for v in y_true], dtype=object)
    pred = rf_predict_batch(rf_model, adversarial)
    return float(np.mean(pred == y_true))


def benign_accuracy(model, table: FeatureTable) -> float:
    y = np.asarray([str(v) for v in table.labels], dtype=object)
    if isinstance(model, RandomForestModel):
        pred = rf_predict_batch(model, table.values)
    else:
        pred = svm_predict_batch(model, table.values)
    return float(np.mean(pred == y))


# --- report assembly -------------------------------------------------------

MISSING = "-"


@dataclass
class EvaluationReport:
    """All result tables of one run, serializable to JSON.

    ``cells`` maps (metric, attack_type, model) to {scope_name: value},
    where value is a float or None (rendered as '-').  ``per_fold`` keeps
    the per-participant values behind each mean, and fig3/fig4/fig6 hold
    the plot-data rows for the matching figures.
    """

    scopes: list = field(default_factory=list)
    cells: dict = field(default_factory=dict)
    per_fold: dict = field(default_factory=dict)
    welch_rows: list = field(default_factory=list)
    fig3: list = field(default_factory=list)
    fig4: list = field(default_factory=list)
    fig6: list = field(default_factory=list)

    def set_cell(self, metric, attack_type, model, scope, value, fold_values=None):
        key = (metric, attack_type, model)
        self.cells.setdefault(key, {})[scope] = value
        if fold_values is not None:
            self.per_fold.setdefault(key, {})[scope] = [float(v) for v in fold_values]

    def to_json(self) -> dict:
        def key_str(key):
            return "|".join(key)

        return {
            "scopes": list(self.scopes),
            "cells": {key_str(k): v for k, v in self.cells.items()},
            "per_fold": {key_str(k): v for k, v in self.per_fold.items()},
            "welch": self.welch_rows,
            "fig3": self.fig3,
            "fig4": self.fig4,
            "fig6": self.fig6,
        }

    @classmethod
    def from_json(cls, data) -> "EvaluationReport":
        report = cls(scopes=list(data["scopes"]))
        for key, value in data["cells"].items():
            report.cells[tuple(key.split("|"))] = value
        for key, value in data.get("per_fold", {}).items():
            report.per_fold[tuple(key.split("|"))] = value
        report.welch_rows = list(data.get("welch", []))
        report.fig3 = list(data.get("fig3", []))
        report.fig4 = list(data.get("fig4", []))
        report.fig6 = list(data.get("fig6", []))
        return report

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "EvaluationReport":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _fmt(value) -> str:
    if value is None:
        return MISSING
    return repr(float(value))


def _parse(text):
    return None if text == MISSING else float(text)


def emit_report(report: EvaluationReport, out_dir) -> dict:
    """Write the summary table, Welch table, and figure-data CSVs.

    Returns {name: path}.  Floats are written with full precision so a
    parse round-trip is lossless.
    """
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    table_path = out_dir / "table3.csv"
    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "attack_type", "model"] + list(report.scopes))
        for (metric, attack_type, model), values in report.cells.items():
            writer.writerow(
                [metric, attack_type, model]
                + [_fmt(values.get(s)) for s in report.scopes]
            )
    paths["table3"] = table_path

    welch_path = out_dir / "welch.csv"
    with open(welch_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["attack_type", "model", "scope", "fold", "t_statistic",
             "degrees_of_freedom", "p_value"]
        )
        for row in report.welch_rows:
            writer.writerow(
                [row["attack_type"], row["model"], row["scope"], row["fold"],
                 _fmt(row["t"]), _fmt(row["df"]), _fmt(row["p"])]
            )
    paths["welch"] = welch_path

    fig3_path = out_dir / "fig3_accuracy.csv"
    with open(fig3_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant", "scope", "model", "benign_accuracy",
                         "attack_accuracy"])
        for row in report.fig3:
            writer.writerow([row["participant"], row["scope"], row["model"],
                             _fmt(row["benign"]), _fmt(row["attack"])])
    paths["fig3"] = fig3_path

    fig4_path = out_dir / "fig4_distances.csv"
    with open(fig4_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scope", "model", "strategy", "mean_distance_diff",
                         "std_distance_diff"])
        for row in report.fig4:
            writer.writerow([row["scope"], row["model"], row["strategy"],
                             _fmt(row["mean_diff"]), _fmt(row["std_diff"])])
    paths["fig4"] = fig4_path

    fig6_path = out_dir / "fig6_retrain.csv"
    with open(fig6_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scope", "fraction", "retrain_accuracy", "attack_accuracy",
                         "mean_distance_diff", "std_distance_diff"])
        for row in report.fig6:
            writer.writerow([row["scope"], _fmt(row["fraction"]),
                             _fmt(row["retrain_accuracy"]), _fmt(row["attack_accuracy"]),
                             _fmt(row["mean_diff"]), _fmt(row["std_diff"])])
    paths["fig6"] = fig6_path
    return paths


def read_table(path) -> dict:
    """Parse an emitted summary table back into {key: {scope: value}}."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        scopes = header[3:]
        cells = {}
        for row in reader:
            cells[tuple(row[:3])] = {s: _parse(v) for s, v in zip(scopes, row[3:])}
    return cells
