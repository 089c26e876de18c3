"""Adversarial retraining of the SVM.

A seeded share of the training rows is attacked (untargeted minimal mode)
against the base model; the crafted points keep their original labels and
are appended to the training set before refitting.  Candidates that never
cross a boundary are still included at their maximal tried perturbation,
so the augmentation size is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackConfig, minimal_sweep
from .svm import SvmRbfModel, SvmTrainConfig, train_svm


@dataclass(frozen=True)
class DefenseConfig:
    fraction: float = 0.1
    attack: AttackConfig = field(
        default_factory=lambda: AttackConfig(mode="minimal", eps_step=0.1, eps_max=2.0)
    )
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError("fraction must be in (0, 1]")
        if self.attack.mode != "minimal":
            raise ValueError("defense attacks run in minimal mode")
        if self.attack.target is not None:
            raise ValueError("defense attacks are untargeted")


@dataclass(frozen=True)
class RetrainResult:
    model: SvmRbfModel
    base_model: SvmRbfModel
    chosen_indices: np.ndarray
    adversarial: np.ndarray
    adversarial_labels: np.ndarray
    eps_used: np.ndarray
    success: np.ndarray


def adversarial_retrain(
    X,
    y,
    svm_config: SvmTrainConfig = SvmTrainConfig(),
    defense_config: DefenseConfig = DefenseConfig(),
    standardize: bool = False,
) -> RetrainResult:
    """Train, craft adversarial rows against the result, retrain on both."""
    X = np.asarray(X, dtype=float)
    y = np.asarray([str(v) for v in np.asarray(y, dtype=object)], dtype=object)
    n = len(X)
    n_adv = math.floor(defense_config.fraction * n)
    if n_adv < 1:
        raise ValueError("empty augmentation: fraction * n is below 1")

    base = train_svm(X, y, svm_config, standardize=standardize)
    rng = np.random.default_rng(defense_config.seed)
    chosen = rng.choice(n, size=n_adv, replace=False)
    sweep = minimal_sweep(base, X[chosen], y[chosen], defense_config.attack)
    adversarial = sweep.adversarial_at(defense_config.attack.eps_max)

    X_aug = np.vstack([X, adversarial])
    y_aug = np.concatenate([y, y[chosen]])
    model = train_svm(X_aug, y_aug, svm_config, standardize=standardize)
    return RetrainResult(
        model=model,
        base_model=base,
        chosen_indices=chosen,
        adversarial=adversarial,
        adversarial_labels=y[chosen],
        eps_used=sweep.eps_used_at(defense_config.attack.eps_max),
        success=sweep.success_at(defense_config.attack.eps_max),
    )


def evaluate_defense(retrained: SvmRbfModel, test, attack_config: AttackConfig, scopes):
    """Re-attack the retrained model (fresh gradients) on every scope.

    Returns {scope: AttackEvaluation}; distance statistics are computed by
    the caller from the contained sweeps, exactly as for the base model.
    """
    from .evaluation import evaluate_attack

    return {scope: evaluate_attack(retrained, test, attack_config, scope) for scope in scopes}
