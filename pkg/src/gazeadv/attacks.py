"""Adversarial example generation.

Feature-level attacks are gradient based (white-box against the SVM): the
standard single-step attack moves a sample by a fixed L2 budget along the
normalized surrogate-loss gradient, the minimal mode scales that one
direction by growing multiples of ``eps_step`` until the prediction flips
or ``eps_max`` is exhausted.  The raw-level attack is decision based: it
randomly perturbs single samples of a gaze stream, keeping changes while
the pipeline's label has not yet moved to the attack goal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import GazeStream
from .svm import (
    SvmRbfModel,
    svm_loss_gradient_batch,
    svm_predict_batch,
)

DEFAULT_EPS_STEP = 0.1
DEFAULT_EPS_MAX = 2.0
DEFAULT_EPS_GRID = tuple(round(0.1 * k, 10) for k in range(1, 21))
GUESS_LEVEL_ACCURACY = 0.3

RAW_FIELDS = ("x", "y", "pupil_diameter")


@dataclass(frozen=True)
class AttackConfig:
    mode: str = "minimal"  # "standard" | "minimal"
    norm: str = "l2"  # "linf" is reserved, not implemented
    eps_step: float = DEFAULT_EPS_STEP
    eps_max: float = DEFAULT_EPS_MAX
    target: str | None = None

    def __post_init__(self):
        if self.mode not in ("standard", "minimal"):
            raise ValueError("mode must be 'standard' or 'minimal'")
        if self.norm != "l2":
            raise ValueError("only the l2 norm is implemented")
        if self.eps_step <= 0:
            raise ValueError("eps_step must be positive")
        # eps_max may drop below eps_step (even to 0): the minimal attack
        # then tries no multiples, which the retraining degeneracy relies on.
        if self.eps_max < 0:
            raise ValueError("eps_max must be nonnegative")


@dataclass(frozen=True)
class AttackResult:
    adversarial: np.ndarray | None
    eps_used: float
    success: bool
    predicted_class: object
    queries: int = 0


@dataclass(frozen=True)
class EpsSelection:
    strategy: str  # "general" | "per_person" | "guess_level"
    grid: tuple = DEFAULT_EPS_GRID
    target_accuracy: float = GUESS_LEVEL_ACCURACY

    def __post_init__(self):
        if self.strategy not in ("general", "per_person", "guess_level"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        grid = tuple(float(g) for g in self.grid)
        if not grid:
            raise ValueError("grid must be nonempty")
        if any(g <= 0 for g in grid):
            raise ValueError("grid values must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class RawAttackConfig:
    step_magnitude: float = 0.01
    max_magnitude: float = 0.05
    query_budget: int = 1000
    fields_perturbed: tuple = ("x", "y")
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.step_magnitude <= self.max_magnitude:
            raise ValueError("need 0 < step_magnitude <= max_magnitude")
        if self.query_budget < 0:
            raise ValueError("query_budget must be nonnegative")
        bad = set(self.fields_perturbed) - set(RAW_FIELDS)
        if bad or not self.fields_perturbed:
            raise ValueError(f"fields_perturbed must be a nonempty subset of {RAW_FIELDS}")


def _goal_met(pred, y_true, target) -> bool:
    if target is None:
        return pred != y_true
    return pred == target


def fgsm_standard(model: SvmRbfModel, x, y_true, eps: float, target=None) -> AttackResult:
    """One fixed-size L2 step along (or against) the surrogate gradient.

    Untargeted attacks ascend the loss referenced at the true class;
    targeted attacks descend the loss referenced at the target class.  A
    zero gradient yields the unchanged sample with success False.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x = np.asarray(x, dtype=float)
    y_true = str(y_true)
    ref = str(target) if target is not None else y_true
    grad = svm_loss_gradient_batch(model, x[None, :], [ref])[0]
    norm = float(np.linalg.norm(grad))
    if norm == 0.0:
        pred = svm_predict_batch(model, x[None, :])[0]
        return AttackResult(x.copy(), 0.0, False, pred)
    direction = grad / norm if target is None else -grad / norm
    adv = x + eps * direction
    pred = svm_predict_batch(model, adv[None, :])[0]
    return AttackResult(adv, eps, _goal_met(pred, y_true, target), pred)


def fgsm_minimal(model: SvmRbfModel, x, y_true, config: AttackConfig) -> AttackResult:
    """Grow the perturbation in eps_step multiples until the goal is met.

    The direction is computed once at x and only its length grows, so the
    returned eps_used is the smallest successful multiple.  An already
    successful sample returns unchanged with eps_used 0; past eps_max the
    last attempt is returned with success False.
    """
    if config.mode != "minimal":
        raise ValueError("config.mode must be 'minimal'")
    x = np.asarray(x, dtype=float)
    y_true = str(y_true)
    target = config.target
    pred0 = svm_predict_batch(model, x[None, :])[0]
    if _goal_met(pred0, y_true, target):
        return AttackResult(x.copy(), 0.0, True, pred0)

    ref = str(target) if target is not None else y_true
    grad = svm_loss_gradient_batch(model, x[None, :], [ref])[0]
    norm = float(np.linalg.norm(grad))
    if norm == 0.0:
        return AttackResult(x.copy(), 0.0, False, pred0)
    direction = grad / norm if target is None else -grad / norm

    n_steps = int(math.floor(config.eps_max / config.eps_step + 1e-9))
    adv, pred = x.copy(), pred0
    eps_used = 0.0
    for k in range(1, n_steps + 1):
        eps_used = k * config.eps_step
        adv = x + eps_used * direction
        pred = svm_predict_batch(model, adv[None, :])[0]
        if _goal_met(pred, y_true, target):
            return AttackResult(adv, eps_used, True, pred)
    return AttackResult(adv, eps_used, False, pred)


@dataclass(frozen=True)
class MinimalSweep:
    """Vectorized minimal-mode attack state for a whole sample batch.

    ``k_success`` holds the smallest successful step multiple per row
    (0 when the benign sample already meets the goal, -1 when no multiple
    up to eps_max succeeds).  ``correct`` column k records whether the
    prediction at step multiple k still matches the true label; columns
    past a row's success step stay False and are never consulted.
    """

    X: np.ndarray
    y_true: np.ndarray
    directions: np.ndarray
    k_success: np.ndarray
    correct: np.ndarray
    benign_pred: np.ndarray
    eps_step: float
    n_steps: int

    def _k_effective(self, eps_max: float) -> np.ndarray:
        budget = int(math.floor(eps_max / self.eps_step + 1e-9))
        budget = min(budget, self.n_steps)
        k = np.where(self.k_success >= 0, self.k_success, self.n_steps)
        return np.minimum(k, budget)

    def success_at(self, eps_max: float) -> np.ndarray:
        """Rows whose smallest successful multiple fits in eps_max."""
        k_eff = self._k_effective(eps_max)
        return (self.k_success >= 0) & (self.k_success <= k_eff)

    def eps_used_at(self, eps_max: float) -> np.ndarray:
        moved = np.linalg.norm(self.directions, axis=1) > 0
        return np.where(moved, self._k_effective(eps_max) * self.eps_step, 0.0)

    def adversarial_at(self, eps_max: float) -> np.ndarray:
        k_eff = self._k_effective(eps_max)
        return self.X + (k_eff * self.eps_step)[:, None] * self.directions

    def accuracy_at(self, eps_max: float) -> float:
        k_eff = self._k_effective(eps_max)
        return float(self.correct[np.arange(len(self.X)), k_eff].mean())

    def accuracy_curve(self, grid) -> np.ndarray:
        return np.array([self.accuracy_at(e) for e in grid])


def minimal_sweep(
    model: SvmRbfModel, X, y_true, config: AttackConfig, judge=None
) -> MinimalSweep:
    """Run the minimal attack on every row of X; semantics match fgsm_minimal.

    Directions always come from the model's gradients, but ``judge`` (a
    batch label predictor, default the model itself) decides success and
    correctness.  Passing another classifier as judge measures how far the
    same gradient direction must be followed to fool that classifier.
    """
    if config.mode != "minimal":
        raise ValueError("config.mode must be 'minimal'")
    if judge is None:
        judge = lambda points: svm_predict_batch(model, points)
    X = np.asarray(X, dtype=float)
    y_true = np.asarray([str(v) for v in y_true], dtype=object)
    target = config.target
    n = len(X)
    n_steps = int(math.floor(config.eps_max / config.eps_step + 1e-9))

    benign_pred = np.asarray(judge(X), dtype=object)
    correct = np.zeros((n, n_steps + 1), dtype=bool)
    correct[:, 0] = benign_pred == y_true
    if target is None:
        goal0 = benign_pred != y_true
    else:
        goal0 = benign_pred == str(target)

    k_success = np.where(goal0, 0, -1)
    refs = np.full(n, str(target), dtype=object) if target is not None else y_true
    grads = svm_loss_gradient_batch(model, X, refs)
    norms = np.linalg.norm(grads, axis=1)
    nonzero = norms > 0
    directions = np.zeros_like(grads)
    directions[nonzero] = grads[nonzero] / norms[nonzero, None]
    if target is not None:
        directions = -directions

    # zero-gradient rows never move: their correctness repeats the benign one
    frozen = ~nonzero & ~goal0
    correct[frozen, 1:] = correct[frozen, 0][:, None]

    active = np.nonzero(~goal0 & nonzero)[0]
    for k in range(1, n_steps + 1):
        if len(active) == 0:
            break
        adv = X[active] + (k * config.eps_step) * directions[active]
        pred = np.asarray(judge(adv), dtype=object)
        correct[active, k] = pred == y_true[active]
        if target is None:
            hit = pred != y_true[active]
        else:
            hit = pred == str(target)
        k_success[active[hit]] = k
        active = active[~hit]

    return MinimalSweep(
        X=X,
        y_true=y_true,
        directions=directions,
        k_success=k_success,
        correct=correct,
        benign_pred=benign_pred,
        eps_step=config.eps_step,
        n_steps=n_steps,
    )


def select_eps(curves, grid, selection: EpsSelection):
    """Pick eps_max from per-fold accuracy curves.

    ``curves`` is (n_folds, n_grid) accuracy-after-attack; the grid must be
    ascending.  general: grid value with the lowest mean accuracy (smallest
    on ties).  per_person: per fold, the smallest grid value reaching that
    fold's minimum.  guess_level: the smallest grid value whose mean
    accuracy is at or below the target, or None when unreachable.
    """
    curves = np.asarray(curves, dtype=float)
    if curves.ndim != 2 or curves.size == 0:
        raise ValueError("curves must be a nonempty (n_folds, n_grid) matrix")
    grid = tuple(float(g) for g in grid)
    if curves.shape[1] != len(grid):
        raise ValueError("curves width does not match grid")
    mean = curves.mean(axis=0)
    if selection.strategy == "general":
        return grid[int(np.argmin(mean))]
    if selection.strategy == "per_person":
        return np.array([grid[int(np.argmin(row))] for row in curves])
    reachable = mean <= selection.target_accuracy + 1e-12
    if not reachable.any():
        return None
    return grid[int(np.argmax(reachable))]


def _stream_from_arrays(arrays) -> GazeStream:
    return GazeStream(
        timestamp=arrays["timestamp"],
        x=arrays["x"],
        y=arrays["y"],
        pupil_diameter=arrays["pupil_diameter"],
        confidence=arrays["confidence"],
    )


def raw_blackbox_attack(
    stream: GazeStream, predictor, y_true, config: RawAttackConfig
) -> tuple[GazeStream, AttackResult]:
    """Decision-based random perturbation of single raw samples.

    Each query perturbs one uniformly chosen (sample, field) by a uniform
    step of magnitude at most ``step_magnitude``; the cumulative change per
    sample and field is capped at ``max_magnitude`` and positions stay in
    [0, 1].  In this label-only query model there is no score to climb, so
    a perturbation is only undone if it moved the label away from the goal
    (which cannot happen for the untargeted objective); the attack stops at
    the first label flip or when the budget is spent.
    """
    y_true = str(y_true)
    n = len(stream)
    work = {
        "timestamp": stream.timestamp.copy(),
        "x": stream.x.copy(),
        "y": stream.y.copy(),
        "pupil_diameter": stream.pupil_diameter.copy(),
        "confidence": stream.confidence.copy(),
    }
    original = {f: work[f].copy() for f in config.fields_perturbed}
    rng = np.random.default_rng(config.seed)
    fields = list(config.fields_perturbed)

    queries = 0
    success = False
    last_pred = None
    while queries < config.query_budget and n > 0:
        i = int(rng.integers(n))
        f = fields[int(rng.integers(len(fields)))]
        delta = float(rng.uniform(-config.step_magnitude, config.step_magnitude))
        value = work[f][i] + delta
        lo = original[f][i] - config.max_magnitude
        hi = original[f][i] + config.max_magnitude
        value = min(max(value, lo), hi)
        if f in ("x", "y"):
            value = min(max(value, 0.0), 1.0)
        else:
            value = max(value, 0.0)
        work[f][i] = value
        pred = str(predictor(_stream_from_arrays(work)))
        queries += 1
        last_pred = pred
        if pred != y_true:
            success = True
            break

    perturbed = _stream_from_arrays(work)
    sq = 0.0
    for f in config.fields_perturbed:
        sq += float(np.sum((work[f] - original[f]) ** 2))
    result = AttackResult(
        adversarial=None,
        eps_used=math.sqrt(sq),
        success=success,
        predicted_class=last_pred,
        queries=queries,
    )
    return perturbed, result
