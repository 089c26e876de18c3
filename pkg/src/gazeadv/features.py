"""Sliding-window extraction of the 54-dimensional eye-movement descriptor.

Layout (fixed order, also exported as FEATURE_NAMES):

  fixations   8   rate; mean/max/var duration; mean of per-fixation mean x
                  and y; var of per-fixation var x and y
  saccades   12   rate; ratios small/large/right/left; mean/max/var
                  amplitude; mean/var |dx|; mean/var |dy|
  combined    1   saccade:fixation count ratio
  wordbooks  24   two alphabets (direction, direction+amplitude) x n-gram
                  lengths 1..4 x (nonzero entries, max count, min count)
  blinks      3   rate; mean/var duration
  pupil       4   mean of means, mean of vars, var of means, var of vars
                  over fixations
  reading     2   euclidean distance between the 5% and 95% centroid
                  quantile points; OLS slope of centroid y on centroid x

Empty statistic families yield zeros so vectors are always finite and have
length 54.  Variances are population variances (a single element has
variance 0).  Rates are per second of window time.
"""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .events import DIR4_ALPHABET, DIRAMP8_ALPHABET, EventStream, SMALL_LARGE_THRESHOLD

WORDBOOK_MAX_N = 4

_FIXATION_NAMES = (
    "fixation_rate",
    "fixation_duration_mean",
    "fixation_duration_max",
    "fixation_duration_var",
    "fixation_x_mean_of_means",
    "fixation_y_mean_of_means",
    "fixation_x_var_of_vars",
    "fixation_y_var_of_vars",
)
_SACCADE_NAMES = (
    "saccade_rate",
    "saccade_ratio_small",
    "saccade_ratio_large",
    "saccade_ratio_right",
    "saccade_ratio_left",
    "saccade_amplitude_mean",
    "saccade_amplitude_max",
    "saccade_amplitude_var",
    "saccade_abs_dx_mean",
    "saccade_abs_dx_var",
    "saccade_abs_dy_mean",
    "saccade_abs_dy_var",
)
_WORDBOOK_NAMES = tuple(
    f"wordbook_{alpha}_n{n}_{stat}"
    for alpha in ("dir4", "diramp8")
    for n in range(1, WORDBOOK_MAX_N + 1)
    for stat in ("nonzero", "max", "min")
)
_BLINK_NAMES = ("blink_rate", "blink_duration_mean", "blink_duration_var")
_PUPIL_NAMES = (
    "pupil_mean_of_means",
    "pupil_mean_of_vars",
    "pupil_var_of_means",
    "pupil_var_of_vars",
)
_READING_NAMES = ("reading_quantile_span", "reading_slope")

FEATURE_NAMES: tuple[str, ...] = (
    _FIXATION_NAMES
    + _SACCADE_NAMES
    + ("saccade_fixation_ratio",)
    + _WORDBOOK_NAMES
    + _BLINK_NAMES
    + _PUPIL_NAMES
    + _READING_NAMES
)
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 54


@dataclass(frozen=True)
class WindowConfig:
    window_size: float = 45.0
    step: float = 1.0
    amplitude_threshold: float = SMALL_LARGE_THRESHOLD

    def __post_init__(self):
        if self.window_size <= 0:
            raise ValueError("window_size must be positive")
        if not 0 < self.step <= self.window_size:
            raise ValueError("step must satisfy 0 < step <= window_size")
        if self.amplitude_threshold <= 0:
            raise ValueError("amplitude_threshold must be positive")


@dataclass(frozen=True)
class WindowEvents:
    """Events whose start time falls inside one sliding window."""

    start: float
    size: float
    fixations: tuple
    saccades: tuple
    blinks: tuple
    participant_id: str = ""
    label: str | None = None


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    participant_id: str
    label: str | None
    window_start: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have length {N_FEATURES}")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Wordbook:
    """Occurrence counts of saccade-symbol n-grams of one length."""

    n: int
    counts: dict

    def __post_init__(self):
        if not 1 <= self.n <= WORDBOOK_MAX_N:
            raise ValueError(f"n must be in 1..{WORDBOOK_MAX_N}")


def slide_windows(events: EventStream, config: WindowConfig) -> list[WindowEvents]:
    """Cut the event stream into windows advancing by ``config.step``.

    A window starting at t collects events whose start time lies in
    [t, t + window_size); windows that would extend past the end of the
    recording are dropped.
    """
    windows: list[WindowEvents] = []
    origin = events.recording_start
    total = events.recording_duration
    k = 0
    while origin + k * config.step + config.window_size <= origin + total + 1e-9:
        t0 = origin + k * config.step
        t1 = t0 + config.window_size
        windows.append(
            WindowEvents(
                start=t0,
                size=config.window_size,
                fixations=tuple(f for f in events.fixations if t0 <= f.start < t1),
                saccades=tuple(s for s in events.saccades if t0 <= s.start < t1),
                blinks=tuple(b for b in events.blinks if t0 <= b.start < t1),
                participant_id=events.participant_id,
                label=events.label,
            )
        )
        k += 1
    return windows


def build_wordbook(symbols, n: int) -> Wordbook:
    symbols = "".join(symbols)
    grams = [symbols[i : i + n] for i in range(len(symbols) - n + 1)]
    return Wordbook(n=n, counts=dict(Counter(grams)))


def wordbook_features(symbols, alphabet) -> np.ndarray:
    """(nonzero entries, max count, min count) for n-gram lengths 1..4.

    ``alphabet`` is the symbol set the sequence is drawn from; an empty
    sequence yields all zeros.
    """
    symbols = "".join(symbols)
    allowed = set(alphabet)
    bad = set(symbols) - allowed
    if bad:
        raise ValueError(f"symbols {sorted(bad)} not in alphabet")
    out = np.zeros(3 * WORDBOOK_MAX_N)
    for n in range(1, WORDBOOK_MAX_N + 1):
        counts = build_wordbook(symbols, n).counts
        if counts:
            values = list(counts.values())
            out[3 * (n - 1) : 3 * n] = (len(counts), max(values), min(values))
    return out


def reading_features(fixations) -> tuple[float, float]:
    """Reading-direction summary over fixation centroids.

    Returns the euclidean distance between the (q5, q5) and (q95, q95)
    quantile points of the centroids and the least-squares slope of
    centroid y on centroid x.  Fewer than two fixations (or zero x
    variance) give slope 0; no fixations give span 0.
    """
    if not fixations:
        return 0.0, 0.0
    cx = np.array([f.centroid_x for f in fixations])
    cy = np.array([f.centroid_y for f in fixations])
    q5x, q95x = np.quantile(cx, [0.05, 0.95])
    q5y, q95y = np.quantile(cy, [0.05, 0.95])
    span = float(np.hypot(q95x - q5x, q95y - q5y))
    if len(fixations) < 2:
        return span, 0.0
    var_x = float(cx.var())
    if var_x == 0.0:
        return span, 0.0
    slope = float(((cx - cx.mean()) * (cy - cy.mean())).mean() / var_x)
    return span, slope


def _stats(values) -> tuple[float, float, float]:
    """(mean, max, population variance); zeros for an empty family."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return 0.0, 0.0, 0.0
    return float(arr.mean()), float(arr.max()), float(arr.var())


def extract_features(window: WindowEvents, config: WindowConfig) -> FeatureVector:
    """Compute the 54 window features in their fixed order."""
    size = window.size
    fixations = window.fixations
    saccades = window.saccades
    blinks = window.blinks
    values = np.zeros(N_FEATURES)
    pos = 0

    # fixation block
    fix_dur_mean, fix_dur_max, fix_dur_var = _stats([f.duration for f in fixations])
    mean_x = float(np.mean([f.centroid_x for f in fixations])) if fixations else 0.0
    mean_y = float(np.mean([f.centroid_y for f in fixations])) if fixations else 0.0
    varvar_x = float(np.var([f.var_x for f in fixations])) if fixations else 0.0
    varvar_y = float(np.var([f.var_y for f in fixations])) if fixations else 0.0
    values[pos : pos + 8] = (
        len(fixations) / size,
        fix_dur_mean,
        fix_dur_max,
        fix_dur_var,
        mean_x,
        mean_y,
        varvar_x,
        varvar_y,
    )
    pos += 8

    # saccade block
    n_sacc = len(saccades)
    amplitudes = np.array([s.amplitude for s in saccades])
    small = sum(1 for s in saccades if s.amplitude < config.amplitude_threshold)
    right = sum(1 for s in saccades if s.char_dir == "R")
    left = sum(1 for s in saccades if s.char_dir == "L")
    amp_mean, amp_max, amp_var = _stats(amplitudes)
    dx_mean, _, dx_var = _stats([abs(s.dx) for s in saccades])
    dy_mean, _, dy_var = _stats([abs(s.dy) for s in saccades])
    values[pos : pos + 12] = (
        n_sacc / size,
        small / n_sacc if n_sacc else 0.0,
        (n_sacc - small) / n_sacc if n_sacc else 0.0,
        right / n_sacc if n_sacc else 0.0,
        left / n_sacc if n_sacc else 0.0,
        amp_mean,
        amp_max,
        amp_var,
        dx_mean,
        dx_var,
        dy_mean,
        dy_var,
    )
    pos += 12

    values[pos] = n_sacc / len(fixations) if fixations else 0.0
    pos += 1

    # wordbooks: re-encoded symbols are threshold-dependent, chars are not
    dir_symbols = "".join(s.char_dir for s in saccades)
    amp_symbols = "".join(
        (s.char_dir.lower() if s.amplitude < config.amplitude_threshold else s.char_dir)
        for s in saccades
    )
    values[pos : pos + 12] = wordbook_features(dir_symbols, DIR4_ALPHABET)
    pos += 12
    values[pos : pos + 12] = wordbook_features(amp_symbols, DIRAMP8_ALPHABET)
    pos += 12

    # blink block
    blink_mean, _, blink_var = _stats([b.duration for b in blinks])
    values[pos : pos + 3] = (len(blinks) / size, blink_mean, blink_var)
    pos += 3

    # pupil block (over fixations)
    if fixations:
        p_means = np.array([f.mean_pupil for f in fixations])
        p_vars = np.array([f.var_pupil for f in fixations])
        values[pos : pos + 4] = (
            p_means.mean(),
            p_vars.mean(),
            p_means.var(),
            p_vars.var(),
        )
    pos += 4

    values[pos : pos + 2] = reading_features(fixations)
    pos += 2
    assert pos == N_FEATURES

    return FeatureVector(
        values=values,
        participant_id=window.participant_id,
        label=window.label,
        window_start=window.start,
    )


@dataclass(frozen=True)
class FeatureTable:
    """A feature matrix with row metadata; the unit the classifiers consume."""

    values: np.ndarray
    labels: np.ndarray
    participant_ids: np.ndarray
    window_starts: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != N_FEATURES:
            raise ValueError(f"values must be (n, {N_FEATURES})")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=object))
        object.__setattr__(
            self, "participant_ids", np.asarray(self.participant_ids, dtype=object)
        )
        object.__setattr__(
            self, "window_starts", np.asarray(self.window_starts, dtype=float)
        )
        n = len(values)
        for name in ("labels", "participant_ids", "window_starts"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length does not match values")

    def __len__(self) -> int:
        return len(self.values)

    def subset(self, mask) -> "FeatureTable":
        return FeatureTable(
            self.values[mask],
            self.labels[mask],
            self.participant_ids[mask],
            self.window_starts[mask],
        )

    @classmethod
    def from_vectors(cls, vectors) -> "FeatureTable":
        vectors = list(vectors)
        if not vectors:
            return cls(
                np.zeros((0, N_FEATURES)), np.array([], dtype=object),
                np.array([], dtype=object), np.array([]),
            )
        return cls(
            np.stack([v.values for v in vectors]),
            np.array([v.label for v in vectors], dtype=object),
            np.array([v.participant_id for v in vectors], dtype=object),
            np.array([v.window_start for v in vectors]),
        )


def extract_table(event_streams, config: WindowConfig) -> FeatureTable:
    """Featurize every window of every recording into one table."""
    vectors = []
    for events in event_streams:
        for window in slide_windows(events, config):
            vectors.append(extract_features(window, config))
    return FeatureTable.from_vectors(vectors)


def save_features(path, table: FeatureTable) -> None:
    """Write a feature table as CSV (metadata columns, then the 54 features)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("participant_id", "label", "window_start") + FEATURE_NAMES)
        for i in range(len(table)):
            writer.writerow(
                [table.participant_ids[i], table.labels[i], repr(float(table.window_starts[i]))]
                + [repr(float(v)) for v in table.values[i]]
            )


def load_features(path) -> FeatureTable:
    expected = ("participant_id", "label", "window_start") + FEATURE_NAMES
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != expected:
            raise ValueError(f"{path}: unexpected feature CSV header")
        rows = list(reader)
    values = np.zeros((len(rows), N_FEATURES))
    labels, pids, starts = [], [], np.zeros(len(rows))
    for i, row in enumerate(rows):
        if len(row) != len(expected):
            raise ValueError(f"{path}: row {i + 2} has {len(row)} fields")
        pids.append(row[0])
        labels.append(row[1])
        starts[i] = float(row[2])
        values[i] = [float(v) for v in row[3:]]
    return FeatureTable(values, np.array(labels, dtype=object), np.array(pids, dtype=object), starts)
