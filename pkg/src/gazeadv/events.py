"""Eye-movement event detection: fixations, blinks, and saccades.

Fixations are found with a dispersion rule (all samples of a candidate run
stay within a fixed radius of the running centroid), blinks as runs of
zero-position / zero-confidence samples, and saccades are derived between
adjacent events.  Sample streams are immutable; every function here is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FIXATION_RADIUS = 0.05
MIN_EVENT_FRAMES = 3
MIN_EVENT_DURATION = 0.1  # seconds; 3 frames at the nominal 30 Hz
SMALL_LARGE_THRESHOLD = 0.1
NOMINAL_RATE_HZ = 30.0

DIR4_ALPHABET = ("L", "R", "U", "D")
DIRAMP8_ALPHABET = ("L", "R", "U", "D", "l", "r", "u", "d")


def min_frames_for_rate(rate_hz: float, min_duration: float = MIN_EVENT_DURATION) -> int:
    """Smallest frame count covering ``min_duration`` at the given rate."""
    if rate_hz <= 0:
        raise ValueError("sample rate must be positive")
    return max(1, math.ceil(rate_hz * min_duration - 1e-9))


@dataclass(frozen=True)
class GazeSample:
    """One tracker reading: normalized position, pupil size, confidence."""

    timestamp: float
    x: float
    y: float
    pupil_diameter: float
    confidence: float


@dataclass(frozen=True)
class GazeStream:
    """Time-ordered gaze samples held as parallel arrays.

    Arrays are treated as immutable after construction; derive a new stream
    instead of mutating in place.
    """

    timestamp: np.ndarray
    x: np.ndarray
    y: np.ndarray
    pupil_diameter: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("timestamp", "x", "y", "pupil_diameter", "confidence"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        n = len(arrays["timestamp"])
        if any(len(a) != n for a in arrays.values()):
            raise ValueError("all sample arrays must have equal length")
        if n:
            if np.any(np.diff(arrays["timestamp"]) < 0):
                raise ValueError("timestamps must be non-decreasing")
            for name in ("x", "y", "confidence"):
                a = arrays[name]
                if np.any(a < 0) or np.any(a > 1):
                    raise ValueError(f"{name} values must lie in [0, 1]")
            if np.any(arrays["pupil_diameter"] < 0):
                raise ValueError("pupil_diameter must be nonnegative")
            if np.any(~np.isfinite(arrays["timestamp"])):
                raise ValueError("timestamps must be finite")

    def __len__(self) -> int:
        return len(self.timestamp)

    def sample(self, i: int) -> GazeSample:
        return GazeSample(
            float(self.timestamp[i]),
            float(self.x[i]),
            float(self.y[i]),
            float(self.pupil_diameter[i]),
            float(self.confidence[i]),
        )

    @classmethod
    def from_samples(cls, samples) -> "GazeStream":
        samples = list(samples)
        return cls(
            np.array([s.timestamp for s in samples], dtype=float),
            np.array([s.x for s in samples], dtype=float),
            np.array([s.y for s in samples], dtype=float),
            np.array([s.pupil_diameter for s in samples], dtype=float),
            np.array([s.confidence for s in samples], dtype=float),
        )

    @property
    def frame_period(self) -> float:
        """Median inter-sample interval; nominal 1/30 s for short streams."""
        if len(self) < 2:
            return 1.0 / NOMINAL_RATE_HZ
        diffs = np.diff(self.timestamp)
        period = float(np.median(diffs))
        return period if period > 0 else 1.0 / NOMINAL_RATE_HZ

    @property
    def duration(self) -> float:
        """Recording span; each sample covers one frame period."""
        if len(self) == 0:
            return 0.0
        return float(self.timestamp[-1] - self.timestamp[0]) + self.frame_period


@dataclass(frozen=True)
class Fixation:
    """A dispersion-bounded gaze cluster over contiguous frames.

    ``start_index``/``end_index`` reference the source stream (inclusive).
    Per-fixation position and pupil statistics are stored so feature
    extraction does not need the raw samples again.
    """

    start: float
    end: float
    start_index: int
    end_index: int
    centroid_x: float
    centroid_y: float
    var_x: float
    var_y: float
    mean_pupil: float
    var_pupil: float

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def n_frames(self) -> int:
        return self.end_index - self.start_index + 1


@dataclass(frozen=True)
class Blink:
    """A run of tracking-loss frames (x = y = 0, confidence = 0)."""

    start: float
    end: float
    start_index: int
    end_index: int

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def n_frames(self) -> int:
        return self.end_index - self.start_index + 1


@dataclass(frozen=True)
class Saccade:
    """A gaze jump between two adjacent events.

    ``char_dir`` encodes the dominant direction (L/R/U/D); ``char_dir_amp``
    additionally lower-cases saccades below the amplitude threshold.
    """

    start: float
    end: float
    dx: float
    dy: float
    char_dir: str
    char_dir_amp: str

    @property
    def amplitude(self) -> float:
        return math.hypot(self.dx, self.dy)

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class EventStream:
    """All events of one recording plus its provenance."""

    fixations: tuple = ()
    blinks: tuple = ()
    saccades: tuple = ()
    recording_start: float = 0.0
    recording_duration: float = 0.0
    participant_id: str = ""
    label: str | None = None


def _loss_mask(stream: GazeStream) -> np.ndarray:
    """Frames where the tracker lost the eye (zero position and confidence)."""
    return (stream.x == 0.0) & (stream.y == 0.0) & (stream.confidence == 0.0)


def _dispersion_ok(x, y, s, e, radius):
    """True when samples s..e (inclusive) all lie within radius of their centroid."""
    xs = x[s : e + 1]
    ys = y[s : e + 1]
    cx = xs.mean()
    cy = ys.mean()
    return float(np.max(np.hypot(xs - cx, ys - cy))) <= radius


def detect_fixations(
    stream: GazeStream,
    radius: float = FIXATION_RADIUS,
    min_frames: int = MIN_EVENT_FRAMES,
) -> list[Fixation]:
    """Dispersion-threshold fixation detection with a running centroid.

    A candidate window grows while every member stays within ``radius`` of
    the current window centroid and is emitted once it can grow no further.
    Tracking-loss frames never join a window (this keeps fixations and
    blinks frame-disjoint), and runs whose positions are all exactly (0, 0)
    are discarded.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if min_frames < 1:
        raise ValueError("min_frames must be at least 1")
    n = len(stream)
    if n == 0:
        return []
    x, y = stream.x, stream.y
    t = stream.timestamp
    pupil = stream.pupil_diameter
    period = stream.frame_period
    loss = _loss_mask(stream)

    fixations: list[Fixation] = []
    s = 0
    while s < n:
        if loss[s]:
            s += 1
            continue
        e = s
        while e + 1 < n and not loss[e + 1] and _dispersion_ok(x, y, s, e + 1, radius):
            e += 1
        length = e - s + 1
        all_zero = bool(np.all(x[s : e + 1] == 0.0) and np.all(y[s : e + 1] == 0.0))
        if length >= min_frames and not all_zero:
            xs = x[s : e + 1]
            ys = y[s : e + 1]
            ps = pupil[s : e + 1]
            fixations.append(
                Fixation(
                    start=float(t[s]),
                    end=float(t[e]) + period,
                    start_index=s,
                    end_index=e,
                    centroid_x=float(xs.mean()),
                    centroid_y=float(ys.mean()),
                    var_x=float(xs.var()),
                    var_y=float(ys.var()),
                    mean_pupil=float(ps.mean()),
                    var_pupil=float(ps.var()),
                )
            )
            s = e + 1
        else:
            s += 1
    return fixations


def detect_blinks(stream: GazeStream, min_frames: int = MIN_EVENT_FRAMES) -> list[Blink]:
    """Maximal runs of tracking-loss frames with at least ``min_frames`` frames."""
    if min_frames < 1:
        raise ValueError("min_frames must be at least 1")
    n = len(stream)
    if n == 0:
        return []
    t = stream.timestamp
    period = stream.frame_period
    loss = _loss_mask(stream)

    blinks: list[Blink] = []
    i = 0
    while i < n:
        if not loss[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and loss[j + 1]:
            j += 1
        if j - i + 1 >= min_frames:
            blinks.append(
                Blink(start=float(t[i]), end=float(t[j]) + period, start_index=i, end_index=j)
            )
        i = j + 1
    return blinks


def encode_direction(dx: float, dy: float, amplitude_threshold: float) -> tuple[str, str]:
    """Direction / direction+amplitude symbols for a displacement.

    Dominant axis wins; exact axis ties and zero displacements resolve to the
    positive x direction so encoding is deterministic.
    """
    if amplitude_threshold <= 0:
        raise ValueError("amplitude_threshold must be positive")
    if abs(dx) >= abs(dy):
        char = "R" if dx >= 0 else "L"
    else:
        char = "U" if dy > 0 else "D"
    amplitude = math.hypot(dx, dy)
    char_amp = char.lower() if amplitude < amplitude_threshold else char
    return char, char_amp


def encode_saccade(
    saccade: Saccade, amplitude_threshold: float = SMALL_LARGE_THRESHOLD
) -> tuple[str, str]:
    """Re-encode an existing saccade against a (possibly different) threshold."""
    return encode_direction(saccade.dx, saccade.dy, amplitude_threshold)


def _last_valid_index(stream: GazeStream, before: int) -> int | None:
    """Index of the last frame with usable gaze strictly before ``before``."""
    loss = _loss_mask(stream)
    for i in range(before - 1, -1, -1):
        if not loss[i]:
            return i
    return None


def _first_valid_index(stream: GazeStream, after: int) -> int | None:
    """Index of the first frame with usable gaze strictly after ``after``."""
    loss = _loss_mask(stream)
    for i in range(after + 1, len(stream)):
        if not loss[i]:
            return i
    return None


def derive_saccades(
    fixations,
    blinks,
    stream: GazeStream,
    amplitude_threshold: float = SMALL_LARGE_THRESHOLD,
) -> list[Saccade]:
    """Saccades between adjacent events with at least one frame in between.

    Displacements run from the end point of the earlier event to the start
    point of the later one: fixations contribute their centroid, blinks the
    last valid gaze before them or the first valid gaze after them.  Pairs
    of blinks produce no saccade.
    """
    events = sorted(
        [("fix", f) for f in fixations] + [("blink", b) for b in blinks],
        key=lambda kv: kv[1].start_index,
    )
    saccades: list[Saccade] = []
    for (kind_a, ev_a), (kind_b, ev_b) in zip(events, events[1:]):
        if kind_a == "blink" and kind_b == "blink":
            continue
        intervening = ev_b.start_index - ev_a.end_index - 1
        if intervening < 1:
            continue
        if kind_a == "fix":
            x0, y0 = ev_a.centroid_x, ev_a.centroid_y
        else:
            idx = _first_valid_index(stream, ev_a.end_index)
            if idx is None:
                continue
            x0, y0 = float(stream.x[idx]), float(stream.y[idx])
        if kind_b == "fix":
            x1, y1 = ev_b.centroid_x, ev_b.centroid_y
        else:
            idx = _last_valid_index(stream, ev_b.start_index)
            if idx is None:
                continue
            x1, y1 = float(stream.x[idx]), float(stream.y[idx])
        dx, dy = x1 - x0, y1 - y0
        char, char_amp = encode_direction(dx, dy, amplitude_threshold)
        saccades.append(
            Saccade(
                start=ev_a.end,
                end=ev_b.start,
                dx=dx,
                dy=dy,
                char_dir=char,
                char_dir_amp=char_amp,
            )
        )
    return saccades


def detect_events(
    stream: GazeStream,
    radius: float = FIXATION_RADIUS,
    min_frames: int | None = None,
    amplitude_threshold: float = SMALL_LARGE_THRESHOLD,
    participant_id: str = "",
    label: str | None = None,
) -> EventStream:
    """Full detection pipeline for one recording.

    ``min_frames`` defaults to the frame count covering 0.1 s at the
    stream's own sampling rate (3 frames at 30 Hz).
    """
    if min_frames is None:
        min_frames = min_frames_for_rate(1.0 / stream.frame_period)
    fixations = detect_fixations(stream, radius=radius, min_frames=min_frames)
    blinks = detect_blinks(stream, min_frames=min_frames)
    saccades = derive_saccades(fixations, blinks, stream, amplitude_threshold)
    return EventStream(
        fixations=tuple(fixations),
        blinks=tuple(blinks),
        saccades=tuple(saccades),
        recording_start=float(stream.timestamp[0]) if len(stream) else 0.0,
        recording_duration=stream.duration,
        participant_id=participant_id,
        label=label,
    )
