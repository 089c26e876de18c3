"""Synthetic gaze recordings for desk-scale experiments.

Each document class has a reading profile (fixation durations, saccade
amplitude/direction mixtures, blink rate, pupil level); participants get
small seeded offsets so leave-one-person-out folds differ.

Two generator properties matter for the attack study and are deliberate:

* Streams are detection-friendly.  Fixation clusters jitter well inside
  the dispersion radius and every event transition carries one overshoot
  frame far from both clusters, so the dispersion detector recovers the
  planted events and derives one saccade per transition.
* Class geometry is attack-friendly.  Direction and small/large mixtures
  are realized as deterministic interleaved schedules (not i.i.d. draws),
  so the large-magnitude wordbook counts are low-variance and, with the
  default profiles, class-independent.  The class signal lives in
  small-scale features (pupil baseline, saccade amplitude magnitudes),
  which keeps decision boundaries within reach of small L2 perturbations
  while benign pairwise distances stay much larger.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import RecordingMeta, save_recording, write_manifest
from .events import GazeStream

POSITION_MARGIN = 0.15  # fixation centers stay inside [margin, 1 - margin]
FIXATION_JITTER_SD = 0.006
FIXATION_JITTER_MAX = 0.018
OVERSHOOT_OFFSET = 0.12  # keeps transition frames outside any candidate window
DIRECTION_PERIOD = 10
SIZE_PERIOD = 5
PUPIL_DRIFT_RHO = 0.97
PUPIL_DRIFT_SD = 0.15
_MIRROR = {0: 1, 1: 0, 2: 3, 3: 2}  # R<->L, U<->D


@dataclass(frozen=True)
class SynthProfile:
    label: str
    fixation_duration_mean: float
    fixation_duration_sd: float
    saccade_small_mean: float
    saccade_large_mean: float
    saccade_small_weight: float
    saccade_large_weight: float
    direction_weights: tuple  # R, L, U, D target shares
    blink_rate_per_minute: float
    pupil_baseline: float
    pupil_jitter: float
    seed: int = 0

    def __post_init__(self):
        if self.fixation_duration_mean <= 0 or self.fixation_duration_sd < 0:
            raise ValueError("fixation duration parameters must be positive")
        if min(self.saccade_small_mean, self.saccade_large_mean) <= 0:
            raise ValueError("saccade amplitude means must be positive")
        weights = (self.saccade_small_weight, self.saccade_large_weight)
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ValueError("saccade mixture weights must be nonnegative, not all zero")
        total = sum(weights)
        object.__setattr__(self, "saccade_small_weight", weights[0] / total)
        object.__setattr__(self, "saccade_large_weight", weights[1] / total)
        dirs = tuple(float(w) for w in self.direction_weights)
        if len(dirs) != 4 or any(w < 0 for w in dirs) or sum(dirs) <= 0:
            raise ValueError("direction_weights must be 4 nonnegative values")
        object.__setattr__(
            self, "direction_weights", tuple(w / sum(dirs) for w in dirs)
        )
        if self.blink_rate_per_minute < 0:
            raise ValueError("blink rate must be nonnegative")
        if self.pupil_baseline <= 0 or self.pupil_jitter < 0:
            raise ValueError("pupil parameters must be positive")


# Shared event timing and symbol mixtures keep the wordbook counts
# class-independent; amplitudes and pupil baseline separate the classes.
DEFAULT_PROFILES = {
    "comic": SynthProfile(
        label="comic",
        fixation_duration_mean=0.9,
        fixation_duration_sd=0.05,
        saccade_small_mean=0.075,
        saccade_large_mean=0.16,
        saccade_small_weight=0.6,
        saccade_large_weight=0.4,
        direction_weights=(0.4, 0.4, 0.1, 0.1),
        blink_rate_per_minute=2.0,
        pupil_baseline=8.4,
        pupil_jitter=0.05,
    ),
    "newspaper": SynthProfile(
        label="newspaper",
        fixation_duration_mean=0.9,
        fixation_duration_sd=0.05,
        saccade_small_mean=0.060,
        saccade_large_mean=0.135,
        saccade_small_weight=0.6,
        saccade_large_weight=0.4,
        direction_weights=(0.4, 0.4, 0.1, 0.1),
        blink_rate_per_minute=2.0,
        pupil_baseline=5.2,
        pupil_jitter=0.05,
    ),
    "textbook": SynthProfile(
        label="textbook",
        fixation_duration_mean=0.9,
        fixation_duration_sd=0.05,
        saccade_small_mean=0.045,
        saccade_large_mean=0.115,
        saccade_small_weight=0.6,
        saccade_large_weight=0.4,
        direction_weights=(0.4, 0.4, 0.1, 0.1),
        blink_rate_per_minute=2.0,
        pupil_baseline=2.0,
        pupil_jitter=0.05,
    ),
}


@dataclass(frozen=True)
class ParticipantTraits:
    """Per-participant offsets applied to every profile.

    Offsets stay well below the class gaps so folds differ without moving
    a held-out participant across a class boundary too often.
    """

    duration_scale: float
    amplitude_scale: float
    pupil_shift: float
    blink_scale: float
    direction_phase: int
    size_phase: int

    @classmethod
    def draw(cls, rng) -> "ParticipantTraits":
        return cls(
            duration_scale=float(rng.uniform(0.98, 1.02)),
            amplitude_scale=float(rng.uniform(0.93, 1.07)),
            pupil_shift=float(rng.normal(0.0, 0.8)),
            blink_scale=float(rng.uniform(0.85, 1.15)),
            direction_phase=int(rng.integers(DIRECTION_PERIOD)),
            size_phase=int(rng.integers(SIZE_PERIOD)),
        )


def _schedule(weights, period: int) -> list[int]:
    """Deterministic evenly-interleaved symbol schedule matching the shares.

    Largest-remainder apportionment fixes the per-period counts, then each
    slot takes the symbol with the largest running deficit.
    """
    weights = np.asarray(weights, dtype=float)
    ideal = weights * period
    counts = np.floor(ideal).astype(int)
    remainder = ideal - counts
    for i in np.argsort(-remainder, kind="stable")[: period - counts.sum()]:
        counts[i] += 1
    filled = np.zeros(len(weights), dtype=int)
    out = []
    for t in range(1, period + 1):
        deficit = counts * (t / period) - filled
        pick = int(np.argmax(deficit))
        out.append(pick)
        filled[pick] += 1
    return out


def _direction_schedule(weights, period: int) -> list[int]:
    """Direction schedule; mirror-invariant when the weights allow it.

    For symmetric mixtures (R = L and U = D shares) the cycle is built as a
    half pattern followed by its mirror image, which makes the full cycle a
    rotation of its own mirror: the wall-flip logic in the generator then
    leaves n-gram statistics unchanged.
    """
    w = np.asarray(weights, dtype=float)
    if period % 2 == 0 and abs(w[0] - w[1]) < 1e-12 and abs(w[2] - w[3]) < 1e-12:
        half = _schedule((w[0], w[1], w[2] + w[3], 0.0), period // 2)
        return half + [_MIRROR[s] for s in half]
    return _schedule(w, period)


def _clip_position(p):
    return float(min(max(p, POSITION_MARGIN), 1.0 - POSITION_MARGIN))


def generate_stream(
    profile: SynthProfile,
    duration: float,
    rng: np.random.Generator,
    sample_rate: float = 30.0,
    traits: ParticipantTraits | None = None,
) -> GazeStream:
    """One recording realizing the profile (optionally offset by traits)."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    period = 1.0 / sample_rate
    n_total = int(round(duration * sample_rate))
    if traits is None:
        traits = ParticipantTraits(1.0, 1.0, 0.0, 1.0, 0, 0)

    dir_schedule = _direction_schedule(profile.direction_weights, DIRECTION_PERIOD)
    size_schedule = _schedule(
        (profile.saccade_small_weight, profile.saccade_large_weight), SIZE_PERIOD
    )
    dir_vectors = ((1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0))  # R L U D

    cycle = profile.fixation_duration_mean + 2 * period
    p_blink = 0.0
    if profile.blink_rate_per_minute > 0:
        p_blink = min(0.5, profile.blink_rate_per_minute * traits.blink_scale * cycle / 60.0)

    xs, ys, pupils, confs = [], [], [], []
    pos_x = float(rng.uniform(0.35, 0.65))
    pos_y = float(rng.uniform(0.35, 0.65))
    pupil_level = profile.pupil_baseline + traits.pupil_shift
    drift = float(rng.normal(0.0, PUPIL_DRIFT_SD))
    step_index = 0

    def emit_fixation():
        nonlocal drift
        dur = rng.normal(
            profile.fixation_duration_mean * traits.duration_scale,
            profile.fixation_duration_sd,
        )
        frames = max(3, int(round(max(dur, 0.1) * sample_rate)))
        drift = PUPIL_DRIFT_RHO * drift + float(
            rng.normal(0.0, PUPIL_DRIFT_SD * math.sqrt(1.0 - PUPIL_DRIFT_RHO**2))
        )
        level = max(pupil_level + drift + rng.normal(0.0, profile.pupil_jitter), 0.5)
        for _ in range(frames):
            jx = float(np.clip(rng.normal(0.0, FIXATION_JITTER_SD),
                               -FIXATION_JITTER_MAX, FIXATION_JITTER_MAX))
            jy = float(np.clip(rng.normal(0.0, FIXATION_JITTER_SD),
                               -FIXATION_JITTER_MAX, FIXATION_JITTER_MAX))
            xs.append(min(max(pos_x + jx, 0.0), 1.0))
            ys.append(min(max(pos_y + jy, 0.0), 1.0))
            pupils.append(max(level + rng.normal(0.0, 0.02), 0.0))
            confs.append(float(rng.uniform(0.85, 1.0)))

    def emit_transition(old_x, old_y, new_x, new_y):
        # one overshoot frame perpendicular to the jump, far from both clusters
        mx, my = (old_x + new_x) / 2.0, (old_y + new_y) / 2.0
        dx, dy = new_x - old_x, new_y - old_y
        norm = math.hypot(dx, dy)
        if norm == 0:
            px, py = 0.0, 1.0
        else:
            px, py = -dy / norm, dx / norm
        xs.append(min(max(mx + OVERSHOOT_OFFSET * px, 0.0), 1.0))
        ys.append(min(max(my + OVERSHOOT_OFFSET * py, 0.0), 1.0))
        pupils.append(max(pupil_level + drift, 0.5))
        confs.append(float(rng.uniform(0.85, 1.0)))

    def emit_blink():
        frames = max(3, int(round(rng.uniform(0.15, 0.35) * sample_rate)))
        for _ in range(frames):
            xs.append(0.0)
            ys.append(0.0)
            pupils.append(0.0)
            confs.append(0.0)

    # any wall hit toggles one joint mirror flag for both axes: with a
    # mirror-invariant direction cycle the flipped symbol stream has the
    # same n-gram statistics as the unflipped one
    mirror = 1.0
    while len(xs) < n_total:
        emit_fixation()
        old_x, old_y = pos_x, pos_y
        blink_now = rng.uniform() < p_blink
        small = size_schedule[(step_index + traits.size_phase) % SIZE_PERIOD] == 0
        mean_amp = (profile.saccade_small_mean if small else profile.saccade_large_mean)
        mean_amp *= traits.amplitude_scale
        amp = float(rng.normal(mean_amp, 0.06 * mean_amp))
        amp = float(np.clip(amp, 0.03, 0.095) if small else np.clip(amp, 0.105, 0.21))
        d = dir_vectors[dir_schedule[(step_index + traits.direction_phase) % DIRECTION_PERIOD]]
        angle = rng.normal(0.0, 0.10)
        cos_a, sin_a = math.cos(angle), math.sin(angle)
        step_x = mirror * amp * (d[0] * cos_a - d[1] * sin_a)
        step_y = mirror * amp * (d[0] * sin_a + d[1] * cos_a)
        if (not POSITION_MARGIN <= pos_x + step_x <= 1.0 - POSITION_MARGIN) or (
            not POSITION_MARGIN <= pos_y + step_y <= 1.0 - POSITION_MARGIN
        ):
            mirror = -mirror
            step_x = -step_x
            step_y = -step_y
        if not POSITION_MARGIN <= pos_x + step_x <= 1.0 - POSITION_MARGIN:
            step_x = 0.0
        if not POSITION_MARGIN <= pos_y + step_y <= 1.0 - POSITION_MARGIN:
            step_y = 0.0
        pos_x = _clip_position(pos_x + step_x)
        pos_y = _clip_position(pos_y + step_y)
        if blink_now:
            # the jump hides under the blink: zeros follow the fixation with
            # no frame in between, so no saccade is derived on either side
            # and the visible symbol stream keeps its exact periodicity
            # (the schedule slot is reused by the next visible saccade)
            emit_blink()
        else:
            step_index += 1
            emit_transition(old_x, old_y, pos_x, pos_y)

    timestamps = np.arange(n_total) * period
    return GazeStream(
        timestamp=timestamps,
        x=np.asarray(xs[:n_total]),
        y=np.asarray(ys[:n_total]),
        pupil_diameter=np.asarray(pupils[:n_total]),
        confidence=np.asarray(confs[:n_total]),
    )


def synth_generate(
    out_dir,
    participants: int,
    duration: float,
    seed: int,
    profiles: dict | None = None,
    sample_rate: float = 30.0,
    min_duration: float = 45.0,
) -> list[tuple[Path, RecordingMeta]]:
    """Write one recording per (participant, class) plus a manifest.

    Deterministic for a fixed seed: the same seed produces byte-identical
    files.  Refuses durations shorter than one analysis window.
    """
    if participants < 2:
        raise ValueError("need at least 2 participants for leave-one-person-out")
    if duration < min_duration:
        raise ValueError(
            f"duration {duration} s is shorter than one {min_duration} s window"
        )
    profiles = dict(DEFAULT_PROFILES) if profiles is None else profiles
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    root = np.random.SeedSequence(seed)
    participant_streams = root.spawn(participants)
    written = []
    entries = []
    for p_idx, p_seq in enumerate(participant_streams):
        participant = f"p{p_idx + 1:02d}"
        trait_rng = np.random.default_rng(p_seq)
        traits = ParticipantTraits.draw(trait_rng)
        for label in sorted(profiles):
            rec_rng = np.random.default_rng(p_seq.spawn(1)[0])
            stream = generate_stream(
                profiles[label], duration, rec_rng, sample_rate, traits
            )
            meta = RecordingMeta(
                participant_id=participant, label=label, sample_rate_hz=sample_rate
            )
            name = f"{participant}__{label}.csv"
            save_recording(out_dir / name, stream, meta)
            written.append((out_dir / name, meta))
            entries.append((meta, name))
    write_manifest(out_dir, entries)
    return written
