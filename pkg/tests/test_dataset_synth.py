import numpy as np
import pytest

from gazeadv.dataset import (
    RecordingMeta,
    load_dataset,
    load_recording,
    save_recording,
    write_manifest,
)
from gazeadv.events import GazeStream, detect_events
from gazeadv.synth import (
    DEFAULT_PROFILES,
    ParticipantTraits,
    SynthProfile,
    generate_stream,
    synth_generate,
)


def random_stream(rng, n=50):
    return GazeStream(
        timestamp=np.arange(n) / 30.0,
        x=rng.uniform(0, 1, n),
        y=rng.uniform(0, 1, n),
        pupil_diameter=rng.uniform(1, 5, n),
        confidence=rng.uniform(0, 1, n),
    )


def test_single_row_file(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("timestamp,x,y,pupil_diameter,confidence\n0.0,0.5,0.5,3.0,1.0\n")
    stream, meta = load_recording(path)
    assert len(stream) == 1
    assert meta.participant_id == "one"


def test_out_of_range_row_names_the_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "timestamp,x,y,pupil_diameter,confidence\n"
        "0.0,0.5,0.5,3.0,1.0\n"
        "0.033,1.5,0.5,3.0,1.0\n"
    )
    with pytest.raises(ValueError, match=r"bad\.csv:3"):
        load_recording(path)


def test_malformed_row_names_the_line(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("timestamp,x,y,pupil_diameter,confidence\n0.0,0.5,0.5\n")
    with pytest.raises(ValueError, match=r"short\.csv:2"):
        load_recording(path)


def test_header_required(tmp_path):
    path = tmp_path / "noheader.csv"
    path.write_text("0.0,0.5,0.5,3.0,1.0\n")
    with pytest.raises(ValueError, match=":1:"):
        load_recording(path)


def test_recording_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    stream = random_stream(rng)
    meta = RecordingMeta(participant_id="p9", label="comic", sample_rate_hz=30.0)
    path = save_recording(tmp_path / "rec.csv", stream, meta)
    loaded, loaded_meta = load_recording(path)
    assert np.array_equal(loaded.timestamp, stream.timestamp)
    assert np.array_equal(loaded.x, stream.x)
    assert np.array_equal(loaded.y, stream.y)
    assert np.array_equal(loaded.pupil_diameter, stream.pupil_diameter)
    assert np.array_equal(loaded.confidence, stream.confidence)
    assert loaded_meta == meta


def test_manifest_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    entries = []
    for pid, label in (("p1", "comic"), ("p1", "textbook"), ("p2", "comic")):
        meta = RecordingMeta(participant_id=pid, label=label)
        name = f"{pid}__{label}.csv"
        save_recording(tmp_path / name, random_stream(rng, 20), meta)
        entries.append((meta, name))
    write_manifest(tmp_path, entries)
    records = load_dataset(tmp_path)
    assert [(m.participant_id, m.label) for _, m in records] == [
        ("p1", "comic"), ("p1", "textbook"), ("p2", "comic")]


def test_blink_rate_zero_means_no_zero_runs():
    from dataclasses import replace

    profile = replace(DEFAULT_PROFILES["comic"], blink_rate_per_minute=0.0)
    stream = generate_stream(profile, 60.0, np.random.default_rng(2))
    loss = (stream.x == 0) & (stream.y == 0) & (stream.confidence == 0)
    run = 0
    longest = 0
    for flag in loss:
        run = run + 1 if flag else 0
        longest = max(longest, run)
    assert longest < 3


def test_generated_stream_recovers_planted_fixation_count():
    rng = np.random.default_rng(3)
    for label, profile in DEFAULT_PROFILES.items():
        stream = generate_stream(profile, 90.0, np.random.default_rng(rng.integers(1 << 30)))
        events = detect_events(stream, participant_id="p", label=label)
        # planted count: one fixation per cycle; reconstruct from the stream
        # duration and the profile's mean cycle length
        period = 1 / 30.0
        mean_fix_frames = max(3, round(profile.fixation_duration_mean * 30))
        approx_cycle = mean_fix_frames * period + period
        planted = 90.0 / approx_cycle
        assert abs(len(events.fixations) - planted) / planted < 0.10


def test_synth_generate_writes_dataset(tmp_path):
    written = synth_generate(tmp_path, participants=2, duration=50.0, seed=5)
    assert len(written) == 6  # 2 participants x 3 classes
    records = load_dataset(tmp_path)
    assert len(records) == 6
    labels = {meta.label for _, meta in records}
    assert labels == {"comic", "newspaper", "textbook"}
    for stream, _ in records:
        assert len(stream) == 50 * 30


def test_synth_generate_is_byte_identical(tmp_path):
    synth_generate(tmp_path / "a", participants=2, duration=50.0, seed=9)
    synth_generate(tmp_path / "b", participants=2, duration=50.0, seed=9)
    for name in sorted(p.name for p in (tmp_path / "a").iterdir()):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_generate_validation(tmp_path):
    with pytest.raises(ValueError, match="participants"):
        synth_generate(tmp_path, participants=1, duration=60.0, seed=1)
    with pytest.raises(ValueError, match="shorter"):
        synth_generate(tmp_path, participants=2, duration=10.0, seed=1)


def test_profile_validation():
    with pytest.raises(ValueError):
        SynthProfile(label="x", fixation_duration_mean=0.0, fixation_duration_sd=0.1,
                     saccade_small_mean=0.05, saccade_large_mean=0.2,
                     saccade_small_weight=0.5, saccade_large_weight=0.5,
                     direction_weights=(1, 1, 1, 1), blink_rate_per_minute=1.0,
                     pupil_baseline=3.0, pupil_jitter=0.1)
    profile = DEFAULT_PROFILES["comic"]
    assert profile.saccade_small_weight + profile.saccade_large_weight == pytest.approx(1.0)
    assert sum(profile.direction_weights) == pytest.approx(1.0)


def test_participant_traits_differ_by_seed():
    t1 = ParticipantTraits.draw(np.random.default_rng(1))
    t2 = ParticipantTraits.draw(np.random.default_rng(2))
    assert t1 != t2
