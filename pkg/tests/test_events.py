import numpy as np
import pytest

from gazeadv.events import (
    GazeStream,
    derive_saccades,
    detect_blinks,
    detect_fixations,
    encode_direction,
    encode_saccade,
    detect_events,
    min_frames_for_rate,
)

PERIOD = 1.0 / 30.0


def make_stream(points, pupil=3.0, confidence=1.0):
    """Stream from a list of (x, y) or (x, y, confidence) tuples at 30 Hz."""
    xs, ys, confs = [], [], []
    for p in points:
        xs.append(p[0])
        ys.append(p[1])
        confs.append(p[2] if len(p) > 2 else confidence)
    n = len(xs)
    return GazeStream(
        timestamp=np.arange(n) * PERIOD,
        x=np.array(xs, dtype=float),
        y=np.array(ys, dtype=float),
        pupil_diameter=np.full(n, pupil),
        confidence=np.array(confs, dtype=float),
    )


def brute_force_fixation_windows(stream, radius, min_frames):
    """All contiguous index runs satisfying the dispersion predicate."""
    n = len(stream)
    loss = (stream.x == 0) & (stream.y == 0) & (stream.confidence == 0)
    runs = []
    for s in range(n):
        for e in range(s + min_frames - 1, n):
            if loss[s : e + 1].any():
                continue
            xs, ys = stream.x[s : e + 1], stream.y[s : e + 1]
            cx, cy = xs.mean(), ys.mean()
            if np.max(np.hypot(xs - cx, ys - cy)) <= radius:
                if not (np.all(xs == 0) and np.all(ys == 0)):
                    runs.append((s, e))
    return runs


def test_identical_points_form_one_fixation():
    stream = make_stream([(0.5, 0.5)] * 4)
    fixations = detect_fixations(stream)
    assert len(fixations) == 1
    f = fixations[0]
    assert (f.start_index, f.end_index) == (0, 3)
    assert f.centroid_x == pytest.approx(0.5)
    assert f.centroid_y == pytest.approx(0.5)
    assert f.duration == pytest.approx(4 * PERIOD)


def test_all_zero_run_is_not_a_fixation():
    stream = make_stream([(0.0, 0.0, 0.0)] * 4)
    assert detect_fixations(stream) == []


def test_zero_position_with_confidence_is_still_excluded():
    # positions all zero fail the fixation rule regardless of confidence
    stream = make_stream([(0.0, 0.0, 0.9)] * 5)
    assert detect_fixations(stream) == []


def test_alternating_far_points_yield_no_fixation():
    points = [(0.1, 0.1), (0.9, 0.9)] * 5
    stream = make_stream(points)
    assert detect_fixations(stream) == []
    assert brute_force_fixation_windows(stream, 0.05, 3) == []


def test_empty_stream():
    stream = make_stream([])
    assert detect_fixations(stream) == []
    assert detect_blinks(stream) == []


def test_detected_fixations_satisfy_dispersion_invariant():
    rng = np.random.default_rng(0)
    for _ in range(25):
        pts = rng.uniform(0.05, 0.95, size=(40, 2))
        # sprinkle small clusters
        for start in (5, 20):
            center = rng.uniform(0.2, 0.8, 2)
            pts[start : start + 6] = center + rng.normal(0, 0.005, (6, 2))
        stream = make_stream([tuple(p) for p in pts])
        for f in detect_fixations(stream):
            xs = stream.x[f.start_index : f.end_index + 1]
            ys = stream.y[f.start_index : f.end_index + 1]
            d = np.hypot(xs - f.centroid_x, ys - f.centroid_y)
            assert np.max(d) <= 0.05 + 1e-12


def _planted_stream(rng, n_events=6):
    """Known fixation/blink intervals separated by 2 far-apart noise frames."""
    points = []
    truth = []
    corners = [(0.05, 0.05), (0.95, 0.95), (0.05, 0.95), (0.95, 0.05)]
    centers = [(0.3, 0.3), (0.7, 0.3), (0.3, 0.7), (0.7, 0.7), (0.5, 0.2), (0.2, 0.5)]
    ci = 0
    for k in range(n_events):
        kind = "blink" if k % 3 == 2 else "fix"
        length = int(rng.integers(3, 7))
        start = len(points)
        if kind == "blink":
            points.extend([(0.0, 0.0, 0.0)] * length)
        else:
            cx, cy = centers[ci % len(centers)]
            ci += 1
            for _ in range(length):
                points.append(
                    (cx + rng.uniform(-0.005, 0.005), cy + rng.uniform(-0.005, 0.005))
                )
        truth.append((kind, start, len(points) - 1))
        points.append(corners[k % 4])
        points.append(corners[(k + 1) % 4])
    return make_stream(points), truth


def test_planted_events_recovered_exactly():
    rng = np.random.default_rng(42)
    for _ in range(100):
        stream, truth = _planted_stream(rng)
        fixations = detect_fixations(stream)
        blinks = detect_blinks(stream)
        got = sorted(
            [("fix", f.start_index, f.end_index) for f in fixations]
            + [("blink", b.start_index, b.end_index) for b in blinks],
            key=lambda t: t[1],
        )
        assert got == truth


def test_blink_basic_and_threshold():
    assert len(detect_blinks(make_stream([(0.0, 0.0, 0.0)] * 5))) == 1
    assert detect_blinks(make_stream([(0.0, 0.0, 0.0)] * 2)) == []


def test_two_zero_runs_give_two_blinks():
    points = (
        [(0.0, 0.0, 0.0)] * 4 + [(0.5, 0.5)] * 3 + [(0.0, 0.0, 0.0)] * 3
    )
    stream = make_stream(points)
    blinks = detect_blinks(stream)
    # oracle: run-length scan
    loss = (stream.x == 0) & (stream.y == 0) & (stream.confidence == 0)
    runs = []
    i = 0
    while i < len(loss):
        if loss[i]:
            j = i
            while j + 1 < len(loss) and loss[j + 1]:
                j += 1
            if j - i + 1 >= 3:
                runs.append((i, j))
            i = j + 1
        else:
            i += 1
    assert [(b.start_index, b.end_index) for b in blinks] == runs
    assert len(blinks) == 2


def test_fixations_and_blinks_never_share_frames():
    rng = np.random.default_rng(7)
    for _ in range(20):
        pts = []
        for _ in range(30):
            if rng.uniform() < 0.3:
                pts.extend([(0.0, 0.0, 0.0)] * int(rng.integers(1, 5)))
            else:
                c = rng.uniform(0.1, 0.9, 2)
                pts.extend([(c[0], c[1])] * int(rng.integers(1, 6)))
        stream = make_stream(pts)
        frames_fix = set()
        for f in detect_fixations(stream):
            frames_fix.update(range(f.start_index, f.end_index + 1))
        for b in detect_blinks(stream):
            assert frames_fix.isdisjoint(range(b.start_index, b.end_index + 1))


def test_event_durations_plus_gaps_reconstruct_recording():
    rng = np.random.default_rng(3)
    stream, _ = _planted_stream(rng)
    fixations = detect_fixations(stream)
    blinks = detect_blinks(stream)
    events = sorted(fixations + blinks, key=lambda e: e.start_index)
    covered = sum(e.n_frames for e in events)
    gaps = len(stream) - covered
    total = (covered + gaps) * stream.frame_period
    assert total == pytest.approx(stream.duration)


def test_saccade_between_two_fixations():
    points = (
        [(0.2, 0.5)] * 4 + [(0.9, 0.1), (0.1, 0.9)] + [(0.6, 0.5)] * 4
    )
    stream = make_stream(points)
    fixations = detect_fixations(stream)
    assert len(fixations) == 2
    saccades = derive_saccades(fixations, [], stream)
    assert len(saccades) == 1
    s = saccades[0]
    assert s.dx == pytest.approx(0.4)
    assert s.dy == pytest.approx(0.0)
    assert s.amplitude == pytest.approx(0.4)
    assert s.duration == pytest.approx(2 * PERIOD)


def test_no_saccade_without_intervening_frame():
    points = [(0.2, 0.5)] * 4 + [(0.0, 0.0, 0.0)] * 4
    stream = make_stream(points)
    fixations = detect_fixations(stream)
    blinks = detect_blinks(stream)
    assert len(fixations) == 1 and len(blinks) == 1
    assert derive_saccades(fixations, blinks, stream) == []


def test_three_fixations_give_two_saccades_matching_centroids():
    centers = [(0.2, 0.2), (0.6, 0.4), (0.3, 0.8)]
    points = []
    for cx, cy in centers:
        points.extend([(cx, cy)] * 4)
        points.append((0.99, 0.01))  # separator far from everything
    stream = make_stream(points)
    fixations = detect_fixations(stream)
    assert len(fixations) == 3
    saccades = derive_saccades(fixations, [], stream)
    assert len(saccades) == 2
    for s, (a, b) in zip(saccades, zip(centers, centers[1:])):
        assert s.dx == pytest.approx(b[0] - a[0])
        assert s.dy == pytest.approx(b[1] - a[1])


def test_blink_endpoints_use_neighbouring_valid_gaze():
    points = (
        [(0.2, 0.2)] * 4
        + [(0.45, 0.45)]          # last valid before the blink
        + [(0.0, 0.0, 0.0)] * 4
        + [(0.55, 0.55)]          # first valid after the blink
        + [(0.8, 0.8)] * 4
    )
    stream = make_stream(points)
    fixations = detect_fixations(stream)
    blinks = detect_blinks(stream)
    saccades = derive_saccades(fixations, blinks, stream)
    assert len(saccades) == 2
    into, outof = saccades
    assert into.dx == pytest.approx(0.45 - 0.2)
    assert outof.dx == pytest.approx(0.8 - 0.55)


@pytest.mark.parametrize(
    "dx,dy,threshold,expect",
    [
        (0.4, 0.01, 0.1, ("R", "R")),
        (-0.05, 0.0, 0.1, ("L", "l")),
        (0.0, 0.2, 0.1, ("U", "U")),
        (0.0, -0.02, 0.1, ("D", "d")),
        (0.0, 0.0, 0.1, ("R", "r")),  # tie-break to positive x
    ],
)
def test_encode_direction_cases(dx, dy, threshold, expect):
    assert encode_direction(dx, dy, threshold) == expect


def test_encode_matches_independent_predicate():
    rng = np.random.default_rng(5)
    for _ in range(300):
        dx, dy = rng.normal(0, 0.2, 2)
        thr = rng.uniform(0.05, 0.3)
        char, char_amp = encode_direction(dx, dy, thr)
        # independent reimplementation
        if abs(dx) >= abs(dy):
            want = "R" if dx >= 0 else "L"
        else:
            want = "U" if dy > 0 else "D"
        if np.hypot(dx, dy) < thr:
            want_amp = want.lower()
        else:
            want_amp = want
        assert (char, char_amp) == (want, want_amp)


def test_encode_saccade_reencodes_threshold():
    stream = make_stream([(0.2, 0.5)] * 4 + [(0.9, 0.1)] + [(0.26, 0.5)] * 4)
    fixations = detect_fixations(stream)
    saccades = derive_saccades(fixations, [], stream)
    assert len(saccades) == 1
    assert encode_saccade(saccades[0], amplitude_threshold=0.5) == ("R", "r")
    assert encode_saccade(saccades[0], amplitude_threshold=0.01) == ("R", "R")


def test_min_frames_for_rate():
    assert min_frames_for_rate(30.0) == 3
    assert min_frames_for_rate(60.0) == 6
    assert min_frames_for_rate(25.0) == 3


def test_detect_events_bundles_everything():
    rng = np.random.default_rng(11)
    stream, truth = _planted_stream(rng)
    events = detect_events(stream, participant_id="p1", label="comic")
    assert events.participant_id == "p1"
    assert events.label == "comic"
    n_fix = sum(1 for k, *_ in truth if k == "fix")
    n_blink = sum(1 for k, *_ in truth if k == "blink")
    assert len(events.fixations) == n_fix
    assert len(events.blinks) == n_blink
    assert events.recording_duration == pytest.approx(stream.duration)


def test_stream_validation():
    with pytest.raises(ValueError):
        make_stream([(1.5, 0.5)])
    with pytest.raises(ValueError):
        GazeStream(
            timestamp=np.array([1.0, 0.5]),
            x=np.array([0.1, 0.1]),
            y=np.array([0.1, 0.1]),
            pupil_diameter=np.array([1.0, 1.0]),
            confidence=np.array([1.0, 1.0]),
        )
