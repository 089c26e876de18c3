"""Detect fixations, blinks, and saccades in a synthetic gaze recording.

Generates one 60 s recording with the comic reading profile, runs the
dispersion-based detector, and prints what it found.
"""
import numpy as np

from gazeadv import DEFAULT_PROFILES, detect_events, generate_stream

stream = generate_stream(DEFAULT_PROFILES["comic"], duration=60.0,
                         rng=np.random.default_rng(7))
print(f"recording: {len(stream)} samples, {stream.duration:.1f} s at "
      f"{1 / stream.frame_period:.0f} Hz")

events = detect_events(stream, participant_id="demo", label="comic")
print(f"fixations: {len(events.fixations)}")
print(f"blinks:    {len(events.blinks)}")
print(f"saccades:  {len(events.saccades)}")

durations = [f.duration for f in events.fixations]
print(f"fixation duration: mean {np.mean(durations):.3f} s, "
      f"max {np.max(durations):.3f} s")

amplitudes = [s.amplitude for s in events.saccades]
print(f"saccade amplitude: mean {np.mean(amplitudes):.3f}, "
      f"max {np.max(amplitudes):.3f} (normalized units)")

symbols = "".join(s.char_dir_amp for s in events.saccades[:40])
print(f"first saccade symbols: {symbols}")
