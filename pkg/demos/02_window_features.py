"""Slide 45 s windows over an event stream and inspect the 54 features."""
import numpy as np

from gazeadv import (
    DEFAULT_PROFILES,
    FEATURE_NAMES,
    WindowConfig,
    detect_events,
    extract_features,
    generate_stream,
    slide_windows,
)

stream = generate_stream(DEFAULT_PROFILES["newspaper"], duration=90.0,
                         rng=np.random.default_rng(3))
events = detect_events(stream, participant_id="demo", label="newspaper")

config = WindowConfig(window_size=45.0, step=1.0)
windows = slide_windows(events, config)
print(f"{len(windows)} windows of {config.window_size} s, step {config.step} s")

vector = extract_features(windows[0], config)
print(f"feature vector length: {len(vector.values)}")
print("\nblock layout:")
for block, span in (("fixations", slice(0, 8)), ("saccades", slice(8, 20)),
                    ("combined", slice(20, 21)), ("wordbooks", slice(21, 45)),
                    ("blinks", slice(45, 48)), ("pupil", slice(48, 52)),
                    ("reading", slice(52, 54))):
    names = FEATURE_NAMES[span]
    print(f"  {block:10s} {span.stop - span.start:2d} features "
          f"({names[0]} .. {names[-1]})")

print("\nselected values of the first window:")
for name in ("fixation_rate", "saccade_rate", "saccade_ratio_small",
             "wordbook_dir4_n1_max", "blink_rate", "pupil_mean_of_means",
             "reading_quantile_span"):
    print(f"  {name:26s} {vector.values[FEATURE_NAMES.index(name)]:.4f}")
