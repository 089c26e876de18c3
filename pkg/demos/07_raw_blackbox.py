"""Decision-based attack on raw gaze data, no gradients involved.

The attacker only sees predicted labels from the full pipeline (events ->
features -> SVM) and randomly perturbs single raw samples, keeping every
change while the label has not yet flipped.
"""
import tempfile
import warnings

import numpy as np

from gazeadv import (
    RawAttackConfig,
    SvmTrainConfig,
    WindowConfig,
    detect_events,
    extract_features,
    extract_table,
    load_dataset,
    load_recording,
    lopo_folds,
    raw_blackbox_attack,
    slide_windows,
    svm_predict_batch,
    synth_generate,
    train_svm,
)

with tempfile.TemporaryDirectory() as tmp:
    written = synth_generate(tmp, participants=3, duration=60.0, seed=17)
    records = load_dataset(tmp)
    target_path = written[1][0]  # p01's newspaper recording
    events = [detect_events(s, participant_id=m.participant_id, label=m.label)
              for s, m in records]
    table = extract_table(events, WindowConfig())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fold = lopo_folds(table, validation_count=5)[0]
    model = train_svm(fold.train.values, fold.train.labels, SvmTrainConfig())

    stream, meta = load_recording(target_path)
    window = WindowConfig(window_size=45.0)

    def predictor(candidate):
        ev = detect_events(candidate, participant_id=meta.participant_id,
                           label=meta.label)
        vec = extract_features(slide_windows(ev, window)[0], window)
        return svm_predict_batch(model, vec.values[None, :])[0]

    print(f"attacking recording {target_path.name}: true label {meta.label!r}, "
          f"pipeline says {predictor(stream)!r}")
    config = RawAttackConfig(step_magnitude=0.05, max_magnitude=0.05,
                             query_budget=1200,
                             fields_perturbed=("x", "y", "pupil_diameter"), seed=3)
    perturbed, result = raw_blackbox_attack(stream, predictor, meta.label, config)
    print(f"queries used: {result.queries}, success: {result.success}")
    if result.success:
        print(f"pipeline now says {result.predicted_class!r}")
    else:
        print("budget exhausted without a label flip; decision-based attacks "
              "only see labels and can legitimately fail within budget")
    changed = np.sum((perturbed.x != stream.x) | (perturbed.y != stream.y)
                     | (perturbed.pupil_diameter != stream.pupil_diameter))
    print(f"{changed} of {len(stream)} raw samples were touched; "
          f"total raw-level L2 change {result.eps_used:.3f}")
