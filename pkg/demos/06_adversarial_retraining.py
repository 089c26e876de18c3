"""Defend the SVM by retraining on its own adversarial examples.

Per fold, a seeded 10% of the training rows is attacked against the base
model; the crafted points keep their original labels and are appended
before refitting.  Fresh attacks are then crafted against the retrained
model, so the defense gets no security through staleness.  Takes about
half a minute: the effect is a property of the full leave-one-person-out
average, not of a single toy fold.
"""
import tempfile
import warnings

import numpy as np

from gazeadv import (
    AttackConfig,
    DefenseConfig,
    SvmTrainConfig,
    WindowConfig,
    adversarial_retrain,
    detect_events,
    extract_table,
    load_dataset,
    lopo_folds,
    minimal_sweep,
    synth_generate,
)

with tempfile.TemporaryDirectory() as tmp:
    synth_generate(tmp, participants=5, duration=100.0, seed=6)
    records = load_dataset(tmp)
events = [detect_events(s, participant_id=m.participant_id, label=m.label)
          for s, m in records]
table = extract_table(events, WindowConfig())
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    folds = lopo_folds(table, validation_count=20)

attack = AttackConfig(mode="minimal", eps_step=0.1, eps_max=2.0)
rows = []
for fi, fold in enumerate(folds):
    result = adversarial_retrain(
        fold.train.values, fold.train.labels, SvmTrainConfig(),
        DefenseConfig(fraction=0.1, attack=attack, seed=42 + fi),
    )
    base = minimal_sweep(result.base_model, fold.test.values, fold.test.labels, attack)
    defended = minimal_sweep(result.model, fold.test.values, fold.test.labels, attack)
    rows.append((np.mean(base.correct[:, 0]), np.mean(defended.correct[:, 0]),
                 base.accuracy_at(2.0), defended.accuracy_at(2.0)))
    print(f"fold {fold.held_out_participant}: benign {rows[-1][0]:.3f} -> "
          f"{rows[-1][1]:.3f}, under attack {rows[-1][2]:.3f} -> {rows[-1][3]:.3f}")

arr = np.array(rows)
print(f"\nmean benign accuracy:      base {arr[:, 0].mean():.3f}, "
      f"retrained {arr[:, 1].mean():.3f}  (utility preserved)")
print(f"mean accuracy under attack: base {arr[:, 2].mean():.3f}, "
      f"retrained {arr[:, 3].mean():.3f}  (robustness gained)")
