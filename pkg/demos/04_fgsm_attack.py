"""White-box gradient attacks on the SVM: standard vs minimal mode.

Minimal mode grows the perturbation in eps_step increments along one
normalized gradient direction until the prediction flips, so it reports
the smallest sufficient multiple per sample.
"""
import tempfile
import warnings

import numpy as np

from gazeadv import (
    AttackConfig,
    SvmTrainConfig,
    WindowConfig,
    detect_events,
    extract_table,
    fgsm_minimal,
    fgsm_standard,
    load_dataset,
    lopo_folds,
    minimal_sweep,
    synth_generate,
    train_svm,
)

with tempfile.TemporaryDirectory() as tmp:
    synth_generate(tmp, participants=3, duration=80.0, seed=5)
    records = load_dataset(tmp)
events = [detect_events(s, participant_id=m.participant_id, label=m.label)
          for s, m in records]
table = extract_table(events, WindowConfig())
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    fold = lopo_folds(table, validation_count=10)[0]
model = train_svm(fold.train.values, fold.train.labels, SvmTrainConfig())

x, y = fold.test.values[0], str(fold.test.labels[0])
fixed = fgsm_standard(model, x, y, eps=1.0)
print(f"standard eps=1.0: success={fixed.success}, "
      f"perturbation L2={np.linalg.norm(fixed.adversarial - x):.3f}")

config = AttackConfig(mode="minimal", eps_step=0.1, eps_max=2.0)
minimal = fgsm_minimal(model, x, y, config)
print(f"minimal mode: success={minimal.success}, eps_used={minimal.eps_used:.2f}, "
      f"now classified as {minimal.predicted_class!r}")

sweep = minimal_sweep(model, fold.test.values, fold.test.labels, config)
eps_used = sweep.eps_used_at(2.0)[sweep.success_at(2.0)]
print(f"\nwhole test set: {sweep.success_at(2.0).mean():.1%} attacked within "
      f"eps_max=2.0; successful eps median {np.median(eps_used):.2f}")
grid = [round(0.1 * k, 10) for k in range(1, 21)]
curve = sweep.accuracy_curve(grid)
for eps, acc in zip(grid[1::4], curve[1::4]):
    print(f"  accuracy at eps_max {eps:3.1f}: {acc:.3f}")
