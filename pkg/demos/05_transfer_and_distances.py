"""Transfer SVM-crafted adversarial examples to the forest; compare distances.

Shows the two evaluation angles: how often adversarial examples fool the
gradient-free model they were not crafted for, and whether perturbations
stay small next to the naturally occurring distances between test samples.
"""
import tempfile
import warnings

import numpy as np

from gazeadv import (
    AttackConfig,
    RfTrainConfig,
    SvmTrainConfig,
    WindowConfig,
    detect_events,
    distance_stats,
    extract_table,
    load_dataset,
    lopo_folds,
    minimal_sweep,
    synth_generate,
    train_rf,
    train_svm,
    transfer_evaluate,
)

with tempfile.TemporaryDirectory() as tmp:
    synth_generate(tmp, participants=3, duration=80.0, seed=13)
    records = load_dataset(tmp)
events = [detect_events(s, participant_id=m.participant_id, label=m.label)
          for s, m in records]
table = extract_table(events, WindowConfig())
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    fold = lopo_folds(table, validation_count=10)[0]

svm = train_svm(fold.train.values, fold.train.labels, SvmTrainConfig())
rf = train_rf(fold.train.values, fold.train.labels,
              RfTrainConfig(n_trees=50, min_samples_leaf=10, seed=2))

config = AttackConfig(mode="minimal", eps_step=0.1, eps_max=2.0)
sweep = minimal_sweep(svm, fold.test.values, fold.test.labels, config)
adversarial = sweep.adversarial_at(2.0)

svm_after = sweep.accuracy_at(2.0)
rf_benign = transfer_evaluate(fold.test.values, fold.test.labels, rf)
rf_after = transfer_evaluate(adversarial, fold.test.labels, rf)
print(f"SVM accuracy after attack: {svm_after:.3f}")
print(f"RF accuracy benign:        {rf_benign:.3f}")
print(f"RF accuracy on transfer:   {rf_after:.3f}  "
      f"(between the two, as expected)")

stats = distance_stats(fold.test.values, adversarial)
print(f"\nmean benign pairwise distance:      {stats.mean_benign_pairwise:.3f}")
print(f"mean benign-to-adversarial distance: {stats.mean_adversarial:.3f}")
print(f"Welch t={stats.welch.t_statistic:.1f}, df={stats.welch.degrees_of_freedom:.1f}, "
      f"p={stats.welch.p_value:.3e}")
print("perturbations are small relative to natural sample spacing"
      if stats.mean_adversarial < stats.mean_benign_pairwise
      else "perturbations exceed natural sample spacing")
