"""Train the two target classifiers and compare leave-one-person-out folds.

The SVM is the gradient-bearing white-box target; the random forest is the
gradient-free transfer target with its hyperparameters picked on the
held-out participant's validation windows.
"""
import tempfile
import warnings

import numpy as np

from gazeadv import (
    SvmTrainConfig,
    WindowConfig,
    detect_events,
    extract_table,
    load_dataset,
    lopo_folds,
    rf_predict_batch,
    svm_predict_batch,
    sweep_rf_grid,
    synth_generate,
    train_svm,
)

with tempfile.TemporaryDirectory() as tmp:
    synth_generate(tmp, participants=4, duration=80.0, seed=21)
    records = load_dataset(tmp)

events = [detect_events(s, participant_id=m.participant_id, label=m.label)
          for s, m in records]
table = extract_table(events, WindowConfig())
print(f"{len(table)} windows from {len(records)} recordings")

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    folds = lopo_folds(table, validation_count=20)

for fold in folds:
    svm = train_svm(fold.train.values, fold.train.labels,
                    SvmTrainConfig(C=1.0))  # gamma defaults to 1/54
    rf_config, rf, _ = sweep_rf_grid(
        fold.train.values, fold.train.labels,
        fold.validation.values, fold.validation.labels,
        tree_grid=(50, 10), leaf_grid=(10, 5), seed=1,
    )
    y = np.asarray([str(v) for v in fold.test.labels], dtype=object)
    svm_acc = np.mean(svm_predict_batch(svm, fold.test.values) == y)
    rf_acc = np.mean(rf_predict_batch(rf, fold.test.values) == y)
    print(f"held out {fold.held_out_participant}: SVM {svm_acc:.3f}, "
          f"RF {rf_acc:.3f} (best grid: {rf_config.n_trees} trees, "
          f"{rf_config.min_samples_leaf} per leaf)")
