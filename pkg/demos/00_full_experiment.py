"""End-to-end run at toy scale: synthesis through report CSVs.

The same pipeline as `gazeadv run`; see table3.csv in the output directory
for the summary grid (accuracy and distance rows by attack type, model,
and scope).
"""
import tempfile
import warnings
from pathlib import Path

from gazeadv import ExperimentConfig, run_experiment
from gazeadv.evaluation import read_table

with tempfile.TemporaryDirectory() as tmp:
    config = ExperimentConfig(
        seed=6,
        output_dir=str(Path(tmp) / "run"),
        validation_count=10,
        participants=3,
        duration=80.0,
        rf_tree_grid=(50, 10),
        rf_leaf_grid=(10, 5),
        save_models=False,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        paths = run_experiment(config, log=print)

    cells = read_table(paths["table3"])
    print("\nuntargeted column of the summary table:")
    for key in sorted(cells):
        value = cells[key]["untargeted"]
        rendered = "-" if value is None else f"{value:.3f}"
        print(f"  {' / '.join(key):45s} {rendered}")
