"""Recording files, metadata side-cars, and dataset manifests.

A recording is a 5-column CSV (timestamp, x, y, pupil_diameter,
confidence) with a mandatory header.  Per-recording metadata lives in a
JSON side-car next to the file; a dataset directory additionally carries
``manifest.csv`` indexing all recordings.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import GazeStream

RECORDING_COLUMNS = ("timestamp", "x", "y", "pupil_diameter", "confidence")
MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = ("participant_id", "label", "file", "sample_rate_hz")


@dataclass(frozen=True)
class RecordingMeta:
    participant_id: str
    label: str | None = None
    sample_rate_hz: float = 30.0

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def save_recording(path, stream: GazeStream, meta: RecordingMeta | None = None) -> Path:
    """Write a recording CSV (full-precision floats) and its side-car."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORDING_COLUMNS)
        for i in range(len(stream)):
            writer.writerow(
                [
                    repr(float(stream.timestamp[i])),
                    repr(float(stream.x[i])),
                    repr(float(stream.y[i])),
                    repr(float(stream.pupil_diameter[i])),
                    repr(float(stream.confidence[i])),
                ]
            )
    if meta is not None:
        with open(_sidecar_path(path), "w") as fh:
            json.dump(
                {
                    "participant_id": meta.participant_id,
                    "document_label": meta.label,
                    "sample_rate_hz": meta.sample_rate_hz,
                },
                fh,
                indent=1,
            )
    return path


def load_recording(path) -> tuple[GazeStream, RecordingMeta]:
    """Parse and validate a recording; errors name the offending line.

    Metadata comes from the side-car when present, otherwise the file stem
    becomes the participant id.
    """
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != RECORDING_COLUMNS:
            raise ValueError(
                f"{path}:1: expected header {','.join(RECORDING_COLUMNS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            t, x, y, pupil, conf = values
            if not all(np.isfinite(values)):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            if not 0 <= x <= 1 or not 0 <= y <= 1:
                raise ValueError(f"{path}:{lineno}: x and y must lie in [0, 1]")
            if not 0 <= conf <= 1:
                raise ValueError(f"{path}:{lineno}: confidence must lie in [0, 1]")
            if pupil < 0:
                raise ValueError(f"{path}:{lineno}: pupil_diameter must be nonnegative")
            if rows and t < rows[-1][0]:
                raise ValueError(f"{path}:{lineno}: timestamps must be non-decreasing")
            rows.append(values)

    data = np.asarray(rows, dtype=float).reshape(len(rows), 5)
    stream = GazeStream(
        timestamp=data[:, 0],
        x=data[:, 1],
        y=data[:, 2],
        pupil_diameter=data[:, 3],
        confidence=data[:, 4],
    )

    sidecar = _sidecar_path(path)
    if sidecar.exists():
        with open(sidecar) as fh:
            raw = json.load(fh)
        meta = RecordingMeta(
            participant_id=str(raw["participant_id"]),
            label=raw.get("document_label"),
            sample_rate_hz=float(raw.get("sample_rate_hz", 30.0)),
        )
    else:
        meta = RecordingMeta(participant_id=path.stem)
    return stream, meta


def write_manifest(directory, entries) -> Path:
    """entries: iterable of (RecordingMeta, relative file name)."""
    directory = Path(directory)
    path = directory / MANIFEST_NAME
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for meta, name in entries:
            writer.writerow(
                [meta.participant_id, meta.label or "", name, repr(meta.sample_rate_hz)]
            )
    return path


def load_dataset(directory) -> list[tuple[GazeStream, RecordingMeta]]:
    """Load every recording listed in a directory's manifest."""
    directory = Path(directory)
    manifest = directory / MANIFEST_NAME
    if not manifest.exists():
        raise ValueError(f"{directory}: no {MANIFEST_NAME} found")
    out = []
    with open(manifest, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != MANIFEST_COLUMNS:
            raise ValueError(f"{manifest}:1: unexpected manifest header")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ValueError(f"{manifest}:{lineno}: expected 4 fields")
            participant, label, name, rate = row
            stream, _ = load_recording(directory / name)
            out.append(
                (
                    stream,
                    RecordingMeta(
                        participant_id=participant,
                        label=label or None,
                        sample_rate_hz=float(rate),
                    ),
                )
            )
    return out
