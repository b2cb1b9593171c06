"""JSON checkpoints and loss-history CSVs shared by the neural models."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def save_arrays(arrays: dict[str, np.ndarray], path, meta: dict | None = None) -> None:
    """Write ``name -> {"shape": [...], "data": [row-major values]}`` as JSON."""
    doc = {
        name: {"shape": list(np.shape(a)), "data": np.asarray(a, dtype=float).ravel().tolist()}
        for name, a in arrays.items()
    }
    if meta:
        doc["__meta__"] = meta
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    doc = json.loads(Path(path).read_text())
    meta = doc.pop("__meta__", {})
    arrays = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in doc.items()}
    return arrays, meta


def write_loss_csv(history, path) -> None:
    """``history`` is a sequence of ``(train_loss, val_loss)`` pairs."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, (tr, va) in enumerate(history, start=1):
            w.writerow([epoch, repr(float(tr)), "" if va is None or math.isnan(va) else repr(float(va))])


def read_loss_csv(path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [(float(r["train_loss"]), float(r["val_loss"]) if r["val_loss"] else math.nan) for r in rows]
