"""
src/scenarios/exporters.py
--------------------------

CSV / JSON artifact writers. Every written file is recorded in the run's
file list so the manifest stays complete.
"""

import json
import logging
import math
import os

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


def to_builtin(obj):
    """JSON default hook for numpy scalars / arrays and non-finite floats."""
    if isinstance(obj, np.ndarray):
        return [to_builtin(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, dict):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    return obj


class ArtifactWriter:
    """Writes artifacts under one output directory and remembers them."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.files = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def csv(self, frame: pd.DataFrame, name: str) -> str:
        path = self.path(name)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        self.files.append(name)
        logger.info(f"✅ Saved {name} ({len(frame)} rows)")
        return path

    def json(self, obj, name: str) -> str:
        path = self.path(name)
        with open(path, "w") as f:
            json.dump(to_builtin(obj), f, indent=2, sort_keys=True)
        self.files.append(name)
        logger.info(f"✅ Saved {name}")
        return path


def describe(frame: pd.DataFrame) -> dict:
    """Summary statistics of the numeric columns (DataFrame.describe)."""
    numeric = frame.select_dtypes(include=["number"])
    if numeric.empty:
        return {}
    return to_builtin(numeric.describe().to_dict())
