"""
Artifact Store
Writes run artifacts (JSON reports, CSV tables) to an output directory with
deterministic bytes: sorted keys, fixed float formatting, no timestamps.
"""

import json
import os
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

import config
from src.utils.logger import get_logger

logger = get_logger(__name__)


def _to_builtin(value: Any):
    """json.dump fallback for numpy values."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return str(value)


def dumps(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=_to_builtin) + "\n"


class ArtifactStore:
    def __init__(self, out_dir: str = config.OUTPUT_DIR):
        self.out_dir = out_dir
        os.makedirs(self.out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_json(self, name: str, payload: Dict[str, Any]) -> str:
        path = self.path(name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(dumps(payload))
        logger.info(f"Wrote {path}")
        return path

    def read_json(self, name: str) -> Dict[str, Any]:
        path = name if os.path.isabs(name) or os.path.exists(name) else self.path(name)
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    def write_csv(self, name: str, frame: pd.DataFrame,
                  meta: Optional[Dict[str, Any]] = None) -> str:
        """CSV with 17 significant digits, plus a `<name>.meta.json` sidecar for the run config."""
        path = self.path(name)
        frame.to_csv(path, index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator="\n")
        if meta is not None:
            self.write_json(f"{name}.meta.json", meta)
        logger.info(f"Wrote {path} ({frame.shape[0]} rows)")
        return path
