"""JSON forms of operators, plus the number formatting used by CLI output."""
from __future__ import annotations

import json
import math

import numpy as np

from ._validation import as_square, num_qudits

SCHEMA_VERSION = 1


def operator_to_dict(X, d: int = 3) -> dict:
    X = as_square(X)
    return {"d": int(d), "n": num_qudits(X.shape[0], d), "re": X.real.tolist(), "im": X.imag.tolist()}


def operator_from_dict(data: dict) -> np.ndarray:
    X = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data.get("im", 0.0), dtype=float)
    X = as_square(X)
    if X.shape[0] != int(data["d"]) ** int(data["n"]):
        raise ValueError(f"operator of size {X.shape[0]} does not match d={data['d']}, n={data['n']}")
    return X


def load_operator(path: str) -> tuple[np.ndarray, int]:
    with open(path) as fh:
        data = json.load(fh)
    return operator_from_dict(data), int(data["d"])


def fmt(x):
    """Round floats to 12 significant digits so repeated runs print identical JSON."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x) or math.isnan(x):
            return str(x)
        return float(f"{x:.12g}")
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, dict):
        return {k: fmt(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [fmt(v) for v in x]
    if isinstance(x, np.ndarray):
        return fmt(x.tolist())
    return x


def dumps(obj) -> str:
    return json.dumps(fmt(obj), sort_keys=True)
