"""Shared numeric tolerances and the three-way constancy verdict."""

from __future__ import annotations

from typing import Sequence

import numpy as np

TIGHT = 1e-8
LOOSE = 1e-6
GRAY = 1e-3

# admissibility: every sampled 1 - mu*lambda_i must stay above this
MU_MARGIN = 0.05

CONSTANT = "constant"
NON_CONSTANT = "non_constant"
INCONCLUSIVE = "inconclusive"


def spread(samples: Sequence[float]) -> float:
    """``max - min`` of the samples (0 for a single sample)."""
    a = np.asarray(samples, dtype=float)
    return float(a.max() - a.min()) if a.size else 0.0


def classify_spread(s: float, magnitude: float = 0.0, loose: float = LOOSE, gray: float = GRAY) -> str:
    """Constant below ``loose * (1 + |magnitude|)``, non-constant above ``gray``."""
    if s <= loose * (1.0 + abs(magnitude)):
        return CONSTANT
    if s >= gray:
        return NON_CONSTANT
    return INCONCLUSIVE


def classify_samples(samples: Sequence[float], loose: float = LOOSE, gray: float = GRAY) -> tuple[float, str]:
    a = np.asarray(samples, dtype=float)
    s = spread(a)
    mag = float(np.abs(a).max()) if a.size else 0.0
    return s, classify_spread(s, mag, loose, gray)
