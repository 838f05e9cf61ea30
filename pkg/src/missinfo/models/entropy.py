"""Entropy benchmark over finite configuration spaces with a uniform null.

Per family, the information content is one minus the ratio of the posterior
entropy to the maximal (uniform-null) entropy, in bits.  The global value
pools entropies across families before taking the ratio.  This is the
classical genome-scan information display; it measures certainty about the
whole configuration space rather than about any particular test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..model_api import DataError


@dataclass(frozen=True)
class EntropyReport:
    per_family: tuple[float, ...]
    global_value: float
    excluded: tuple[int, ...]
    flags: tuple[str, ...]


def _entropy_bits(p: np.ndarray) -> float:
    mask = p > 0
    return float(-(p[mask] * np.log2(p[mask])).sum())


def entropy_measure(families: Sequence[Sequence[float]]) -> EntropyReport:
    """Per-family and pooled entropy information for posterior distributions.

    Each family supplies its posterior over a finite configuration space on
    which the null is uniform.  Families whose space has a single point carry
    no null entropy and are excluded (flagged).
    """
    if not families:
        raise DataError("no families given")
    per: list[float] = []
    excluded: list[int] = []
    tot_e = tot_e0 = 0.0
    for i, probs in enumerate(families):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DataError(f"family {i}: posterior must be a nonempty vector")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise DataError(f"family {i}: posterior must be a probability vector")
        if p.size == 1:
            excluded.append(i)
            per.append(math.nan)
            continue
        e0 = math.log2(p.size)
        e = _entropy_bits(p)
        per.append(1.0 - e / e0)
        tot_e += e
        tot_e0 += e0
    flags = ("zero_entropy_null_excluded",) if excluded else ()
    if tot_e0 == 0:
        raise DataError("every family has a single-point configuration space")
    return EntropyReport(tuple(per), 1.0 - tot_e / tot_e0, tuple(excluded), flags)
