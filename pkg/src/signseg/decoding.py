"""Segment decoders over frame probabilities, plus threshold grid tuning.

Probabilities arrive as (T, 3) rows of (B, I, O) scaled to [0, 100]. The
threshold decoder follows the published greedy algorithm: open at the first
frame whose B probability clears threshold_b; once B has dropped below the
threshold the segment closes at the first frame whose B or O probability
clears its threshold, yielding the half-open [start, close). A closing B does
not open a new segment (that quirk is kept; strict_bio adds the reopen).
"""

from dataclasses import dataclass
from enum import Enum
from itertools import product

import numpy as np

from .tags import B, I, O, Segment

DEFAULT_GRID = tuple(range(10, 91, 10))

_ROW_SUM_TOL = 0.5


class DecodeMode(Enum):
    THRESHOLD = "threshold"
    ARGMAX = "argmax"


@dataclass(frozen=True)
class DecodeParams:
    threshold_b: float = 50.0
    threshold_o: float = 50.0
    mode: DecodeMode = DecodeMode.THRESHOLD
    strict_bio: bool = False

    def __post_init__(self):
        for v in (self.threshold_b, self.threshold_o):
            if not 0 <= v <= 100:
                raise ValueError(f"threshold {v} outside [0, 100]")


def _check_rows(probs) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2 or probs.shape[1] != 3:
        raise ValueError(f"probability rows must be (T, 3), got {probs.shape}")
    if len(probs) and np.abs(probs.sum(axis=1) - 100.0).max() > _ROW_SUM_TOL:
        raise ValueError("probability rows must sum to 100 (0-100 scale)")
    return probs


def greedy_decode(probs, params: DecodeParams) -> list[Segment]:
    probs = _check_rows(probs)
    tb, to = params.threshold_b, params.threshold_o
    out: list[Segment] = []
    start = None
    did_pass = False
    for t in range(len(probs)):
        b, o = probs[t, B], probs[t, O]
        if start is None:
            if b > tb:
                start = t
                did_pass = False
            continue
        if not did_pass and b < tb:
            did_pass = True
        if did_pass and (b > tb or o > to):
            out.append(Segment(start, t))
            start = None
            did_pass = False
            if params.strict_bio and b > tb:
                start = t
    if start is not None:
        out.append(Segment(start, len(probs)))
    return out


def argmax_decode(probs, params: DecodeParams = None) -> list[Segment]:
    """Span scan over per-frame argmax labels; ties resolve B, then I, then O.

    Matches gold-tag decoding exactly, including back-to-back segments and
    the orphan-I repair.
    """
    probs = _check_rows(probs)
    labels = probs.argmax(axis=1)  # argmax returns the first max: B < I < O tie order
    out: list[Segment] = []
    start = None
    for t, lab in enumerate(labels):
        if lab == B:
            if start is not None:
                out.append(Segment(start, t))
            start = t
        elif lab == I:
            if start is None:
                start = t
        else:
            if start is not None:
                out.append(Segment(start, t))
                start = None
    if start is not None:
        out.append(Segment(start, len(labels)))
    return out


def decode(probs, params: DecodeParams) -> list[Segment]:
    if params.mode is DecodeMode.ARGMAX:
        return argmax_decode(probs, params)
    return greedy_decode(probs, params)


@dataclass(frozen=True)
class TuneCell:
    threshold_b: float
    threshold_o: float
    iou: float
    percentage: float


def tune_thresholds(dev_set, grid=DEFAULT_GRID, strict_bio: bool = False):
    """Exhaustive (threshold_b, threshold_o) grid search over a dev set.

    dev_set: list of (probs, gold segments) pairs for one tier. Objective is
    lexicographic: max pooled IoU, then min |percentage - 1|, then the smaller
    pair. Returns (threshold_b, threshold_o, table of every grid cell).
    """
    if not dev_set:
        raise ValueError("dev set is empty")
    dev = [(_check_rows(p), sorted(g)) for p, g in dev_set]
    if sum(len(g) for _, g in dev) == 0:
        raise ValueError("dev set has no gold segments")
    table = []
    best = None
    best_key = None
    for tb, to in product(grid, repeat=2):
        params = DecodeParams(tb, to, DecodeMode.THRESHOLD, strict_bio)
        inter = union = 0
        n_pred = n_gold = 0
        for probs, gold in dev:
            t_len = len(probs)
            pred = greedy_decode(probs, params)
            pmask = np.zeros(t_len, dtype=bool)
            gmask = np.zeros(t_len, dtype=bool)
            for s in pred:
                pmask[s.start:s.end] = True
            for s in gold:
                gmask[s.start:s.end] = True
            inter += int((pmask & gmask).sum())
            union += int((pmask | gmask).sum())
            n_pred += len(pred)
            n_gold += len(gold)
        iou = inter / union if union else 1.0
        pct = n_pred / n_gold
        table.append(TuneCell(tb, to, iou, pct))
        key = (-iou, abs(pct - 1.0), tb, to)
        if best_key is None or key < best_key:
            best_key = key
            best = (tb, to)
    return best[0], best[1], table
