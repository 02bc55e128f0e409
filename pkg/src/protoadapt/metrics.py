"""Uncertainty evaluation: accuracy, calibration error with equal-width and
equal-count binning, and confidence-gated selective classification.

All values here are fractions in [0, 1]; rendering as percentages is left
to the CLI layer.

Binning conventions (fixed so golden tests are exact):
  * equal-width bins are half-open (lo, hi] over (0, 1], with a confidence
    of exactly 0 assigned to the first bin;
  * equal-count binning sorts by confidence descending (stable on ties),
    and the first n mod B groups take the extra element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParamError


@dataclass
class PredictionRecord:
    confidence: float  # max predicted probability, in [0, 1]
    predicted: int
    label: int


def records_from_probs(p: np.ndarray, labels: np.ndarray) -> list[PredictionRecord]:
    """Build records from a row-stochastic matrix: argmax and row max."""
    p = np.asarray(p, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if p.ndim != 2 or labels.shape != (p.shape[0],):
        raise DataError("probability matrix and labels do not match")
    preds = p.argmax(axis=1)
    confs = p.max(axis=1)
    return [
        PredictionRecord(float(c), int(pr), int(la))
        for c, pr, la in zip(confs, preds, labels)
    ]


def _as_arrays(records) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(records) == 0:
        raise DataError("no prediction records")
    conf = np.array([r.confidence for r in records], dtype=np.float64)
    pred = np.array([r.predicted for r in records], dtype=np.int64)
    label = np.array([r.label for r in records], dtype=np.int64)
    if np.any(conf < 0) or np.any(conf > 1) or not np.all(np.isfinite(conf)):
        raise DataError("confidences must lie in [0, 1]")
    return conf, pred, label


def accuracy(records) -> float:
    conf, pred, label = _as_arrays(records)
    return float(np.mean(pred == label))


def _width_bin_index(conf: np.ndarray, b: int) -> np.ndarray:
    idx = np.ceil(conf * b).astype(np.int64) - 1
    idx[conf == 0.0] = 0
    return np.clip(idx, 0, b - 1)


def ece(records, b: int = 10) -> float:
    """Expected calibration error over B equal-width confidence bins.

    Sum over bins of q_b * |acc_b - conf_b| with q_b the sample fraction in
    the bin; empty bins contribute nothing.
    """
    if b < 1:
        raise ParamError("need at least one bin")
    conf, pred, label = _as_arrays(records)
    idx = _width_bin_index(conf, b)
    correct = (pred == label).astype(np.float64)
    total = 0.0
    for k in range(b):
        mask = idx == k
        cnt = int(mask.sum())
        if cnt == 0:
            continue
        total += (cnt / conf.size) * abs(correct[mask].mean() - conf[mask].mean())
    return float(total)


def _count_groups(n: int, b: int) -> list[int]:
    # First n mod B groups take the extra element; group sizes differ by <= 1.
    base, extra = divmod(n, b)
    return [base + 1] * extra + [base] * (b - extra)


def aece(records, b: int = 10) -> float:
    """Adaptive calibration error: equal-count bins instead of equal-width."""
    if b < 1:
        raise ParamError("need at least one bin")
    conf, pred, label = _as_arrays(records)
    order = np.argsort(-conf, kind="stable")
    correct = (pred == label).astype(np.float64)[order]
    conf = conf[order]
    total = 0.0
    start = 0
    for size in _count_groups(conf.size, b):
        if size == 0:
            continue
        sl = slice(start, start + size)
        total += (size / conf.size) * abs(correct[sl].mean() - conf[sl].mean())
        start += size
    return float(total)


@dataclass
class CoverageReport:
    """Selective classification at one confidence level.

    `reliable` is true only when the selection is nonempty and its accuracy
    reaches the level. An empty selection reports zero coverage and is not
    reliable: it cannot certify anything.
    """

    level: float
    coverage: float
    selected_accuracy: float
    reliable: bool
    classwise_coverage: float
    n_selected: int

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "coverage": self.coverage,
            "selected_accuracy": self.selected_accuracy,
            "reliable": self.reliable,
            "classwise_coverage": self.classwise_coverage,
            "n_selected": self.n_selected,
        }


def coverage_at(records, level: float, n_classes: int | None = None) -> CoverageReport:
    """Keep records with confidence >= level and grade the kept subset."""
    if not 0.0 < level < 1.0:
        raise ParamError("level must lie in (0, 1)")
    conf, pred, label = _as_arrays(records)
    if n_classes is None:
        n_classes = int(max(pred.max(), label.max())) + 1
    sel = conf >= level
    n_sel = int(sel.sum())
    if n_sel == 0:
        return CoverageReport(level, 0.0, 0.0, False, 0.0, 0)
    sel_acc = float(np.mean(pred[sel] == label[sel]))
    return CoverageReport(
        level=level,
        coverage=n_sel / conf.size,
        selected_accuracy=sel_acc,
        reliable=sel_acc >= level,
        classwise_coverage=np.unique(label[sel]).size / n_classes,
        n_selected=n_sel,
    )


@dataclass
class CalibrationBin:
    lo: float
    hi: float
    count: int
    mean_confidence: float | None
    accuracy: float | None
    weight: float

    def to_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "count": self.count,
            "mean_confidence": self.mean_confidence,
            "accuracy": self.accuracy,
            "weight": self.weight,
        }


@dataclass
class CalibrationReport:
    bins: list[CalibrationBin]
    ece: float
    aece: float
    overall_accuracy: float
    overall_mean_confidence: float

    def to_dict(self) -> dict:
        return {
            "bins": [b.to_dict() for b in self.bins],
            "ece": self.ece,
            "aece": self.aece,
            "overall_accuracy": self.overall_accuracy,
            "overall_mean_confidence": self.overall_mean_confidence,
        }


def calibration_bins(records, b: int = 10) -> CalibrationReport:
    """Per-bin table behind the calibration plots, plus both error scores."""
    if b < 1:
        raise ParamError("need at least one bin")
    conf, pred, label = _as_arrays(records)
    idx = _width_bin_index(conf, b)
    correct = (pred == label).astype(np.float64)
    bins = []
    for k in range(b):
        mask = idx == k
        cnt = int(mask.sum())
        bins.append(
            CalibrationBin(
                lo=k / b,
                hi=(k + 1) / b,
                count=cnt,
                mean_confidence=float(conf[mask].mean()) if cnt else None,
                accuracy=float(correct[mask].mean()) if cnt else None,
                weight=cnt / conf.size,
            )
        )
    return CalibrationReport(
        bins=bins,
        ece=ece(records, b),
        aece=aece(records, b),
        overall_accuracy=float(correct.mean()),
        overall_mean_confidence=float(conf.mean()),
    )
