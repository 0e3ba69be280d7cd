"""Strict and relaxed segmentation metrics.

Relaxed precision counts a predicted building pixel as correct when some
ground-truth building pixel lies within ``rho`` pixels; relaxed recall is the
same with the roles swapped. Relaxed IoU is ``rTP / (rTP + rFP + rFN)`` with
``rTP = |pred & dilate(gt)|``, ``rFP = |pred| - rTP`` and
``rFN = |gt| - |gt & dilate(pred)|``.

Every ratio whose numerator and denominator are both zero is reported as 1.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

DISTANCES = ("euclidean", "chebyshev")
RELAXED_IOU_DEFINITION = "relaxed_iou = rTP / (rTP + rFP + rFN); rTP = |pred & dilate(gt)|, rFP = |pred| - rTP, rFN = |gt| - |gt & dilate(pred)|"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class RelaxedParams:
    rho: int = 3
    distance: str = "euclidean"

    def __post_init__(self):
        if self.rho < 0 or int(self.rho) != self.rho:
            raise ValueError(f"rho must be a nonnegative integer, got {self.rho}")
        if self.distance not in DISTANCES:
            raise ValueError(f"unknown distance {self.distance!r}; expected one of {DISTANCES}")


@dataclass(frozen=True)
class RelaxedCounts:
    """Raw tallies behind the relaxed ratios, summable across tiles."""

    pred_pos: int = 0
    gt_pos: int = 0
    pred_near_gt: int = 0  # |pred & dilate(gt)|
    gt_near_pred: int = 0  # |gt & dilate(pred)|

    def __add__(self, other: RelaxedCounts) -> RelaxedCounts:
        return RelaxedCounts(
            self.pred_pos + other.pred_pos,
            self.gt_pos + other.gt_pos,
            self.pred_near_gt + other.pred_near_gt,
            self.gt_near_pred + other.gt_near_pred,
        )


def _ratio(num: int, den: int) -> float:
    if den == 0:
        if num:
            raise ZeroDivisionError(f"{num}/0")
        return 1.0
    return num / den


def _harmonic(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    return pred.astype(bool), gt.astype(bool)


def binarize(prob: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return (np.asarray(prob) >= threshold).astype(np.uint8)


def confusion(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    p, g = _check_pair(pred, gt)
    return ConfusionCounts(
        tp=int(np.count_nonzero(p & g)),
        tn=int(np.count_nonzero(~p & ~g)),
        fp=int(np.count_nonzero(p & ~g)),
        fn=int(np.count_nonzero(~p & g)),
    )


def strict_metrics(c: ConfusionCounts) -> dict[str, float]:
    if c.total == 0:
        raise ValueError("no pixels evaluated")
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    return {
        "accuracy": (c.tp + c.tn) / c.total,
        "precision": precision,
        "recall": recall,
        "f1": _harmonic(precision, recall),
        "iou": _ratio(c.tp, c.tp + c.fp + c.fn),
    }


def structuring_offsets(params: RelaxedParams) -> list[tuple[int, int]]:
    r = params.rho
    offs = []
    for di in range(-r, r + 1):
        for dj in range(-r, r + 1):
            if params.distance == "chebyshev" or di * di + dj * dj <= r * r:
                offs.append((di, dj))
    return offs


def dilate(mask: np.ndarray, params: RelaxedParams = RelaxedParams()) -> np.ndarray:
    """Set every pixel within ``rho`` (per ``params.distance``) of a positive pixel."""
    m = np.asarray(mask).astype(bool)
    if params.rho == 0:
        return m.astype(np.uint8)
    h, w = m.shape
    out = np.zeros_like(m)
    for di, dj in structuring_offsets(params):
        # out[i, j] |= m[i - di, j - dj]
        out[max(di, 0) : h + min(di, 0), max(dj, 0) : w + min(dj, 0)] |= m[
            max(-di, 0) : h + min(-di, 0), max(-dj, 0) : w + min(-dj, 0)
        ]
    return out.astype(np.uint8)


def relaxed_counts(pred: np.ndarray, gt: np.ndarray, params: RelaxedParams = RelaxedParams()) -> RelaxedCounts:
    p, g = _check_pair(pred, gt)
    return RelaxedCounts(
        pred_pos=int(np.count_nonzero(p)),
        gt_pos=int(np.count_nonzero(g)),
        pred_near_gt=int(np.count_nonzero(p & dilate(g, params).astype(bool))),
        gt_near_pred=int(np.count_nonzero(g & dilate(p, params).astype(bool))),
    )


def relaxed_from_counts(rc: RelaxedCounts) -> dict[str, float]:
    rp = _ratio(rc.pred_near_gt, rc.pred_pos)
    rr = _ratio(rc.gt_near_pred, rc.gt_pos)
    rtp = rc.pred_near_gt
    rfp = rc.pred_pos - rtp
    rfn = rc.gt_pos - rc.gt_near_pred
    return {
        "relaxed_precision": rp,
        "relaxed_recall": rr,
        "relaxed_f1": _harmonic(rp, rr),
        "relaxed_iou": _ratio(rtp, rtp + rfp + rfn),
    }


def relaxed_pr(pred, gt, params: RelaxedParams = RelaxedParams()) -> tuple[float, float]:
    r = relaxed_from_counts(relaxed_counts(pred, gt, params))
    return r["relaxed_precision"], r["relaxed_recall"]


def relaxed_f1_iou(pred, gt, params: RelaxedParams = RelaxedParams()) -> tuple[float, float]:
    r = relaxed_from_counts(relaxed_counts(pred, gt, params))
    return r["relaxed_f1"], r["relaxed_iou"]


@dataclass(frozen=True)
class MetricReport:
    counts: ConfusionCounts
    relaxed: RelaxedCounts
    params: RelaxedParams = field(default_factory=RelaxedParams)

    @property
    def scores(self) -> dict[str, float]:
        return {**strict_metrics(self.counts), **relaxed_from_counts(self.relaxed)}

    def __getattr__(self, name):
        # accuracy, precision, ..., relaxed_iou
        if name.startswith("_"):
            raise AttributeError(name)
        scores = self.scores
        if name in scores:
            return scores[name]
        raise AttributeError(name)

    def to_dict(self) -> dict:
        return {
            **self.scores,
            "counts": asdict(self.counts),
            "relaxed_counts": asdict(self.relaxed),
            "rho": self.params.rho,
            "distance": self.params.distance,
            "relaxed_iou_definition": RELAXED_IOU_DEFINITION,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [
            f"# rho={self.params.rho} distance={self.params.distance}",
            f"# {RELAXED_IOU_DEFINITION}",
        ]
        for k, v in self.scores.items():
            lines.append(f"{k:<18} = {v:.6f}")
        for k, v in asdict(self.counts).items():
            lines.append(f"{k:<18} = {v}")
        return "\n".join(lines) + "\n"


def evaluate_pair(pred, gt, params: RelaxedParams = RelaxedParams()) -> MetricReport:
    return MetricReport(confusion(pred, gt), relaxed_counts(pred, gt, params), params)


def aggregate(reports: Iterable[MetricReport]) -> MetricReport:
    """Sum raw counts over tiles, then recompute every ratio."""
    reports = list(reports)
    if not reports:
        raise ValueError("cannot aggregate an empty list of reports")
    params = reports[0].params
    if any(r.params != params for r in reports):
        raise ValueError("reports were computed with different relaxation parameters")
    counts = sum((r.counts for r in reports), ConfusionCounts())
    relaxed = sum((r.relaxed for r in reports), RelaxedCounts())
    return MetricReport(counts, relaxed, params)
