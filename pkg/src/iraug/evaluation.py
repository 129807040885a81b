"""Detection metric suite.

Pixel-level IoU/Precision/Recall/F1 from TP/FP/FN counts, target-level
Pd/Fa via connected components with greedy centroid matching, the smoothed
IoU training loss, and signal-to-clutter ratio against a dilated background
ring. Fa divides unmatched predicted pixels by total image pixels; reports
surface it raw and in the conventional x1e6 (and x1e3) scalings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import ContractError
from .types import GrayImage, TargetMask, require_same_shape

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)

DEFAULT_CONNECTIVITY = 8
DEFAULT_MATCH_RADIUS = 3.0


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return _STRUCT_4
    if connectivity == 8:
        return _STRUCT_8
    raise ContractError(f"connectivity must be 4 or 8, got {connectivity}")


@dataclass(frozen=True)
class Component:
    pixels: tuple  # ((row, col), ...) sorted
    centroid: tuple  # (row, col) floats
    area: int


@dataclass(frozen=True)
class ComponentSet:
    components: tuple

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i) -> Component:
        return self.components[i]


def connected_components(
    mask: TargetMask, connectivity: int = DEFAULT_CONNECTIVITY
) -> ComponentSet:
    """Label true pixels; components are ordered by (min row, min col)."""
    labels, count = ndimage.label(mask.bits, structure=_structure(connectivity))
    if count == 0:
        return ComponentSet(components=())
    rows, cols = np.nonzero(labels)
    lbls = labels[rows, cols]
    order = np.argsort(lbls, kind="stable")
    rows, cols, lbls = rows[order], cols[order], lbls[order]
    bounds = np.searchsorted(lbls, np.arange(1, count + 2))
    comps = []
    for k in range(count):
        r = rows[bounds[k] : bounds[k + 1]]
        c = cols[bounds[k] : bounds[k + 1]]
        pix = tuple(sorted(zip(r.tolist(), c.tolist())))
        comps.append(
            Component(
                pixels=pix,
                centroid=(float(r.mean()), float(c.mean())),
                area=int(r.size),
            )
        )
    comps.sort(key=lambda comp: (min(p[0] for p in comp.pixels),
                                 min(p[1] for p in comp.pixels)))
    return ComponentSet(components=tuple(comps))


@dataclass(frozen=True)
class PixelMetrics:
    iou: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    vacuous: bool = False  # pred and gt both empty


def _pixel_metrics_from_counts(tp: int, fp: int, fn: int) -> PixelMetrics:
    if tp + fp + fn == 0:
        # Both masks empty: vacuously perfect, flagged.
        return PixelMetrics(1.0, 1.0, 1.0, 1.0, 0, 0, 0, vacuous=True)
    iou = tp / (tp + fp + fn)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return PixelMetrics(iou, precision, recall, f1, tp, fp, fn)


def pixel_metrics(pred: TargetMask, gt: TargetMask) -> PixelMetrics:
    require_same_shape(pred, gt)
    tp = int(np.logical_and(pred.bits, gt.bits).sum())
    fp = int(np.logical_and(pred.bits, ~gt.bits).sum())
    fn = int(np.logical_and(~pred.bits, gt.bits).sum())
    return _pixel_metrics_from_counts(tp, fp, fn)


@dataclass(frozen=True)
class TargetMetrics:
    pd: float
    fa: float  # false-alarm pixels per image pixel
    detected_targets: int
    total_targets: int
    false_alarm_components: int
    false_alarm_pixels: int
    total_pixels: int
    no_gt_targets: bool = False  # pd reported as 1.0 with nothing to miss

    @property
    def fa_per_million(self) -> float:
        return self.fa * 1e6

    @property
    def fa_per_thousand(self) -> float:
        return self.fa * 1e3


def _qualifies(pred_comp: Component, gt_comp: Component, radius: float) -> bool:
    dr = pred_comp.centroid[0] - gt_comp.centroid[0]
    dc = pred_comp.centroid[1] - gt_comp.centroid[1]
    if math.hypot(dr, dc) <= radius:
        return True
    return not set(pred_comp.pixels).isdisjoint(gt_comp.pixels)


def match_components(
    pred_set: ComponentSet, gt_set: ComponentSet, match_radius: float
) -> list[tuple[int, int]]:
    """Greedy one-to-one matching of qualifying (pred, gt) pairs by
    ascending centroid distance. Returns (pred_index, gt_index) pairs."""
    candidates = []
    for pi, pc in enumerate(pred_set):
        for gi, gc in enumerate(gt_set):
            if _qualifies(pc, gc, match_radius):
                dr = pc.centroid[0] - gc.centroid[0]
                dc = pc.centroid[1] - gc.centroid[1]
                candidates.append((math.hypot(dr, dc), pi, gi))
    candidates.sort()
    matched, used_pred, used_gt = [], set(), set()
    for _, pi, gi in candidates:
        if pi in used_pred or gi in used_gt:
            continue
        matched.append((pi, gi))
        used_pred.add(pi)
        used_gt.add(gi)
    return matched


def target_metrics(
    pred: TargetMask,
    gt: TargetMask,
    match_radius: float = DEFAULT_MATCH_RADIUS,
    connectivity: int = DEFAULT_CONNECTIVITY,
) -> TargetMetrics:
    require_same_shape(pred, gt)
    pred_set = connected_components(pred, connectivity)
    gt_set = connected_components(gt, connectivity)
    matched = match_components(pred_set, gt_set, match_radius)
    matched_preds = {pi for pi, _ in matched}
    fa_comps = [c for i, c in enumerate(pred_set) if i not in matched_preds]
    fa_pixels = sum(c.area for c in fa_comps)
    total_pixels = pred.width * pred.height
    total = len(gt_set)
    if total == 0:
        pd, flag = 1.0, True
    else:
        pd, flag = len(matched) / total, False
    return TargetMetrics(
        pd=pd,
        fa=fa_pixels / total_pixels,
        detected_targets=len(matched),
        total_targets=total,
        false_alarm_components=len(fa_comps),
        false_alarm_pixels=fa_pixels,
        total_pixels=total_pixels,
        no_gt_targets=flag,
    )


def soft_iou_loss(pred, label: TargetMask, a: float) -> float:
    """Smoothed IoU segmentation loss:
    1 - (sum(p*l) + a) / (sum(p) + sum(l) - sum(p*l) + a)."""
    if a <= 0:
        raise ContractError(f"smoothing constant must be > 0, got {a}")
    p = pred.pixels if isinstance(pred, GrayImage) else np.asarray(pred, dtype=float)
    if p.shape != label.shape:
        raise ContractError(f"dimension mismatch: {p.shape} vs {label.shape}")
    if p.min() < 0.0 or p.max() > 1.0:
        raise ContractError("prediction map must lie in [0,1]")
    l = label.bits.astype(np.float64)
    inter = float((p * l).sum())
    union = float(p.sum() + l.sum()) - inter
    return 1.0 - (inter + a) / (union + a)


@dataclass(frozen=True)
class ScrReport:
    scr: float
    per_target: tuple
    infinite_background: bool = False  # zero clutter std with distinct means


def compute_scr(image: GrayImage, mask: TargetMask, bg_ring: int) -> ScrReport:
    """(target mean - background mean) / background std, background drawn
    from a bg_ring-wide dilation ring around each target, averaged over
    targets. Zero-std backgrounds yield a flagged +inf sentinel."""
    require_same_shape(image, mask)
    if bg_ring < 1:
        raise ContractError(f"bg_ring must be >= 1, got {bg_ring}")
    comps = connected_components(mask)
    if len(comps) == 0:
        raise ContractError("SCR needs at least one target pixel")
    values, flagged = [], False
    for comp in comps:
        comp_mask = np.zeros(mask.shape, dtype=bool)
        rows = [p[0] for p in comp.pixels]
        cols = [p[1] for p in comp.pixels]
        comp_mask[rows, cols] = True
        ring = ndimage.binary_dilation(comp_mask, _STRUCT_8, iterations=bg_ring)
        ring &= ~mask.bits
        if not ring.any():
            raise ContractError("background ring empty around a target")
        mean_t = float(image.pixels[comp_mask].mean())
        bg = image.pixels[ring]
        mean_b, std_b = float(bg.mean()), float(bg.std())
        if std_b == 0.0:
            if mean_t == mean_b:
                values.append(0.0)
            else:
                values.append(math.inf)
                flagged = True
        else:
            values.append((mean_t - mean_b) / std_b)
    scr = math.inf if flagged else float(np.mean(values))
    return ScrReport(scr=scr, per_target=tuple(values), infinite_background=flagged)


@dataclass(frozen=True)
class MetricReport:
    """Combined pixel- and target-level scores for one image or a pooled set."""

    iou: float
    precision: float
    recall: float
    f1: float
    pd: float
    fa: float
    tp: int
    fp: int
    fn: int
    detected_targets: int
    total_targets: int
    false_alarm_components: int
    false_alarm_pixels: int
    total_pixels: int
    vacuous_pixel_metrics: bool = False
    no_gt_targets: bool = False

    @property
    def fa_per_million(self) -> float:
        return self.fa * 1e6

    @property
    def fa_per_thousand(self) -> float:
        return self.fa * 1e3

    def to_dict(self) -> dict:
        return {
            "iou": self.iou,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "pd": self.pd,
            "fa": self.fa,
            "fa_per_million": self.fa_per_million,
            "fa_per_thousand": self.fa_per_thousand,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "detected_targets": self.detected_targets,
            "total_targets": self.total_targets,
            "false_alarm_components": self.false_alarm_components,
            "false_alarm_pixels": self.false_alarm_pixels,
            "total_pixels": self.total_pixels,
            "vacuous_pixel_metrics": self.vacuous_pixel_metrics,
            "no_gt_targets": self.no_gt_targets,
        }


def compute_report(
    pred: TargetMask,
    gt: TargetMask,
    match_radius: float = DEFAULT_MATCH_RADIUS,
    connectivity: int = DEFAULT_CONNECTIVITY,
) -> MetricReport:
    pm = pixel_metrics(pred, gt)
    tm = target_metrics(pred, gt, match_radius, connectivity)
    return MetricReport(
        iou=pm.iou, precision=pm.precision, recall=pm.recall, f1=pm.f1,
        pd=tm.pd, fa=tm.fa, tp=pm.tp, fp=pm.fp, fn=pm.fn,
        detected_targets=tm.detected_targets,
        total_targets=tm.total_targets,
        false_alarm_components=tm.false_alarm_components,
        false_alarm_pixels=tm.false_alarm_pixels,
        total_pixels=tm.total_pixels,
        vacuous_pixel_metrics=pm.vacuous,
        no_gt_targets=tm.no_gt_targets,
    )


def aggregate_reports(reports: Sequence[MetricReport]) -> MetricReport:
    """Dataset-level report by pooling raw counts (not averaging rates)."""
    if not reports:
        raise ContractError("nothing to aggregate")
    tp = sum(r.tp for r in reports)
    fp = sum(r.fp for r in reports)
    fn = sum(r.fn for r in reports)
    pm = _pixel_metrics_from_counts(tp, fp, fn)
    detected = sum(r.detected_targets for r in reports)
    total = sum(r.total_targets for r in reports)
    fa_px = sum(r.false_alarm_pixels for r in reports)
    fa_comps = sum(r.false_alarm_components for r in reports)
    pixels = sum(r.total_pixels for r in reports)
    no_gt = total == 0
    return MetricReport(
        iou=pm.iou, precision=pm.precision, recall=pm.recall, f1=pm.f1,
        pd=1.0 if no_gt else detected / total,
        fa=fa_px / pixels,
        tp=tp, fp=fp, fn=fn,
        detected_targets=detected, total_targets=total,
        false_alarm_components=fa_comps, false_alarm_pixels=fa_px,
        total_pixels=pixels,
        vacuous_pixel_metrics=pm.vacuous, no_gt_targets=no_gt,
    )


def mean_iou(reports: Sequence[MetricReport]) -> float:
    """Per-image IoU average, offered alongside the pooled aggregate."""
    if not reports:
        raise ContractError("nothing to average")
    return float(np.mean([r.iou for r in reports]))


def pd_fa_sweep(
    pairs: Sequence[tuple[GrayImage, TargetMask]],
    thresholds: Iterable[float],
    match_radius: float = DEFAULT_MATCH_RADIUS,
    connectivity: int = DEFAULT_CONNECTIVITY,
) -> list[tuple[float, float, float]]:
    """Pooled (threshold, Pd, Fa) rows from soft score maps; plot-ready."""
    rows = []
    for thr in thresholds:
        reports = []
        for score, gt in pairs:
            pred = TargetMask(score.pixels > thr)
            reports.append(compute_report(pred, gt, match_radius, connectivity))
        agg = aggregate_reports(reports)
        rows.append((float(thr), agg.pd, agg.fa))
    return rows


def sweep_csv(rows: Sequence[tuple[float, float, float]]) -> str:
    lines = ["threshold,pd,fa_per_million"]
    lines += [f"{t!r},{pd!r},{fa * 1e6!r}" for t, pd, fa in rows]
    return "\n".join(lines) + "\n"


def render_table(named_reports: Sequence[tuple[str, MetricReport]]) -> str:
    """Human-readable fixed-width table, one row per named report."""
    header = (
        f"{'sample':<24} {'IoU':>7} {'Prec':>7} {'Recall':>7} "
        f"{'F1':>7} {'Pd':>7} {'Fa(x1e6)':>10} {'tgts':>7}"
    )
    lines = [header, "-" * len(header)]
    for name, r in named_reports:
        lines.append(
            f"{name:<24} {r.iou:>7.4f} {r.precision:>7.4f} {r.recall:>7.4f} "
            f"{r.f1:>7.4f} {r.pd:>7.4f} {r.fa_per_million:>10.2f} "
            f"{r.detected_targets:>3}/{r.total_targets:<3}"
        )
    return "\n".join(lines) + "\n"
