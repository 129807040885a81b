"""Metric suite against brute-force oracles."""

import math

import numpy as np
import pytest

from iraug.errors import ContractError
from iraug.evaluation import (
    aggregate_reports,
    compute_report,
    compute_scr,
    connected_components,
    mean_iou,
    pd_fa_sweep,
    pixel_metrics,
    render_table,
    soft_iou_loss,
    sweep_csv,
    target_metrics,
)
from iraug.types import GrayImage, TargetMask


def flood_fill_components(bits, connectivity):
    """Brute-force labeling oracle, independent of the library path."""
    h, w = bits.shape
    if connectivity == 8:
        nbrs = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        nbrs = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    seen = np.zeros_like(bits, dtype=bool)
    comps = []
    for r in range(h):
        for c in range(w):
            if not bits[r, c] or seen[r, c]:
                continue
            stack, pix = [(r, c)], []
            seen[r, c] = True
            while stack:
                rr, cc = stack.pop()
                pix.append((rr, cc))
                for dr, dc in nbrs:
                    nr, nc = rr + dr, cc + dc
                    if 0 <= nr < h and 0 <= nc < w and bits[nr, nc] and not seen[nr, nc]:
                        seen[nr, nc] = True
                        stack.append((nr, nc))
            comps.append(sorted(pix))
    comps.sort(key=lambda pix: (min(p[0] for p in pix), min(p[1] for p in pix)))
    return comps


def _mask(rows):
    return TargetMask(np.array(rows, dtype=bool))


class TestConnectedComponents:
    def test_empty_mask(self):
        assert len(connected_components(_mask(np.zeros((4, 4))))) == 0

    def test_diagonal_pair_by_connectivity(self):
        m = _mask([[1, 0], [0, 1]])
        assert len(connected_components(m, 8)) == 1
        assert len(connected_components(m, 4)) == 2

    def test_matches_flood_fill_on_random_masks(self):
        gen = np.random.default_rng(0)
        for trial in range(200):
            bits = gen.random((8, 8)) < 0.35
            for conn in (4, 8):
                got = connected_components(TargetMask(bits), conn)
                want = flood_fill_components(bits, conn)
                assert [list(c.pixels) for c in got] == [
                    [tuple(p) for p in comp] for comp in want
                ]

    def test_component_fields(self):
        got = connected_components(_mask([[1, 1, 0], [0, 0, 1]]), 4)
        assert [c.area for c in got] == [2, 1]
        assert got[0].centroid == (0.0, 0.5)
        assert got[1].centroid == (1.0, 2.0)

    def test_ordering_by_min_row_then_min_col(self):
        # Component containing (1,0) sorts before the (0,3) singleton under
        # (min row, min col), regardless of raster-scan discovery order.
        m = _mask([[0, 0, 0, 1, 0], [1, 0, 0, 0, 0], [1, 0, 0, 0, 0]])
        got = connected_components(m, 8)
        assert got[0].pixels[0] == (0, 3)
        assert got[1].pixels == ((1, 0), (2, 0))

    def test_bad_connectivity(self):
        with pytest.raises(ContractError):
            connected_components(_mask([[1]]), 6)


def _count_oracle(pred_bits, gt_bits):
    tp = fp = fn = 0
    for p, g in zip(pred_bits.ravel(), gt_bits.ravel()):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
    return tp, fp, fn


class TestPixelMetrics:
    def test_perfect_prediction(self):
        m = _mask([[1, 0], [0, 1]])
        r = pixel_metrics(m, m)
        assert (r.iou, r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_disjoint_nonempty(self):
        r = pixel_metrics(_mask([[1, 0]]), _mask([[0, 1]]))
        assert (r.iou, r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0, 0.0)

    def test_superset_counting_oracle(self):
        # gt 4 pixels, pred covers gt plus 4 extra: IoU = 4/8.
        gt = np.zeros((4, 4), dtype=bool)
        gt[1:3, 1:3] = True
        pred = gt.copy()
        pred[0, :4] = True
        r = pixel_metrics(TargetMask(pred), TargetMask(gt))
        assert r.iou == pytest.approx(0.5)
        assert r.recall == 1.0
        assert r.precision == pytest.approx(0.5)

    def test_empty_empty_convention(self):
        r = pixel_metrics(_mask([[0, 0]]), _mask([[0, 0]]))
        assert (r.iou, r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0, 1.0)
        assert r.vacuous

    def test_symmetry_and_bound_properties(self):
        gen = np.random.default_rng(1)
        for _ in range(200):
            a = TargetMask(gen.random((6, 6)) < 0.4)
            b = TargetMask(gen.random((6, 6)) < 0.4)
            ra, rb = pixel_metrics(a, b), pixel_metrics(b, a)
            assert ra.recall == rb.precision
            assert ra.iou <= min(ra.precision, ra.recall) + 1e-12

    def test_matches_count_oracle(self):
        gen = np.random.default_rng(2)
        for _ in range(100):
            a = gen.random((5, 7)) < 0.5
            b = gen.random((5, 7)) < 0.5
            r = pixel_metrics(TargetMask(a), TargetMask(b))
            tp, fp, fn = _count_oracle(a, b)
            assert (r.tp, r.fp, r.fn) == (tp, fp, fn)
            if tp + fp + fn:
                assert r.iou == pytest.approx(tp / (tp + fp + fn))

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            pixel_metrics(_mask([[1]]), _mask([[1, 0]]))


class TestTargetMetrics:
    def test_perfect_prediction(self):
        gt = np.zeros((20, 20), dtype=bool)
        gt[4:6, 4:6] = True
        gt[12:14, 15:17] = True
        r = target_metrics(TargetMask(gt), TargetMask(gt))
        assert r.pd == 1.0 and r.fa == 0.0
        assert r.detected_targets == r.total_targets == 2

    def test_miss_everything(self):
        gt = np.zeros((10, 10), dtype=bool)
        gt[5, 5] = True
        r = target_metrics(TargetMask(np.zeros_like(gt)), TargetMask(gt))
        assert r.pd == 0.0 and r.fa == 0.0

    def test_constructed_false_alarm_counts(self):
        # One detected blob plus one spurious 5-pixel component on 100x100:
        # pd = 1, fa = 5 / 1e4 = 500e-6.
        gt = np.zeros((100, 100), dtype=bool)
        gt[50:53, 50:53] = True
        pred = gt.copy()
        pred[90, 10:15] = True
        r = target_metrics(TargetMask(pred), TargetMask(gt))
        assert r.pd == 1.0
        assert r.fa == pytest.approx(5e-4)
        assert r.fa_per_million == pytest.approx(500.0)
        assert r.false_alarm_components == 1

    def test_zero_gt_flagged(self):
        pred = np.zeros((5, 5), dtype=bool)
        pred[0, 0] = True
        r = target_metrics(TargetMask(pred), TargetMask(np.zeros_like(pred)))
        assert r.pd == 1.0 and r.no_gt_targets
        assert r.false_alarm_pixels == 1

    def test_centroid_match_within_radius(self):
        gt = np.zeros((20, 20), dtype=bool)
        gt[10, 10] = True
        pred = np.zeros_like(gt)
        pred[12, 10] = True  # distance 2 <= 3, no overlap
        r = target_metrics(TargetMask(pred), TargetMask(gt))
        assert r.pd == 1.0 and r.fa == 0.0

    def test_overlap_match_beyond_radius(self):
        # A long component whose centroid is far away still overlaps the GT.
        gt = np.zeros((9, 30), dtype=bool)
        gt[4, 0] = True
        pred = np.zeros_like(gt)
        pred[4, 0:20] = True  # centroid at col 9.5, distance > 3
        r = target_metrics(TargetMask(pred), TargetMask(gt))
        assert r.pd == 1.0 and r.fa == 0.0

    def test_one_pred_matches_at_most_one_gt(self):
        gt = np.zeros((9, 9), dtype=bool)
        gt[4, 2] = True
        gt[4, 6] = True
        pred = np.zeros_like(gt)
        pred[4, 4] = True  # within radius of both GT centroids
        r = target_metrics(TargetMask(pred), TargetMask(gt))
        assert r.detected_targets == 1
        assert r.pd == pytest.approx(0.5)
        assert r.fa == 0.0

    def test_translation_invariance(self):
        gen = np.random.default_rng(3)
        base_gt = gen.random((12, 12)) < 0.2
        base_pred = gen.random((12, 12)) < 0.2
        gt = np.zeros((20, 20), dtype=bool)
        pred = np.zeros((20, 20), dtype=bool)
        gt[:12, :12], pred[:12, :12] = base_gt, base_pred
        gt2 = np.roll(np.roll(gt, 5, axis=0), 3, axis=1)
        pred2 = np.roll(np.roll(pred, 5, axis=0), 3, axis=1)
        a = target_metrics(TargetMask(pred), TargetMask(gt))
        b = target_metrics(TargetMask(pred2), TargetMask(gt2))
        assert (a.pd, a.fa, a.detected_targets) == (b.pd, b.fa, b.detected_targets)


class TestSoftIoULoss:
    def test_all_ones(self):
        label = _mask(np.ones((2, 2)))
        assert soft_iou_loss(np.ones((2, 2)), label, a=1.0) == pytest.approx(0.0)

    def test_all_zeros(self):
        label = _mask(np.zeros((2, 2)))
        assert soft_iou_loss(np.zeros((2, 2)), label, a=1.0) == pytest.approx(0.0)

    def test_ones_vs_zero_label(self):
        # n=4, a=1: loss = 1 - 1/(4+1) = 0.8.
        label = _mask(np.zeros((2, 2)))
        assert soft_iou_loss(np.ones((2, 2)), label, a=1.0) == pytest.approx(0.8)

    def test_range_property(self):
        gen = np.random.default_rng(4)
        for _ in range(200):
            pred = gen.random((5, 5))
            label = TargetMask(gen.random((5, 5)) < 0.3)
            loss = soft_iou_loss(pred, label, a=0.5)
            assert 0.0 <= loss < 1.0

    def test_binary_limit_equals_one_minus_iou(self):
        gen = np.random.default_rng(5)
        for _ in range(50):
            pred_bits = gen.random((6, 6)) < 0.4
            gt_bits = gen.random((6, 6)) < 0.4
            if not (pred_bits.any() or gt_bits.any()):
                continue
            loss = soft_iou_loss(
                pred_bits.astype(float), TargetMask(gt_bits), a=1e-9
            )
            iou = pixel_metrics(TargetMask(pred_bits), TargetMask(gt_bits)).iou
            assert loss == pytest.approx(1.0 - iou, abs=1e-6)

    def test_requires_positive_smoothing(self):
        with pytest.raises(ContractError):
            soft_iou_loss(np.zeros((2, 2)), _mask(np.zeros((2, 2))), a=0.0)

    def test_accepts_gray_image(self):
        img = GrayImage(np.full((2, 2), 0.5))
        label = _mask(np.ones((2, 2)))
        expected = 1.0 - (2.0 + 1.0) / (2.0 + 4.0 - 2.0 + 1.0)
        assert soft_iou_loss(img, label, a=1.0) == pytest.approx(expected)


class TestScr:
    def _scene(self):
        # Center target 0.9; its 8-neighbor ring alternates 0.0/0.2 so the
        # ring mean is 0.1 and the population std exactly 0.1 -> SCR = 8.
        px = np.full((9, 9), 0.1)
        ring_vals = [0.0, 0.2, 0.0, 0.2, 0.0, 0.2, 0.0, 0.2]
        coords = [(3, 3), (3, 4), (3, 5), (4, 3), (4, 5), (5, 3), (5, 4), (5, 5)]
        for (r, c), v in zip(coords, ring_vals):
            px[r, c] = v
        px[4, 4] = 0.9
        mask = np.zeros((9, 9), dtype=bool)
        mask[4, 4] = True
        return GrayImage(px), TargetMask(mask)

    def test_synthetic_scene_value(self):
        img, mask = self._scene()
        rep = compute_scr(img, mask, bg_ring=1)
        assert rep.scr == pytest.approx(8.0, rel=1e-9)
        assert not rep.infinite_background

    def test_equal_means_zero(self):
        px = np.full((7, 7), 0.4)
        px[2, 2] = 0.5
        px[4, 4] = 0.3  # ring of (3,3) includes both, mean stays 0.4
        mask = np.zeros((7, 7), dtype=bool)
        mask[3, 3] = True
        img = GrayImage(px)
        rep = compute_scr(img, TargetMask(mask), bg_ring=1)
        assert rep.scr == pytest.approx(0.0, abs=1e-12)

    def test_flat_background_flagged_infinite(self):
        px = np.full((7, 7), 0.1)
        px[3, 3] = 0.9
        mask = np.zeros((7, 7), dtype=bool)
        mask[3, 3] = True
        rep = compute_scr(GrayImage(px), TargetMask(mask), bg_ring=1)
        assert math.isinf(rep.scr) and rep.infinite_background

    def test_needs_targets(self):
        with pytest.raises(ContractError):
            compute_scr(
                GrayImage(np.zeros((3, 3))),
                TargetMask(np.zeros((3, 3), dtype=bool)),
                bg_ring=1,
            )


class TestAggregation:
    def test_pooling_differs_from_averaging(self):
        # Image A: tp=1, fp=0, fn=0 (iou 1). Image B: tp=1, fp=3, fn=0
        # (iou 0.25). Pooled: 2/(2+3) = 0.4; mean would be 0.625.
        gt_a = _mask([[1, 0], [0, 0]])
        pred_a = gt_a
        gt_b = _mask([[1, 0], [0, 0]])
        pred_b = _mask([[1, 1], [1, 1]])
        ra = compute_report(pred_a, gt_a)
        rb = compute_report(pred_b, gt_b)
        agg = aggregate_reports([ra, rb])
        assert agg.iou == pytest.approx(0.4)
        assert mean_iou([ra, rb]) == pytest.approx(0.625)

    def test_pooled_pd_fa(self):
        gt = np.zeros((10, 10), dtype=bool)
        gt[2, 2] = True
        hit = compute_report(TargetMask(gt), TargetMask(gt))
        miss = compute_report(TargetMask(np.zeros_like(gt)), TargetMask(gt))
        agg = aggregate_reports([hit, miss])
        assert agg.pd == pytest.approx(0.5)
        assert agg.total_pixels == 200

    def test_empty_input_rejected(self):
        with pytest.raises(ContractError):
            aggregate_reports([])


class TestSweep:
    def test_threshold_sweep_rows(self):
        score = np.zeros((10, 10))
        score[5, 5] = 0.9  # the true target
        score[1, 1] = 0.4  # low-confidence clutter
        gt = np.zeros((10, 10), dtype=bool)
        gt[5, 5] = True
        rows = pd_fa_sweep(
            [(GrayImage(score), TargetMask(gt))], thresholds=[0.2, 0.5, 0.95]
        )
        assert rows[0] == (0.2, 1.0, pytest.approx(0.01))
        assert rows[1] == (0.5, 1.0, 0.0)
        assert rows[2] == (0.95, 0.0, 0.0)
        csv = sweep_csv(rows)
        assert csv.splitlines()[0] == "threshold,pd,fa_per_million"
        assert len(csv.splitlines()) == 4

    def test_render_table_contains_rows(self):
        gt = _mask([[1, 0], [0, 0]])
        rep = compute_report(gt, gt)
        table = render_table([("sample-1", rep)])
        assert "sample-1" in table and "1.0000" in table
