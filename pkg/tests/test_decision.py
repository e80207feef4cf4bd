import pytest

from drowsebench.decision import (
    DEFAULT_THRESHOLD,
    ConfusionMatrix,
    DegenerateDataError,
    Label,
    ModelStats,
    Rates,
    ScoredSequence,
    classify_score,
    compare_to_default,
    confusion,
    cost,
    model_weight,
    optimize_threshold,
    percent_change,
    read_model_stats_json,
    read_scores_csv,
    sweep,
    threshold_grid,
    vote,
    weighted_vote,
    write_curve_csv,
    write_model_stats_json,
    write_scores_csv,
)


def dataset(*groups):
    """Build sequences from (count, score, label) groups."""
    sequences = []
    for count, score, label in groups:
        for _ in range(count):
            sequences.append(ScoredSequence(id=len(sequences), score=score, label=label))
    return sequences


FOUR_POINT = dataset(
    (1, 2.0, Label.ALERT), (1, 4.0, Label.ALERT), (1, 6.0, Label.DROWSY), (1, 8.0, Label.DROWSY)
)

# 100 alert / 1000 drowsy sequences concentrated on three score values,
# shaped so the optimum beats the default on misses but not false alarms
SKEWED = dataset(
    (69, 4.0, Label.ALERT),
    (10, 6.0, Label.ALERT),
    (21, 7.0, Label.ALERT),
    (43, 4.0, Label.DROWSY),
    (71, 6.0, Label.DROWSY),
    (886, 7.0, Label.DROWSY),
)


class TestGrid:
    def test_grid_shape(self):
        grid = threshold_grid()
        assert len(grid) == 21
        assert grid[0] == 10 / 3
        assert grid[-1] == 10.0
        assert all(b > a for a, b in zip(grid, grid[1:]))
        assert all(b - a == pytest.approx(1 / 3) for a, b in zip(grid, grid[1:]))

    def test_default_threshold_is_on_grid(self):
        assert DEFAULT_THRESHOLD in threshold_grid()


class TestClassify:
    def test_threshold_is_inclusive(self):
        assert classify_score(4.0, 4.0) == 1
        assert classify_score(3.999, 4.0) == 0
        assert classify_score(10.0, 10.0) == 1


class TestConfusion:
    def test_four_point_tally(self):
        cm = confusion(FOUR_POINT, 10 / 3)
        assert cm == ConfusionMatrix(tp=2, fp=1, tn=1, fn=0)
        assert cm.total == 4

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            confusion([], 5.0)

    def test_rates_identities(self):
        rates = Rates.from_confusion(ConfusionMatrix(tp=2, fp=1, tn=1, fn=0))
        assert (rates.fpr, rates.fnr, rates.tpr, rates.tnr) == (0.5, 0.0, 1.0, 0.5)
        assert rates.tpr + rates.fnr == 1.0
        assert rates.tnr + rates.fpr == 1.0
        assert rates.has_positives and rates.has_negatives

    def test_rates_degenerate_flags(self):
        no_positives = Rates.from_confusion(ConfusionMatrix(tp=0, fp=1, tn=1, fn=0))
        assert not no_positives.has_positives
        assert (no_positives.fnr, no_positives.tpr) == (0.0, 0.0)
        no_negatives = Rates.from_confusion(ConfusionMatrix(tp=1, fp=0, tn=0, fn=1))
        assert not no_negatives.has_negatives
        assert (no_negatives.fpr, no_negatives.tnr) == (0.0, 0.0)


def rates_for(fnr, fpr):
    return Rates(
        fpr=fpr, fnr=fnr, tpr=1 - fnr, tnr=1 - fpr, has_positives=True, has_negatives=True
    )


class TestCost:
    @pytest.mark.parametrize(
        "fnr,fpr,expected",
        [
            (0.061, 0.35, 0.472),
            (0.041, 0.22, 0.302),
            (0.043, 0.31, 0.396),
            (0.055, 0.36, 0.470),
            (0.064, 0.30, 0.428),
        ],
    )
    def test_misses_cost_double(self, fnr, fpr, expected):
        assert cost(rates_for(fnr, fpr)) == pytest.approx(expected)

    def test_custom_weights(self):
        assert cost(rates_for(0.1, 0.2), w_fn=1.0, w_fp=1.0) == pytest.approx(0.3)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            cost(rates_for(0.1, 0.2), w_fn=-1.0)


class TestSweep:
    def test_covers_grid_in_order(self):
        curve = sweep(FOUR_POINT)
        assert [p.threshold for p in curve.points] == threshold_grid()
        assert (curve.w_fn, curve.w_fp) == (2.0, 1.0)

    def test_rates_are_monotone_in_threshold(self):
        for data in (FOUR_POINT, SKEWED):
            points = sweep(data).points
            for a, b in zip(points, points[1:]):
                assert b.fpr <= a.fpr
                assert b.fnr >= a.fnr


class TestOptimize:
    def test_four_point_optimum(self):
        threshold, rates = optimize_threshold(FOUR_POINT)
        # cost is zero on (4, 6]; the first such grid point wins
        assert threshold == (10 + 3) / 3
        assert (rates.fpr, rates.fnr) == (0.0, 0.0)

    def test_all_tie_returns_first_grid_point(self):
        data = dataset((5, 0.0, Label.ALERT), (5, 10.0, Label.DROWSY))
        threshold, rates = optimize_threshold(data)
        assert threshold == 10 / 3
        assert (rates.fpr, rates.fnr) == (0.0, 0.0)

    def test_separation_at_grid_top(self):
        # only the last grid point clears alert scores sitting just below 10
        data = dataset((5, 9.9, Label.ALERT), (5, 10.0, Label.DROWSY))
        threshold, rates = optimize_threshold(data)
        assert threshold == 10.0
        assert (rates.fpr, rates.fnr) == (0.0, 0.0)

    def test_single_class_is_degenerate(self):
        with pytest.raises(DegenerateDataError):
            optimize_threshold(dataset((10, 5.0, Label.ALERT)))
        with pytest.raises(DegenerateDataError):
            optimize_threshold(dataset((10, 5.0, Label.DROWSY)))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            optimize_threshold([])


class TestPercentChange:
    def test_values(self):
        assert percent_change(0.5, 0.25) == pytest.approx(-50.0)
        assert percent_change(0.2, 0.3) == pytest.approx(50.0)
        assert percent_change(0.3, 0.3) == 0.0

    def test_zero_base_is_undefined(self):
        assert percent_change(0.0, 0.1) is None


class TestCompareToDefault:
    def test_skewed_dataset(self):
        threshold, _ = optimize_threshold(SKEWED)
        assert threshold == pytest.approx(13 / 3)
        cmp = compare_to_default(SKEWED, threshold)
        assert cmp.default_threshold == DEFAULT_THRESHOLD
        assert cmp.optimal_fpr == pytest.approx(0.31)
        assert cmp.optimal_fnr == pytest.approx(0.043)
        assert cmp.default_fpr == pytest.approx(0.21)
        assert cmp.default_fnr == pytest.approx(0.114)
        assert cmp.optimal_cost == pytest.approx(0.396)
        assert cmp.default_cost == pytest.approx(0.438)
        assert cmp.fpr_change_pct == pytest.approx(47.619, abs=1e-3)
        assert cmp.fnr_change_pct == pytest.approx(-62.2807, abs=1e-3)

    def test_change_none_when_default_rate_zero(self):
        data = dataset((5, 0.0, Label.ALERT), (5, 10.0, Label.DROWSY))
        cmp = compare_to_default(data, 10 / 3)
        assert cmp.fpr_change_pct is None
        assert cmp.fnr_change_pct is None


class TestEnsemble:
    def test_model_weight(self):
        stats = ModelStats(model_id=1, tpr=0.959, tnr=0.78, threshold=5.0)
        assert model_weight(stats) == pytest.approx(2.698)

    def test_model_stats_validation(self):
        with pytest.raises(ValueError):
            ModelStats(model_id=1, tpr=1.2, tnr=0.5, threshold=5.0)
        with pytest.raises(ValueError):
            ModelStats(model_id=1, tpr=0.5, tnr=-0.1, threshold=5.0)

    def test_three_model_vote(self):
        result = weighted_vote([2.3, 2.1, 2.3], [1, 0, 1])
        assert result.total_weight == pytest.approx(6.7)
        assert result.prediction == pytest.approx(4.6 / 6.7, abs=1e-12)
        assert result.decision is Label.DROWSY

    def test_vote_derives_weights_from_stats(self):
        stats = [
            ModelStats(model_id=1, tpr=0.9, tnr=0.5, threshold=5.0),
            ModelStats(model_id=2, tpr=0.8, tnr=0.5, threshold=5.0),
            ModelStats(model_id=3, tpr=0.9, tnr=0.5, threshold=5.0),
        ]
        result = vote([1, 0, 1], stats)
        assert result.weights == pytest.approx((2.3, 2.1, 2.3))
        assert result.prediction == pytest.approx(4.6 / 6.7, abs=1e-12)

    def test_unanimity_is_exact(self):
        assert weighted_vote([1.5, 2.5], [1, 1]).prediction == 1.0
        assert weighted_vote([1.5, 2.5], [0, 0]).prediction == 0.0

    def test_tie_is_alert(self):
        result = weighted_vote([1.0, 1.0], [1, 0])
        assert result.prediction == 0.5
        assert result.decision is Label.ALERT

    def test_weight_scale_invariance(self):
        weights = [2.3, 2.1, 2.3, 0.5]
        decisions = [1, 0, 1, 1]
        base = weighted_vote(weights, decisions).prediction
        scaled = weighted_vote([w * 7 for w in weights], decisions).prediction
        assert abs(base - scaled) <= 1e-12

    def test_vote_errors(self):
        with pytest.raises(ValueError):
            weighted_vote([1.0], [1, 0])
        with pytest.raises(ValueError):
            weighted_vote([], [])
        with pytest.raises(ValueError):
            weighted_vote([-1.0, 2.0], [1, 0])
        with pytest.raises(ValueError):
            weighted_vote([1.0, 2.0], [1, 2])
        with pytest.raises(DegenerateDataError):
            weighted_vote([0.0, 0.0], [1, 0])


class TestScoredSequence:
    def test_score_range(self):
        ScoredSequence(id=0, score=0.0, label=Label.ALERT)
        ScoredSequence(id=1, score=10.0, label=Label.DROWSY)
        with pytest.raises(ValueError):
            ScoredSequence(id=2, score=-0.1, label=Label.ALERT)
        with pytest.raises(ValueError):
            ScoredSequence(id=3, score=10.1, label=Label.DROWSY)

    def test_label_wire_values(self):
        assert int(Label.ALERT) == 0
        assert int(Label.DROWSY) == 10


class TestSerialization:
    def test_scores_roundtrip(self, tmp_path):
        path = tmp_path / "scores.csv"
        write_scores_csv(FOUR_POINT, path)
        assert read_scores_csv(path) == FOUR_POINT

    def test_scores_foreign_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            read_scores_csv(path)

    def test_curve_csv(self, tmp_path):
        path = tmp_path / "curve.csv"
        write_curve_csv(sweep(FOUR_POINT), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "threshold,fpr,fnr,cost"
        assert len(lines) == 22

    def test_model_stats_roundtrip(self, tmp_path):
        stats = [
            ModelStats(model_id=1, tpr=0.9, tnr=0.5, threshold=13 / 3),
            ModelStats(model_id=2, tpr=0.8, tnr=0.7, threshold=5.0),
        ]
        path = tmp_path / "models.json"
        write_model_stats_json(stats, path)
        assert read_model_stats_json(path) == stats

    def test_model_stats_rejects_non_list(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"model_id": 1}')
        with pytest.raises(ValueError):
            read_model_stats_json(path)
