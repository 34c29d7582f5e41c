import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from vmdcast.errors import ShapeError, SpecError, ZeroVarianceError
from vmdcast.eval import (
    MetricRow,
    compute_metrics,
    dm_pvalues,
    dm_table,
    dm_test,
    format_dm,
    metrics_table,
    pairwise_dm,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def loop_metrics(y, yhat):
    T = len(y)
    se = ae = ape = 0.0
    for a, p in zip(y, yhat):
        se += (a - p) ** 2
        ae += abs(a - p)
        ape += abs((a - p) / a)
    return math.sqrt(se / T), ae / T, 100 * ape / T


class TestMetrics:
    def test_perfect(self):
        r = compute_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert (r.rmse, r.mae, r.mape, r.n) == (0.0, 0.0, 0.0, 3)
        assert r.formatted()["mape"] == "0.00%"

    def test_two_point_example(self):
        r = compute_metrics([100, 200], [110, 190])
        assert r.mae == 10.0 and r.rmse == 10.0 and r.mape == 7.5

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(3)
        y = rng.uniform(1, 10, 50)
        yhat = y + rng.normal(0, 0.5, 50)
        r = compute_metrics(y, yhat)
        for got, want in zip((r.rmse, r.mae, r.mape), loop_metrics(y, yhat)):
            assert got == pytest.approx(want, rel=1e-12, abs=0)

    def test_zero_actual_makes_mape_undefined(self):
        r = compute_metrics([0.0, 2.0], [1.0, 2.0])
        assert r.mape is None and not r.mape_defined
        assert r.mae == 0.5 and r.formatted()["mape"] == "undefined"

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            compute_metrics([1, 2], [1])

    def test_empty(self):
        with pytest.raises(ShapeError):
            compute_metrics([], [])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(finite, finite), min_size=1, max_size=40))
    def test_rmse_dominates_mae(self, pairs):
        y, yhat = map(np.array, zip(*pairs))
        r = compute_metrics(y, yhat)
        assert r.rmse >= r.mae * (1 - 1e-12)

    def test_equal_errors_give_rmse_equal_mae(self):
        r = compute_metrics([1, 2, 3, 4], [2, 1, 4, 3])
        assert r.rmse == r.mae == 1.0

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.floats(1, 100), finite), min_size=2, max_size=30), st.randoms())
    def test_permutation_invariant(self, pairs, rnd):
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        a = compute_metrics(*map(np.array, zip(*pairs)))
        b = compute_metrics(*map(np.array, zip(*shuffled)))
        assert a.rmse == pytest.approx(b.rmse, rel=1e-12, abs=1e-12)
        assert a.mae == pytest.approx(b.mae, rel=1e-12, abs=1e-12)
        assert a.mape == pytest.approx(b.mape, rel=1e-12, abs=1e-12)


class TestDm:
    def test_sign_flip_is_zero_variance(self):
        e = np.random.default_rng(0).normal(size=30)
        with pytest.raises(ZeroVarianceError):
            dm_test(e, -e)

    def test_too_short(self):
        with pytest.raises(ShapeError):
            dm_test(np.ones(9), np.zeros(9))

    def test_statistic_against_direct_formula(self):
        rng = np.random.default_rng(5)
        a, b = rng.normal(size=80), rng.normal(scale=1.3, size=80)
        d = a**2 - b**2
        want = d.mean() / math.sqrt(d.var(ddof=1) / 80)
        r = dm_test(a, b)
        assert r.statistic == pytest.approx(want, rel=1e-13)
        assert r.statistic < 0 and r.n == 80 and r.loss == "squared"

    def test_t_pvalues_match_scipy(self):
        two, less = dm_pvalues(-1.0559, 405)
        assert two == pytest.approx(2 * stats.t.cdf(-1.0559, 404), abs=1e-15)
        assert less == pytest.approx(stats.t.cdf(-1.0559, 404), abs=1e-15)

    def test_normal_pvalues(self):
        two, less = dm_pvalues(-1.96, 100, "normal")
        assert two == pytest.approx(0.049995790296, abs=1e-10)
        assert less == pytest.approx(two / 2, abs=1e-15)

    @pytest.mark.parametrize("dist", ["t", "normal"])
    def test_far_tail_prints_zero(self, dist):
        two, _ = dm_pvalues(-11.2610, 405, dist)
        assert two < 1e-4 and f"{two:.4f}" == "0.0000"

    def test_unknown_distribution(self):
        with pytest.raises(SpecError):
            dm_pvalues(1.0, 50, "cauchy")

    @pytest.mark.parametrize("dist", ["t", "normal"])
    def test_two_sided_relation(self, dist):
        for s in (-2.5, -0.3, 0.0, 0.7, 3.1):
            two, less = dm_pvalues(s, 60, dist)
            assert two == pytest.approx(2 * min(less, 1 - less), abs=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
    def test_antisymmetry_and_scale(self, seed, c):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=40), rng.normal(size=40)
        r = dm_test(a, b)
        assert dm_test(b, a).statistic == pytest.approx(-r.statistic, rel=1e-12, abs=1e-12)
        assert dm_test(c * a, c * b).statistic == pytest.approx(r.statistic, rel=1e-9, abs=1e-9)

    def test_format(self):
        r = dm_test(np.linspace(0.1, 1, 20), np.linspace(0.2, 1.5, 20))
        assert format_dm(r) == f"{r.statistic:.4f} ({r.p_two_sided:.4f})"


class TestTables:
    @pytest.fixture
    def rows(self):
        m = compute_metrics([100, 200], [110, 190])
        z = compute_metrics([1.0], [1.0])
        return [MetricRow("LSTM", m, m), MetricRow("VMD-LSTM", z, z)]

    def test_metrics_csv(self, rows):
        lines = metrics_table(rows, "csv").splitlines()
        assert lines[0] == "model,in_rmse,in_mae,in_mape,out_rmse,out_mae,out_mape"
        assert lines[1] == "LSTM,10.0000,10.0000,7.50%,10.0000,10.0000,7.50%"
        assert lines[2].endswith("0.00%")

    def test_metrics_text_aligned(self, rows):
        lines = metrics_table(rows, "text").splitlines()
        assert len({len(l) for l in lines}) == 1

    def test_metrics_markdown(self, rows):
        md = metrics_table(rows, "markdown").splitlines()
        assert md[0].startswith("| model |") and md[1].startswith("|---|")

    def test_dm_upper_triangle(self):
        rng = np.random.default_rng(1)
        errs = {n: rng.normal(scale=s, size=50) for n, s in (("A", 1.0), ("B", 1.2), ("C", 2.0))}
        pairs = pairwise_dm(errs)
        assert set(pairs) == {("A", "B"), ("A", "C"), ("B", "C")}
        lines = dm_table(list(errs), pairs, "csv").splitlines()
        assert lines[0] == "model,B,C"
        assert lines[1].split(",")[1] == format_dm(pairs[("A", "B")])
        assert lines[2].split(",") == ["B", "", format_dm(pairs[("B", "C")])]

    def test_bad_format(self, rows):
        with pytest.raises(SpecError):
            metrics_table(rows, "html")
