import math

import numpy as np
import pytest

from simdesk.bus import MessageBus
from simdesk.plots import (CustomModel, DataSeries, FitModel, GaussianSumModel,
                           Histogram1D, Histogram2D, PlotDocument,
                           PlotFormatError, PolynomialModel, SeriesStyle,
                           UnknownSeries, fit, gaussian_sum_eval,
                           gaussian_sum_gradient)


# -- histograms -----------------------------------------------------------------


def test_fill_lands_in_expected_bin():
    h = Histogram1D(10, 0.0, 10.0)
    h.fill(3.5)
    assert h.counts[3] == 1
    assert h.total_fills() == 1


def test_fill_upper_edge_is_overflow():
    h = Histogram1D(10, 0.0, 10.0)
    h.fill(10.0)
    assert h.overflow == 1 and h.counts.sum() == 0


def test_fill_below_range_is_underflow():
    h = Histogram1D(10, 0.0, 10.0)
    h.fill(-0.001)
    assert h.underflow == 1


def test_fill_rejects_non_finite():
    h = Histogram1D(4, 0.0, 1.0)
    with pytest.raises(ValueError):
        h.fill(float("nan"))
    with pytest.raises(ValueError):
        h.fill_array([0.1, float("inf")])


def test_count_conservation_normal_samples():
    rng = np.random.default_rng(17)
    h = Histogram1D(50, -5.0, 5.0)
    xs = rng.standard_normal(10_000)
    h.fill_array(xs)
    tails = int(np.count_nonzero((xs < -5) | (xs >= 5)))
    assert int(h.counts.sum()) == 10_000 - tails
    assert h.total_fills() == 10_000


def test_count_conservation_randomized_sequences():
    rng = np.random.default_rng(99)
    for _ in range(20):
        h = Histogram1D(int(rng.integers(1, 30)), -1.0, 1.0)
        n = int(rng.integers(0, 500))
        h.fill_array(rng.uniform(-2, 2, size=n))
        assert h.total_fills() == n


def test_hist2d_conservation():
    rng = np.random.default_rng(7)
    h = Histogram2D(8, 6, (-1.0, 1.0), (-1.0, 1.0))
    xs = rng.uniform(-2, 2, size=5000)
    ys = rng.uniform(-2, 2, size=5000)
    h.fill_array(xs, ys)
    assert h.total_fills() == 5000
    for x, y in zip(xs[:200], ys[:200]):
        pass  # scalar path spot check below
    h2 = Histogram2D(8, 6, (-1.0, 1.0), (-1.0, 1.0))
    for x, y in zip(xs, ys):
        h2.fill(float(x), float(y))
    assert h == h2


def test_hist2d_bin_placement():
    h = Histogram2D(4, 4, (0.0, 4.0), (0.0, 4.0))
    h.fill(0.5, 3.5)
    assert h.counts[0, 3] == 1
    h.fill(4.0, 0.0)
    assert h.out_of_range == 1


# -- gaussian sum -----------------------------------------------------------------


def test_gaussian_peak_value():
    assert gaussian_sum_eval([1.0, 0.0, 1.0], np.array([0.0]))[0] == 1.0


def test_gaussian_one_sigma_value():
    y = gaussian_sum_eval([1.0, 0.0, 1.0], np.array([1.0]))[0]
    assert y == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_gaussian_symmetric_components_even_function():
    params = [1.0, -2.0, 0.7, 1.0, 2.0, 0.7]
    xs = np.linspace(0.1, 5, 40)
    left = gaussian_sum_eval(params, -xs)
    right = gaussian_sum_eval(params, xs)
    assert np.allclose(left, right, atol=1e-14)


def test_gaussian_rejects_bad_sigma():
    with pytest.raises(ValueError):
        gaussian_sum_eval([1.0, 0.0, 0.0], np.array([0.0]))
    with pytest.raises(ValueError):
        gaussian_sum_eval([1.0, 0.0, -1.0], np.array([0.0]))


def test_gradient_matches_central_differences():
    # h = 1e-6 * parameter scale, tolerance 1e-5 relative, 100 random sets.
    rng = np.random.default_rng(12345)
    x = np.linspace(-8.0, 8.0, 60)
    for _ in range(100):
        k = int(rng.integers(1, 4))
        params = []
        for _ in range(k):
            params.extend([float(rng.uniform(0.5, 3.0)),
                           float(rng.uniform(-4.0, 4.0)),
                           float(rng.uniform(0.3, 2.0))])
        params = np.asarray(params)
        grad = gaussian_sum_gradient(params, x)
        for j in range(params.size):
            h = 1e-6 * max(abs(params[j]), 1.0)
            plus = params.copy()
            minus = params.copy()
            plus[j] += h
            minus[j] -= h
            fd = (gaussian_sum_eval(plus, x) - gaussian_sum_eval(minus, x)) / (2 * h)
            scale = np.maximum(np.abs(fd), np.max(np.abs(fd)) * 1e-3 + 1e-12)
            assert np.max(np.abs(grad[:, j] - fd) / scale) < 1e-5


# -- fitting ----------------------------------------------------------------------


def series_from(x, y, name="s"):
    s = DataSeries(name)
    s.xs = [float(v) for v in x]
    s.ys = [float(v) for v in y]
    return s


def test_fit_noiseless_gaussian_recovers_params():
    x = np.linspace(-2.0, 4.0, 300)
    true = np.array([2.0, 1.0, 0.5])
    data = series_from(x, gaussian_sum_eval(true, x))
    result = fit(data, GaussianSumModel(1), [2.3, 1.15, 0.55])
    assert result.converged
    assert np.max(np.abs(result.params - true) / true) < 1e-6


def test_fit_triple_gaussian_with_noise():
    rng = np.random.default_rng(2718)
    x = np.linspace(-6.0, 6.0, 600)
    true = np.array([1.0, -3.0, 0.5, 1.4, 0.0, 0.5, 0.8, 3.0, 0.5])
    y = gaussian_sum_eval(true, x)
    noisy = y + rng.normal(0.0, 0.01 * y.max(), size=x.size)
    guess = [0.9, -2.8, 0.6, 1.2, 0.15, 0.6, 0.9, 3.2, 0.6]
    result = fit(series_from(x, noisy), GaussianSumModel(3), guess)
    assert result.converged
    for fitted, truth in zip(result.params, true):
        tol = 0.05 * (abs(truth) if truth != 0 else 0.5)
        assert abs(fitted - truth) <= tol


def test_fit_polynomial_exact_line():
    x = np.linspace(-5, 5, 50)
    data = series_from(x, 2.0 * x + 1.0)
    result = fit(data, PolynomialModel(1), [0.0, 0.0])
    assert result.converged
    assert np.max(np.abs(result.params - np.array([1.0, 2.0]))) < 1e-10


def test_fit_histogram_weights_are_inverse_counts():
    rng = np.random.default_rng(404)
    h = Histogram1D(60, -4.0, 4.0)
    h.fill_array(rng.normal(0.5, 0.8, size=20_000))
    width = (h.hi - h.lo) / h.n_bins
    amp = 20_000 * width / (0.8 * math.sqrt(2 * math.pi))
    result = fit(h, GaussianSumModel(1), [amp * 1.2, 0.3, 1.0])
    assert result.converged
    assert abs(result.params[1] - 0.5) < 0.05
    assert abs(result.params[2] - 0.8) < 0.05


def test_fit_sigma_positive_even_from_rough_guess():
    x = np.linspace(-3, 3, 200)
    data = series_from(x, gaussian_sum_eval([1.0, 0.0, 0.3], x))
    result = fit(data, GaussianSumModel(1), [0.5, 0.8, 2.5])
    assert result.params[2] > 0


def test_fit_self_consistency_stationary_point():
    rng = np.random.default_rng(31)
    x = np.linspace(-5, 5, 400)
    true = [1.5, -1.0, 0.7, 0.9, 2.0, 0.5]
    y = gaussian_sum_eval(true, x) + rng.normal(0, 0.005, size=x.size)
    data = series_from(x, y)
    first = fit(data, GaussianSumModel(2), [1.2, -0.8, 0.9, 1.1, 2.2, 0.6])
    second = fit(data, GaussianSumModel(2), first.params)
    assert second.chi2 <= first.chi2 * (1 + 1e-9)


def test_fit_requires_enough_points():
    data = series_from([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        fit(data, GaussianSumModel(1), [1.0, 0.0, 1.0])


def test_fit_rejects_bad_initial_guess():
    x = np.linspace(-1, 1, 50)
    data = series_from(x, x)
    with pytest.raises(ValueError):
        fit(data, GaussianSumModel(1), [1.0, 0.0, -1.0])
    with pytest.raises(ValueError):
        fit(data, GaussianSumModel(1), [float("nan"), 0.0, 1.0])


def test_fit_custom_model_with_numeric_jacobian():
    x = np.linspace(0.1, 3.0, 80)
    y = 2.5 * np.exp(-1.3 * x)
    data = series_from(x, y)
    model = CustomModel(fn=lambda p, xs: p[0] * np.exp(-p[1] * xs), n_params=2,
                        kind="exp_decay")
    result = fit(data, model, [2.0, 1.0])
    assert result.converged
    assert np.allclose(result.params, [2.5, 1.3], rtol=1e-6)


def test_fit_nonconvergence_returns_best_so_far():
    rng = np.random.default_rng(8)
    x = np.linspace(-1, 1, 40)
    data = series_from(x, rng.normal(0, 1, size=40))
    result = fit(data, GaussianSumModel(1), [1.0, 0.0, 0.5], max_iter=2)
    assert isinstance(result, FitModel)
    assert result.iterations <= 2


# -- persistence ------------------------------------------------------------------


def test_empty_document_roundtrip():
    doc = PlotDocument("empty", "x", "y")
    assert PlotDocument.load(doc.save()) == doc


def test_document_roundtrip_with_content():
    rng = np.random.default_rng(55)
    doc = PlotDocument("full", "t", "value")
    s = doc.add_series("entropy", SeriesStyle(color="#aa3311", line_width=2.0, marker="o"))
    for i in range(20):
        s.append(i * 0.1, float(rng.random()))
    h = Histogram1D(30, -3.0, 3.0, name="h1")
    h.fill_array(rng.standard_normal(500))
    doc.hists1d.append(h)
    h2 = Histogram2D(50, 50, (0.0, 1.0), (0.0, 1.0), name="h2")
    h2.fill_array(rng.random(2000), rng.random(2000))
    doc.hists2d.append(h2)
    doc.fits.append(FitModel("gaussian_sum(1)", np.array([1.0, 0.5, 0.25]), 12.5, True, 9))
    loaded = PlotDocument.load(doc.save())
    assert loaded == doc
    assert np.array_equal(loaded.hists2d[0].counts, h2.counts)


def test_truncated_stream_rejected_without_partial_document():
    doc = PlotDocument("x")
    doc.add_series("a").append(1.0, 2.0)
    data = doc.save()
    with pytest.raises(PlotFormatError) as err:
        PlotDocument.load(data[: len(data) // 2])
    assert "byte" in str(err.value)


def test_bad_version_rejected():
    with pytest.raises(PlotFormatError):
        PlotDocument.load(b'{"format_version": "999"}')


def test_malformed_structure_rejected():
    with pytest.raises(PlotFormatError):
        PlotDocument.load(b'{"format_version": "1", "hist1d": [{"n_bins": 2}]}')
    with pytest.raises(PlotFormatError):
        PlotDocument.load(b"[1, 2, 3]")


# -- series binding ----------------------------------------------------------------


def test_bound_series_appends_on_dispatch():
    bus = MessageBus()
    doc = PlotDocument()
    doc.add_series("entropy")
    doc.bind_series_to_topic(bus, "entropy")
    bus.publish("plot.data", {"series": "entropy", "x": 0.1, "y": 4.83})
    assert len(doc.series["entropy"]) == 0
    bus.dispatch_pending()
    assert doc.series["entropy"].xs == [0.1]
    assert doc.series["entropy"].ys == [4.83]


def test_bound_series_keeps_publish_order():
    bus = MessageBus()
    doc = PlotDocument()
    doc.add_series("s")
    doc.bind_series_to_topic(bus, "s")
    for i in range(100):
        bus.publish("plot.data", {"series": "s", "x": float(i), "y": float(-i)})
    bus.dispatch_pending()
    assert doc.series["s"].xs == [float(i) for i in range(100)]


def test_unbound_series_envelopes_ignored():
    bus = MessageBus()
    doc = PlotDocument()
    doc.add_series("mine")
    doc.bind_series_to_topic(bus, "mine")
    bus.publish("plot.data", {"series": "other", "x": 1.0, "y": 1.0})
    bus.dispatch_pending()
    assert len(doc.series["mine"]) == 0


def test_bind_unknown_series_errors():
    with pytest.raises(UnknownSeries):
        PlotDocument().bind_series_to_topic(MessageBus(), "ghost")
