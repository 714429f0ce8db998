import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fanocal.calibration import (FanoPoint, distribution_fidelity, fit_fano_line,
                                 photoelectron_bins, rebin_counts, rebin_to_photoelectrons,
                                 shot_statistics)
from fanocal.cases import CASES, case_config
from fanocal.detection import DetectorConfig, ShotSeries, simulate_dark, simulate_shots
from fanocal.errors import FitError
from fanocal.pipeline import calibrate, simulate_experiment
from fanocal.probdist import ProbDist
from fanocal.states import Coherent, Thermal1, predicted_slope

DARK0 = ShotSeries(np.zeros(4), setting_id="dark", is_dark=True)


def line_points(slope, intercept, xs, se=0.01):
    return [FanoPoint(v_mean=x, fano_v=intercept + slope * x, v_mean_se=0.001, fano_se=se,
                      setting_id=f"p{i}", shots=1000) for i, x in enumerate(xs)]


class TestShotStatistics:
    def test_hand_example(self):
        gamma = 0.2
        s = ShotSeries(gamma * np.array([0.0, 1.0, 1.0, 2.0]))
        p = shot_statistics(s, DARK0)
        assert p.v_mean == pytest.approx(gamma)
        # unbiased variance of {0, 1, 1, 2} is 2/3, mean 1
        assert p.fano_v == pytest.approx(gamma * 2.0 / 3.0, rel=1e-12)
        assert p.usable and p.shots == 4

    def test_dark_subtraction(self):
        dark = ShotSeries([0.1, 0.3, 0.1, 0.3], is_dark=True)
        s = ShotSeries(np.array([0.0, 1.0, 1.0, 2.0]) + np.array([0.1, 0.3, 0.3, 0.1]))
        p = shot_statistics(s, dark)
        assert p.v_mean == pytest.approx(1.0)
        assert p.variance == pytest.approx(np.var(s.voltages, ddof=1) - np.var(dark.voltages, ddof=1))

    def test_no_light_is_unusable(self):
        d = simulate_dark(DetectorConfig(0.3, 0.2, dark_sigma=0.02), 5000, 4)
        p = shot_statistics(ShotSeries(d.voltages), d)
        assert p.v_mean == 0.0
        assert not p.usable and p.floored

    def test_requires_dark_flag(self):
        with pytest.raises(ValueError):
            shot_statistics(ShotSeries([1.0, 2.0]), ShotSeries([0.0, 0.0]))

    def test_coherent_fano_is_gamma(self):
        det = DetectorConfig(0.29, 0.2, dark_sigma=0.02, dark_offset=0.05)
        s = simulate_shots(Coherent(6.7), det, 30000, 8)
        p = shot_statistics(s, simulate_dark(det, 30000, 9))
        assert abs(p.fano_v - 0.2) <= 5 * p.fano_se

    def test_standard_errors_match_scatter(self):
        det = DetectorConfig(0.5, 0.2, dark_sigma=0.02)
        dark = simulate_dark(det, 4000, 1)
        pts = [shot_statistics(simulate_shots(Thermal1(3.0), det, 4000, 100 + k), dark)
               for k in range(200)]
        f = np.array([p.fano_v for p in pts])
        se = np.mean([p.fano_se for p in pts])
        # the dark run is shared, so the scatter is slightly below the full SE
        assert 0.8 * se <= f.std(ddof=1) <= 1.15 * se


class TestFitFanoLine:
    def test_exact_line(self):
        xs = [0.1, 0.2, 0.35, 0.5, 0.8]
        fit = fit_fano_line(line_points(0.5, 0.21, xs))
        assert fit.slope == pytest.approx(0.5, abs=1e-13)
        assert fit.intercept_gamma == pytest.approx(0.21, abs=1e-13)
        assert fit.r_squared == 1.0

    def test_flat_line(self):
        fit = fit_fano_line(line_points(0.0, 0.21, [0.1, 0.2, 0.3]))
        assert fit.slope == pytest.approx(0.0, abs=1e-13)
        assert fit.intercept_gamma == pytest.approx(0.21, abs=1e-13)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-2, 2), st.floats(0.01, 1), st.lists(st.floats(0.01, 1), min_size=3,
                                                            max_size=12, unique=True),
           st.booleans())
    def test_exact_regardless_of_weights(self, slope, intercept, xs, weighted):
        if np.ptp(xs) < 1e-3:
            return
        rng = np.random.default_rng(len(xs))
        pts = [FanoPoint(x, intercept + slope * x, 0.001, float(s), "p", 100)
               for x, s in zip(xs, rng.uniform(0.001, 0.1, len(xs)))]
        fit = fit_fano_line(pts, weighted=weighted)
        assert fit.slope == pytest.approx(slope, abs=1e-9)
        assert fit.intercept_gamma == pytest.approx(intercept, abs=1e-9)

    def test_too_few_points(self):
        with pytest.raises(FitError):
            fit_fano_line(line_points(0.5, 0.2, [0.3]))
        pts = line_points(0.5, 0.2, [0.3, 0.4])
        pts[1] = FanoPoint(0.4, math.nan, 0.0, math.nan, "x", 10, usable=False)
        with pytest.raises(FitError):
            fit_fano_line(pts)

    def test_degenerate(self):
        with pytest.raises(FitError):
            fit_fano_line(line_points(0.5, 0.2, [0.3, 0.3, 0.3]))

    def test_weighted_errors_are_absolute(self):
        rng = np.random.default_rng(0)
        xs = np.linspace(0.05, 0.5, 10)
        true = []
        for _ in range(400):
            pts = [FanoPoint(x, 0.2 + 0.3 * x + 0.004 * rng.standard_normal(), 0.0, 0.004, "p", 10)
                   for x in xs]
            fit = fit_fano_line(pts)
            true.append((fit.slope - 0.3) / fit.slope_se)
        assert np.std(true) == pytest.approx(1.0, abs=0.1)

    def test_thermal_pipeline(self):
        cfg = case_config("B", seed=3)
        dark, series = simulate_experiment(cfg)
        fit = calibrate(series, dark).fit
        assert abs(fit.slope - 1.0) <= 0.05
        assert abs(fit.intercept_gamma - 0.2) <= 0.01


@pytest.mark.slow
@pytest.mark.parametrize("case", sorted(CASES))
def test_slope_coverage(case):
    reps, hits = 20, 0
    for k in range(reps):
        cfg = case_config(case, seed=1000 + k)
        dark, series = simulate_experiment(cfg)
        fit = calibrate(series, dark).fit
        hits += abs(fit.slope - predicted_slope(cfg.state)) <= 3 * fit.slope_se
    assert hits >= 19


class TestRebin:
    def test_exact_multiples(self):
        p = rebin_to_photoelectrons(ShotSeries([0.0, 0.21, 0.42]), 0.0, 0.21)
        np.testing.assert_allclose(p.probs, [1 / 3, 1 / 3, 1 / 3])

    def test_rounding_rule(self):
        assert photoelectron_bins(ShotSeries([0.41]), 0.0, 0.2).tolist() == [2]
        # bins are [m - 1/2, m + 1/2); negatives collapse into bin 0
        v = np.array([-0.3, -0.05, 0.09, 0.1, 0.29, 0.31])
        assert photoelectron_bins(ShotSeries(v), 0.0, 0.2).tolist() == [0, 0, 0, 1, 1, 2]

    def test_noiseless_reproduces_counts(self):
        det = DetectorConfig(0.4, 0.2, dark_offset=0.07)
        from fanocal.detection import simulate_photoelectrons
        m = simulate_photoelectrons(Thermal1(2.0), 0.4, 20000, 6)
        s = simulate_shots(Thermal1(2.0), det, 20000, 6)
        assert np.array_equal(rebin_counts(s, 0.07, 0.2), np.bincount(m))

    def test_coherent_fidelity(self):
        det = DetectorConfig(0.29, 0.2, dark_sigma=0.02)
        model = Coherent(1.95 / 0.29)
        s = simulate_shots(model, det, 30000, 12)
        from fanocal.states import pmf
        p = rebin_to_photoelectrons(s, 0.0, 0.2)
        assert distribution_fidelity(p, pmf(Coherent(1.95))) >= 0.999


probs = st.lists(st.floats(0, 1), min_size=1, max_size=15).filter(lambda w: sum(w) > 1e-6)


class TestFidelity:
    def test_examples(self):
        p = ProbDist([0.2, 0.5, 0.3])
        assert distribution_fidelity(p, p) == pytest.approx(1.0)
        assert distribution_fidelity([1.0, 0.0], [0.0, 1.0]) == 0.0
        assert distribution_fidelity([0.5, 0.5], [1.0, 0.0]) == pytest.approx(math.sqrt(0.5))

    def test_padding(self):
        assert distribution_fidelity([1.0], [0.5, 0.5]) == pytest.approx(math.sqrt(0.5))

    @settings(max_examples=100, deadline=None)
    @given(probs, probs)
    def test_symmetric_and_bounded(self, a, b):
        p, q = ProbDist.from_weights(a), ProbDist.from_weights(b)
        f = distribution_fidelity(p, q)
        assert 0.0 <= f <= 1.0
        assert f == distribution_fidelity(q, p)

    @settings(max_examples=100, deadline=None)
    @given(probs, probs)
    def test_identity_of_indiscernibles(self, a, b):
        p, q = ProbDist.from_weights(a), ProbDist.from_weights(b)
        assert distribution_fidelity(p, p) == pytest.approx(1.0, abs=1e-12)
        if np.max(np.abs(p.padded(len(q)) - q.padded(len(p)))) > 1e-6:
            assert distribution_fidelity(p, q) < 1.0
