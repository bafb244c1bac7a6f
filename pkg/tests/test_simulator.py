from __future__ import annotations

import math
import unittest

import numpy as np

from d2dcover_app.acceptance import matched_simulation
from d2dcover_app.analysis_mmw import laplace_mmw_interference
from d2dcover_app.analysis_uw import laplace_uw_bs, laplace_uw_dt
from d2dcover_app.evaluator import sinr_coverage
from d2dcover_app.geometry import BlockageField, NetworkRealization, Point2D
from d2dcover_app.simulator import (
    SimConfig,
    SinrSample,
    access_frequency,
    coverage_point,
    empirical_laplace,
    run_iterations,
    sample_mmw_interference,
    sample_uw_interference,
    simulate_distance_sweep,
    simulate_hybrid,
    simulate_mmw_iteration,
    simulate_uw_iteration,
    wilson_halfwidth,
)
from sim_test_utils import TEST_PKD, small_config, table_params

FREE_LINK = NetworkRealization.local(BlockageField.empty(), Point2D(50.0, 0.0))


class SimConfigTests(unittest.TestCase):
    def test_rejects_unknown_modes(self) -> None:
        for changes in ({"mode": "oracle"}, {"los_mode": "ray"}, {"deferral": "skip"}, {"sensing_mode": "x"}):
            with self.subTest(changes=changes):
                with self.assertRaises(ValueError):
                    SimConfig(**changes)

    def test_rejects_bad_numbers(self) -> None:
        with self.assertRaises(ValueError):
            SimConfig(iterations=0)
        with self.assertRaises(ValueError):
            SimConfig(confidence=1.0)
        with self.assertRaises(ValueError):
            SimConfig(workers=0)


class IterationTests(unittest.TestCase):
    def test_noise_limited_mmw_link(self) -> None:
        params = table_params()
        sample = simulate_mmw_iteration(params, FREE_LINK, np.random.default_rng(1), test_los=True, h0=1.0)
        self.assertEqual(sample.interference, 0.0)
        self.assertTrue(sample.los)
        self.assertAlmostEqual(sample.sinr, 0.7294, delta=0.005)

    def test_blocked_mmw_link_is_outage(self) -> None:
        sample = simulate_mmw_iteration(table_params(), FREE_LINK, np.random.default_rng(1), test_los=False, h0=1.0)
        self.assertEqual(sample.sinr, 0.0)
        self.assertFalse(sample.los)

    def test_noise_limited_uw_link(self) -> None:
        params = table_params()
        band = params.uw_band
        config = small_config(mode="uw_only", sensing_mode="mean_radius")
        sample = simulate_uw_iteration(params, FREE_LINK, np.random.default_rng(1), config, h0=1.0)
        expected = params.dt_power * band.pathloss_constant * 50.0**-4 / band.noise_power
        self.assertAlmostEqual(sample.sinr / expected, 1.0, places=12)
        self.assertEqual(sample.band_used, "uw")
        self.assertFalse(sample.deferred)

    def test_sample_rejects_negative_sinr(self) -> None:
        with self.assertRaises(ValueError):
            SinrSample(-1.0, "mmw", True, 0.0)


class RunTests(unittest.TestCase):
    def test_iterations_are_reproducible(self) -> None:
        params = table_params()
        config = small_config(iterations=60, chunk_size=16)
        first = [s.sinr for s in run_iterations(params, config)]
        second = [s.sinr for s in run_iterations(params, config)]
        threaded = [s.sinr for s in run_iterations(params, small_config(iterations=60, chunk_size=16, workers=3))]
        self.assertEqual(first, second)
        self.assertEqual(first, threaded)
        self.assertEqual(len(first), 60)

    def test_different_seeds_differ(self) -> None:
        params = table_params()
        a = [s.sinr for s in run_iterations(params, small_config(iterations=40, root_seed=1))]
        b = [s.sinr for s in run_iterations(params, small_config(iterations=40, root_seed=2))]
        self.assertNotEqual(a, b)

    def test_progress_reaches_total(self) -> None:
        calls: list[tuple[int, int]] = []
        run_iterations(table_params(), small_config(iterations=30, chunk_size=10), progress=lambda d, t: calls.append((d, t)))
        self.assertEqual(calls[-1], (30, 30))
        self.assertEqual(len(calls), 3)

    def test_oracle_without_blockage_uses_mmw(self) -> None:
        samples = run_iterations(table_params(beta=0.0), small_config(iterations=50))
        self.assertTrue(all(s.band_used == "mmw" and s.los for s in samples))

    def test_microwave_modes_need_pkd(self) -> None:
        with self.assertRaises(ValueError):
            run_iterations(table_params(pkd=None), small_config(mode="uw_only"))

    def test_mmw_only_tracks_analysis(self) -> None:
        params = table_params()
        config = small_config(mode="mmw_only", iterations=2000, chunk_size=500)
        curve = simulate_hybrid(params, config, [0.0])
        analytic = sinr_coverage(params, 1.0, "mmw")
        self.assertAlmostEqual(curve.value_at(0.0), analytic, delta=0.05)
        self.assertGreater(curve.points[0].ci_halfwidth, 0.0)

    def test_curve_is_non_increasing(self) -> None:
        curve = simulate_hybrid(table_params(), small_config(iterations=100), [-10.0, 0.0, 10.0, 20.0])
        values = curve.probabilities
        self.assertTrue(all(b <= a for a, b in zip(values, values[1:])))
        self.assertEqual(curve.source, "monte_carlo")
        self.assertEqual(curve.mode, "hybrid_oracle")

    def test_rate_axis(self) -> None:
        curve = simulate_hybrid(table_params(), small_config(iterations=50), [1e7, 1e9], axis="rate_bps")
        self.assertGreaterEqual(curve.value_at(1e7), curve.value_at(1e9))
        with self.assertRaises(ValueError):
            simulate_hybrid(table_params(), small_config(iterations=10), [10.0], axis="distance_m")

    def test_distance_sweep(self) -> None:
        calls: list[int] = []
        curve = simulate_distance_sweep(
            table_params(),
            small_config(mode="mmw_only", iterations=100),
            [10.0, 150.0],
            progress=lambda d, t: calls.append(d),
        )
        self.assertEqual(curve.axis, "distance_m")
        self.assertGreater(curve.value_at(10.0), curve.value_at(150.0))
        self.assertEqual(calls, [1, 2])
        with self.assertRaises(ValueError):
            simulate_distance_sweep(table_params(), small_config(), [0.0, 10.0])


class StatisticsTests(unittest.TestCase):
    def test_wilson_halfwidth(self) -> None:
        self.assertAlmostEqual(wilson_halfwidth(50, 100), 0.0962, delta=1e-3)
        self.assertGreater(wilson_halfwidth(0, 100), 0.0)
        self.assertTrue(math.isnan(wilson_halfwidth(0, 0)))

    def test_coverage_point_deferral(self) -> None:
        samples = [
            SinrSample(2.0, "uw", False, 0.0),
            SinrSample(0.0, "uw", False, 0.0, deferred=True),
        ]
        outage = coverage_point(samples, {"mmw": 1.0, "uw": 1.0}, 0.0, "outage", 0.95)
        condition = coverage_point(samples, {"mmw": 1.0, "uw": 1.0}, 0.0, "condition", 0.95)
        self.assertEqual(outage.probability, 0.5)
        self.assertEqual(condition.probability, 1.0)
        self.assertEqual(access_frequency(samples), 0.5)
        empty = coverage_point(samples[1:], {"mmw": 1.0, "uw": 1.0}, 0.0, "condition", 0.95)
        self.assertTrue(empty.failed)
        self.assertTrue(math.isnan(empty.probability))

    def test_zero_sinr_never_covers(self) -> None:
        point = coverage_point([SinrSample(0.0, "mmw", False, 0.0)], {"mmw": 0.0, "uw": 0.0}, 0.0, "outage", 0.95)
        self.assertEqual(point.probability, 0.0)

    def test_empirical_laplace(self) -> None:
        samples = np.random.default_rng(8).exponential(1.0, size=5000)
        estimate = empirical_laplace(samples, 1.0)
        self.assertAlmostEqual(estimate.value, 0.5, delta=0.02)
        self.assertGreater(estimate.ci_halfwidth, 0.0)
        self.assertEqual(estimate.method, "empirical")

    def test_empirical_laplace_degenerate_cases(self) -> None:
        self.assertEqual(empirical_laplace(np.ones(1000), 0.0).value, 1.0)
        self.assertEqual(empirical_laplace(np.zeros(1000), 3.0).value, 1.0)
        with self.assertRaises(ValueError):
            empirical_laplace(np.ones(999), 1.0)
        with self.assertRaises(ValueError):
            empirical_laplace(np.ones(1000), -1.0)

class AnalysisOracleTests(unittest.TestCase):
    def test_mmw_laplace_matches_sampled_interference(self) -> None:
        params = table_params()
        config = matched_simulation(small_config(iterations=20_000, window_half_width=1500.0, chunk_size=2000))
        scenario = params.mmw_scenario(threshold=1.0)
        sampled = empirical_laplace(sample_mmw_interference(params, config), scenario.epsilon, rng_seed=1)
        quadrature = laplace_mmw_interference(scenario, scenario.epsilon)
        self.assertLessEqual(quadrature.relative_deviation(sampled), 0.02)

    def test_uw_laplace_matches_sampled_interference(self) -> None:
        params = table_params()
        # the window must reach well past the mean threshold radius for the BS term
        config = matched_simulation(small_config(iterations=20_000, window_half_width=2500.0, chunk_size=2000))
        scenario = params.uw_scenario(threshold=1.0)
        i_dt, i_bs = sample_uw_interference(params, config)
        dt = laplace_uw_dt(scenario, scenario.availability, method="quadrature")
        bs = laplace_uw_bs(scenario, scenario.require_pkd(), scenario.threshold_radius, method="quadrature")
        self.assertLessEqual(dt.relative_deviation(empirical_laplace(i_dt, scenario.epsilon, rng_seed=2)), 0.02)
        self.assertLessEqual(bs.relative_deviation(empirical_laplace(i_bs, scenario.epsilon, rng_seed=3)), 0.02)

    def test_uw_only_tracks_analysis(self) -> None:
        params = table_params(distance=10.0)
        config = matched_simulation(small_config(mode="uw_only", iterations=4000, chunk_size=500))
        curve = simulate_hybrid(params, config, [0.0])
        self.assertAlmostEqual(curve.value_at(0.0), sinr_coverage(params, 1.0, "uw"), delta=0.03)

    def test_access_frequency_tracks_availability(self) -> None:
        params = table_params(dt_density=0.0)
        config = small_config(
            mode="uw_only",
            sensing_mode="per_bs",
            iterations=40_000,
            window_half_width=3000.0,
            chunk_size=5000,
        )
        freq = access_frequency(run_iterations(params, config))
        self.assertAlmostEqual(freq, params.uw_scenario().availability, delta=0.03)
        # per-BS sensing draws a Rayleigh fade for every sensed BS
        faded = math.exp(
            -params.bs_density
            * TEST_PKD
            * math.pi
            * math.gamma(1.5)
            * math.sqrt(params.bs_power / params.sensing_threshold)
        )
        self.assertAlmostEqual(freq, faded, delta=0.012)



if __name__ == "__main__":
    unittest.main()
