from __future__ import annotations

import math
import unittest

from d2dcover_app.analysis_mmw import coverage_mmw, laplace_mmw_interference
from d2dcover_app.analysis_uw import (
    ClosedFormUnavailableError,
    availability,
    coverage_uw,
    estimate_pkd,
    laplace_uw_bs,
    laplace_uw_dt,
    mean_threshold_radius,
)
from d2dcover_app.geometry import los_probability
from d2dcover_app.laplace import LaplaceEvaluation, QuadratureError, pgfl_exponent, truncation_radius
from d2dcover_app.params import SystemParams
from d2dcover_app.propagation import BandParams, dbm_to_watts
from sim_test_utils import TEST_PKD, table_params


class PgflTests(unittest.TestCase):
    def test_zero_density_or_scale(self) -> None:
        self.assertEqual(pgfl_exponent(0.0, 4.0, 1e-5), (0.0, 0.0))
        self.assertEqual(pgfl_exponent(10.0, 4.0, 0.0), (0.0, 0.0))

    def test_alpha_four_matches_arctangent_form(self) -> None:
        scale, density, r_min = 1e8, 1e-5, 50.0
        value, _ = pgfl_exponent(scale, 4.0, density, r_min=r_min, r_max=1e7)
        root = math.sqrt(scale)
        expected = -math.pi * density * root * (math.pi / 2.0 - math.atan(r_min**2 / root))
        self.assertAlmostEqual(value / expected, 1.0, places=6)

    def test_truncation_radius(self) -> None:
        self.assertEqual(truncation_radius(0.0), 20_000.0)
        self.assertEqual(truncation_radius(0.0001), 400_000.0)
        with self.assertRaises(ValueError):
            truncation_radius(-1.0)

    def test_quadrature_error_carries_tolerance(self) -> None:
        exc = QuadratureError("did not converge", 1e-3)
        self.assertEqual(exc.achieved_tolerance, 1e-3)
        self.assertIn("0.001", str(exc))

    def test_evaluation_method_is_checked(self) -> None:
        with self.assertRaises(ValueError):
            LaplaceEvaluation(value=0.5, method="guess")
        estimate = LaplaceEvaluation(value=0.5, method="empirical")
        self.assertAlmostEqual(LaplaceEvaluation(value=0.51, method="quadrature").relative_deviation(estimate), 0.02)


class MmwAnalysisTests(unittest.TestCase):
    def test_noise_limited_coverage(self) -> None:
        params = table_params(dt_density=0.0)
        scenario = params.mmw_scenario(threshold=1.0)
        snr = 1e-3 * 100.0 * scenario.pathloss_constant * 50.0**-2 / scenario.band.noise_power
        self.assertAlmostEqual(coverage_mmw(scenario), math.exp(-1.0 / snr), places=12)
        self.assertAlmostEqual(
            coverage_mmw(scenario, conditional_on_los=False),
            math.exp(-1.0 / snr) * los_probability(50.0, 0.0053),
            places=12,
        )

    def test_laplace_at_zero_is_one(self) -> None:
        scenario = table_params().mmw_scenario()
        self.assertEqual(laplace_mmw_interference(scenario, 0.0).value, 1.0)
        with self.assertRaises(ValueError):
            laplace_mmw_interference(scenario, -1.0)

    def test_interference_lowers_coverage(self) -> None:
        quiet = coverage_mmw(table_params(dt_density=10e-6).mmw_scenario())
        busy = coverage_mmw(table_params(dt_density=200e-6).mmw_scenario())
        self.assertLess(busy, quiet)

    def test_coverage_falls_with_threshold(self) -> None:
        params = table_params()
        values = [coverage_mmw(params.mmw_scenario(threshold=10 ** (db / 10))) for db in (-10, 0, 10)]
        self.assertTrue(values[0] > values[1] > values[2])
        self.assertTrue(all(0.0 <= v <= 1.0 for v in values))

    def test_sectored_gain_classes(self) -> None:
        scenario = table_params().mmw_scenario()
        sectored = laplace_mmw_interference(scenario, scenario.epsilon)
        self.assertIn("3 gain classes", sectored.detail)
        self.assertGreater(sectored.value, 0.0)
        self.assertLessEqual(sectored.value, 1.0)

    def test_scenario_validation(self) -> None:
        with self.assertRaises(ValueError):
            table_params().mmw_scenario(threshold=-1.0)
        with self.assertRaises(ValueError):
            table_params().mmw_scenario(distance=0.0)


class UwAnalysisTests(unittest.TestCase):
    def test_mean_threshold_radius(self) -> None:
        radius = mean_threshold_radius(dbm_to_watts(37.0), dbm_to_watts(-85.0), 4.0)
        self.assertAlmostEqual(radius, 1017.0, delta=1.0)
        with self.assertRaises(ValueError):
            mean_threshold_radius(1.0, 0.0, 4.0)

    def test_availability(self) -> None:
        self.assertAlmostEqual(availability(1e-6, 0.13, 1000.0), math.exp(-0.13 * math.pi), places=12)
        self.assertEqual(availability(1e-6, 0.0, 1000.0), 1.0)

    def test_estimate_pkd(self) -> None:
        self.assertEqual(estimate_pkd(1e-6, 0.0, 8, rng=1, n_cells=500), 0.0)
        a = estimate_pkd(1e-6, 5e-6, 8, rng=4, n_cells=2000)
        b = estimate_pkd(1e-6, 5e-6, 8, rng=4, n_cells=2000)
        self.assertEqual(a, b)
        self.assertGreater(a, 0.0)
        self.assertLess(a, 0.5)
        self.assertGreater(estimate_pkd(1e-6, 5e-6, 1, rng=4, n_cells=2000), a)
        with self.assertRaises(ValueError):
            estimate_pkd(0.0, 5e-6, 8, rng=1)

    def test_resolved_params_keep_override(self) -> None:
        params = SystemParams(pkd=0.2)
        self.assertIs(params.resolved(rng=1), params)
        resolved = SystemParams().resolved(rng=1, n_cells=500)
        self.assertIsNotNone(resolved.pkd)

    def test_unresolved_pkd_raises(self) -> None:
        with self.assertRaises(ValueError):
            coverage_uw(SystemParams().uw_scenario())

    def test_dt_closed_form_matches_quadrature(self) -> None:
        scenario = table_params().uw_scenario(threshold=1.0, distance=50.0)
        p_a = scenario.availability
        quad = laplace_uw_dt(scenario, p_a, method="quadrature")
        closed = laplace_uw_dt(scenario, p_a, method="closed_form", exponent="standard")
        self.assertAlmostEqual(closed.value, quad.value, delta=1e-4)
        printed = laplace_uw_dt(scenario, p_a, method="closed_form", exponent="literal")
        self.assertNotAlmostEqual(printed.value, quad.value, places=3)

    def test_bs_closed_form_matches_quadrature(self) -> None:
        scenario = table_params().uw_scenario(threshold=1.0, distance=50.0)
        radius = scenario.threshold_radius
        quad = laplace_uw_bs(scenario, TEST_PKD, radius, method="quadrature")
        closed = laplace_uw_bs(scenario, TEST_PKD, radius, method="closed_form", form="standard")
        self.assertAlmostEqual(closed.value, quad.value, delta=1e-4)

    def test_no_busy_cells_means_no_bs_interference(self) -> None:
        scenario = table_params(pkd=0.0).uw_scenario()
        self.assertEqual(laplace_uw_bs(scenario, 0.0, scenario.threshold_radius).value, 1.0)
        self.assertEqual(scenario.availability, 1.0)

    def test_closed_forms_unavailable(self) -> None:
        band = BandParams.with_thermal_noise(2e9, 1e8, 2.0)
        scenario = table_params(uw_band=band).uw_scenario()
        with self.assertRaises(ClosedFormUnavailableError):
            laplace_uw_dt(scenario, 0.5, method="closed_form")
        band = BandParams.with_thermal_noise(2e9, 1e8, 3.0)
        scenario = table_params(uw_band=band).uw_scenario()
        with self.assertRaises(ClosedFormUnavailableError):
            laplace_uw_bs(scenario, TEST_PKD, 100.0, method="closed_form")

    def test_coverage_methods_agree_at_short_range(self) -> None:
        scenario = table_params().uw_scenario(threshold=1.0, distance=5.0)
        quad = coverage_uw(scenario, method="quadrature")
        standard = coverage_uw(scenario, method="standard")
        self.assertGreater(quad, 0.0)
        self.assertAlmostEqual(standard, quad, delta=1e-4)
        with self.assertRaises(ValueError):
            coverage_uw(scenario, method="closed_form")

    def test_default_link_is_noise_limited_at_fifty_meters(self) -> None:
        self.assertLess(coverage_uw(table_params().uw_scenario(threshold=1.0)), 1e-6)

    def test_mean_snr(self) -> None:
        self.assertAlmostEqual(10.0 * math.log10(table_params().uw_scenario().mean_snr), -22.43, delta=0.01)
        near = table_params(distance=25.0).uw_scenario().mean_snr
        self.assertAlmostEqual(near / table_params().uw_scenario().mean_snr, 16.0)


if __name__ == "__main__":
    unittest.main()
