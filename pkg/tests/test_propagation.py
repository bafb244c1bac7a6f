from __future__ import annotations

import math
import unittest

import numpy as np

from d2dcover_app.propagation import (
    AntennaPattern,
    BandParams,
    GainDistribution,
    db_to_linear,
    dbm_to_watts,
    gain_distribution,
    linear_to_db,
    mainlobe_covers,
    noise_power,
    path_loss,
    pathloss_constant,
    sample_rayleigh_gain,
    watts_to_dbm,
)


class ConversionTests(unittest.TestCase):
    def test_dbm_and_db(self) -> None:
        self.assertAlmostEqual(dbm_to_watts(0.0), 1e-3)
        self.assertAlmostEqual(dbm_to_watts(37.0), 5.0119, places=4)
        self.assertAlmostEqual(watts_to_dbm(1e-3), 0.0)
        self.assertAlmostEqual(db_to_linear(10.0), 10.0)
        self.assertAlmostEqual(linear_to_db(0.1), -10.0)
        self.assertEqual(watts_to_dbm(0.0), float("-inf"))

    def test_table_noise_floors(self) -> None:
        self.assertAlmostEqual(watts_to_dbm(noise_power(1e9)), -74.0, places=9)
        self.assertAlmostEqual(watts_to_dbm(noise_power(1e8)), -84.0, places=9)
        with self.assertRaises(ValueError):
            noise_power(0.0)


class PathLossTests(unittest.TestCase):
    def test_constant_follows_wavelength(self) -> None:
        expected = (299_792_458.0 / 28e9 / (4.0 * math.pi)) ** 2
        self.assertAlmostEqual(pathloss_constant(28e9) / expected, 1.0, places=12)
        self.assertGreater(pathloss_constant(2e9), pathloss_constant(28e9))

    def test_path_loss_scalar_and_array(self) -> None:
        self.assertAlmostEqual(path_loss(10.0, 2.0, 1.0), 0.01)
        np.testing.assert_allclose(path_loss(np.array([1.0, 2.0]), 4.0, 2.0), [2.0, 0.125])
        with self.assertRaises(ValueError):
            path_loss(0.0, 2.0, 1.0)

    def test_noise_limited_mmw_link_budget(self) -> None:
        band = BandParams.with_thermal_noise(28e9, 1e9, 2.0, 5.0)
        signal = 1e-3 * 100.0 * band.pathloss_constant * 50.0**-2
        self.assertAlmostEqual(signal, 2.904e-11, delta=0.01e-11)
        self.assertAlmostEqual(signal / band.noise_power, 0.731, delta=0.005)

    def test_band_validation(self) -> None:
        with self.assertRaises(ValueError):
            BandParams.with_thermal_noise(28e9, 1e9, 1.5)
        band = BandParams.with_thermal_noise(2e9, 1e8, 4.0)
        self.assertEqual(band.pathloss_exponent_nlos, 4.0)


class AntennaTests(unittest.TestCase):
    def test_table_pattern(self) -> None:
        pattern = AntennaPattern.from_dbi(10.0, -10.0, 30.0)
        self.assertAlmostEqual(pattern.mainlobe_gain, 10.0)
        self.assertAlmostEqual(pattern.sidelobe_gain, 0.1)
        self.assertAlmostEqual(pattern.coverage_probability, 1.0 / 12.0)

    def test_invalid_pattern(self) -> None:
        with self.assertRaises(ValueError):
            AntennaPattern.from_dbi(-10.0, 10.0, 30.0)
        with self.assertRaises(ValueError):
            AntennaPattern.from_dbi(10.0, -10.0, 0.0)

    def test_gain_classes(self) -> None:
        dist = gain_distribution(AntennaPattern.from_dbi(10.0, -10.0, 30.0))
        np.testing.assert_allclose(dist.gains, (100.0, 1.0, 0.01))
        np.testing.assert_allclose(dist.probabilities, (1 / 144, 22 / 144, 121 / 144))
        self.assertAlmostEqual(math.fsum(dist.probabilities), 1.0, places=12)

    def test_omnidirectional_limit(self) -> None:
        dist = gain_distribution(AntennaPattern(2.0, 1.0, 2.0 * math.pi))
        self.assertAlmostEqual(dist.probabilities[0], 1.0)
        self.assertAlmostEqual(dist.mean_gain, 4.0)

    def test_distribution_validation(self) -> None:
        with self.assertRaises(ValueError):
            GainDistribution((1.0, 2.0), (0.5, 0.5))
        with self.assertRaises(ValueError):
            GainDistribution((2.0, 1.0), (0.5, 0.6))

    def test_mainlobe_wraps_around(self) -> None:
        width = math.radians(30.0)
        self.assertTrue(bool(mainlobe_covers(math.radians(355.0), math.radians(5.0), width)))
        self.assertFalse(bool(mainlobe_covers(math.radians(340.0), math.radians(5.0), width)))
        covered = mainlobe_covers(np.array([0.0, math.pi]), 0.0, width)
        self.assertEqual(covered.tolist(), [True, False])

    def test_random_orientations_reproduce_gain_classes(self) -> None:
        pattern = AntennaPattern.from_dbi(10.0, -10.0, 30.0)
        rng = np.random.default_rng(2)
        n = 100_000
        bearing = rng.uniform(0.0, 2.0 * math.pi, size=n)
        tx = mainlobe_covers(bearing + math.pi, rng.uniform(0.0, 2.0 * math.pi, size=n), pattern.beamwidth)
        rx = mainlobe_covers(bearing, rng.uniform(0.0, 2.0 * math.pi, size=n), pattern.beamwidth)
        both = float(np.mean(tx & rx))
        one = float(np.mean(tx ^ rx))
        expected = gain_distribution(pattern).probabilities
        self.assertAlmostEqual(both, expected[0], delta=0.005)
        self.assertAlmostEqual(one, expected[1], delta=0.005)
        self.assertAlmostEqual(1.0 - both - one, expected[2], delta=0.005)


class FadingTests(unittest.TestCase):
    def test_rayleigh_power_has_unit_mean(self) -> None:
        samples = sample_rayleigh_gain(np.random.default_rng(4), size=50_000)
        self.assertAlmostEqual(float(np.mean(samples)), 1.0, delta=0.03)
        self.assertTrue(np.all(samples >= 0))


if __name__ == "__main__":
    unittest.main()
