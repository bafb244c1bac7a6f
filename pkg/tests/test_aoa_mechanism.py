from __future__ import annotations

import csv
import itertools
import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from d2dcover_app.aoa_mechanism import (
    DEFAULT_TOLERANCE,
    AoAPeak,
    AoASpectrum,
    MechanismParams,
    MicroWave,
    MmWave,
    PeerProfile,
    ProfileNotFullError,
    angular_distance,
    combine_profile,
    compute_aoa_spectrum,
    decide_band,
    push_observation,
    run_mechanism,
    write_profile_csv,
)
from d2dcover_app.geometry import BlockageField, NetworkRealization, Point2D, is_los, sample_realization
from d2dcover_app.propagation import watts_to_dbm
from d2dcover_app.simulator import iteration_rng
from sim_test_utils import field_of, square, table_params, wall

TX = Point2D(50.0, 0.0)
RX = Point2D(0.0, 0.0)


def _spectrum(*degrees: float, magnitude: float = 1e-13) -> AoASpectrum:
    return AoASpectrum(tuple(sorted((AoAPeak.at(magnitude, math.radians(d)) for d in degrees), key=lambda p: p.angle)))


def _profile(*spectra: AoASpectrum) -> PeerProfile:
    return PeerProfile(len(spectra), tuple(spectra))


def _random_profile(rng: np.random.Generator, window: int) -> PeerProfile:
    """Spectra built around two bearings with a few degrees of wander and the odd stray peak."""
    bases = rng.uniform(0.0, 360.0, size=2)
    spectra = []
    for _ in range(window):
        degrees = [b + rng.uniform(-3.0, 3.0) for b in bases if rng.random() < 0.9]
        if rng.random() < 0.3:
            degrees.append(rng.uniform(0.0, 360.0))
        peaks = (AoAPeak.at(rng.uniform(1e-14, 1e-12), math.radians(d)) for d in degrees)
        spectra.append(AoASpectrum(tuple(sorted(peaks, key=lambda p: p.angle))))
    return PeerProfile(window, tuple(spectra))


class SpectrumTests(unittest.TestCase):
    def test_free_space_has_single_direct_peak(self) -> None:
        realization = NetworkRealization.local(BlockageField.empty(), TX)
        spectrum = compute_aoa_spectrum(realization, TX, RX)
        self.assertEqual(len(spectrum), 1)
        self.assertAlmostEqual(spectrum.peaks[0].angle, 0.0)
        self.assertAlmostEqual(watts_to_dbm(spectrum.peaks[0].magnitude), -106.4, delta=0.1)

    def test_wall_adds_specular_reflection(self) -> None:
        realization = NetworkRealization.local(field_of(wall(25.0, 10.0, 40.0, 2.0, 0.0)), TX)
        spectrum = compute_aoa_spectrum(realization, TX, RX)
        self.assertEqual(len(spectrum), 2)
        angles = sorted(math.degrees(a) for a in spectrum.angles)
        self.assertAlmostEqual(angles[0], 0.0, places=6)
        self.assertAlmostEqual(angles[1], math.degrees(math.atan2(9.0, 25.0)), places=6)
        direct, reflected = sorted(spectrum.peaks, key=lambda p: p.angle)
        self.assertLess(reflected.magnitude, direct.magnitude)

    def test_reflection_beyond_reach_is_dropped(self) -> None:
        realization = NetworkRealization.local(field_of(wall(25.0, 20.0, 40.0, 2.0, 0.0)), TX)
        self.assertGreater(math.hypot(50.0, 38.0), MechanismParams().reflection_reach)
        self.assertEqual(len(compute_aoa_spectrum(realization, TX, RX)), 1)

    def test_blocked_link_loses_direct_peak(self) -> None:
        realization = NetworkRealization.local(field_of(square(25.0, 0.0, 4.0)), TX)
        self.assertEqual(len(compute_aoa_spectrum(realization, TX, RX)), 0)

    def test_scatter_moves_reflections_only(self) -> None:
        realization = NetworkRealization.local(field_of(wall(25.0, 10.0, 40.0, 2.0, 0.0)), TX)
        spectrum = compute_aoa_spectrum(realization, TX, RX, reflection_scatter=math.radians(25.0), rng=5)
        self.assertIn(0.0, spectrum.angles)
        others = [a for a in spectrum.angles if a != 0.0]
        self.assertTrue(all(angular_distance(a, math.atan2(9.0, 25.0)) > 0 for a in others))

    def test_same_endpoints_rejected(self) -> None:
        realization = NetworkRealization.local(BlockageField.empty(), TX)
        with self.assertRaises(ValueError):
            compute_aoa_spectrum(realization, RX, RX)

    def test_reach_follows_link_budget(self) -> None:
        self.assertAlmostEqual(MechanismParams().reflection_reach, 61.4, delta=0.2)


class ProfileTests(unittest.TestCase):
    def test_push_keeps_latest_window(self) -> None:
        profile = PeerProfile(2)
        for degrees in (10.0, 20.0, 30.0):
            profile = push_observation(profile, _spectrum(degrees))
        self.assertTrue(profile.is_full)
        self.assertEqual([round(math.degrees(s.angles[0])) for s in profile.spectra], [20, 30])

    def test_combine_requires_full_window(self) -> None:
        with self.assertRaises(ProfileNotFullError):
            combine_profile(PeerProfile(2, (_spectrum(0.0),)))

    def test_stable_direct_peak_survives_moving_reflections(self) -> None:
        combined = combine_profile(_profile(_spectrum(0.0, 20.0), _spectrum(0.5, 45.0)))
        self.assertEqual(len(combined), 1)
        self.assertAlmostEqual(math.degrees(combined.peaks[0].angle), 0.25, places=6)
        decision = decide_band(combined)
        self.assertIsInstance(decision, MmWave)

    def test_persistent_reflection_forces_microwave(self) -> None:
        combined = combine_profile(_profile(_spectrum(0.0, 20.0), _spectrum(0.0, 21.0)))
        self.assertEqual(len(combined), 2)
        self.assertIsInstance(decide_band(combined), MicroWave)

    def test_nothing_in_common_is_microwave(self) -> None:
        combined = combine_profile(_profile(_spectrum(20.0), _spectrum(60.0)))
        self.assertEqual(len(combined), 0)
        self.assertIsInstance(decide_band(combined), MicroWave)

    def test_window_of_one_passes_spectrum_through(self) -> None:
        combined = combine_profile(_profile(_spectrum(5.0, 90.0)))
        self.assertEqual(len(combined), 2)

    def test_peaks_across_zero_are_matched(self) -> None:
        combined = combine_profile(_profile(_spectrum(359.5), _spectrum(0.5)))
        self.assertEqual(len(combined), 1)
        self.assertLess(angular_distance(combined.peaks[0].angle, 0.0), 1e-9)

    def assertWithinToleranceOfEverySpectrum(self, profile: PeerProfile, combined: AoASpectrum) -> None:
        for peak in combined:
            for spectrum in profile.spectra:
                gap = min(angular_distance(peak.angle, other.angle) for other in spectrum)
                self.assertLessEqual(gap, DEFAULT_TOLERANCE + 1e-12)

    def test_wide_window_rejects_spread_cluster(self) -> None:
        # the mean of the four sits near 0.5 deg, 2.5 deg from the -2 peak
        profile = _profile(_spectrum(0.0), _spectrum(-2.0), _spectrum(2.0), _spectrum(2.0))
        combined = combine_profile(profile)
        self.assertWithinToleranceOfEverySpectrum(profile, combined)
        self.assertIsInstance(decide_band(combined), MicroWave)

    def test_wide_window_keeps_tight_cluster(self) -> None:
        profile = _profile(_spectrum(0.0, 40.0), _spectrum(1.0), _spectrum(-1.0, 80.0), _spectrum(0.5))
        combined = combine_profile(profile)
        self.assertEqual(len(combined), 1)
        self.assertAlmostEqual(math.degrees(combined.peaks[0].angle), 0.125, places=3)

    def test_wide_windows_stay_within_tolerance(self) -> None:
        rng = np.random.default_rng(17)
        for trial in range(300):
            profile = _random_profile(rng, window=int(rng.integers(3, 6)))
            with self.subTest(trial=trial):
                self.assertWithinToleranceOfEverySpectrum(profile, combine_profile(profile))

    def test_combined_peaks_ignore_window_order(self) -> None:
        rng = np.random.default_rng(5)
        for trial in range(40):
            profile = _random_profile(rng, window=4)
            expected = combine_profile(profile)
            for order in itertools.permutations(profile.spectra):
                combined = combine_profile(PeerProfile(4, order))
                with self.subTest(trial=trial, order=[profile.spectra.index(s) for s in order]):
                    self.assertEqual(len(combined), len(expected))
                    for got, want in zip(combined, expected):
                        self.assertAlmostEqual(got.angle, want.angle, places=12)
                        self.assertAlmostEqual(got.magnitude / want.magnitude, 1.0, places=12)


class RunMechanismTests(unittest.TestCase):
    def test_free_space_aligns_beam(self) -> None:
        realization = NetworkRealization.local(BlockageField.empty(), TX)
        params = MechanismParams()
        for seed in range(20):
            outcome = run_mechanism(realization, TX, RX, rng=seed, params=params)
            self.assertIsInstance(outcome.decision, MmWave)
            self.assertLessEqual(angular_distance(outcome.decision.beam_angle, 0.0), params.angular_tolerance)
            self.assertEqual(len(outcome.profile.spectra), params.window)

    def test_blocked_link_falls_back(self) -> None:
        realization = NetworkRealization.local(field_of(square(25.0, 0.0, 4.0)), TX)
        outcome = run_mechanism(realization, TX, RX, rng=1)
        self.assertIsInstance(outcome.decision, MicroWave)

    def test_static_reflector_without_disparity_falls_back(self) -> None:
        realization = NetworkRealization.local(field_of(wall(25.0, 10.0, 40.0, 2.0, 0.0)), TX)
        params = MechanismParams(jitter_sigma=0.0, reflection_scatter=0.0)
        outcome = run_mechanism(realization, TX, RX, rng=1, params=params)
        self.assertIsInstance(outcome.decision, MicroWave)
        self.assertEqual(len(outcome.combined), 2)

    def test_lone_reflection_behind_blocker_falls_back(self) -> None:
        tx = Point2D(40.0, 0.0)
        # blocker on the direct path, one reflecting face at y = 11
        realization = NetworkRealization.local(field_of(square(20.0, 0.0, 4.0), wall(20.0, 12.0, 60.0, 2.0, 0.0)), tx)
        self.assertEqual(len(compute_aoa_spectrum(realization, tx, RX)), 1)
        params = MechanismParams()
        fallbacks = sum(
            isinstance(run_mechanism(realization, tx, RX, rng=seed, params=params).decision, MicroWave)
            for seed in range(1000)
        )
        self.assertGreaterEqual(fallbacks, 950)

    def test_lone_static_reflection_passes_without_scatter(self) -> None:
        tx = Point2D(40.0, 0.0)
        realization = NetworkRealization.local(field_of(square(20.0, 0.0, 4.0), wall(20.0, 12.0, 60.0, 2.0, 0.0)), tx)
        params = MechanismParams(jitter_sigma=0.0, reflection_scatter=0.0)
        outcome = run_mechanism(realization, tx, RX, rng=1, params=params)
        self.assertIsInstance(outcome.decision, MmWave)

    def test_decision_tracks_geometric_los(self) -> None:
        system = table_params()
        mech = system.mechanism_params
        extent = system.distance + mech.reflection_reach + 200.0
        drops = 1000
        agree = 0
        for i in range(drops):
            rng = iteration_rng(23, i)
            realization = sample_realization(
                distance=system.distance,
                window_half_width=extent,
                dt_density=0.0,
                bs_density=0.0,
                cu_density=0.0,
                blockage_process=system.blockage_process,
                rng_seed=rng,
            )
            outcome = run_mechanism(realization, realization.test_tx, realization.test_rx, rng=rng, params=mech)
            los = is_los(realization.test_tx, realization.test_rx, realization.blockages)
            agree += isinstance(outcome.decision, MmWave) == los
        self.assertGreaterEqual(agree / drops, 0.95)

    def test_invalid_window(self) -> None:
        realization = NetworkRealization.local(BlockageField.empty(), TX)
        with self.assertRaises(ValueError):
            run_mechanism(realization, TX, RX, W=0)

    def test_profile_csv_includes_combined_rows(self) -> None:
        realization = NetworkRealization.local(BlockageField.empty(), TX)
        outcome = run_mechanism(realization, TX, RX, rng=3)
        with tempfile.TemporaryDirectory() as tmp_dir:
            path = write_profile_csv(Path(tmp_dir) / "profile.csv", outcome.profile, outcome.combined)
            with path.open("r", encoding="utf-8") as handle:
                rows = list(csv.DictReader(handle))
        self.assertEqual(sorted({row["round_index"] for row in rows}), ["-1", "0", "1"])
        self.assertTrue(all(float(row["magnitude_dbm"]) < -100.0 for row in rows))


if __name__ == "__main__":
    unittest.main()
