import math

import numpy as np
import pytest

from isacsim import (
    ClutterConfig,
    ClutterProcess,
    MotionSpec,
    RngStream,
    SPEED_OF_LIGHT,
    TapList,
    clutter_snapshot,
    evolve_clutter,
    received_cycle,
    synthesize_chirp,
    target_channel,
)
from isacsim.channel import (
    ar_mix,
    build_clutter_support,
    cluster_delays,
    draw_clutter_amplitudes,
)
from isacsim.kinematics import PrimitiveTracks


def point_tracks(distances, gains=None, times=None):
    """Single-primitive track helper for channel-level tests."""
    d = np.atleast_2d(np.asarray(distances, dtype=float))
    g = np.ones_like(d) if gains is None else np.atleast_2d(gains)
    t = np.arange(d.shape[1]) * 1e-3 if times is None else times
    spec = MotionSpec("walking", "adult", duration=max(t[-1], 1e-3) + 1e-3)
    return PrimitiveTracks(
        names=tuple(f"p{i}" for i in range(d.shape[0])),
        times=np.asarray(t, dtype=float),
        positions=np.zeros((d.shape[0], d.shape[1], 3)),
        distances=d,
        gains=g,
        v_max=10.0,
        spec=spec,
    )


class TestTapList:
    def test_sorted_by_delay(self):
        taps = TapList(np.array([3e-8, 1e-8]), np.array([1 + 0j, 2 + 0j]))
        assert np.array_equal(taps.delays, [1e-8, 3e-8])
        assert np.array_equal(taps.amps, [2 + 0j, 1 + 0j])

    def test_rejects_negative_delay(self):
        with pytest.raises(ValueError, match="non-negative"):
            TapList(np.array([-1e-9]), np.array([1 + 0j]))

    def test_csv_round_format(self, tmp_path):
        taps = TapList(np.array([1e-8]), np.array([0.5 - 0.25j]))
        out = tmp_path / "taps.csv"
        taps.to_csv(out)
        assert out.read_text().splitlines()[0] == "tau_s,re,im"


class TestTargetChannel:
    def test_single_primitive_hand_values(self, base_cfg):
        # Direct evaluation: D=3 m, G=1, phase 0.
        tracks = point_tracks([[3.0]])
        taps = target_channel(tracks, base_cfg, 0, phases=np.zeros(1))
        assert taps.delays[0] == pytest.approx(2.0 * 3.0 / SPEED_OF_LIGHT)
        a_const = base_cfg.wavelength**2 * math.sqrt(base_cfg.sensing_antenna_gain)
        expected_mag = a_const / math.sqrt(4 * math.pi) / 9.0
        assert abs(taps.amps[0]) == pytest.approx(expected_mag, rel=1e-12)
        expected_phase = (-2 * math.pi * base_cfg.carrier_freq * 2 * 3.0
                          / SPEED_OF_LIGHT) % (2 * math.pi)
        assert np.angle(taps.amps[0]) % (2 * math.pi) == pytest.approx(
            expected_phase, abs=1e-9
        )

    def test_inverse_square_law(self, base_cfg):
        near = target_channel(point_tracks([[2.0]]), base_cfg, 0, phases=np.zeros(1))
        far = target_channel(point_tracks([[4.0]]), base_cfg, 0, phases=np.zeros(1))
        assert abs(near.amps[0]) / abs(far.amps[0]) == pytest.approx(4.0, rel=1e-12)

    def test_empty_tracks_empty_taps(self, base_cfg):
        tracks = point_tracks(np.zeros((0, 1)))
        taps = target_channel(tracks, base_cfg, 0, phases=np.zeros(0))
        assert len(taps) == 0
        out = received_cycle(taps, TapList.empty(),
                             synthesize_chirp(base_cfg), base_cfg)
        assert np.all(out == 0)

    def test_phases_fixed_across_cycles(self, base_cfg, rng):
        tracks = point_tracks([[3.0, 3.001]])
        phases = np.array([0.3])
        t0 = target_channel(tracks, base_cfg, 0, phases=phases)
        t1 = target_channel(tracks, base_cfg, 1, phases=phases)
        # The initial phase contribution is identical; only propagation
        # phase moves between cycles.
        prop = -4 * math.pi * base_cfg.carrier_freq * 0.001 / SPEED_OF_LIGHT
        measured = np.angle(t1.amps[0] / t0.amps[0])
        assert measured == pytest.approx(prop % (2 * math.pi) - 2 * math.pi, abs=1e-6)


class TestClutter:
    def test_cluster_zero_is_direct_path(self, clutter_cfg):
        delays = cluster_delays(clutter_cfg)
        assert delays[0] == 0.0
        assert np.all(np.diff(delays) >= 0)
        assert delays.size == clutter_cfg.num_clusters

    def test_single_ray_amplitude_formula(self, base_cfg):
        # One cluster, one ray, unit reflection: tap magnitude equals
        # wavelength / (4 pi (baseline + tau * c)) times the Rayleigh draw.
        ccfg = ClutterConfig(num_clusters=1, rays_per_cluster=1,
                             reflection_factors=(1.0,))
        rng = RngStream(5, "c")
        support = build_clutter_support(ccfg, base_cfg, rng)
        assert support.delays[0] == 0.0  # direct cluster
        amps = draw_clutter_amplitudes(support, rng)
        expected_scale = base_cfg.wavelength / (4 * math.pi * ccfg.baseline)
        assert support.scales[0] == pytest.approx(expected_scale)
        assert abs(amps[0]) <= expected_scale * 10  # Rayleigh draw, sane scale

    def test_zero_reflection_factors_mute_everything(self, base_cfg):
        ccfg = ClutterConfig(num_clusters=3, reflection_factors=(0.0, 0.0, 0.0))
        taps = clutter_snapshot(ccfg, base_cfg, RngStream(1, "c"))
        assert np.all(np.abs(taps.amps) == 0.0)

    def test_ray_power_decay_monte_carlo(self, base_cfg):
        # Mean squared Rayleigh amplitude must follow the exponential decay
        # in the ray offset within 2%.
        ccfg = ClutterConfig(num_clusters=1, rays_per_cluster=6,
                             reflection_factors=(1.0,))
        rng = RngStream(9, "mc")
        support = build_clutter_support(ccfg, base_cfg, rng)
        draws = draw_clutter_amplitudes(support, rng, 100_000)
        mean_power = np.mean(np.abs(draws / support.scales) ** 2, axis=0)
        expected = np.exp(
            -(support.delays - support.delays[0]) / ccfg.ray_decay_const
        )
        assert np.allclose(mean_power, expected, rtol=0.02)

    def test_radar_outside_room_rejected(self):
        with pytest.raises(ValueError, match="radar_position"):
            ClutterConfig(radar_position=(5.0, 1.0, 1.0))

    def test_rho_outside_unit_interval_rejected(self):
        with pytest.raises(ValueError, match="evolution_rate"):
            ClutterConfig(evolution_rate=1.5)


class TestEvolution:
    @staticmethod
    def frozen_source(base_cfg, seed):
        ccfg = ClutterConfig()
        rng = RngStream(seed, "src")
        support = build_clutter_support(ccfg, base_cfg, rng)

        def source():
            return TapList(support.delays,
                           draw_clutter_amplitudes(support, rng))

        return source

    def test_rho_one_is_static(self, base_cfg):
        source = self.frozen_source(base_cfg, 1)
        v = evolve_clutter(None, source, 1.0, 0)
        first = v.amps.copy()
        for i in range(1, 20):
            v = evolve_clutter(v, source, 1.0, i)
        assert np.array_equal(v.amps, first)

    def test_rho_zero_is_memoryless(self, base_cfg):
        source = self.frozen_source(base_cfg, 2)
        v0 = evolve_clutter(None, source, 0.0, 0)
        v1 = evolve_clutter(v0, source, 0.0, 1)
        # Fresh draw each cycle: correlation with the previous state is
        # that of independent samples.
        assert not np.allclose(v0.amps, v1.amps)

    def test_rho_out_of_range(self, base_cfg):
        source = self.frozen_source(base_cfg, 3)
        with pytest.raises(ValueError, match="rho"):
            evolve_clutter(None, source, 1.2, 0)

    def test_mismatched_support_rejected(self, base_cfg):
        source = self.frozen_source(base_cfg, 4)
        v0 = evolve_clutter(None, source, 0.5, 0)
        bad = TapList(v0.delays[:-1], v0.amps[:-1])
        with pytest.raises(ValueError, match="support"):
            evolve_clutter(bad, source, 0.5, 1)

    def test_lag_autocorrelation_matches_ar(self, base_cfg):
        # Pooled tap autocorrelation at lag k approaches rho^k.
        ccfg = ClutterConfig(rays_per_cluster=16)
        rho = 0.97
        proc = ClutterProcess(ccfg, base_cfg, RngStream(11, "ar"), rho=rho)
        amps = proc.run(30_000)
        x = amps - amps.mean(axis=0)
        var = np.mean(np.abs(x) ** 2)
        for lag in (1, 10, 50):
            corr = np.mean(np.real(x[lag:] * np.conj(x[:-lag]))) / var
            assert corr == pytest.approx(rho**lag, abs=0.03)

    def test_stationary_variance(self, base_cfg):
        # Var(v) -> (1-rho)^2 / (1-rho^2) * Var(fresh) within 5%, on one
        # shared ray layout.
        ccfg = ClutterConfig(rays_per_cluster=16)
        rho = 0.8
        proc = ClutterProcess(ccfg, base_cfg, RngStream(13, "var"), rho=rho)
        fresh = draw_clutter_amplitudes(proc.support, RngStream(99, "fresh"), 10_000)
        amps = proc.run(10_000)[200:]  # discard burn-in
        ratio = np.mean(np.abs(amps) ** 2) / np.mean(np.abs(fresh) ** 2)
        expected = (1 - rho) ** 2 / (1 - rho**2)
        assert ratio == pytest.approx(expected, rel=0.05)

    def test_ar_mix_formula(self):
        prev = np.array([1 + 1j, 2.0])
        fresh = np.array([3.0, -1j])
        out = ar_mix(prev, fresh, 0.25)
        assert np.allclose(out, 0.25 * prev + 0.75 * fresh)


class TestReceivedCycle:
    def test_empty_channel_zero_output(self, base_cfg):
        cfg = base_cfg.replace(noise_power=0.0)
        out = received_cycle(TapList.empty(), TapList.empty(),
                             synthesize_chirp(cfg), cfg)
        assert np.all(out == 0)
        assert out.size == cfg.fast_time_len

    def test_single_tap_places_scaled_chirp(self, base_cfg):
        cfg = base_cfg.replace(noise_power=0.0)
        chirp = synthesize_chirp(cfg)
        tau = 12.4 / cfg.sample_rate  # rounds to sample 12
        amp = 0.3 - 0.4j
        taps = TapList(np.array([tau]), np.array([amp]))
        out = received_cycle(taps, TapList.empty(), chirp, cfg)
        assert np.all(out[:12] == 0)
        assert np.allclose(out[12 : 12 + chirp.size], amp * chirp)

    def test_linearity_with_shared_noise(self, base_cfg):
        chirp = synthesize_chirp(base_cfg)
        u = TapList(np.array([2e-8]), np.array([1.0 + 0j]))
        v = TapList(np.array([4e-8]), np.array([0.0 + 0.5j]))
        noise = RngStream(3, "n")
        both = received_cycle(u, v, chirp, base_cfg, noise)
        cfg0 = base_cfg.replace(noise_power=0.0)
        parts = (received_cycle(u, TapList.empty(), chirp, cfg0)
                 + received_cycle(TapList.empty(), v, chirp, cfg0))
        noise_only = received_cycle(TapList.empty(), TapList.empty(), chirp,
                                    base_cfg, RngStream(3, "n"))
        assert np.allclose(both, parts + noise_only, rtol=1e-12, atol=1e-18)

    def test_noise_power_level(self, base_cfg):
        cfg = base_cfg.replace(noise_power=1e-10)
        out = received_cycle(TapList.empty(), TapList.empty(),
                             synthesize_chirp(cfg), cfg, RngStream(8, "n"))
        assert np.mean(np.abs(out) ** 2) == pytest.approx(1e-10, rel=0.2)

    def test_delay_beyond_slot_rejected(self, base_cfg):
        taps = TapList(np.array([base_cfg.slot_time * 1.01]), np.array([1 + 0j]))
        with pytest.raises(ValueError, match="unambiguous"):
            received_cycle(taps, TapList.empty(), synthesize_chirp(base_cfg),
                           base_cfg)

    def test_determinism(self, base_cfg):
        chirp = synthesize_chirp(base_cfg)
        u = TapList(np.array([2e-8]), np.array([1.0 + 0j]))
        a = received_cycle(u, TapList.empty(), chirp, base_cfg, RngStream(5, "n"))
        b = received_cycle(u, TapList.empty(), chirp, base_cfg, RngStream(5, "n"))
        assert np.array_equal(a, b)
