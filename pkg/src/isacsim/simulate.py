"""End-to-end spectrogram synthesis for one motion sample.

Ties kinematics, channel, and DSP together: primitive tracks are sampled
on the slow-time grid, per-cycle tap amplitudes are synthesized (target
taps deterministic given the initial phases, clutter taps autoregressive),
the received matrix is cleaned, dechirped, and transformed into a
gray-scale spectrogram with its gray-level pmf.

Randomness is split into fixed child streams ("phases", "clutter",
"noise"), so a (seed, config, motion) triple fully determines the output
bytes regardless of how samples are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    ClutterConfig,
    ClutterProcess,
    draw_primitive_phases,
    target_amplitudes,
)
from .config import SPEED_OF_LIGHT, RngStream, SystemConfig
from .dsp import (
    DEFAULT_DYNAMIC_RANGE_DB,
    DEFAULT_KAISER_BETA,
    DEFAULT_PMF_BINS,
    DEFAULT_STFT_WINDOW,
    DEFAULT_SVD_THRESHOLD,
    Spectrogram,
    dechirp_and_collapse,
    stft,
    svd_denoise,
    synthesize_chirp,
    to_gray_and_pmf,
)
from .kinematics import MotionSpec, PrimitiveTracks, synthesize_tracks


@dataclass
class SpectrogramResult:
    spectrogram: Spectrogram
    gray: np.ndarray
    pmf: np.ndarray
    tracks: PrimitiveTracks


def place_taps(
    amps: np.ndarray, offsets: np.ndarray, chirp: np.ndarray, fast_len: int
) -> np.ndarray:
    """Accumulate chirp copies into the L x C matrix, grouped by offset.

    ``amps``/``offsets`` have shape (num_taps, C); offsets are integer
    fast-time sample indices.  Indoor delays span only a handful of
    distinct offsets, so accumulation per unique offset is cheap.
    """
    num_taps, num_cycles = amps.shape
    out = np.zeros((fast_len, num_cycles), dtype=complex)
    if num_taps == 0:
        return out
    if offsets.shape != amps.shape:
        offsets = np.broadcast_to(offsets, amps.shape)
    if np.any(offsets < 0) or np.any(offsets >= fast_len):
        raise ValueError(
            "tap delay exceeds the slot time (target outside the unambiguous range)"
        )
    for off in np.unique(offsets):
        col = np.where(offsets == off, amps, 0.0).sum(axis=0)
        n = min(chirp.size, fast_len - off)
        out[off : off + n, :] += chirp[:n, None] * col[None, :]
    return out


def place_taps_fractional(
    amps: np.ndarray, delays_samples: np.ndarray, chirp: np.ndarray, fast_len: int
) -> np.ndarray:
    """Place taps at sub-sample delays by linear splitting.

    A tap at fast-time position k + f (0 <= f < 1) contributes
    ``(1-f) * amp`` at sample k and ``f * amp`` at sample k+1.  Whole
    range cells are far coarser than indoor scene depth, so keeping the
    sub-sample structure is what lets the strongest-component removal
    separate static returns from a slowly migrating target; rounding
    every delay onto one shared cell would collapse the matrix to rank
    one and the cleaning step would strip the target as well.
    """
    pos = np.broadcast_to(delays_samples, amps.shape)
    if np.any(pos < 0) or np.any(pos > fast_len - 1):
        raise ValueError(
            "tap delay exceeds the slot time (target outside the unambiguous range)"
        )
    base = np.floor(pos).astype(int)
    frac = pos - base
    split_amps = np.concatenate([amps * (1.0 - frac), amps * frac])
    split_offsets = np.concatenate([base, np.minimum(base + 1, fast_len - 1)])
    return place_taps(split_amps, split_offsets, chirp, fast_len)


def synthesize_received_matrix(
    cfg: SystemConfig,
    tracks: PrimitiveTracks,
    phases: np.ndarray,
    clutter_amps: np.ndarray | None,
    clutter_delays: np.ndarray | None,
    noise_rng: RngStream | None,
) -> np.ndarray:
    """Received slow-time matrix X (L x C) for a whole motion sample."""
    L = cfg.fast_time_len
    C = tracks.times.size
    chirp = synthesize_chirp(cfg)

    if np.any(2.0 * tracks.distances / SPEED_OF_LIGHT > cfg.slot_time):
        raise ValueError(
            "tap delay exceeds the slot time (target outside the unambiguous range)"
        )
    amps = target_amplitudes(tracks.gains, tracks.distances, cfg, phases[:, None])
    positions = 2.0 * tracks.distances / SPEED_OF_LIGHT * cfg.sample_rate
    x = place_taps_fractional(amps, positions, chirp, L)

    if clutter_amps is not None and clutter_amps.size:
        c_pos = clutter_delays * cfg.sample_rate
        x += place_taps_fractional(
            clutter_amps.T, np.repeat(c_pos[:, None], C, axis=1), chirp, L
        )

    if noise_rng is not None and cfg.noise_power > 0:
        x += math.sqrt(cfg.noise_power) * noise_rng.standard_complex_normal((L, C))
    return x


def simulate_spectrogram(
    cfg: SystemConfig,
    motion: MotionSpec,
    cycles: int,
    rng: RngStream,
    clutter: ClutterConfig | None = None,
    rho: float | None = None,
    *,
    svd_threshold: int = DEFAULT_SVD_THRESHOLD,
    stft_window: int = DEFAULT_STFT_WINDOW,
    hop: int = 1,
    kaiser_beta: float = DEFAULT_KAISER_BETA,
    dynamic_range_db: float = DEFAULT_DYNAMIC_RANGE_DB,
    pmf_bins: int = DEFAULT_PMF_BINS,
    radar_position=None,
    phases=None,
) -> SpectrogramResult:
    """Full pipeline: motion -> received cycles -> cleaned spectrogram.

    ``clutter=None`` simulates a clutter-free scene.  ``rho`` overrides
    the clutter config's evolution rate (used by the calibration sweep).
    ``phases`` pins the per-primitive initial phases, which keeps the
    target return identical across runs that redraw only clutter and
    noise (one fixed motion recording, many channel realizations).  The
    motion must cover the sensing dwell ``cycles * pri``.
    """
    if cycles < stft_window:
        raise ValueError(
            f"cycles={cycles} shorter than the STFT window ({stft_window})"
        )
    dwell = (cycles - 1) * cfg.pri
    if motion.duration < dwell:
        raise ValueError(
            f"motion duration {motion.duration} s does not cover the "
            f"sensing dwell {dwell} s"
        )
    if radar_position is None:
        radar_position = clutter.radar_position if clutter is not None else (1.5, 1.0, 1.0)

    grid = np.arange(cycles) * cfg.pri
    tracks = synthesize_tracks(motion, radar_position, grid)
    if phases is None:
        phases = draw_primitive_phases(tracks.num_primitives, rng.spawn("phases"))
    else:
        phases = np.asarray(phases, dtype=float)

    if clutter is not None:
        process = ClutterProcess(clutter, cfg, rng.spawn("clutter"), rho=rho)
        clutter_amps = process.run(cycles)
        clutter_delays = process.delays
    else:
        clutter_amps = clutter_delays = None

    x = synthesize_received_matrix(
        cfg, tracks, phases, clutter_amps, clutter_delays, rng.spawn("noise")
    )
    y = svd_denoise(x, svd_threshold)
    slow = dechirp_and_collapse(y, synthesize_chirp(cfg))
    spec = stft(slow, cfg.pri, stft_window, hop, kaiser_beta)
    gray, pmf = to_gray_and_pmf(spec.values, dynamic_range_db, pmf_bins)
    return SpectrogramResult(spectrogram=spec, gray=gray, pmf=pmf, tracks=tracks)
