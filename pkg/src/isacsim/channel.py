"""Hybrid sensing channel: deterministic target taps plus evolving clutter.

The impulse response of one sensing cycle is a sum of two tap lists:

* the target channel, with one tap per body primitive at round-trip delay
  ``2 D_b / c`` and amplitude proportional to ``sqrt(G_b) / D_b^2``;
* the clutter channel, a cluster/ray model whose complex tap amplitudes
  evolve across cycles as a first-order autoregressive process with
  mixing coefficient ``rho`` (rho=1 freezes the clutter, rho=0 redraws it
  every cycle).

Cluster delays come from single-bounce mirror images of the radar in the
six walls of a rectangular room (plus the direct leakage path); ray
arrival offsets within a cluster follow a Poisson process with mean ray
power decaying exponentially in the offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SPEED_OF_LIGHT, RngStream, SystemConfig
from .kinematics import PrimitiveTracks
from .validation import as_float_array, check_in_range, check_positive


@dataclass
class TapList:
    """A channel impulse response as (delay, complex amplitude) taps."""

    delays: np.ndarray
    amps: np.ndarray

    def __post_init__(self):
        self.delays = np.asarray(self.delays, dtype=float)
        self.amps = np.asarray(self.amps, dtype=complex)
        if self.delays.shape != self.amps.shape or self.delays.ndim != 1:
            raise ValueError(
                f"delays {self.delays.shape} and amps {self.amps.shape} must be "
                "equal-length 1-d arrays"
            )
        if self.delays.size:
            if np.any(self.delays < 0) or not np.all(np.isfinite(self.delays)):
                raise ValueError("delays must be finite and non-negative")
            if not np.all(np.isfinite(self.amps)):
                raise ValueError("amplitudes must be finite")
            if np.any(np.diff(self.delays) < 0):
                order = np.argsort(self.delays, kind="stable")
                self.delays = self.delays[order]
                self.amps = self.amps[order]

    def __len__(self) -> int:
        return self.delays.size

    def power(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))

    @staticmethod
    def empty() -> "TapList":
        return TapList(np.empty(0), np.empty(0, dtype=complex))

    @staticmethod
    def merge(*tap_lists: "TapList") -> "TapList":
        delays = np.concatenate([tl.delays for tl in tap_lists])
        amps = np.concatenate([tl.amps for tl in tap_lists])
        return TapList(delays, amps)

    def to_csv(self, path) -> None:
        """Dump as CSV with header ``tau_s,re,im``."""
        lines = ["tau_s,re,im"]
        for tau, amp in zip(self.delays, self.amps):
            lines.append(f"{tau!r},{amp.real!r},{amp.imag!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def target_amplitudes(
    gains, distances, cfg: SystemConfig, phases
) -> np.ndarray:
    """Complex tap amplitudes of the target channel (broadcasts over shape).

    amp = (lambda^2 sqrt(Pt) / sqrt(4 pi)) * sqrt(G) / D^2
          * exp(-j 4 pi f_c D / c) * exp(j phi)
    """
    G = np.asarray(gains, dtype=float)
    D = np.asarray(distances, dtype=float)
    phi = np.asarray(phases, dtype=float)
    if np.any(D <= 0):
        raise ValueError("distances must be strictly positive")
    a_const = cfg.wavelength**2 * math.sqrt(cfg.sensing_antenna_gain)
    carrier_phase = -2.0 * math.pi * cfg.carrier_freq * (2.0 * D) / SPEED_OF_LIGHT
    return (
        a_const
        / math.sqrt(4.0 * math.pi)
        * np.sqrt(G)
        / D**2
        * np.exp(1j * (carrier_phase + phi))
    )


def draw_primitive_phases(num_primitives: int, rng: RngStream) -> np.ndarray:
    """Initial phases, uniform in [-pi, pi], fixed for one motion sample."""
    return rng.uniform(-math.pi, math.pi, num_primitives)


def target_channel(
    tracks: PrimitiveTracks,
    cfg: SystemConfig,
    cycle_index: int,
    rng: RngStream | None = None,
    phases=None,
) -> TapList:
    """Target tap list for one sensing cycle.

    One tap per primitive at delay ``2 D_b / c``.  ``phases`` holds the
    per-primitive initial phases; they are constant across the cycles of a
    motion sample, so callers looping over cycles must draw them once (see
    :func:`draw_primitive_phases`) and pass them in.  If omitted, they are
    drawn from ``rng``.
    """
    B = tracks.num_primitives
    if B == 0:
        return TapList.empty()
    if not 0 <= cycle_index < tracks.times.size:
        raise ValueError(
            f"cycle_index {cycle_index} outside the sampled grid "
            f"[0, {tracks.times.size})"
        )
    if phases is None:
        if rng is None:
            raise ValueError("either phases or rng must be given")
        phases = draw_primitive_phases(B, rng)
    phases = as_float_array(phases, "phases", ndim=1)
    if phases.size != B:
        raise ValueError(f"phases: expected {B} entries, got {phases.size}")

    D = tracks.distances[:, cycle_index]
    G = tracks.gains[:, cycle_index]
    amps = target_amplitudes(G, D, cfg, phases)
    return TapList(2.0 * D / SPEED_OF_LIGHT, amps)


@dataclass(frozen=True)
class ClutterConfig:
    """Geometry and statistics of the target-unrelated returns.

    The room is the box [0, L_x] x [0, L_y] x [0, L_z].  ``baseline``
    is the direct TX-RX leakage path length D_0 (m); cluster delays are
    excess delays over that path.  ``reflection_factors`` must have one
    entry per cluster (entries may be zero to mute a cluster).
    """

    room: tuple[float, float, float] = (3.0, 4.5, 3.0)
    radar_position: tuple[float, float, float] = (1.5, 1.0, 1.0)
    baseline: float = 0.5  # D_0, m
    num_clusters: int = 7
    rays_per_cluster: int = 8
    ray_arrival_rate: float = 2.0e8  # 1/s, Poisson intra-cluster arrivals
    ray_decay_const: float = 2.0e-8  # s, exponential mean-power decay
    reflection_factors: tuple[float, ...] | None = None
    evolution_rate: float = 0.997

    def __post_init__(self):
        for i, dim in enumerate(self.room):
            check_positive(f"room[{i}]", dim)
        for axis, (q, dim) in enumerate(zip(self.radar_position, self.room)):
            if not 0.0 < q < dim:
                raise ValueError(
                    f"radar_position[{axis}]={q!r} outside the room (0, {dim!r})"
                )
        check_positive("baseline", self.baseline)
        if self.num_clusters < 1:
            raise ValueError(f"num_clusters: must be >= 1, got {self.num_clusters}")
        if self.rays_per_cluster < 1:
            raise ValueError(
                f"rays_per_cluster: must be >= 1, got {self.rays_per_cluster}"
            )
        check_positive("ray_arrival_rate", self.ray_arrival_rate)
        check_positive("ray_decay_const", self.ray_decay_const)
        check_in_range("evolution_rate", self.evolution_rate, 0.0, 1.0)
        if self.reflection_factors is not None:
            if len(self.reflection_factors) != self.num_clusters:
                raise ValueError(
                    f"reflection_factors: expected {self.num_clusters} entries, "
                    f"got {len(self.reflection_factors)}"
                )
            for n, h in enumerate(self.reflection_factors):
                if not (h >= 0 and np.isfinite(h)):
                    raise ValueError(
                        f"reflection_factors: entry {n} must be >= 0, got {h!r}"
                    )

    def factors(self) -> np.ndarray:
        if self.reflection_factors is not None:
            return np.asarray(self.reflection_factors, dtype=float)
        # Direct leakage is almost entirely removed by self-interference
        # cancellation; wall bounces carry moderate reflection loss.
        out = np.full(self.num_clusters, 0.3)
        out[0] = 0.02
        return out


def cluster_delays(ccfg: ClutterConfig) -> np.ndarray:
    """Excess cluster delays (s) from mirror images of the radar.

    Cluster 0 is the direct leakage path (zero excess delay).  Single
    bounces off each of the six walls contribute round-trip path lengths
    ``2 d_wall``; double bounces off perpendicular wall pairs contribute
    ``2 sqrt(d_i^2 + d_j^2)``.  Excess delay is (path - baseline) / c,
    sorted ascending, truncated to ``num_clusters``.
    """
    q = np.asarray(ccfg.radar_position, dtype=float)
    dims = np.asarray(ccfg.room, dtype=float)
    wall_dist = np.concatenate([q, dims - q])  # distance to the six planes

    paths = [ccfg.baseline]
    paths.extend(2.0 * d for d in wall_dist)
    for i in range(3):
        for j in range(i + 1, 3):
            for di in (wall_dist[i], wall_dist[i + 3]):
                for dj in (wall_dist[j], wall_dist[j + 3]):
                    paths.append(2.0 * math.hypot(di, dj))
    paths = np.sort(np.asarray(paths))
    if ccfg.num_clusters > paths.size:
        raise ValueError(
            f"num_clusters: at most {paths.size} clusters available for this "
            f"geometry, got {ccfg.num_clusters}"
        )
    excess = (paths[: ccfg.num_clusters] - ccfg.baseline) / SPEED_OF_LIGHT
    if np.any(excess < 0):
        raise ValueError(
            "baseline: exceeds a bounce path length; reduce baseline or move "
            "the radar away from the walls"
        )
    return excess


@dataclass
class ClutterSupport:
    """Frozen delay support and per-tap scales of the clutter channel.

    ``scales[k]`` carries the cluster amplitude factor
    ``sqrt(H_n) * lambda / (4 pi (D_0 + tau_n c))`` and ``ray_power[k]``
    the mean squared Rayleigh amplitude of tap k.
    """

    delays: np.ndarray
    scales: np.ndarray
    ray_power: np.ndarray

    @property
    def num_taps(self) -> int:
        return self.delays.size


def build_clutter_support(
    ccfg: ClutterConfig, cfg: SystemConfig, rng: RngStream
) -> ClutterSupport:
    """Draw the (then frozen) ray layout of the clutter channel."""
    tau_cluster = cluster_delays(ccfg)
    factors = ccfg.factors()
    lam = cfg.wavelength

    delays, scales, power = [], [], []
    for n, tau_n in enumerate(tau_cluster):
        scale_n = math.sqrt(factors[n]) * lam / (
            4.0 * math.pi * (ccfg.baseline + tau_n * SPEED_OF_LIGHT)
        )
        # First ray rides on the cluster arrival; later rays are Poisson.
        offsets = np.concatenate(
            [[0.0], rng.poisson_arrivals(ccfg.ray_arrival_rate, ccfg.rays_per_cluster - 1)]
        )
        delays.extend(tau_n + offsets)
        scales.extend([scale_n] * offsets.size)
        power.extend(np.exp(-offsets / ccfg.ray_decay_const))

    delays = np.asarray(delays)
    order = np.argsort(delays, kind="stable")
    return ClutterSupport(
        delays=delays[order],
        scales=np.asarray(scales)[order],
        ray_power=np.asarray(power)[order],
    )


def draw_clutter_amplitudes(
    support: ClutterSupport, rng: RngStream, num_draws: int | None = None
) -> np.ndarray:
    """Fresh complex tap amplitudes on a frozen support.

    Rayleigh magnitudes with mean power ``ray_power`` times uniform
    phases, scaled per cluster.  With ``num_draws`` the result has shape
    (num_draws, num_taps); cycle i uses row i.
    """
    shape = support.num_taps if num_draws is None else (num_draws, support.num_taps)
    mag = rng.rayleigh(1.0, shape) * np.sqrt(support.ray_power / 2.0)
    phase = rng.uniform(-math.pi, math.pi, shape)
    return support.scales * mag * np.exp(1j * phase)


def clutter_snapshot(
    ccfg: ClutterConfig, cfg: SystemConfig, rng: RngStream
) -> TapList:
    """One fresh clutter realization (support and amplitudes)."""
    support = build_clutter_support(ccfg, cfg, rng)
    return TapList(support.delays, draw_clutter_amplitudes(support, rng))


def ar_mix(prev_amps: np.ndarray, fresh_amps: np.ndarray, rho: float) -> np.ndarray:
    """One autoregressive update: rho * previous + (1 - rho) * fresh."""
    return rho * prev_amps + (1.0 - rho) * fresh_amps


def evolve_clutter(
    prev: TapList | None,
    snapshot_source,
    rho: float,
    cycle_index: int,
) -> TapList:
    """Advance the clutter tap list by one cycle.

    Cycle 0 returns a fresh snapshot from ``snapshot_source`` (a callable
    producing TapLists on a fixed delay support).  Later cycles mix the
    previous amplitudes with a fresh snapshot tapwise.  Raises if ``rho``
    leaves [0, 1] or the supports disagree.
    """
    check_in_range("rho", rho, 0.0, 1.0)
    fresh = snapshot_source()
    if cycle_index == 0 or prev is None:
        return fresh
    if len(prev) != len(fresh) or not np.array_equal(prev.delays, fresh.delays):
        raise ValueError("mismatched tap supports between cycles")
    return TapList(prev.delays, ar_mix(prev.amps, fresh.amps, rho))


class ClutterProcess:
    """Stateful clutter generator with a frozen support.

    The support (ray delays and mean powers) is drawn once at
    construction; each :meth:`step` draws fresh amplitudes and applies the
    autoregressive update.  :meth:`run` produces the amplitude matrix of a
    whole sample at once.
    """

    def __init__(
        self,
        ccfg: ClutterConfig,
        cfg: SystemConfig,
        rng: RngStream,
        rho: float | None = None,
    ):
        self.rho = ccfg.evolution_rate if rho is None else rho
        check_in_range("rho", self.rho, 0.0, 1.0)
        self._rng = rng
        self.support = build_clutter_support(ccfg, cfg, rng)
        self._state: np.ndarray | None = None

    @property
    def delays(self) -> np.ndarray:
        return self.support.delays

    def step(self) -> TapList:
        fresh = draw_clutter_amplitudes(self.support, self._rng)
        if self._state is None:
            self._state = fresh
        else:
            self._state = ar_mix(self._state, fresh, self.rho)
        return TapList(self.support.delays, self._state.copy())

    def run(self, num_cycles: int) -> np.ndarray:
        """Amplitudes for ``num_cycles`` cycles, shape (C, num_taps)."""
        fresh = draw_clutter_amplitudes(self.support, self._rng, num_cycles)
        out = np.empty_like(fresh)
        state = self._state
        for i in range(num_cycles):
            state = fresh[i] if state is None else ar_mix(state, fresh[i], self.rho)
            out[i] = state
        self._state = state
        return out


def received_cycle(
    u: TapList,
    v: TapList,
    waveform: np.ndarray,
    cfg: SystemConfig,
    rng: RngStream | None = None,
) -> np.ndarray:
    """Baseband received vector of one sensing cycle (length L).

    The combined tap list is convolved with ``waveform`` (the chirp, at
    most L samples): each tap places a copy of the chirp at the nearest
    fast-time sample, scaled by the complex amplitude, which already
    carries the continuous carrier phase.  Complex white noise with
    per-sample power ``noise_power`` is added when ``rng`` is given.
    Raises if any tap delay exceeds the slot time.
    """
    waveform = np.asarray(waveform, dtype=complex)
    L = cfg.fast_time_len
    if waveform.size > L:
        raise ValueError(
            f"waveform has {waveform.size} samples but the slot holds {L}"
        )
    taps = TapList.merge(u, v)
    out = np.zeros(L, dtype=complex)
    if len(taps):
        if np.any(taps.delays > cfg.slot_time):
            raise ValueError(
                "tap delay exceeds the slot time (target outside the "
                "unambiguous range)"
            )
        offsets = np.round(taps.delays * cfg.sample_rate).astype(int)
        for k, amp in zip(offsets, taps.amps):
            if k >= L:
                continue
            n = min(waveform.size, L - k)
            out[k : k + n] += amp * waveform[:n]
    if rng is not None and cfg.noise_power > 0:
        out += math.sqrt(cfg.noise_power) * rng.standard_complex_normal(L)
    return out
