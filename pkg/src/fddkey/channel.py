"""Geometric dual-band multipath channel synthesis.

A room is described by its bounding box, a fixed base-station antenna, and a
set of point scatterers. Every user position sees the line-of-sight path plus
one single-bounce path per scatterer, and the complex frequency response on a
band is the sum of per-path phasors over its subcarrier grid:

    H(f, l) = sum_n alpha_n * exp(j*(phi_n - 2*pi*f*tau_n)) * exp(-j*2*pi*tau_n*f_l)

with tau_n the geometric delay and f_l the subcarrier offset from the band
center f. Path gains decompose as

    alpha_n = reflection_loss**bounces / d_n**path_loss_exponent * (f_ref / f)

so amplitude falls off with distance and carrier frequency while delays and
excess phases are shared between bands measured at the same position.
Scatterer excess phases are a pure function of (environment seed, scatterer
index): deterministic, uniform on [0, 2*pi), identical on both bands.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact
REFERENCE_FREQUENCY_HZ = 1.0e9  # anchors the carrier-dependent amplitude factor


def _as_point(value, name: str) -> np.ndarray:
    point = np.asarray(value, dtype=np.float64)
    if point.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {point.shape}")
    if not np.all(np.isfinite(point)):
        raise ValueError(f"{name} must be finite")
    return point


@dataclass(frozen=True)
class BandConfig:
    """One duplex band: center frequency, occupied bandwidth, subcarrier count."""

    label: str
    f_center_hz: float
    bandwidth_hz: float
    n_subcarriers: int

    def __post_init__(self):
        if self.f_center_hz <= 0.0:
            raise ValueError(f"center frequency must be positive, got {self.f_center_hz}")
        if self.bandwidth_hz <= 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth_hz}")
        if self.n_subcarriers < 2:
            raise ValueError(f"need at least 2 subcarriers, got {self.n_subcarriers}")
        if self.bandwidth_hz >= 2.0 * self.f_center_hz:
            raise ValueError("bandwidth must leave the band entirely above 0 Hz")

    def subcarrier_offsets(self) -> np.ndarray:
        """Uniformly spaced offsets spanning [-bw/2, +bw/2), length n_subcarriers."""
        spacing = self.bandwidth_hz / self.n_subcarriers
        return -0.5 * self.bandwidth_hz + spacing * np.arange(self.n_subcarriers)

    def half_wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.f_center_hz)


def validate_band_pair(band1: BandConfig, band2: BandConfig) -> None:
    """The two duplex directions must sit on distinct carriers."""
    if band1.f_center_hz == band2.f_center_hz:
        raise ValueError("duplex bands must use distinct center frequencies")


@dataclass(frozen=True)
class Environment:
    """Static scene: room box, base-station antenna, scatterers, path budget."""

    room_bounds: np.ndarray  # (2, 3): [lower corner, upper corner]
    alice_pos: np.ndarray  # (3,)
    scatterers: np.ndarray  # (S, 3)
    n_paths: int  # LOS + (n_paths - 1) single-bounce paths
    rng_seed: int
    path_loss_exponent: float = 2.0
    reflection_loss: float = 0.8

    def __post_init__(self):
        bounds = np.asarray(self.room_bounds, dtype=np.float64)
        if bounds.shape != (2, 3):
            raise ValueError(f"room_bounds must have shape (2, 3), got {bounds.shape}")
        if not np.all(bounds[0] < bounds[1]):
            raise ValueError("room_bounds lower corner must be strictly below upper corner")
        alice = _as_point(self.alice_pos, "alice_pos")
        scat = np.asarray(self.scatterers, dtype=np.float64)
        if scat.ndim != 2 or scat.shape[1] != 3:
            raise ValueError(f"scatterers must have shape (S, 3), got {scat.shape}")
        if not np.all(np.isfinite(scat)):
            raise ValueError("scatterer positions must be finite")
        if self.n_paths < 1:
            raise ValueError(f"need at least the line-of-sight path, got n_paths={self.n_paths}")
        if self.n_paths > 1 + scat.shape[0]:
            raise ValueError(
                f"n_paths={self.n_paths} exceeds LOS + {scat.shape[0]} scatterer paths")
        if self.path_loss_exponent <= 0.0:
            raise ValueError("path_loss_exponent must be positive")
        if not 0.0 < self.reflection_loss <= 1.0:
            raise ValueError("reflection_loss must lie in (0, 1]")
        for arr, name in ((bounds, "room_bounds"), (alice, "alice_pos"), (scat, "scatterers")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.contains(alice):
            raise ValueError("alice_pos lies outside the room bounds")
        inside = (scat >= bounds[0]).all(axis=1) & (scat <= bounds[1]).all(axis=1)
        if not inside.all():
            raise ValueError(f"scatterer {int(np.flatnonzero(~inside)[0])} lies outside the room")

    def contains(self, pos) -> bool:
        p = _as_point(pos, "pos")
        return bool(np.all(p >= self.room_bounds[0]) and np.all(p <= self.room_bounds[1]))

    def scatterer_phases(self) -> np.ndarray:
        """Per-scatterer excess phase, uniform on [0, 2*pi), keyed by (seed, index).

        Each scatterer gets its own counter-derived stream so its phase does
        not depend on how many other scatterers exist.
        """
        phases = np.empty(self.scatterers.shape[0])
        for k in range(phases.size):
            stream = np.random.default_rng(np.random.SeedSequence([self.rng_seed, k]))
            phases[k] = stream.uniform(0.0, 2.0 * np.pi)
        return phases

    def to_dict(self) -> dict:
        return {
            "room_bounds": self.room_bounds.tolist(),
            "alice_pos": self.alice_pos.tolist(),
            "scatterers": self.scatterers.tolist(),
            "n_paths": self.n_paths,
            "rng_seed": self.rng_seed,
            "path_loss_exponent": self.path_loss_exponent,
            "reflection_loss": self.reflection_loss,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Environment":
        return cls(
            room_bounds=data["room_bounds"],
            alice_pos=data["alice_pos"],
            scatterers=data["scatterers"],
            n_paths=int(data["n_paths"]),
            rng_seed=int(data["rng_seed"]),
            path_loss_exponent=float(data.get("path_loss_exponent", 2.0)),
            reflection_loss=float(data.get("reflection_loss", 0.8)),
        )


@dataclass(frozen=True)
class ChannelVector:
    """Complex frequency response of one band at one position."""

    values: np.ndarray  # complex128, (n_subcarriers,)
    band: str
    position_id: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 1:
            raise ValueError(f"values must be 1-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("channel values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def path_parameters(env: Environment, pos, f_center_hz: float):
    """Gains, delays and excess phases for the paths serving one position.

    Path 0 is line of sight; paths 1..n_paths-1 bounce once off scatterers
    0..n_paths-2. Gains depend on the carrier, delays and phases do not.
    """
    p = _as_point(pos, "pos")
    if not env.contains(p):
        raise ValueError(f"position {p.tolist()} lies outside the room bounds")
    d_los = float(np.linalg.norm(p - env.alice_pos))
    if d_los == 0.0:
        raise ValueError("position coincides with the base-station antenna")
    n_bounce = env.n_paths - 1
    scat = env.scatterers[:n_bounce]
    d_bounce = (np.linalg.norm(scat - env.alice_pos, axis=1)
                + np.linalg.norm(scat - p, axis=1))
    distances = np.concatenate(([d_los], d_bounce))
    bounces = np.concatenate(([0], np.ones(n_bounce)))
    alphas = (env.reflection_loss ** bounces
              / distances ** env.path_loss_exponent
              * (REFERENCE_FREQUENCY_HZ / f_center_hz))
    taus = distances / SPEED_OF_LIGHT
    phases = np.concatenate(([0.0], env.scatterer_phases()[:n_bounce]))
    return alphas, taus, phases


def cfr_from_paths(alphas, taus, phases, f_center_hz: float,
                   subcarrier_offsets) -> np.ndarray:
    """Sum the per-path phasors over a subcarrier grid."""
    alphas = np.asarray(alphas, dtype=np.float64)
    taus = np.asarray(taus, dtype=np.float64)
    phases = np.asarray(phases, dtype=np.float64)
    offsets = np.asarray(subcarrier_offsets, dtype=np.float64)
    path_phasors = alphas * np.exp(1j * (phases - 2.0 * np.pi * f_center_hz * taus))
    subcarrier_phase = np.exp(-2j * np.pi * np.outer(taus, offsets))
    return path_phasors @ subcarrier_phase


def cfr_for_position(env: Environment, band: BandConfig, pos,
                     position_id: int = 0) -> ChannelVector:
    """Noise-free channel response of `band` between the base station and `pos`."""
    alphas, taus, phases = path_parameters(env, pos, band.f_center_hz)
    values = cfr_from_paths(alphas, taus, phases, band.f_center_hz,
                            band.subcarrier_offsets())
    return ChannelVector(values=values, band=band.label, position_id=position_id)


def add_awgn(vec: ChannelVector, snr_db: float,
             rng: np.random.Generator) -> ChannelVector:
    """Circular complex white noise at the requested per-subcarrier SNR.

    Noise power equals the mean per-subcarrier signal power divided by the
    linear SNR, split evenly between the real and imaginary components.
    snr_db=inf is the noise-free sentinel and returns the input unchanged.
    """
    if snr_db == np.inf:
        return vec
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite or +inf, got {snr_db}")
    signal_power = float(np.mean(np.abs(vec.values) ** 2))
    noise_power = signal_power / 10.0 ** (snr_db / 10.0)
    scale = np.sqrt(noise_power / 2.0)
    n = vec.values.size
    noise = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return ChannelVector(values=vec.values + noise, band=vec.band,
                         position_id=vec.position_id)


def eve_separation_threshold_m(band1: BandConfig, band2: BandConfig) -> float:
    """Minimum adversary distance: the larger half wavelength of the two bands."""
    return max(band1.half_wavelength_m(), band2.half_wavelength_m())


def check_eve_separation(bob_pos, eve_pos, band1: BandConfig,
                         band2: BandConfig) -> bool:
    """True when the adversary sits strictly beyond the decorrelation distance."""
    bob = _as_point(bob_pos, "bob_pos")
    eve = _as_point(eve_pos, "eve_pos")
    return float(np.linalg.norm(bob - eve)) > eve_separation_threshold_m(band1, band2)


def rectangular_grid(origin, nx: int, ny: int, pitch: float) -> np.ndarray:
    """(nx*ny, 3) grid of positions in the horizontal plane through `origin`."""
    if nx < 1 or ny < 1:
        raise ValueError(f"grid shape must be at least 1x1, got {nx}x{ny}")
    if pitch <= 0.0:
        raise ValueError(f"grid pitch must be positive, got {pitch}")
    base = _as_point(origin, "origin")
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    grid = np.tile(base, (nx * ny, 1))
    grid[:, 0] += pitch * ix.ravel()
    grid[:, 1] += pitch * iy.ravel()
    return grid


def generate_channel_records(env: Environment, band1: BandConfig,
                             band2: BandConfig, positions,
                             snr_db: float = np.inf, seed: int = 0):
    """Dual-band responses for many positions, optionally through AWGN.

    Returns (position_ids, H1, H2) with H* complex128 of shape (N, L*). When
    snr_db is finite, both bands receive independent noise draws from a
    stream derived from `seed`; position ids number the rows 0..N-1.
    """
    validate_band_pair(band1, band2)
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise ValueError(f"positions must have shape (N, 3), got {positions.shape}")
    n = positions.shape[0]
    ids = np.arange(n, dtype=np.uint64)
    h1 = np.empty((n, band1.n_subcarriers), dtype=np.complex128)
    h2 = np.empty((n, band2.n_subcarriers), dtype=np.complex128)
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    for i, pos in enumerate(positions):
        v1 = cfr_for_position(env, band1, pos, position_id=i)
        v2 = cfr_for_position(env, band2, pos, position_id=i)
        if snr_db != np.inf:
            v1 = add_awgn(v1, snr_db, rng)
            v2 = add_awgn(v2, snr_db, rng)
        h1[i] = v1.values
        h2[i] = v2.values
    return ids, h1, h2
