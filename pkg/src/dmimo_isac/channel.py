"""Large-scale gains, Rician small-scale fading and LOS phase responses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import seeding
from .config import SignalModel
from .deployment import BlockageMap, Deployment

# K factors at or above this are treated as a deterministic channel
K_INFINITE = 1e9


def wrap_phase(x):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def path_gain(distance_m, model: SignalModel, blocked=False, penalty_db: float = 0.0, shadow_db=0.0):
    """Power gain ``(d0/d)**eta * 10**(shadow/10)``, attenuated by ``penalty_db`` on blocked links."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("zero AP-UE distance (UE co-located with an AP)")
    gain = (model.ref_distance_m / d) ** model.pathloss_exponent
    gain = gain * db_to_linear(shadow_db)
    gain = np.where(blocked, gain * 10.0 ** (-penalty_db / 10.0), gain)
    return gain if gain.ndim else float(gain)


@dataclass(frozen=True, eq=False)
class LargeScaleGain:
    """Per-link linear power gain and the shadow draw folded into it, both (num_aps, num_ues)."""

    gain: np.ndarray
    shadow_db: np.ndarray


def large_scale_gains(deployment: Deployment, model: SignalModel, blockage: BlockageMap | None = None,
                      shadow_sigma_db: float = 0.0, rng=None) -> LargeScaleGain:
    d = deployment.distances()
    if shadow_sigma_db > 0:
        shadow = seeding.as_rng(0 if rng is None else rng).normal(0.0, shadow_sigma_db, size=d.shape)
    else:
        shadow = np.zeros_like(d)
    if blockage is None:
        return LargeScaleGain(path_gain(d, model, shadow_db=shadow), shadow)
    return LargeScaleGain(path_gain(d, model, blockage.blocked, blockage.penalty_db, shadow), shadow)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Complex gains ``h`` with trailing antenna axis, split into LOS mean and scatter.

    ``h = los_mean + scatter``; ``los_mean = sqrt(gain*K/(K+1)) * los_phasor``.
    """

    h: np.ndarray
    los_mean: np.ndarray
    gain: np.ndarray
    rician_k: np.ndarray

    @property
    def scatter(self) -> np.ndarray:
        return self.h - self.los_mean


def ula_phasor(num_antennas: int, phase0, angle):
    """Unit-modulus half-wavelength ULA response, trailing antenna axis."""
    n = np.arange(num_antennas)
    phase0 = np.asarray(phase0, dtype=float)[..., None]
    angle = np.asarray(angle, dtype=float)[..., None]
    return np.exp(1j * (phase0 + np.pi * n * np.sin(angle)))


def draw_rician_channel(gain, k_factor, antennas: int, seed, los_phasor=None) -> ChannelRealization:
    """Draw ``h = sqrt(g) (sqrt(K/(K+1)) h_los + sqrt(1/(K+1)) h_scatter)``.

    ``gain`` and ``k_factor`` (linear) broadcast against each other; the
    result gains a trailing axis of length ``antennas``. The LOS phasor has
    unit modulus per antenna (a ULA response with random phase offset and
    arrival angle unless supplied) and the scatter is CN(0, 1) per antenna,
    so ``E||h||^2 = gain * antennas``.
    """
    if antennas < 1:
        raise ValueError("antennas must be >= 1")
    gain, k = np.broadcast_arrays(np.asarray(gain, dtype=float), np.asarray(k_factor, dtype=float))
    if np.any(k < 0):
        raise ValueError("Rician K must be >= 0")
    if np.any(gain < 0):
        raise ValueError("gain must be >= 0")
    rng = seeding.as_rng(seed)
    shape = gain.shape
    if los_phasor is None:
        los_phasor = ula_phasor(antennas, rng.uniform(-np.pi, np.pi, shape), rng.uniform(-np.pi / 2, np.pi / 2, shape))
    else:
        los_phasor = np.broadcast_to(np.asarray(los_phasor, dtype=complex), shape + (antennas,))
    scatter = (rng.standard_normal(shape + (antennas,)) + 1j * rng.standard_normal(shape + (antennas,))) / np.sqrt(2)
    infinite = k >= K_INFINITE
    with np.errstate(invalid="ignore", divide="ignore"):
        w_los = np.where(infinite, 1.0, np.sqrt(k / (k + 1.0)))
        w_sc = np.where(infinite, 0.0, np.sqrt(1.0 / (k + 1.0)))
    amp = np.sqrt(gain)
    los_mean = (amp * w_los)[..., None] * los_phasor
    h = los_mean + (amp * w_sc)[..., None] * scatter
    return ChannelRealization(h, los_mean, gain, k)


def propagation_delay(distance_m, model: SignalModel):
    return np.asarray(distance_m, dtype=float) / model.speed_of_light


def carrier_phase(distance_m, model: SignalModel):
    """Carrier phase ``-2 pi f_c d / c`` wrapped to (-pi, pi]."""
    cycles = model.carrier_hz * propagation_delay(distance_m, model)
    return wrap_phase(-2 * np.pi * np.mod(cycles, 1.0))


def los_phase_response(distance_m: float, model: SignalModel, blocked: bool = False) -> np.ndarray:
    """Per-subcarrier LOS response ``sqrt(g) exp(-j 2 pi (f_c + f_n) tau)``.

    The amplitude is the unshadowed path gain. Blocked links are rejected
    because positioning assumes pure LOS.
    """
    if blocked:
        raise ValueError("LOS response requested for a blocked link")
    tau = float(propagation_delay(distance_m, model))
    # reduce cycles mod 1 before scaling by 2 pi to keep precision at mmWave
    cycles = np.mod(model.carrier_hz * tau, 1.0) + model.subcarrier_offsets() * tau
    return np.sqrt(path_gain(distance_m, model)) * np.exp(-2j * np.pi * cycles)
