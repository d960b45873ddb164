"""Noisy delay / carrier-phase observations of a UE from a set of APs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import seeding
from ..channel import wrap_phase
from ..config import SignalModel
from ..deployment import BlockageMap, Deployment
from .fisher import delay_variance, link_snr, phase_variance, unit_vectors

# SNRs at or above this produce noiseless measurements
SNR_NOISELESS = 1e12


@dataclass(frozen=True, eq=False)
class Measurements:
    """Per-AP observations.

    delay mode: ``values`` are delays (s), ``variances`` in s^2.
    phase mode: ``values`` are wrapped carrier phases (rad), ``variances``
    in rad^2, and ``subcarriers`` holds the (num_aps, N) unit-amplitude
    subcarrier responses used for coarse delay, with per-AP complex noise
    variance ``subcarrier_noise_var``.
    """

    mode: str
    values: np.ndarray
    variances: np.ndarray
    snr: np.ndarray
    subcarriers: np.ndarray | None = None
    subcarrier_noise_var: np.ndarray | None = None

    @property
    def num_aps(self) -> int:
        return len(self.values)

    def __post_init__(self):
        if np.any(~(np.asarray(self.variances) > 0)):
            raise ValueError("measurement variances must be > 0")


def _subcarrier_noise_var(snr, model: SignalModel):
    # chosen so the delay CRLB of the N-point response equals delay_variance(snr)
    f = model.subcarrier_offsets()
    spread = np.mean((f - f.mean()) ** 2)
    return model.num_subcarriers * spread / (model.rms_bandwidth_hz**2 * np.asarray(snr, dtype=float))


def simulate_measurements(deployment: Deployment, ue_index: int, model: SignalModel, mode: str, seed,
                          blockage: BlockageMap | None = None, snr=None) -> Measurements:
    """Draw one set of measurements of UE ``ue_index`` from every AP.

    delay: ``tau_k + N(0, 1/(8 pi^2 beta^2 SNR_k))``.
    phase: ``wrap(-2 pi f_c tau_k + N(0, 1/(2 SNR_k)))`` plus noisy
    subcarrier responses ``exp(-j 2 pi (f_c + f_n) tau_k) + w``.
    """
    if mode not in ("delay", "phase"):
        raise ValueError("mode must be 'delay' or 'phase'")
    if blockage is not None and np.any(blockage.blocked[:, ue_index]):
        bad = np.flatnonzero(blockage.blocked[:, ue_index]).tolist()
        raise ValueError(f"blocked link(s) from AP(s) {bad}; positioning assumes pure LOS")
    rng = seeding.as_rng(seed)
    _, d = unit_vectors(deployment.ap_positions, deployment.ue_positions[ue_index])
    snr = link_snr(d, model) if snr is None else np.broadcast_to(np.asarray(snr, dtype=float), d.shape).copy()
    if np.any(snr <= 0):
        raise ValueError("measurement SNRs must be > 0")
    noisy = snr < SNR_NOISELESS
    tau = d / model.speed_of_light
    if mode == "delay":
        var = delay_variance(snr, model)
        noise = rng.standard_normal(len(d))
        return Measurements("delay", tau + np.where(noisy, np.sqrt(var) * noise, 0.0), var, snr)
    var = phase_variance(snr)
    noise = rng.standard_normal(len(d))
    cycles = np.mod(model.carrier_hz * tau, 1.0)
    phases = wrap_phase(-2 * np.pi * cycles + np.where(noisy, np.sqrt(var) * noise, 0.0))
    f = model.subcarrier_offsets()
    clean = np.exp(-2j * np.pi * (cycles[:, None] + f[None, :] * tau[:, None]))
    sc_var = _subcarrier_noise_var(snr, model)
    w = (rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape)) * np.sqrt(sc_var / 2)[:, None]
    resp = clean + np.where(noisy[:, None], w, 0.0)
    return Measurements("phase", phases, var, snr, resp, sc_var)
