"""Position-domain Fisher information for delay and carrier-phase ranging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import path_gain
from ..config import SignalModel
from ..deployment import Deployment

MODES = ("delay", "phase")
# J is declared singular above this condition number
SINGULAR_CONDITION = 1e12


class SingularInformationError(ArithmeticError):
    """The information matrix cannot be inverted (e.g. collinear geometry)."""


@dataclass(frozen=True, eq=False)
class FisherInfo:
    J: np.ndarray
    snr: np.ndarray
    mode: str
    unit_vectors: np.ndarray
    weights: np.ndarray

    def contributions(self) -> np.ndarray:
        """Rank-1 per-AP terms ``w_k u_k u_k^T``; they sum to ``J``."""
        return self.weights[:, None, None] * np.einsum("ki,kj->kij", self.unit_vectors, self.unit_vectors)


@dataclass(frozen=True)
class PebResult:
    peb_m: float
    mode: str
    num_aps: int


def unit_vectors(ap_positions, position) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors from ``position`` towards each AP and the distances."""
    diff = np.asarray(ap_positions, dtype=float) - np.asarray(position, dtype=float)
    d = np.linalg.norm(diff, axis=1)
    if np.any(d <= 0):
        raise ValueError("UE co-located with an AP")
    return diff / d[:, None], d


def link_snr(distance_m, model: SignalModel):
    """Per-link SNR from the reference SNR and the unshadowed path gain."""
    return model.ref_snr * path_gain(distance_m, model)


def delay_variance(snr, model: SignalModel):
    """Delay-estimation variance 1 / (8 pi^2 beta_rms^2 SNR), s^2."""
    with np.errstate(divide="ignore"):
        return 1.0 / (8 * np.pi**2 * model.rms_bandwidth_hz**2 * np.asarray(snr, dtype=float))


def phase_variance(snr):
    """Carrier-phase variance 1 / (2 SNR), rad^2."""
    with np.errstate(divide="ignore"):
        return 1.0 / (2.0 * np.asarray(snr, dtype=float))


def _fim(deployment: Deployment, ue_index: int, model: SignalModel, mode: str, snr, position) -> FisherInfo:
    pos = deployment.ue_positions[ue_index] if position is None else np.asarray(position, dtype=float)
    u, d = unit_vectors(deployment.ap_positions, pos)
    snr = link_snr(d, model) if snr is None else np.broadcast_to(np.asarray(snr, dtype=float), d.shape).copy()
    freq = model.rms_bandwidth_hz if mode == "delay" else model.carrier_hz
    weights = 8 * np.pi**2 * freq**2 * snr / model.speed_of_light**2
    J = np.einsum("k,ki,kj->ij", weights, u, u)
    J = 0.5 * (J + J.T)
    return FisherInfo(J, np.atleast_1d(snr), mode, u, weights)


def fim_delay(deployment: Deployment, ue_index: int, model: SignalModel, snr=None, position=None) -> FisherInfo:
    """Time-of-arrival FIM ``sum_k 8 pi^2 beta^2 SNR_k / c^2 u_k u_k^T`` with beta = B / sqrt(12)."""
    return _fim(deployment, ue_index, model, "delay", snr, position)


def fim_phase(deployment: Deployment, ue_index: int, model: SignalModel, snr=None, position=None) -> FisherInfo:
    """Carrier-phase FIM: as :func:`fim_delay` with beta replaced by f_c.

    Assumes phase references at all APs are calibrated and known. The
    delay contribution of the subcarriers is left out; it is smaller by
    (beta / f_c)^2.
    """
    return _fim(deployment, ue_index, model, "phase", snr, position)


def fim(deployment, ue_index, model, mode, snr=None, position=None) -> FisherInfo:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    return _fim(deployment, ue_index, model, mode, snr, position)


def _bound(J: np.ndarray) -> float:
    if not np.all(np.isfinite(J)) or np.linalg.cond(J) > SINGULAR_CONDITION:
        raise SingularInformationError("information matrix is singular (rank-deficient geometry)")
    return float(np.sqrt(np.trace(np.linalg.inv(J))))


def peb(info: FisherInfo) -> PebResult:
    """Position error bound sqrt(trace(J^-1)) in metres."""
    return PebResult(_bound(info.J), info.mode, len(info.weights))


def gdop(deployment: Deployment, ue_index: int = 0, position=None) -> float:
    """Geometry-only factor sqrt(trace((sum_k u_k u_k^T)^-1))."""
    pos = deployment.ue_positions[ue_index] if position is None else position
    u, _ = unit_vectors(deployment.ap_positions, pos)
    return _bound(u.T @ u)
