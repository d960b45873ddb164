"""Independent reference computations shared by the tests."""

import numpy as np

from dmimo_isac.config import SignalModel


def fd_hessian(f, x, h):
    """Central finite-difference Hessian."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    H = np.empty((n, n))
    E = np.eye(n) * h
    for i in range(n):
        for j in range(i, n):
            H[i, j] = H[j, i] = (f(x + E[i] + E[j]) - f(x + E[i] - E[j]) - f(x - E[i] + E[j])
                                 + f(x - E[i] - E[j])) / (4 * h * h)
    return H


def expected_delay_nll(aps, truth, snr, model: SignalModel):
    """E[-log p(tau_hat | p)] up to a constant, for Gaussian delay noise."""
    var = 1.0 / (8 * np.pi**2 * model.rms_bandwidth_hz**2 * snr)
    d0 = np.linalg.norm(aps - truth, axis=1)

    def f(p):
        dd = (np.linalg.norm(aps - p, axis=1) - d0) / model.speed_of_light
        return 0.5 * float(np.sum(dd**2 / var))
    return f


def expected_phase_nll(aps, truth, snr, model: SignalModel, nodes=80, images=6):
    """E[-log p(phi_hat | p)] for wrapped-Gaussian phase noise.

    The expectation over the noise is a Gauss-Hermite sum and the wrapped
    density is summed over ``2 images + 1`` periods.
    """
    var = 1.0 / (2 * snr)
    t, w = np.polynomial.hermite.hermgauss(nodes)
    noise = np.sqrt(2 * var)[:, None] * t[None, :]
    m = np.arange(-images, images + 1)
    kw = 2 * np.pi / model.wavelength_m
    d0 = np.linalg.norm(aps - truth, axis=1)

    def f(p):
        # phase offset between the hypothesis and the truth
        delta = kw * (np.linalg.norm(aps - p, axis=1) - d0)
        x = noise + delta[:, None]
        arg = -(x[..., None] + 2 * np.pi * m) ** 2 / (2 * var[:, None, None])
        top = arg.max(-1)
        log_density = top + np.log(np.exp(arg - top[..., None]).sum(-1))
        return float(-(log_density @ w).sum() / np.sqrt(np.pi))
    return f
