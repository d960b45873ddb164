"""Maximum-likelihood position estimation from delay or carrier-phase measurements.

Delay mode minimises ``sum_k (tau_hat_k - tau_k(p))^2 / sigma_k^2`` with a
coarse grid followed by damped Gauss-Newton.

Phase mode maximises ``sum_k cos(phi_hat_k - phi_k(p)) / sigma_k^2``. The
likelihood has a peak roughly every half wavelength, so the search is
confined to a gate around a coarse fix obtained from the subcarrier
responses, and peaks are enumerated exactly rather than by sampling: every
peak lies next to a point where the two strongest, well-separated APs are
both phase-aligned, i.e. an intersection of their constant-phase circles
(one circle per wavelength of range). Those intersections are scored,
pruned with partial upper bounds, and the best few are refined by Newton
ascent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ..config import ScenarioConfig, SignalModel
from ..deployment import Deployment
from .fisher import delay_variance
from .measurements import Measurements

TWO_PI = 2 * np.pi


class EstimationError(RuntimeError):
    """The estimator could not produce a position (degenerate input or search too large)."""


@dataclass(frozen=True)
class SearchConfig:
    """Search region and estimator knobs.

    ``lower``/``upper`` bound the region searched; ``gate_sigma`` is the
    Mahalanobis radius of the phase-mode gate around the coarse fix.
    """

    lower: tuple
    upper: tuple
    delay_grid_m: float = 1.0
    gate_sigma: float = 4.5
    max_iterations: int = 50
    step_tol_m: float = 1e-9
    phase_candidates: int = 12
    periodogram_oversample: int = 32
    max_lattice_points: int = 30_000_000

    @classmethod
    def square(cls, side_m: float, dimension: int = 2, **kw) -> "SearchConfig":
        return cls((0.0,) * dimension, (float(side_m),) * dimension, **kw)

    @classmethod
    def from_config(cls, config: ScenarioConfig, **kw) -> "SearchConfig":
        p = config.positioning
        opts = dict(delay_grid_m=p.delay_grid_m, gate_sigma=p.gate_sigma,
                    max_iterations=p.max_iterations, step_tol_m=p.step_tol_m)
        opts.update(kw)
        return cls.square(config.area_side_m, config.dimension, **opts)

    def clip(self, p) -> np.ndarray:
        return np.clip(p, self.lower, self.upper)

    def contains(self, p, tol: float = 1e-9) -> bool:
        p = np.asarray(p)
        return bool(np.all(p >= np.asarray(self.lower) - tol) and np.all(p <= np.asarray(self.upper) + tol))


@dataclass(frozen=True, eq=False)
class EstimateResult:
    """``candidates`` counts distinct refined optima whose likelihood is
    within 1e-3 (relative) of the best one; more than one means the
    measurements are ambiguous."""

    position: np.ndarray
    log_likelihood: float
    converged: bool
    candidates: int
    coarse_position: np.ndarray | None = None


# ---------------------------------------------------------------------------
# delay mode

def _grid_axes(search: SearchConfig, step: float) -> list:
    axes = []
    for lo, hi in zip(search.lower, search.upper):
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        axes.append(lo + step * np.arange(n))
    return axes


def _grid_points(search: SearchConfig, step: float) -> np.ndarray:
    mesh = np.meshgrid(*_grid_axes(search, step), indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _distances(points: np.ndarray, aps: np.ndarray) -> np.ndarray:
    return np.sqrt(((points[:, None, :] - aps[None, :, :]) ** 2).sum(-1))


def delay_nll(position, measurements: Measurements, deployment: Deployment, model: SignalModel) -> float:
    """Negative delay log-likelihood (constants dropped)."""
    d = np.linalg.norm(deployment.ap_positions - np.asarray(position, dtype=float), axis=1)
    r = (measurements.values - d / model.speed_of_light) / np.sqrt(measurements.variances)
    return 0.5 * float(r @ r)


def _delay_grid_argmin(aps, tau_hat, sigma, c, search: SearchConfig, chunk: int = 200_000) -> np.ndarray:
    pts = _grid_points(search, search.delay_grid_m)
    best_val, best = np.inf, None
    for i in range(0, len(pts), chunk):
        q = pts[i:i + chunk]
        r = (tau_hat[None, :] - _distances(q, aps) / c) / sigma[None, :]
        cost = (r * r).sum(1)
        j = int(np.argmin(cost))
        if cost[j] < best_val:
            best_val, best = cost[j], q[j]
    return best.copy()


def _gauss_newton_delay(p, aps, tau_hat, sigma, c, search: SearchConfig):
    def cost(q):
        r = (tau_hat - np.linalg.norm(aps - q, axis=1) / c) / sigma
        return 0.5 * float(r @ r)

    current = cost(p)
    converged = False
    for _ in range(search.max_iterations):
        diff = p - aps
        d = np.linalg.norm(diff, axis=1)
        if np.any(d == 0):
            break
        r = (tau_hat - d / c) / sigma
        jac = diff / d[:, None] / (c * sigma[:, None])
        step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        norm = float(np.linalg.norm(step))
        if norm < search.step_tol_m:
            p = search.clip(p + step)
            converged = True
            break
        t = 1.0
        while t > 1e-8:
            q = search.clip(p + t * step)
            val = cost(q)
            if val <= current:
                break
            t *= 0.5
        else:
            # no descent direction left at working precision
            converged = norm < 1e3 * search.step_tol_m
            break
        moved = float(np.linalg.norm(q - p))
        p, current = q, val
        if moved < search.step_tol_m:
            converged = True
            break
    return p, current, converged


def _estimate_delay(meas: Measurements, deployment: Deployment, model: SignalModel, search: SearchConfig):
    aps = deployment.ap_positions
    c = model.speed_of_light
    sigma = np.sqrt(meas.variances)
    p0 = _delay_grid_argmin(aps, meas.values, sigma, c, search)
    p, nll, conv = _gauss_newton_delay(p0, aps, meas.values, sigma, c, search)
    return EstimateResult(p, -nll, conv, 1, p0)


# ---------------------------------------------------------------------------
# phase mode: coarse fix from the subcarrier responses

def coarse_delays(meas: Measurements, deployment: Deployment, model: SignalModel, search: SearchConfig):
    """Coarse position and per-AP delays from the subcarrier responses.

    The zero-padded periodograms of all APs are combined non-coherently on
    the delay grid, which avoids per-AP outliers at low SNR. Each AP's delay
    is then refined within half a resolution cell of the pooled fix.
    """
    if meas.subcarriers is None:
        raise EstimationError("phase-mode measurements carry no subcarrier responses")
    aps = deployment.ap_positions
    c = model.speed_of_light
    y = meas.subcarriers
    n_sc = y.shape[1]
    spacing = model.bandwidth_hz / n_sc
    pad = search.periodogram_oversample * n_sc
    power = np.abs(np.fft.ifft(y, n=pad, axis=1) * pad) ** 2 / meas.subcarrier_noise_var[:, None]
    dt = 1.0 / (pad * spacing)

    pts = _grid_points(search, search.delay_grid_m)
    best_val, p_grid = -np.inf, None
    for i in range(0, len(pts), 200_000):
        q = pts[i:i + 200_000]
        pos = (_distances(q, aps) / c) / dt
        lo = np.floor(pos).astype(int)
        frac = pos - lo
        k = np.arange(len(aps))[None, :]
        s = ((1 - frac) * power[k, lo % pad] + frac * power[k, (lo + 1) % pad]).sum(1)
        j = int(np.argmax(s))
        if s[j] > best_val:
            best_val, p_grid = s[j], q[j].copy()

    f = model.subcarrier_offsets()
    tau_grid = np.linalg.norm(aps - p_grid, axis=1) / c
    half = 0.5 / model.bandwidth_hz
    tau_hat = np.empty(len(aps))
    for k in range(len(aps)):
        obj = lambda t, yk=y[k]: -abs(np.dot(yk, np.exp(2j * np.pi * f * t)))  # noqa: E731
        res = minimize_scalar(obj, bounds=(tau_grid[k] - half, tau_grid[k] + half), method="bounded",
                              options={"xatol": 1e-6 / model.bandwidth_hz})
        tau_hat[k] = res.x
    sigma = np.sqrt(delay_variance(meas.snr, model))
    p, _, _ = _gauss_newton_delay(p_grid, aps, tau_hat, sigma, c, search)
    return p, tau_hat


# ---------------------------------------------------------------------------
# phase mode: likelihood and lattice search

def phase_objective(position, phases, weights, aps, wavenumber) -> float:
    """``sum_k w_k cos(phi_hat_k - phi_k(p))`` with phi_k(p) = -k d_k(p)."""
    d = np.linalg.norm(aps - np.asarray(position, dtype=float), axis=1)
    return float(weights @ np.cos(phases + wavenumber * d))


def _newton_phase(p, phases, w, aps, kw, lam, search: SearchConfig):
    eye = np.eye(len(p))
    total = float(w.sum()) * kw * kw
    converged = False
    for _ in range(search.max_iterations):
        diff = p - aps
        d = np.linalg.norm(diff, axis=1)
        u = diff / d[:, None]
        e = phases + kw * d
        s, co = np.sin(e), np.cos(e)
        grad = -(w * s * kw) @ u
        hess = -(np.einsum("k,ki,kj->ij", w * co * kw * kw, u, u)
                 + np.einsum("k,kij->ij", w * s * kw / d, eye[None] - np.einsum("ki,kj->kij", u, u)))
        if np.all(np.linalg.eigvalsh(hess) < 0):
            step = -np.linalg.solve(hess, grad)
        else:
            step = grad / total
        norm = float(np.linalg.norm(step))
        if norm > lam / 8:
            step *= lam / 8 / norm
        p = search.clip(p + step)
        if norm < search.step_tol_m:
            converged = True
            break
    return p, phase_objective(p, phases, w, aps, kw), converged


def _ring_radii(phase, kw, dmin, dmax):
    n0 = math.ceil((kw * dmin + phase) / TWO_PI)
    n1 = math.floor((kw * dmax + phase) / TWO_PI)
    return (TWO_PI * np.arange(n0, n1 + 1) - phase) / kw


def _wrap(x):
    return np.pi - np.mod(np.pi - x, TWO_PI)


def _lattice_blocks(aps, phases, kw, a, b, p0, radius, budget):
    """Yield blocks of intersections of AP a's and AP b's zero-phase circles
    that fall inside the disk of ``radius`` around ``p0``."""
    A, B = aps[a], aps[b]
    d0a = float(np.linalg.norm(p0 - A))
    ra = _ring_radii(phases[a], kw, max(d0a - radius, 0.0), d0a + radius)
    if len(ra) == 0:
        return
    theta_c = math.atan2(*(p0 - A)[::-1])
    dab = float(np.linalg.norm(B - A))
    theta_b = math.atan2(*(B - A)[::-1])

    with np.errstate(invalid="ignore", divide="ignore"):
        cos_half = (ra**2 + d0a**2 - radius**2) / (2 * ra * d0a) if d0a > 0 else np.full_like(ra, -np.inf)
    full = cos_half <= -1
    half = np.where(full, np.pi, np.arccos(np.clip(cos_half, -1, 1)))
    ends = np.stack([theta_c - half, theta_c + half])
    d_end = np.sqrt(ra**2 + dab**2 - 2 * ra * dab * np.cos(ends - theta_b))
    dmin = d_end.min(0)
    dmax = d_end.max(0)
    toward = np.abs(_wrap(theta_b - theta_c)) <= half
    away = np.abs(_wrap(theta_b + np.pi - theta_c)) <= half
    dmin = np.where(toward | full, np.abs(dab - ra), dmin)
    dmax = np.where(away | full, dab + ra, dmax)
    n_lo = np.ceil((kw * dmin + phases[b]) / TWO_PI).astype(np.int64)
    n_hi = np.floor((kw * dmax + phases[b]) / TWO_PI).astype(np.int64)
    counts = np.maximum(n_hi - n_lo + 1, 0)
    total = int(counts.sum())
    if total > budget:
        raise EstimationError(f"phase search would visit {total} lattice points (budget {budget})")
    ex = (B - A) / dab
    ey = np.array([-ex[1], ex[0]])
    cum = np.concatenate([[0], np.cumsum(counts)])
    block = 1_000_000
    start = 0
    while start < len(ra):
        stop = int(np.searchsorted(cum, cum[start] + block, side="right"))
        stop = max(stop - 1, start + 1)
        c = counts[start:stop]
        m = int(c.sum())
        if m:
            rep = np.repeat(np.arange(start, stop), c)
            offs = np.arange(m) - np.repeat(cum[start:stop] - cum[start], c)
            r1 = ra[rep]
            r2 = (TWO_PI * (n_lo[rep] + offs) - phases[b]) / kw
            x = (dab**2 + r1**2 - r2**2) / (2 * dab)
            y2 = r1**2 - x**2
            ok = y2 >= 0
            x, y = x[ok], np.sqrt(y2[ok])
            base = A + x[:, None] * ex
            yield np.concatenate([base + y[:, None] * ey, base - y[:, None] * ey])
        start = stop


def _lattice_search(phases, w, aps, kw, p0, cov, search: SearchConfig):
    gate = search.gate_sigma
    cov_inv = np.linalg.inv(cov)
    radius = gate * math.sqrt(float(np.linalg.eigvalsh(cov).max()))
    u = (aps - p0) / np.linalg.norm(aps - p0, axis=1)[:, None]
    a = int(np.argmax(w))
    sep = w * (1 - (u @ u[a]) ** 2)
    sep[a] = -np.inf
    b = int(np.argmax(sep))
    rest = [k for k in np.argsort(-w, kind="stable") if k not in (a, b)]
    tails = np.concatenate([np.cumsum(w[rest][::-1])[::-1][1:], [0.0]]) if rest else np.zeros(0)
    ntop = search.phase_candidates

    top_p = np.zeros((0, 2))
    top_s = np.zeros(0)
    for pts in _lattice_blocks(aps, phases, kw, a, b, p0, radius, search.max_lattice_points):
        dd = pts - p0
        inside = np.einsum("ni,ij,nj->n", dd, cov_inv, dd) <= gate * gate
        inside &= np.all((pts >= search.lower) & (pts <= search.upper), axis=1)
        pts = pts[inside]
        score = np.full(len(pts), w[a] + w[b])
        for j, k in enumerate(rest):
            score = score + w[k] * np.cos(phases[k] + kw * np.hypot(pts[:, 0] - aps[k, 0], pts[:, 1] - aps[k, 1]))
            lower = np.concatenate([top_s, score - tails[j]])
            if len(lower) > ntop:
                thr = np.partition(lower, -ntop)[-ntop]
                keep = score + tails[j] >= thr
                pts, score = pts[keep], score[keep]
        top_p = np.concatenate([top_p, pts])
        top_s = np.concatenate([top_s, score])
        if len(top_s) > ntop:
            sel = np.argsort(-top_s, kind="stable")[:ntop]
            top_p, top_s = top_p[sel], top_s[sel]
    order = np.argsort(-top_s, kind="stable")
    return top_p[order]


def _estimate_phase(meas: Measurements, deployment: Deployment, model: SignalModel, search: SearchConfig):
    aps = deployment.ap_positions
    if aps.shape[1] != 2:
        raise NotImplementedError("phase-mode estimation is implemented for 2D deployments")
    if len(aps) < 2:
        raise EstimationError("phase-mode estimation needs at least two APs")
    lam = model.wavelength_m
    kw = TWO_PI / lam
    w = 1.0 / meas.variances
    phases = meas.values

    p0, _ = coarse_delays(meas, deployment, model, search)
    diff = p0 - aps
    d = np.linalg.norm(diff, axis=1)
    u = diff / d[:, None]
    J = np.einsum("k,ki,kj->ij", 1.0 / delay_variance(meas.snr, model) / model.speed_of_light**2, u, u)
    if np.linalg.cond(J) > 1e12:
        raise EstimationError("coarse delay geometry is singular")
    cov = np.linalg.inv(J)

    starts = _lattice_search(phases, w, aps, kw, p0, cov, search)
    if len(starts) == 0:
        starts = p0[None, :]
    refined = [_newton_phase(s.copy(), phases, w, aps, kw, lam, search) for s in starts]
    vals = np.array([r[1] for r in refined])
    best = int(np.argmax(vals))
    p_best, f_best, conv = refined[best]
    near = vals >= f_best - 1e-3 * abs(f_best)
    distinct = []
    for r, ok in zip(refined, near):
        if ok and all(np.linalg.norm(r[0] - q) > lam / 8 for q in distinct):
            distinct.append(r[0])
    return EstimateResult(p_best, f_best, conv, len(distinct), p0)


def ml_estimate(measurements: Measurements, deployment: Deployment, model: SignalModel,
                search: SearchConfig) -> EstimateResult:
    """Maximum-likelihood UE position from one set of measurements."""
    if measurements.num_aps != deployment.num_aps:
        raise ValueError("measurements and deployment disagree on the number of APs")
    if measurements.mode == "delay":
        return _estimate_delay(measurements, deployment, model, search)
    return _estimate_phase(measurements, deployment, model, search)
