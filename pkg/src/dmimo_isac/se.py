"""Uplink spectral efficiency with MRC under user-centric AP clustering.

Four information regimes differ only in what the network knows:

================== ============== =========
regime             knows blockage knows CSI
================== ============== =========
with-isac          yes            yes
with-localization  no             yes
with-sensing       yes            no
without-isac       no             no
================== ============== =========

Knowing blockage moves a UE from its default serving set (nearest L APs)
to its backup set (nearest L unblocked APs). Knowing CSI means the MRC
combiner is the true channel; otherwise it is the deterministic LOS mean.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .channel import ChannelRealization, db_to_linear, draw_rician_channel, large_scale_gains
from .config import REGIMES, ScenarioConfig
from .deployment import BlockageMap, Deployment, apply_blockage, generate_deployment


@dataclass(frozen=True)
class IsacRegime:
    name: str
    knows_blockage: bool
    knows_csi: bool

    @property
    def assignment_kind(self) -> str:
        return "backup" if self.knows_blockage else "default"

    @property
    def csi_quality(self) -> str:
        return "perfect" if self.knows_csi else "statistical"


_REGIME_FLAGS = {
    "with-isac": (True, True),
    "with-localization": (False, True),
    "with-sensing": (True, False),
    "without-isac": (False, False),
}
assert tuple(_REGIME_FLAGS) == REGIMES


def regime(name: str) -> IsacRegime:
    if name not in _REGIME_FLAGS:
        raise ValueError(f"unknown regime {name!r}; expected one of {REGIMES}")
    return IsacRegime(name, *_REGIME_FLAGS[name])


@dataclass(frozen=True, eq=False)
class ServingAssignment:
    """Per-UE serving sets ordered by distance; ``shortfall[u]`` flags a
    backup set smaller than L because too few links were unblocked."""

    sets: tuple
    kind: str
    shortfall: np.ndarray

    def mask(self, num_aps: int) -> np.ndarray:
        """(num_aps, num_ues) boolean membership matrix."""
        m = np.zeros((num_aps, len(self.sets)), dtype=bool)
        for u, s in enumerate(self.sets):
            m[list(s), u] = True
        return m


def assign_clusters(deployment: Deployment, blockage: BlockageMap | None, L: int, kind: str) -> ServingAssignment:
    """Nearest-L AP selection per UE, ties broken by AP index.

    ``default`` ignores blockage; ``backup`` only considers unblocked links.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if kind not in ("default", "backup"):
        raise ValueError("kind must be 'default' or 'backup'")
    d = deployment.distances()
    num_aps, num_ues = d.shape
    blocked = np.zeros_like(d, dtype=bool) if blockage is None else blockage.blocked
    sets, short = [], np.zeros(num_ues, dtype=bool)
    for u in range(num_ues):
        order = np.argsort(d[:, u], kind="stable")
        if kind == "backup":
            order = order[~blocked[order, u]]
            if len(order) == 0:
                raise ValueError(f"UE {u} has no unblocked AP")
        want = min(L, num_aps)
        short[u] = len(order) < want
        sets.append(tuple(int(i) for i in order[:want]))
    short.setflags(write=False)
    return ServingAssignment(tuple(sets), kind, short)


@dataclass(frozen=True, eq=False)
class CsiView:
    h_hat: np.ndarray
    quality: str


def csi_view(truth: ChannelRealization, quality: str) -> CsiView:
    """Combiner-side channel knowledge: the truth, or only its LOS mean."""
    if quality == "perfect":
        return CsiView(truth.h, quality)
    if quality == "statistical":
        return CsiView(truth.los_mean, quality)
    raise ValueError("quality must be 'perfect' or 'statistical'")


def mrc_sinr(v: np.ndarray, H: np.ndarray, tx_snr) -> np.ndarray:
    """SINR of each UE for stacked combiners ``v`` and channels ``H``.

    ``v[i]`` and ``H[j]`` are UE i's combiner and UE j's channel, flattened
    over all APs and antennas. ``tx_snr`` may be an array; the result has
    shape ``tx_snr.shape + (num_ues,)``. An all-zero combiner gives SINR 0.
    """
    G = np.abs(np.conj(v) @ H.T) ** 2
    sig = np.diag(G)
    interf = G.sum(axis=1) - sig
    norm = np.sum(np.abs(v) ** 2, axis=1)
    tx = np.asarray(tx_snr, dtype=float)[..., None]
    if np.any(tx <= 0):
        raise ValueError("tx_snr must be > 0")
    with np.errstate(invalid="ignore", divide="ignore"):
        sinr = tx * sig / (tx * interf + norm)
    return np.where(norm > 0, sinr, 0.0)


def combiners(views: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Stack ``views[:, i, :]`` restricted to UE i's serving set into (num_ues, num_aps*antennas)."""
    v = views * mask[:, :, None]
    return np.moveaxis(v, 1, 0).reshape(v.shape[1], -1)


def mrc_sinr_se(h_all: np.ndarray, views: np.ndarray, assignment: ServingAssignment, tx_snr) -> np.ndarray:
    """Per-UE SE ``log2(1 + SINR)`` with MRC.

    ``h_all`` and ``views`` are (num_aps, num_ues, antennas) arrays of true
    and combiner-side channels.
    """
    h_all = np.asarray(h_all)
    views = np.asarray(views)
    if h_all.shape != views.shape or h_all.ndim != 3:
        raise ValueError("h_all and views must share shape (num_aps, num_ues, antennas)")
    mask = assignment.mask(h_all.shape[0])
    H = np.moveaxis(h_all, 1, 0).reshape(h_all.shape[1], -1)
    return np.log2(1.0 + mrc_sinr(combiners(views, mask), H, tx_snr))


# ---------------------------------------------------------------------------
# Monte Carlo sweep

@dataclass(frozen=True)
class SeRow:
    snr_db: float
    regime: str
    se: float
    realizations: int


@dataclass
class SeCurve:
    """Averaged rows plus the per-realization samples, shape (realizations, snrs) per regime."""

    rows: list = field(default_factory=list)
    samples: dict = field(default_factory=dict)
    snr_grid_db: tuple = ()

    def curve(self, regime_name: str) -> np.ndarray:
        return self.samples[regime_name].mean(axis=0)

    def stderr(self, regime_name: str) -> np.ndarray:
        s = self.samples[regime_name]
        return s.std(axis=0, ddof=1) / np.sqrt(len(s)) if len(s) > 1 else np.zeros(s.shape[1])

    def value(self, snr_db: float, regime_name: str) -> float:
        i = int(np.argmin(np.abs(np.asarray(self.snr_grid_db) - snr_db)))
        return float(self.curve(regime_name)[i])

    def gains(self, snr_db: float, baseline: str = "without-isac") -> dict:
        """SE ratios over ``baseline``; ``inf`` when the baseline SE is zero."""
        base = self.value(snr_db, baseline)
        return {r: self.value(snr_db, r) / base if base > 0 else float("inf")
                for r in self.samples if r != baseline}


def realization_deployment(config: ScenarioConfig, base: Deployment, rng) -> Deployment:
    """Same APs, fresh UE drop (explicit layouts keep their UEs)."""
    if config.deployment_kind == "explicit-list":
        return base
    ues = rng.uniform(0.0, config.area_side_m, size=(config.num_ues, config.dimension))
    return Deployment(base.ap_positions, ues, config.area_side_m, config.allow_outside)


def _realization_se(config: ScenarioConfig, base: Deployment, index: int, regimes, tx_snr, force_perfect_csi):
    rng = seeding.rng_for(config.seed, seeding.REALIZATION, index)
    dep = realization_deployment(config, base, rng)
    L = config.cluster_size_L
    default = assign_clusters(dep, None, L, "default")
    blockage = apply_blockage(dep, config.blockage, default.sets, seed=rng)
    # a zero-loss blockage leaves nothing for sensing to detect
    sensed = blockage if blockage.penalty_db > 0 else BlockageMap.clear(dep.num_aps, dep.num_ues)
    backup = assign_clusters(dep, sensed, L, "backup")
    lsg = large_scale_gains(dep, config.signal, blockage, config.channel.shadow_sigma_db, rng)
    k = np.where(blockage.blocked, db_to_linear(config.channel.blocked_rician_k_db),
                 db_to_linear(config.channel.rician_k_db))
    ch = draw_rician_channel(lsg.gain, k, config.antennas_per_ap, rng)
    out = np.empty((len(regimes), len(tx_snr)))
    for i, reg in enumerate(regimes):
        assignment = backup if reg.knows_blockage else default
        view = csi_view(ch, "perfect" if force_perfect_csi else reg.csi_quality)
        se = mrc_sinr_se(ch.h, view.h_hat, assignment, tx_snr)
        out[i] = se.sum(axis=1) if config.se.report_sum else se.mean(axis=1)
    return out


def _realization_block(config, base, indices, regimes, tx_snr, force_perfect_csi):
    return np.stack([_realization_se(config, base, r, regimes, tx_snr, force_perfect_csi) for r in indices])


def se_sweep(config: ScenarioConfig, regimes=None, snr_grid_db=None, realizations: int | None = None,
             jobs: int = 1, force_perfect_csi: bool = False, chunk: int = 20) -> SeCurve:
    """Average per-UE (or sum, if ``config.se.report_sum``) SE over paired realizations.

    Each realization draws UE positions, blockage, shadowing and fading
    once from (seed, realization index) and evaluates every regime and SNR
    on that same draw. Averages are taken in realization order, so the
    result does not depend on ``jobs``.
    """
    names = config.se.regimes if regimes is None else regimes
    regs = [r if isinstance(r, IsacRegime) else regime(r) for r in names]
    grid = tuple(float(s) for s in (config.se.snr_grid_db if snr_grid_db is None else snr_grid_db))
    n = config.se.realizations if realizations is None else int(realizations)
    if n < 1:
        raise ValueError("realizations must be >= 1")
    if not grid:
        raise ValueError("empty SNR grid")
    tx_snr = db_to_linear(np.array(grid))
    base = generate_deployment(config)
    blocks = [list(range(i, min(i + chunk, n))) for i in range(0, n, chunk)]
    args = [(config, base, b, regs, tx_snr, force_perfect_csi) for b in blocks]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_realization_block, *zip(*args)))
    else:
        parts = [_realization_block(*a) for a in args]
    samples = np.concatenate(parts)  # (n, regimes, snrs)

    curve = SeCurve(snr_grid_db=grid)
    for i, reg in enumerate(regs):
        curve.samples[reg.name] = np.ascontiguousarray(samples[:, i, :])
    means = {reg.name: curve.curve(reg.name) for reg in regs}
    for j, s in enumerate(grid):
        for reg in regs:
            curve.rows.append(SeRow(s, reg.name, float(means[reg.name][j]), n))
    return curve
