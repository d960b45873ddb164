"""AP/UE placement, blockage maps and deployment snapshots."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seeding
from .config import BlockageSpec, ScenarioConfig, ScenarioError

DUPLICATE_TOL_M = 1e-6


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Deployment:
    """AP and UE coordinates in metres, one row per node."""

    ap_positions: np.ndarray
    ue_positions: np.ndarray
    area_side_m: float | None = None
    allow_outside: bool = False

    def __post_init__(self):
        aps = _frozen(self.ap_positions)
        ues = _frozen(self.ue_positions)
        if aps.ndim != 2 or ues.ndim != 2 or aps.shape[1] != ues.shape[1] or aps.shape[1] not in (2, 3):
            raise ValueError("positions must be (n, 2) or (n, 3) arrays of matching dimension")
        object.__setattr__(self, "ap_positions", aps)
        object.__setattr__(self, "ue_positions", ues)
        if self.area_side_m is not None and not self.allow_outside:
            for name, pts in (("ap_positions", aps), ("ue_positions", ues)):
                if np.any(pts < 0) or np.any(pts > self.area_side_m):
                    raise ValueError(f"{name} outside the [0, {self.area_side_m}] area")
        if len(aps) > 1:
            gaps = np.linalg.norm(aps[:, None, :] - aps[None, :, :], axis=-1)
            gaps[np.diag_indices(len(aps))] = np.inf
            if gaps.min() < DUPLICATE_TOL_M:
                i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
                raise ValueError(f"APs {min(i, j)} and {max(i, j)} share a location")

    @property
    def num_aps(self) -> int:
        return len(self.ap_positions)

    @property
    def num_ues(self) -> int:
        return len(self.ue_positions)

    @property
    def dimension(self) -> int:
        return self.ap_positions.shape[1]

    def distances(self) -> np.ndarray:
        """AP-UE distance matrix of shape (num_aps, num_ues)."""
        return np.linalg.norm(self.ap_positions[:, None, :] - self.ue_positions[None, :, :], axis=-1)

    def subset(self, ap_indices) -> "Deployment":
        """Deployment restricted to ``ap_indices`` (order preserved)."""
        idx = np.asarray(ap_indices, dtype=int)
        return Deployment(self.ap_positions[idx], self.ue_positions, self.area_side_m, self.allow_outside)

    def __eq__(self, other):
        if not isinstance(other, Deployment):
            return NotImplemented
        return (np.array_equal(self.ap_positions, other.ap_positions)
                and np.array_equal(self.ue_positions, other.ue_positions))

    __hash__ = None


def generate_deployment(config: ScenarioConfig, rng=None) -> Deployment:
    """Place APs and UEs per ``config.deployment_kind``.

    Draws come from the config seed unless an explicit generator is given,
    so ``(config, seed)`` fully determines the result. Uniform draws take the
    APs first, so the first k APs of a deployment form a nested sequence.
    """
    side = config.area_side_m
    dim = config.dimension
    if config.deployment_kind == "explicit-list":
        return Deployment(config.ap_positions, config.ue_positions, side, config.allow_outside)
    if rng is None:
        rng = seeding.rng_for(config.seed, seeding.DEPLOYMENT)
    if config.deployment_kind == "uniform-square":
        aps = rng.uniform(0.0, side, size=(config.num_aps, dim))
    else:  # circle: APs evenly spaced on the inscribed circle
        ang = 2 * np.pi * np.arange(config.num_aps) / config.num_aps
        aps = np.zeros((config.num_aps, dim))
        aps[:, 0] = side / 2 + (side / 2) * np.cos(ang)
        aps[:, 1] = side / 2 + (side / 2) * np.sin(ang)
        if dim == 3:
            aps[:, 2] = side / 2
    ues = rng.uniform(0.0, side, size=(config.num_ues, dim))
    return Deployment(aps, ues, side, config.allow_outside)


@dataclass(frozen=True, eq=False)
class BlockageMap:
    """``blocked[m, u]`` marks the AP m to UE u link as blocked."""

    blocked: np.ndarray
    penalty_db: float = 25.0

    def __post_init__(self):
        b = np.array(self.blocked, dtype=bool)
        b.setflags(write=False)
        object.__setattr__(self, "blocked", b)
        if self.penalty_db < 0:
            raise ValueError("penalty must be >= 0 dB")

    @property
    def penalty_linear(self) -> float:
        """Power attenuation factor (< 1) applied to blocked links."""
        return 10.0 ** (-self.penalty_db / 10.0)

    def attenuation(self) -> np.ndarray:
        return np.where(self.blocked, self.penalty_linear, 1.0)

    @classmethod
    def clear(cls, num_aps: int, num_ues: int, penalty_db: float = 25.0) -> "BlockageMap":
        return cls(np.zeros((num_aps, num_ues), dtype=bool), penalty_db)


def apply_blockage(deployment: Deployment, spec: BlockageSpec, default_sets=None, seed=0) -> BlockageMap:
    """Mark blocked links according to ``spec``.

    ``default_sets`` is one AP index collection per UE; it is required for
    ``block-default-serving-set``, where a link is blocked iff the AP is in
    that UE's default serving set.
    """
    shape = (deployment.num_aps, deployment.num_ues)
    if spec.kind == "none":
        return BlockageMap(np.zeros(shape, dtype=bool), spec.penalty_db)
    if spec.kind == "block-default-serving-set":
        if default_sets is None:
            raise ScenarioError("default serving sets are required for this blockage kind", field="blockage.kind")
        if len(default_sets) != deployment.num_ues:
            raise ValueError("need one default serving set per UE")
        blocked = np.zeros(shape, dtype=bool)
        for u, aps in enumerate(default_sets):
            blocked[np.asarray(list(aps), dtype=int), u] = True
        return BlockageMap(blocked, spec.penalty_db)
    rng = seeding.as_rng(seed)
    return BlockageMap(rng.random(shape) < spec.probability, spec.penalty_db)


SNAPSHOT_HEADER = ("kind", "index", "x_m", "y_m")


def deployment_to_csv(deployment: Deployment) -> str:
    """CSV snapshot with header ``kind,index,x_m,y_m`` (plus ``z_m`` in 3D)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(SNAPSHOT_HEADER) + (["z_m"] if deployment.dimension == 3 else [])
    w.writerow(header)
    for kind, pts in (("ap", deployment.ap_positions), ("ue", deployment.ue_positions)):
        for i, p in enumerate(pts):
            w.writerow([kind, i] + [repr(float(c)) for c in p])
    return buf.getvalue()


def deployment_from_csv(text: str, area_side_m: float | None = None) -> Deployment:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0][:4]) != SNAPSHOT_HEADER:
        raise ValueError(f"snapshot header must start with {','.join(SNAPSHOT_HEADER)}")
    ncoord = len(rows[0]) - 2
    aps, ues = {}, {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != ncoord + 2 or row[0] not in ("ap", "ue"):
            raise ValueError(f"line {lineno}: malformed snapshot row")
        (aps if row[0] == "ap" else ues)[int(row[1])] = [float(v) for v in row[2:]]
    order = lambda d: [d[i] for i in range(len(d))]  # noqa: E731
    return Deployment(np.array(order(aps)), np.array(order(ues)), area_side_m,
                      allow_outside=area_side_m is None)


def save_deployment(deployment: Deployment, path) -> None:
    Path(path).write_text(deployment_to_csv(deployment), encoding="utf-8")


def load_deployment(path, area_side_m: float | None = None) -> Deployment:
    return deployment_from_csv(Path(path).read_text(encoding="utf-8"), area_side_m)
