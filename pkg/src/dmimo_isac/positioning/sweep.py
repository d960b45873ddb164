"""PEB / RMSE curves over AP counts and sequential AP-ordering studies.

Geometry policies for AP-count sweeps:

fixed-nested
    One deployment drawn from the scenario seed; count k uses its first k
    APs. Every trial redraws only the measurement noise.
redraw-nested
    Each trial draws its own deployment, again nested across counts. The
    reported PEB is then the RMS of the per-trial PEBs, which is the bound
    that matches an RMSE averaged over geometries.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import seeding
from ..config import ScenarioConfig
from ..deployment import Deployment, generate_deployment
from .estimation import EstimationError, SearchConfig, ml_estimate
from .fisher import MODES, SingularInformationError, fim, gdop, peb
from .measurements import simulate_measurements


@dataclass(frozen=True)
class CurveRow:
    num_aps: int
    mode: str
    metric: str
    value_m: float
    trials: int


@dataclass
class RmseCurve:
    """Rows of (count, mode, metric in {peb, rmse}, value, trials) plus per-count failure tallies."""

    rows: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def value(self, num_aps: int, mode: str, metric: str) -> float:
        for r in self.rows:
            if (r.num_aps, r.mode, r.metric) == (num_aps, mode, metric):
                return r.value_m
        raise KeyError((num_aps, mode, metric))

    def ratio(self, num_aps: int, mode: str) -> float:
        return self.value(num_aps, mode, "rmse") / self.value(num_aps, mode, "peb")


def _check_counts(ap_counts, num_aps: int):
    counts = [int(c) for c in ap_counts]
    bad = [c for c in counts if c < 1 or c > num_aps]
    if bad:
        raise ValueError(f"AP counts {bad} outside 1..{num_aps}")
    return counts


def peb_curve(config: ScenarioConfig, ap_counts=None, deployment: Deployment | None = None) -> list:
    """PEB of both modes for nested prefixes of one deployment.

    Raises SingularInformationError when any prefix has a singular FIM.
    """
    dep = generate_deployment(config) if deployment is None else deployment
    counts = _check_counts(config.positioning.ap_counts if ap_counts is None else ap_counts, dep.num_aps)
    ue = config.positioning.ue_index
    rows = []
    for k in counts:
        sub = dep.subset(range(k))
        for mode in MODES:
            rows.append(CurveRow(k, mode, "peb", peb(fim(sub, ue, config.signal, mode)).peb_m, 0))
    return rows


def _trial_deployment(config: ScenarioConfig, trial: int, base: Deployment | None) -> Deployment:
    if base is not None:
        return base
    return generate_deployment(config, seeding.rng_for(config.seed, seeding.GEOMETRY, trial))


def _run_trials(config: ScenarioConfig, mode: str, count: int, trials, base: Deployment | None):
    """Squared errors (nan on failure) and per-trial PEBs for one AP count."""
    search = SearchConfig.from_config(config)
    ue = config.positioning.ue_index
    sq = np.full(len(trials), np.nan)
    bounds = np.full(len(trials), np.nan)
    for i, t in enumerate(trials):
        sub = _trial_deployment(config, t, base).subset(range(count))
        truth = sub.ue_positions[ue]
        try:
            bounds[i] = peb(fim(sub, ue, config.signal, mode)).peb_m
            meas = simulate_measurements(sub, ue, config.signal, mode,
                                         seeding.rng_for(config.seed, seeding.MEASUREMENT, count, t))
            est = ml_estimate(meas, sub, config.signal, search)
        except (EstimationError, SingularInformationError, ValueError, np.linalg.LinAlgError):
            continue
        sq[i] = float(np.sum((est.position - truth) ** 2))
    return sq, bounds


def _chunks(n: int, size: int):
    return [list(range(i, min(i + size, n))) for i in range(0, n, size)]


def rmse_sweep(config: ScenarioConfig, mode: str, ap_counts=None, trials: int | None = None,
               jobs: int = 1, chunk: int = 25) -> RmseCurve:
    """Monte Carlo RMSE and companion PEB for each AP count.

    Trial t at count k always uses the seed path (seed, measurement, k, t),
    and squared errors are summed in trial order, so the output does not
    depend on ``jobs``. Failed trials are tallied in ``failures`` and left
    out of the RMSE.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    trials = config.positioning.trials if trials is None else int(trials)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    fixed = config.positioning.geometry == "fixed-nested"
    base = generate_deployment(config) if fixed else None
    counts = _check_counts(config.positioning.ap_counts if ap_counts is None else ap_counts, config.num_aps)

    tasks = [(config, mode, k, c, base) for k in counts for c in _chunks(trials, chunk)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_trials, *zip(*tasks)))
    else:
        results = [_run_trials(*t) for t in tasks]

    curve = RmseCurve()
    per_count = {k: ([], []) for k in counts}
    for (_, _, k, _, _), (sq, bounds) in zip(tasks, results):
        per_count[k][0].append(sq)
        per_count[k][1].append(bounds)
    for k in counts:
        sq = np.concatenate(per_count[k][0])
        ok = ~np.isnan(sq)
        curve.failures[k] = int((~ok).sum())
        if fixed:
            try:
                bound = peb(fim(base.subset(range(k)), config.positioning.ue_index, config.signal, mode)).peb_m
            except SingularInformationError:
                bound = float("inf")
        else:
            b = np.concatenate(per_count[k][1])
            bound = float(np.sqrt(np.mean(b[ok] ** 2))) if ok.any() else float("nan")
        n = int(ok.sum())
        rmse = float(np.sqrt(np.sum(sq[ok]) / n)) if n else float("nan")
        curve.rows.append(CurveRow(k, mode, "peb", bound, n))
        curve.rows.append(CurveRow(k, mode, "rmse", rmse, n))
    return curve


@dataclass(frozen=True)
class OrderingStep:
    ordering: int
    num_aps: int
    ap_added: int
    gdop: float
    peb_phase_m: float


def validate_ordering(ordering, num_aps: int) -> list:
    """Zero-based permutation check; raises ValueError for anything else."""
    order = [int(i) for i in ordering]
    if sorted(order) != list(range(num_aps)):
        raise ValueError(f"ordering {[i + 1 for i in order]} is not a permutation of 1..{num_aps}")
    return order


def ordering_sequence(config: ScenarioConfig, ordering, label: int = 1,
                      deployment: Deployment | None = None) -> list:
    """GDOP and phase-mode PEB after each sequential AP addition.

    ``ordering`` holds zero-based AP indices. Prefixes too small to fix a
    position report ``inf``.
    """
    dep = generate_deployment(config) if deployment is None else deployment
    order = validate_ordering(ordering, dep.num_aps)
    ue = config.positioning.ue_index
    steps = []
    for k in range(1, len(order) + 1):
        sub = dep.subset(order[:k])
        try:
            g = gdop(sub, ue)
            p = peb(fim(sub, ue, config.signal, "phase")).peb_m
        except SingularInformationError:
            g = p = float("inf")
        steps.append(OrderingStep(label, k, order[k - 1], g, p))
    return steps
