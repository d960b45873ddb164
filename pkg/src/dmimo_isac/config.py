"""Scenario configuration: typed records, the ``key = value`` file grammar,
loading with validation, and a canonical dump.

File grammar (UTF-8)::

    # comment
    area_side_m = 1000
    signal.carrier_hz = 28e9
    se.snr_grid_db = -10, -5, 0
    positioning.ap_counts = 4..12
    deployment.ap_positions = 0,0; 10,0; 0,10

Keys are flat, sections are dotted prefixes. Unknown keys are rejected so
typos cannot silently fall back to defaults. Keys under ``manifest.`` are
reserved for run manifests and are passed through untouched.
"""

from __future__ import annotations

import math
from dataclasses import MISSING, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

DEPLOYMENT_KINDS = ("uniform-square", "circle", "explicit-list")
BLOCKAGE_KINDS = ("none", "block-default-serving-set", "random-links")
GEOMETRY_POLICIES = ("fixed-nested", "redraw-nested")
REGIMES = ("with-isac", "with-localization", "with-sensing", "without-isac")


class ScenarioError(ValueError):
    """Invalid scenario content. ``field`` and ``line`` locate the problem."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


def _check(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise ScenarioError(message, field=field_name)


@dataclass(frozen=True)
class SignalModel:
    """Narrowband-per-subcarrier OFDM signal and power-law link budget.

    ``ref_snr_db`` is the SNR of an unshadowed, unblocked link at
    ``ref_distance_m``; path gain falls as ``(d0/d)**pathloss_exponent``.
    """

    carrier_hz: float
    bandwidth_hz: float
    num_subcarriers: int = 64
    ref_snr_db: float = 20.0
    ref_distance_m: float = 1.0
    pathloss_exponent: float = 2.0
    speed_of_light: float = SPEED_OF_LIGHT

    def __post_init__(self):
        _check(self.bandwidth_hz > 0, "signal.bandwidth_hz", "must be > 0")
        _check(self.carrier_hz > self.bandwidth_hz, "signal.carrier_hz", "must exceed the bandwidth")
        _check(self.num_subcarriers >= 2, "signal.num_subcarriers", "must be >= 2")
        _check(self.ref_distance_m > 0, "signal.ref_distance_m", "must be > 0")
        _check(self.pathloss_exponent >= 0, "signal.pathloss_exponent", "must be >= 0")
        _check(self.speed_of_light > 0, "signal.speed_of_light", "must be > 0")

    @property
    def wavelength_m(self) -> float:
        return self.speed_of_light / self.carrier_hz

    @property
    def rms_bandwidth_hz(self) -> float:
        """Flat-spectrum RMS bandwidth B / sqrt(12)."""
        return self.bandwidth_hz / math.sqrt(12.0)

    @property
    def ref_snr(self) -> float:
        return 10.0 ** (self.ref_snr_db / 10.0)

    def subcarrier_offsets(self) -> np.ndarray:
        """Baseband offsets f_n, equally spaced across the band and centred on zero."""
        n = np.arange(self.num_subcarriers)
        return (n - (self.num_subcarriers - 1) / 2.0) * (self.bandwidth_hz / self.num_subcarriers)


@dataclass(frozen=True)
class ChannelParams:
    rician_k_db: float = 10.0
    # K on blocked links; -inf dB means K = 0 (no specular component)
    blocked_rician_k_db: float = -math.inf
    shadow_sigma_db: float = 4.0

    def __post_init__(self):
        _check(self.shadow_sigma_db >= 0, "channel.shadow_sigma_db", "must be >= 0")
        _check(not math.isnan(self.rician_k_db), "channel.rician_k_db", "must be a number")
        _check(not math.isnan(self.blocked_rician_k_db), "channel.blocked_rician_k_db", "must be a number")


@dataclass(frozen=True)
class BlockageSpec:
    kind: str = "none"
    probability: float = 0.0
    penalty_db: float = 25.0

    def __post_init__(self):
        _check(self.kind in BLOCKAGE_KINDS, "blockage.kind", f"must be one of {BLOCKAGE_KINDS}")
        _check(0.0 <= self.probability <= 1.0, "blockage.probability", "must lie in [0, 1]")
        _check(self.penalty_db >= 0.0, "channel.blockage_penalty_db", "must be >= 0 dB")


@dataclass(frozen=True)
class PositioningParams:
    geometry: str = "fixed-nested"
    ap_counts: tuple = tuple(range(4, 13))
    trials: int = 500
    ue_index: int = 0
    gate_sigma: float = 4.5
    delay_grid_m: float = 1.0
    max_iterations: int = 50
    step_tol_m: float = 1e-9

    def __post_init__(self):
        _check(self.geometry in GEOMETRY_POLICIES, "positioning.geometry", f"must be one of {GEOMETRY_POLICIES}")
        _check(len(self.ap_counts) > 0 and all(c >= 1 for c in self.ap_counts),
               "positioning.ap_counts", "must be a non-empty list of counts >= 1")
        _check(self.trials >= 1, "positioning.trials", "must be >= 1")
        _check(self.ue_index >= 0, "positioning.ue_index", "must be >= 0")
        _check(self.gate_sigma > 0, "positioning.gate_sigma", "must be > 0")
        _check(self.delay_grid_m > 0, "positioning.delay_grid_m", "must be > 0")
        _check(self.max_iterations >= 1, "positioning.max_iterations", "must be >= 1")
        _check(self.step_tol_m > 0, "positioning.step_tol_m", "must be > 0")


@dataclass(frozen=True)
class SeParams:
    snr_grid_db: tuple = tuple(float(s) for s in range(-10, 31, 5))
    realizations: int = 200
    regimes: tuple = REGIMES
    report_sum: bool = False

    def __post_init__(self):
        _check(len(self.snr_grid_db) > 0, "se.snr_grid_db", "must not be empty")
        _check(self.realizations >= 1, "se.realizations", "must be >= 1")
        for r in self.regimes:
            _check(r in REGIMES, "se.regimes", f"unknown regime {r!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    area_side_m: float
    num_aps: int
    num_ues: int
    seed: int
    signal: SignalModel
    antennas_per_ap: int = 1
    deployment_kind: str = "uniform-square"
    cluster_size_L: int | None = None  # default min(5, num_aps)
    dimension: int = 2
    ap_positions: tuple | None = None
    ue_positions: tuple | None = None
    allow_outside: bool = False
    channel: ChannelParams = field(default_factory=ChannelParams)
    blockage: BlockageSpec = field(default_factory=BlockageSpec)
    positioning: PositioningParams = field(default_factory=PositioningParams)
    se: SeParams = field(default_factory=SeParams)

    def __post_init__(self):
        _check(self.area_side_m > 0, "area_side_m", "must be > 0")
        _check(self.num_aps >= 1, "num_aps", "must be >= 1")
        _check(self.num_ues >= 1, "num_ues", "must be >= 1")
        _check(0 <= self.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
        _check(self.antennas_per_ap >= 1, "antennas_per_ap", "must be >= 1")
        _check(self.deployment_kind in DEPLOYMENT_KINDS, "deployment_kind", f"must be one of {DEPLOYMENT_KINDS}")
        if self.cluster_size_L is None:
            object.__setattr__(self, "cluster_size_L", min(5, self.num_aps))
        _check(1 <= self.cluster_size_L <= self.num_aps, "cluster_size_L", "must be in 1..num_aps")
        _check(self.dimension in (2, 3), "deployment.dimension", "must be 2 or 3")
        if self.deployment_kind == "explicit-list":
            _check(self.ap_positions is not None and len(self.ap_positions) == self.num_aps,
                   "deployment.ap_positions", f"explicit-list needs exactly num_aps = {self.num_aps} coordinates")
            _check(self.ue_positions is not None and len(self.ue_positions) == self.num_ues,
                   "deployment.ue_positions", f"explicit-list needs exactly num_ues = {self.num_ues} coordinates")
            for name, pts in (("deployment.ap_positions", self.ap_positions),
                              ("deployment.ue_positions", self.ue_positions)):
                _check(all(len(p) == self.dimension for p in pts), name,
                       f"every coordinate needs {self.dimension} components")
        _check(self.positioning.ue_index < self.num_ues, "positioning.ue_index", "must index an existing UE")

    def with_overrides(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# schema: file key -> (record, attribute, value kind)

_SCHEMA = {
    "area_side_m": (None, "area_side_m", "float"),
    "num_aps": (None, "num_aps", "int"),
    "num_ues": (None, "num_ues", "int"),
    "seed": (None, "seed", "int"),
    "antennas_per_ap": (None, "antennas_per_ap", "int"),
    "deployment_kind": (None, "deployment_kind", "str"),
    "cluster_size_L": (None, "cluster_size_L", "int"),
    "deployment.dimension": (None, "dimension", "int"),
    "deployment.ap_positions": (None, "ap_positions", "points"),
    "deployment.ue_positions": (None, "ue_positions", "points"),
    "deployment.allow_outside": (None, "allow_outside", "bool"),
    "signal.carrier_hz": ("signal", "carrier_hz", "float"),
    "signal.bandwidth_hz": ("signal", "bandwidth_hz", "float"),
    "signal.num_subcarriers": ("signal", "num_subcarriers", "int"),
    "signal.ref_snr_db": ("signal", "ref_snr_db", "float"),
    "signal.ref_distance_m": ("signal", "ref_distance_m", "float"),
    "signal.pathloss_exponent": ("signal", "pathloss_exponent", "float"),
    "signal.speed_of_light": ("signal", "speed_of_light", "float"),
    "channel.rician_k_db": ("channel", "rician_k_db", "float"),
    "channel.blocked_rician_k_db": ("channel", "blocked_rician_k_db", "float"),
    "channel.shadow_sigma_db": ("channel", "shadow_sigma_db", "float"),
    "channel.blockage_penalty_db": ("blockage", "penalty_db", "float"),
    "blockage.kind": ("blockage", "kind", "str"),
    "blockage.probability": ("blockage", "probability", "float"),
    "positioning.geometry": ("positioning", "geometry", "str"),
    "positioning.ap_counts": ("positioning", "ap_counts", "ints"),
    "positioning.trials": ("positioning", "trials", "int"),
    "positioning.ue_index": ("positioning", "ue_index", "int"),
    "positioning.gate_sigma": ("positioning", "gate_sigma", "float"),
    "positioning.delay_grid_m": ("positioning", "delay_grid_m", "float"),
    "positioning.max_iterations": ("positioning", "max_iterations", "int"),
    "positioning.step_tol_m": ("positioning", "step_tol_m", "float"),
    "se.snr_grid_db": ("se", "snr_grid_db", "floats"),
    "se.realizations": ("se", "realizations", "int"),
    "se.regimes": ("se", "regimes", "strs"),
    "se.report_sum": ("se", "report_sum", "bool"),
}

REQUIRED_KEYS = ("area_side_m", "num_aps", "num_ues", "seed", "signal.carrier_hz", "signal.bandwidth_hz")

_RECORDS = {
    "signal": SignalModel,
    "channel": ChannelParams,
    "blockage": BlockageSpec,
    "positioning": PositioningParams,
    "se": SeParams,
}


def parse_int_list(text: str) -> tuple:
    """Parse ``"4..12"``, ``"4,6,8"`` or a mix such as ``"4..6, 10"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("empty list")
    return tuple(out)


def _parse_value(kind: str, text: str) -> Any:
    text = text.strip()
    if kind == "float":
        return float(text)
    if kind == "int":
        value = float(text) if ("e" in text.lower() and not text.lower().startswith("0x")) else None
        if value is not None:
            if value != int(value):
                raise ValueError(f"{text!r} is not an integer")
            return int(value)
        return int(text, 0)
    if kind == "str":
        if not text:
            raise ValueError("empty string")
        return text
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"{text!r} is not a boolean")
    if kind == "floats":
        vals = tuple(float(v) for v in text.split(",") if v.strip())
        if not vals:
            raise ValueError("empty list")
        return vals
    if kind == "ints":
        return parse_int_list(text)
    if kind == "strs":
        vals = tuple(v.strip() for v in text.split(",") if v.strip())
        if not vals:
            raise ValueError("empty list")
        return vals
    if kind == "points":
        pts = []
        for chunk in text.split(";"):
            if chunk.strip():
                pts.append(tuple(float(v) for v in chunk.split(",")))
        if not pts:
            raise ValueError("empty coordinate list")
        return tuple(pts)
    raise AssertionError(kind)


def parse_document(text: str) -> tuple[dict, dict, dict]:
    """Split a ``key = value`` document into (scenario values, manifest values, key lines).

    Raises ScenarioError with the offending line number on malformed lines,
    duplicate keys, unknown keys and unparseable values.
    """
    values: dict = {}
    manifest: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ScenarioError("missing key", line=lineno)
        if key in lines:
            raise ScenarioError(f"duplicate key (first on line {lines[key]})", field=key, line=lineno)
        lines[key] = lineno
        if key.startswith("manifest."):
            manifest[key[len("manifest."):]] = value
            continue
        if key not in _SCHEMA:
            raise ScenarioError("unknown key", field=key, line=lineno)
        try:
            values[key] = _parse_value(_SCHEMA[key][2], value)
        except ValueError as exc:
            raise ScenarioError(f"cannot parse value: {exc}", field=key, line=lineno) from None
    return values, manifest, lines


def config_from_values(values: dict, lines: dict | None = None) -> ScenarioConfig:
    lines = lines or {}
    for key in REQUIRED_KEYS:
        if key not in values:
            raise ScenarioError("required key missing", field=key)
    top: dict = {}
    sections: dict = {name: {} for name in _RECORDS}
    for key, value in values.items():
        record, attr, _ = _SCHEMA[key]
        (top if record is None else sections[record])[attr] = value
    try:
        built = {name: cls(**sections[name]) for name, cls in _RECORDS.items()}
        return ScenarioConfig(**top, **built)
    except ScenarioError as exc:
        # attach the line of the offending key when it came from a file
        if exc.field is not None and exc.line is None and exc.field in lines:
            raise ScenarioError(str(exc).split(": ", 1)[-1], field=exc.field, line=lines[exc.field]) from None
        raise


def parse_scenario(text: str) -> ScenarioConfig:
    values, _, lines = parse_document(text)
    return config_from_values(values, lines)


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file. Bare names such as ``mmwave_positioning`` resolve
    to the reproduction files bundled with the package."""
    return parse_scenario(resolve_scenario_path(path).read_text(encoding="utf-8"))


def bundled_scenarios() -> dict:
    here = Path(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(here.glob("*.scenario"))}


def resolve_scenario_path(path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    if p.stem in bundled and (p.suffix in ("", ".scenario")):
        return bundled[p.stem]
    raise FileNotFoundError(f"scenario file not found: {path}")


def _format_value(kind: str, value: Any) -> str:
    if kind == "float":
        return repr(float(value))
    if kind == "int":
        return str(int(value))
    if kind == "str":
        return value
    if kind == "bool":
        return "true" if value else "false"
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "ints":
        return ", ".join(str(int(v)) for v in value)
    if kind == "strs":
        return ", ".join(value)
    if kind == "points":
        return "; ".join(",".join(repr(float(c)) for c in p) for p in value)
    raise AssertionError(kind)


def config_values(config: ScenarioConfig) -> dict:
    """Flatten a config to ``{file key: value}``, omitting unset optionals."""
    out = {}
    for key, (record, attr, _) in _SCHEMA.items():
        src = config if record is None else getattr(config, record)
        value = getattr(src, attr)
        if value is None:
            continue
        out[key] = value
    return out


def dump_scenario(config: ScenarioConfig, extra: dict | None = None) -> str:
    """Canonical text form; ``parse_scenario(dump_scenario(c)) == c``."""
    lines = []
    for key, value in config_values(config).items():
        lines.append(f"{key} = {_format_value(_SCHEMA[key][2], value)}")
    for key, value in (extra or {}).items():
        lines.append(f"manifest.{key} = {value}")
    return "\n".join(lines) + "\n"


def default_values() -> dict:
    """Documented defaults of every optional key."""
    out = {}
    for key, (record, attr, _) in _SCHEMA.items():
        cls = ScenarioConfig if record is None else _RECORDS[record]
        for f in fields(cls):
            if f.name == attr and f.default is not MISSING:
                out[key] = f.default
    return out
