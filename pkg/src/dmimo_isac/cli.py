"""Command-line front end.

Every command that produces a CSV also writes a manifest next to it (same
path with suffix ``.manifest``). The manifest is the fully resolved
scenario in the scenario-file grammar plus ``manifest.*`` keys, so
``replay`` can regenerate the CSV and check it byte for byte.

Exit codes: 0 success, 1 replay mismatch, 2 configuration or validation
error, 3 singular geometry, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (REGIMES, ScenarioConfig, ScenarioError, config_from_values, dump_scenario, load_scenario,
                     parse_document, parse_int_list, resolve_scenario_path)
from .deployment import generate_deployment
from .positioning.fisher import MODES, SingularInformationError
from .positioning.sweep import ordering_sequence, peb_curve, rmse_sweep, validate_ordering
from .se import se_sweep

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_SINGULAR, EXIT_IO = 0, 1, 2, 3, 4

RMSE_HEADER = ("num_aps", "mode", "metric", "value_m", "trials", "seed")
SE_HEADER = ("snr_db", "regime", "se_per_ue", "realizations", "seed")
GDOP_HEADER = ("ordering", "num_aps", "ap_added", "gdop", "peb_phase_m", "seed")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def parse_orderings(text: str, num_aps: int) -> list:
    """``"1 2 3; 3 2 1"`` (1-based, ';'-separated) -> zero-based index lists."""
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        try:
            one_based = [int(v) for v in chunk.replace(",", " ").split()]
        except ValueError:
            raise ValueError(f"ordering {chunk.strip()!r} is not a list of integers") from None
        out.append(validate_ordering([i - 1 for i in one_based], num_aps))
    if not out:
        raise ValueError("no orderings given")
    return out


# ---------------------------------------------------------------------------
# commands: each returns (config actually used, csv text, summary text)

def _apply_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    top, pos, se = {}, {}, {}
    if getattr(args, "seed", None) is not None:
        top["seed"] = args.seed
    if getattr(args, "counts", None) is not None:
        pos["ap_counts"] = parse_int_list(args.counts)
    if getattr(args, "trials", None) is not None:
        pos["trials"] = args.trials
    if getattr(args, "snr_grid", None) is not None:
        se["snr_grid_db"] = tuple(float(v) for v in args.snr_grid.split(",") if v.strip())
    if getattr(args, "regimes", None) is not None:
        se["regimes"] = tuple(v.strip() for v in args.regimes.split(",") if v.strip())
    if getattr(args, "realizations", None) is not None:
        se["realizations"] = args.realizations
    if getattr(args, "sum", False):
        se["report_sum"] = True
    if pos:
        top["positioning"] = replace(config.positioning, **pos)
    if se:
        top["se"] = replace(config.se, **se)
    return replace(config, **top) if top else config


def run_peb(config: ScenarioConfig, args):
    rows = peb_curve(config)
    body = [(r.num_aps, r.mode, r.metric, r.value_m, r.trials, config.seed) for r in rows]
    lines = ["num_aps  peb_delay_m     peb_phase_m     phase/delay"]
    by = {(r.num_aps, r.mode): r.value_m for r in rows}
    for k in config.positioning.ap_counts:
        d, p = by[(k, "delay")], by[(k, "phase")]
        lines.append(f"{k:7d}  {d:<14.6g}  {p:<14.6g}  {p / d:.6g}")
    return to_csv(RMSE_HEADER, body), "\n".join(lines)


def run_rmse(config: ScenarioConfig, args):
    modes = MODES if args.mode == "both" else (args.mode,)
    body, lines = [], ["num_aps  mode   rmse_m          peb_m           rmse/peb  failed"]
    for mode in modes:
        curve = rmse_sweep(config, mode, jobs=args.jobs)
        for r in curve.rows:
            body.append((r.num_aps, r.mode, r.metric, r.value_m, r.trials, config.seed))
        for k in config.positioning.ap_counts:
            rm, pb = curve.value(k, mode, "rmse"), curve.value(k, mode, "peb")
            lines.append(f"{k:7d}  {mode:5s}  {rm:<14.6g}  {pb:<14.6g}  {rm / pb:<8.4g}  {curve.failures[k]}")
    return to_csv(RMSE_HEADER, body), "\n".join(lines)


def run_se(config: ScenarioConfig, args):
    curve = se_sweep(config, jobs=args.jobs)
    body = [(r.snr_db, r.regime, r.se, r.realizations, config.seed) for r in curve.rows]
    regs = list(config.se.regimes)
    lines = []
    if "without-isac" in regs and len(regs) > 1:
        others = [r for r in regs if r != "without-isac"]
        lines.append("gain over without-isac")
        lines.append("snr_db  " + "  ".join(f"{r:>17s}" for r in others))
        for s in curve.snr_grid_db:
            g = curve.gains(s)
            lines.append(f"{s:6g}  " + "  ".join(f"{g[r]:17.3f}" for r in others))
    else:
        lines.append("no gain table (needs without-isac and at least one other regime)")
    return to_csv(SE_HEADER, body), "\n".join(lines)


def run_gdop(config: ScenarioConfig, args):
    dep = generate_deployment(config)
    if args.orderings is None:
        orderings = [list(range(dep.num_aps))]
    else:
        orderings = parse_orderings(args.orderings, dep.num_aps)
    body, lines = [], []
    for i, order in enumerate(orderings, start=1):
        steps = ordering_sequence(config, order, label=i, deployment=dep)
        for s in steps:
            body.append((s.ordering, s.num_aps, s.ap_added + 1, s.gdop, s.peb_phase_m, config.seed))
        lines.append(f"ordering {i} ({' '.join(str(j + 1) for j in order)}): GDOP "
                     + " ".join(f"{s.gdop:.3g}" for s in steps))
    return to_csv(GDOP_HEADER, body), "\n".join(lines)


COMMANDS = {"peb": run_peb, "rmse": run_rmse, "se": run_se, "gdop": run_gdop}
# command-specific options that live outside the scenario grammar
_EXTRA_ARGS = {"rmse": ("mode",), "gdop": ("orderings",)}


def manifest_path(out: Path) -> Path:
    return out.with_suffix(".manifest")


def execute(command: str, config: ScenarioConfig, args):
    start = time.perf_counter()
    text, summary = COMMANDS[command](config, args)
    return text, summary, time.perf_counter() - start


def write_outputs(command: str, config: ScenarioConfig, args, text: str, duration: float, out: Path) -> Path:
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    extra = {"command": command, "version": __version__, "seed": config.seed}
    for name in _EXTRA_ARGS.get(command, ()):
        value = getattr(args, name)
        if value is not None:
            extra[f"arg.{name}"] = value
    extra.update({"jobs": args.jobs, "output": str(out), "csv_sha256": hashlib.sha256(text.encode()).hexdigest(),
                  "duration_s": f"{duration:.3f}"})
    mpath = manifest_path(out)
    mpath.write_text(dump_scenario(config, extra), encoding="utf-8")
    return mpath


def cmd_run(args) -> int:
    config = _apply_overrides(load_scenario(args.scenario), args)
    text, summary, duration = execute(args.command, config, args)
    out = Path(args.out) if args.out else Path(f"{args.command}.csv")
    mpath = write_outputs(args.command, config, args, text, duration, out)
    print(summary)
    print(f"wrote {out} and {mpath} ({duration:.1f} s)")
    return EXIT_OK


def cmd_validate(args) -> int:
    path = resolve_scenario_path(args.scenario)
    config = _apply_overrides(load_scenario(path), args)
    dep = generate_deployment(config)
    text = dump_scenario(config)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    print(f"# ok: {path} ({dep.num_aps} APs, {dep.num_ues} UEs, {config.dimension}D)")
    return EXIT_OK


def cmd_replay(args) -> int:
    values, manifest, lines = parse_document(Path(args.manifest).read_text(encoding="utf-8"))
    config = config_from_values(values, lines)
    command = manifest.get("command")
    if command not in COMMANDS:
        raise ScenarioError(f"manifest command {command!r} is not replayable", field="manifest.command")
    ns = argparse.Namespace(command=command, jobs=args.jobs, mode=manifest.get("arg.mode"),
                            orderings=manifest.get("arg.orderings"))
    text, _, duration = execute(command, config, ns)
    if args.out:
        write_outputs(command, config, ns, text, duration, Path(args.out))
    digest = hashlib.sha256(text.encode()).hexdigest()
    if digest == manifest.get("csv_sha256"):
        print(f"replay of {command} matches the recorded CSV ({digest[:12]})")
        return EXIT_OK
    print(f"replay of {command} differs from the recorded CSV", file=sys.stderr)
    return EXIT_MISMATCH


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario file, or a bundled name such as mmwave_positioning")
    common.add_argument("--seed", type=_u64, help="override the scenario master seed")
    common.add_argument("--out", help="output path (default: <command>.csv)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes; results do not depend on it")

    parser = argparse.ArgumentParser(prog="dmimo-isac", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("peb", parents=[common], help="position error bounds of both modes per AP count")
    p.add_argument("--counts", help="AP counts, e.g. 4..12 or 4,6,8")

    p = sub.add_parser("rmse", parents=[common], help="Monte Carlo ML RMSE with companion PEB")
    p.add_argument("--mode", choices=MODES + ("both",), default="both")
    p.add_argument("--trials", type=int)
    p.add_argument("--counts")

    p = sub.add_parser("se", parents=[common], help="uplink SE per regime over the SNR grid")
    p.add_argument("--regimes", help=f"comma-separated subset of {', '.join(REGIMES)}")
    p.add_argument("--snr-grid", dest="snr_grid", help="comma-separated SNRs in dB")
    p.add_argument("--realizations", type=int)
    p.add_argument("--sum", action="store_true", help="report the sum over UEs instead of the per-UE mean")

    p = sub.add_parser("gdop", parents=[common], help="GDOP and phase PEB along AP deployment orders")
    p.add_argument("--orderings", help="1-based AP orders separated by ';', e.g. '1 2 3 4; 4 3 2 1'")

    sub.add_parser("validate", parents=[common], help="check a scenario and print its resolved form")

    p = sub.add_parser("replay", help="re-run a manifest and compare with its recorded CSV")
    p.add_argument("manifest")
    p.add_argument("--out", help="also write the regenerated CSV and manifest here")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "jobs", 1) < 1:
            raise ScenarioError("must be >= 1", field="--jobs")
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "replay":
            return cmd_replay(args)
        return cmd_run(args)
    except SingularInformationError as exc:
        print(f"error: singular geometry: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
