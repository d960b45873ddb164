"""Time-coherent vs phase-coherent positioning as APs are added.

Prints the position error bound of both modes, then runs the ML
estimators to show where carrier-phase ambiguities stop dominating.

    python demos/positioning_accuracy.py [trials]
"""

import sys

from dmimo_isac.config import load_scenario
from dmimo_isac.positioning.sweep import peb_curve, rmse_sweep

config = load_scenario("mmwave_positioning")
trials = int(sys.argv[1]) if len(sys.argv) > 1 else 40

# The bounds alone: phase-mode PEB sits a constant factor below delay-mode
# PEB, the factor being B / (sqrt(12) f_c).
bounds = {(r.num_aps, r.mode): r.value_m for r in peb_curve(config)}
print("APs   PEB delay [m]   PEB phase [m]   ratio")
for k in config.positioning.ap_counts:
    d, p = bounds[k, "delay"], bounds[k, "phase"]
    print(f"{k:3d}   {d:13.4f}   {p:13.3e}   {p / d:.4e}")

# The estimators: delay ML tracks its bound everywhere, while phase ML
# only does so once enough APs pin down the integer wavelength cycles.
print(f"\nMonte Carlo RMSE / PEB over {trials} trials per count")
delay = rmse_sweep(config, "delay", trials=trials)
phase = rmse_sweep(config, "phase", trials=trials)
print("APs   delay    phase")
for k in config.positioning.ap_counts:
    print(f"{k:3d}   {delay.ratio(k, 'delay'):6.3f}   {phase.ratio(k, 'phase'):10.3g}")
