"""Uplink SE per UE under the four ISAC information regimes.

Every UE's default serving set is blocked. Knowing the blockage lets the
network switch to a backup set, and knowing the position gives good CSI;
the demo shows how much each piece of information is worth.

    python demos/isac_spectral_efficiency.py [realizations]
"""

import sys

from dmimo_isac.config import load_scenario
from dmimo_isac.se import se_sweep

config = load_scenario("isac_uplink")
realizations = int(sys.argv[1]) if len(sys.argv) > 1 else 50

curve = se_sweep(config, realizations=realizations)
names = list(curve.samples)
print("SNR [dB]  " + "  ".join(f"{n:>17s}" for n in names))
for i, snr in enumerate(curve.snr_grid_db):
    print(f"{snr:8.0f}  " + "  ".join(f"{curve.curve(n)[i]:17.3f}" for n in names))

print("\nGain over the blind baseline at 10 dB:")
for name, gain in curve.gains(10.0).items():
    print(f"  {name:18s} {gain:5.2f}x")
