"""Why the order in which APs are rolled out matters.

Two orders of the same ten APs: one starts with a tight cluster on one
side of the UE, the other spreads the first few APs around it. Both end
at the same GDOP, but the spread order gets there much sooner.

    python demos/deployment_order.py
"""

from dmimo_isac.config import load_scenario
from dmimo_isac.positioning.sweep import ordering_sequence

config = load_scenario("ap_rollout")
clustered = ordering_sequence(config, [0, 1, 2, 9, 8, 7, 6, 5, 4, 3], label=1)
spread = ordering_sequence(config, [0, 6, 3, 9, 4, 1, 7, 2, 8, 5], label=2)

print("APs   GDOP clustered   GDOP spread")
for a, b in zip(clustered, spread):
    print(f"{a.num_aps:3d}   {a.gdop:14.3f}   {b.gdop:11.3f}")
