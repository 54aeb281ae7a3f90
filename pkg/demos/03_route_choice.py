#!/usr/bin/env python3
"""Exponential-weight route choice: how rationality shapes path shares.

Three paths with latencies 260, 260 and 300 minutes. Vehicles reweight
their path shares by exp(-mu * latency) each step; larger mu means greedier
switching. When one of the fast paths congests, mass flows to whatever is
cheapest, including the previously unattractive long path.
"""

import numpy as np

from headwayctl import logit_update

free = np.array([260.0, 260.0, 300.0])       # minutes
congested = np.array([420.0, 380.0, 300.0])  # both short paths degraded

for mu in (0.02, 0.1, 0.5):
    shares = np.full(3, 1.0 / 3.0)
    history = [shares]
    for step in range(30):
        latencies = free if step < 15 else congested
        shares = logit_update(shares, latencies, mu)
        history.append(shares)
    h = np.array(history)
    print(f"mu = {mu}")
    for step in (0, 5, 14, 16, 20, 30):
        s = h[step]
        print(f"  step {step:>2}: shares {s[0]:.3f} / {s[1]:.3f} / {s[2]:.3f}")
    print()

print("mu=0.02 barely reacts within the window; mu=0.5 floods the long path")
print("almost instantly once the short ones congest. The long path only ever")
print("sees real traffic when the short ones degrade -- the opening a headway")
print("controller exploits.")
