"""
Scan time versus repetition rate
================================

How long does a 1 x 1 mm field take at 0.9 um pitch? Only the pulse
count and the laser repetition rate matter.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from parsim import plan_scan

# The slow 1 kHz source against the fast 20 kHz one.
for rate in (1_000, 20_000):
    print(plan_scan("mechanical", 1000, step_um=0.9, rep_rate_hz=rate).format_table())
    print()

# A live-view budget: a fixed number of points, irrespective of field size.
live = plan_scan("optical", 500, point_count=100_000, rep_rate_hz=20_000)
print(f"100k points at 20 kHz: {live.duration_s:.1f} s per frame, {live.frame_rate_fps:.2f} fps")

# Duration falls as 1/rate across the whole range.
rates = np.logspace(2, 5, 40)
minutes = [plan_scan("mechanical", 1000, step_um=0.9, rep_rate_hz=r).duration_s / 60 for r in rates]

fig, ax = plt.subplots(figsize=(5, 3.5))
ax.loglog(rates, minutes)
ax.axvline(1_000, ls=":", c="grey")
ax.axvline(20_000, ls=":", c="grey")
ax.set_xlabel("repetition rate (Hz)")
ax.set_ylabel("minutes per wavelength")
ax.set_title("1 x 1 mm at 0.9 um pitch")
fig.tight_layout()
fig.savefig("throughput.png", dpi=120)
