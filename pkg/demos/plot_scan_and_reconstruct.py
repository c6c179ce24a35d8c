"""
From galvo scan to amplitude grid
=================================

Simulate a jittered optical scan of a synthetic tissue section, pull a
modulation amplitude out of every trace and grid the scattered points.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from parsim import (
    PhantomSpec,
    default_spectra,
    extract_envelopes,
    generate_phantom,
    plan_scan,
    reconstruct,
    simulate_dataset,
)

phantom = generate_phantom(PhantomSpec(width_um=100, height_um=100, nucleus_count=30, seed=1))
plan = plan_scan("optical", (phantom.width_um, phantom.height_um), step_um=0.9, wavelengths_nm=(250,))
print(plan.format_table())

# %%
# Every record holds a digitized trace. Noise is keyed on the pulse index,
# so the same seed always reproduces the same dataset.
records = simulate_dataset(phantom, plan, default_spectra(), noise_std=50.0, seed=1)
cx, cy, _ = phantom.nuclei[0]
nearest = min(records, key=lambda r: (r.x_um - cx) ** 2 + (r.y_um - cy) ** 2)
trace = nearest.trace
env = extract_envelopes(trace)

# %%
# Nearest-neighbour fitting onto the plan's lattice, then gap filling.
grid = reconstruct(records, plan)[250.0]

fig, axes = plt.subplots(1, 3, figsize=(12, 4))
axes[0].imshow(phantom.dna_density, origin="lower", cmap="gray",
               extent=(0, phantom.width_um, 0, phantom.height_um))
axes[0].set_title("DNA density")

t = np.arange(len(trace))
axes[1].plot(t, trace.samples, lw=0.8, label="trace")
axes[1].plot(t, env.upper, lw=0.8, label="upper")
axes[1].plot(t, env.lower, lw=0.8, label="lower")
axes[1].axvspan(env.window_start, env.window_end, alpha=0.15)
axes[1].legend(fontsize=8)
axes[1].set_title("trace over a nucleus")

xs, ys = grid.spec.node_coordinates()
axes[2].imshow(grid.values, origin="lower", cmap="magma", extent=(xs[0], xs[-1], ys[0], ys[-1]))
axes[2].set_title("250 nm amplitude")
fig.tight_layout()
fig.savefig("scan_and_reconstruct.png", dpi=120)
