"""
Counting zeros and the shape of the resonance set
=================================================

The product F of Delta over the four sheets is entire.  Its zero count in
|xi| < r grows like (16 H / pi) r; zeros split evenly between the half
planes.  This script counts on small circles (the full check to r = 40 is
in the acceptance suite) and runs the distribution diagnostics on a small
catalog.
"""

from pathlib import Path

from rayleigh_resonance.medium import load_profile_file
from rayleigh_resonance.resonance import (counting_function, distribution_diagnostics,
                                          resonance_search)

PROFILES = Path(__file__).resolve().parent.parent / "profiles"
bump = load_profile_file(PROFILES / "bump.toml")

# %%
tab = counting_function(bump, [4.0, 6.0, 8.0, 10.0])
print("r:", tab.radii)
print("N:", tab.counts)
print(f"slope {tab.slope_fit:.3f} vs 16H/pi = {tab.reference_slope:.3f}")
print(f"upper/lower split at r = {tab.split_radius}: {tab.n_upper}/{tab.n_lower}")

# %%
cat = resonance_search(bump, {"--": [(0.5, 3.0, -2.0, 2.0)], "+-": [(0.2, 1.0, -0.3, 0.3)]},
                       workers=1)
rep = distribution_diagnostics(cat, bump)
print("entries:", rep["n_entries"])
print("partial sums:", [round(s, 4) for s in rep["sum_condition"]["partial_sums"]])
print("sector bins:", rep["sectors"]["bins"])
