"""
Resonances as poles of the resolvent
====================================

Zeros of Delta are found by the argument principle on rectangles (split at
the branch cuts) and polished by Newton.  Each one is a pole of the
Green's function: |G| grows like 1/|xi - xi_n| on approach.
"""

from pathlib import Path

import numpy as np

from rayleigh_resonance.greens import greens_diagnostics, pole_scan
from rayleigh_resonance.medium import load_profile_file
from rayleigh_resonance.resonance import resonance_search
from rayleigh_resonance.riemann import SheetPoint

PROFILES = Path(__file__).resolve().parent.parent / "profiles"
bump = load_profile_file(PROFILES / "bump.toml")

# %%
# A surface wave on the physical sheet and a leaky mode on "+-".
cat = resonance_search(bump, {"++": [(0.5, 2.0, -0.5, 0.5)],
                              "+-": [(0.2, 1.0, -0.3, 0.3)]}, workers=1)
for e in cat.entries:
    print(f"{e.sheet}  xi = {e.xi:.10f}  multiplicity {e.multiplicity}  residual {e.residual:.1e}")
print("bound states:", [f"{e.xi.real:.10f}" for e in cat.bound_states])

# %%
# Pole scan along a diagonal approach: log|G| against log distance.
for e in cat.entries:
    slope, _, _ = pole_scan(bump, SheetPoint(e.xi, e.sheet), -0.7, -0.3,
                            direction=(1 + 1j) / np.sqrt(2))
    print(f"{e.sheet} pole exponent {slope:.4f}")

# %%
# Away from poles the kernel solves the PDE off the diagonal and its traction
# jumps by the identity across Z = Z'.
rep = greens_diagnostics(bump, SheetPoint(0.9 + 0.25j, "++"), [(-0.8, -0.3), (-1.4, -0.5)])
print(f"residual/scale {rep.residual / rep.residual_scale:.1e}, jump defect {rep.jump_defect:.1e}")
