"""
Reflection coefficients and energy conservation
===============================================

Below the slab the field is an incoming wave plus reflected P and S waves.
After flux normalisation the reflection matrix is unitary where both waves
propagate (|xi| < kP), and the S-to-S coefficient has modulus one where
only S propagates (kP < |xi| < kS).
"""

from pathlib import Path

import numpy as np

from rayleigh_resonance.cli import scattering_samples
from rayleigh_resonance.medium import load_profile_file
from rayleigh_resonance.riemann import Rim, SheetPoint
from rayleigh_resonance.scattering import (flux_normalize, reflection_matrix,
                                           scattering_identity_suite)

PROFILES = Path(__file__).resolve().parent.parent / "profiles"
bump = load_profile_file(PROFILES / "bump.toml")

# %%
for x in (0.1, 0.4, 0.55):
    r = reflection_matrix(bump, SheetPoint(x, "++", Rim.UPPER))
    U = flux_normalize(r).entries
    print(f"xi = {x:.2f}  |R2| = {abs(r.R2):.6f}  |R2t| = {abs(r.R2t):.6f}  "
          f"||U U* - I|| = {np.max(np.abs(U @ U.conj().T - np.eye(2))):.1e}")

# %%
# In the band only the S wave carries energy away.
for x in (0.7, 0.9):
    r = reflection_matrix(bump, SheetPoint(x, "++", Rim.UPPER))
    print(f"xi = {x:.2f}  |R2t| = {abs(r.R2t):.15f}")

# %%
cut, band = scattering_samples(bump, 50, 50, seed=0)
rep = scattering_identity_suite(bump, cut, band)
for name, d in rep.defects.items():
    print(f"{name:16s} {d:.2e}")
