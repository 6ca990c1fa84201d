"""
Media, profiles and the four-sheeted quasimomentum surface
==========================================================

A medium is a constant half space (lambda0, mu0) under a slab of depth H
whose Lame moduli vary with depth.  Profiles are TOML files; this script
loads the bundled ones, validates them, and evaluates the quasimomenta
q_P, q_S on the four sheets labelled by their sign choices.
"""

from pathlib import Path

import numpy as np

from rayleigh_resonance.medium import load_profile_file, sample_lame, validate_profile
from rayleigh_resonance.riemann import (SHEETS, Rim, SheetPoint, apply_sheet_map, gamma_bound,
                                        quasimomenta)

PROFILES = Path(__file__).resolve().parent.parent / "profiles"

# %%
# Every bundled profile passes validation: mu > 0, strong ellipticity, and a
# C^3 join to the constant tail at Z = -H.
for path in sorted(PROFILES.glob("*.toml")):
    p = load_profile_file(path)
    rep = validate_profile(p)
    print(f"{path.name:16s} H = {p.H:.1f}  passed = {rep.passed}  "
          f"mu_min = {rep.mu_min:.4f}  hash = {p.profile_hash[:12]}")

# %%
# The bump profile perturbs mu by 10% and lambda by 5% inside the slab.
bump = load_profile_file(PROFILES / "bump.toml")
Z = np.linspace(-1.5, 0.0, 7)
for z in Z:
    s = sample_lame(bump, z)
    print(f"Z = {z:5.2f}   lambda = {s.lambda_:.5f}   mu = {s.mu:.5f}   mu' = {s.dmu1:+.5f}")

# %%
# Branch points sit at +-kP and +-kS.  The physical sheet "++" has
# Im q >= 0; the other three are reached by the sheet maps w_P, w_S, w_PS.
print(f"kP = {bump.kP:.6f}, kS = {bump.kS:.6f}")
pt = SheetPoint(0.8 + 0.3j, "++")
for s in SHEETS:
    q = quasimomenta(bump, SheetPoint(pt.xi, s))
    print(f"sheet {s}:  qP = {q.qP:.6f}   qS = {q.qS:.6f}")
print("w_P maps ++ to", apply_sheet_map(pt, "wP").sheet)

# %%
# On the cut (-kP, kP) qP is real and the two rims carry opposite values.
up = quasimomenta(bump, SheetPoint(0.3, "++", Rim.UPPER))
lo = quasimomenta(bump, SheetPoint(0.3, "++", Rim.LOWER))
print("upper rim qP =", up.qP, " lower rim qP =", lo.qP)

# %%
# gamma bounds the growth of the Jost solutions across the slab.
print("gamma at 2+1j on -- :", gamma_bound(bump, SheetPoint(2 + 1j, "--")))
