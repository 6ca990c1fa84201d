"""
The Rayleigh determinant and its identities
===========================================

Delta(xi) is the determinant of the 2x2 boundary matrix built from the
outgoing Jost solutions and the traction functionals at the free surface.
Its zeros on the physical sheet are the surface-wave (bound-state)
wavenumbers; on the other sheets they are resonances.
"""

from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from rayleigh_resonance.boundary import (boundary_identity_suite, delta_direct,
                                         entire_octet_and_determinants)
from rayleigh_resonance.medium import homogeneous_profile, load_profile_file
from rayleigh_resonance.riemann import SHEETS, sample_points, sheet_quasimomenta

PROFILES = Path(__file__).resolve().parent.parent / "profiles"

# %%
# For a homogeneous half space Delta has the closed form
# i mu0^2 ((omega^2/mu0 - 2 xi^2)^2 + 4 qP qS xi^2).
p0 = homogeneous_profile(omega=1.0, H=0.0, lambda0=1.0, mu0=1.0)
xi = np.array([0.4 + 0.3j, 1.5 - 0.2j, -2.0 + 1.0j])
for s in SHEETS:
    qP, qS = sheet_quasimomenta(p0, xi, s)
    closed = 1j * ((1 - 2 * xi**2) ** 2 + 4 * qP * qS * xi**2)
    err = np.max(np.abs(delta_direct(p0, xi, s) - closed) / np.abs(closed))
    print(f"sheet {s}: max relative deviation from closed form {err:.2e}")

# %%
# The Rayleigh root of a Poisson solid: Delta vanishes on the real axis just
# beyond kS = 1.  The phase speed ratio c_R / c_S is the textbook 0.9194.
xR = brentq(lambda x: delta_direct(p0, np.array([x]), "++")[0].imag, 1.0 + 1e-9, 1.3)
print(f"xi_R = {xR:.13f}   c_R/c_S = {1 / xR:.5f}")

# %%
# The eight entire functions behind Delta.  Their 2x2 minors d1..d4 give
# Delta on every sheet through the signs of qP and qS.
bump = load_profile_file(PROFILES / "bump.toml")
octet, dets = entire_octet_and_determinants(bump, 0.7 + 0.2j)
print("d1..d4 at 0.7+0.2i:", np.round([dets.d1, dets.d2, dets.d3, dets.d4], 6))

# %%
# The identity suite checks the algebraic relations between the sheets and
# the reconstruction of Delta from the octet, at random points on each sheet.
rep = boundary_identity_suite(bump, sample_points(bump, 50, np.random.default_rng(0)))
for name, d in rep.defects.items():
    print(f"{name:28s} {d:.2e}")
print("passed:", rep.passed)
