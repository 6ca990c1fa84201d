"""
From the elastic system to a matrix Schroedinger equation
=========================================================

A gauge transformation G(x) and the change of variable x = -Z turn the
Rayleigh system into -F'' + Q F = -xi^2 F.  The Jost solution of that
problem solves a Volterra equation (successive approximation), and its
boundary data recover the same boundary matrix as direct propagation.
"""

from pathlib import Path

import numpy as np

from rayleigh_resonance.boundary import boundary_matrix_and_delta
from rayleigh_resonance.markushevich import (faddeev_solve, gauge_values,
                                             jost_function_and_bridge, kernel_abc, potentials,
                                             theta_set)
from rayleigh_resonance.medium import load_profile_file
from rayleigh_resonance.riemann import SHEETS, SheetPoint

PROFILES = Path(__file__).resolve().parent.parent / "profiles"
bump = load_profile_file(PROFILES / "bump.toml")

# %%
# The gauge matrix has unit determinant.
x = np.linspace(0, bump.H, 5)
print("det G - 1:", np.linalg.det(gauge_values(bump, x)) - 1)

# %%
# The potential Q tends to the constant tail value Q0 below the slab.
pot = potentials(bump, np.array([0.2, 0.8, 1.5]))
print("|Q - Q0| at x = 0.2, 0.8, 1.5:", np.max(np.abs(pot.Q - pot.Q0), axis=(-2, -1)))

# %%
# Kernel identity A + B + C (y - x) c0 / (2 mu0) = I.
A, B, C = kernel_abc(bump, np.array([0.3]), np.array([0.7]))
print("ABC identity defect:",
      np.max(np.abs(A + B + C * (0.4 * bump.c0 / (2 * bump.mu0)) - np.eye(2))))

# %%
# Successive approximation: term norms decay factorially.
sol = faddeev_solve(bump, SheetPoint(2 + 1j, "++"))
print("iterations:", sol.iterations, " term norms:", np.array(sol.term_norms[:6]))

# %%
# The bridge reproduces the directly propagated boundary matrix on all sheets.
for s in SHEETS:
    pt = SheetPoint(0.9 + 0.6j, s)
    _, Bm = jost_function_and_bridge(bump, pt)
    Bd, _ = boundary_matrix_and_delta(bump, pt)
    print(f"sheet {s}: relative defect {np.linalg.norm(Bm.entries - Bd.entries) / np.linalg.norm(Bd.entries):.1e}")

# %%
# Large |xi|: det F_Theta / xi^3 tends to c(0) mu0 / omega^2.
for xi in (25.0, 50.0, 100.0):
    jf, _ = jost_function_and_bridge(bump, SheetPoint(xi, "++"))
    th = theta_set(bump, xi)
    print(f"|xi| = {xi:5.0f}: ratio = {(np.linalg.det(jf.FTheta) / xi**3 / th.c_at_0).real:.6f}")
