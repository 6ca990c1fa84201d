"""Resolvent kernel of the Rayleigh operator with traction-free surface.

For Z < Z' < 0::

    G(Z, Z') = (1 / 2 i omega^2) [ qP^{-1} psi_P^-(Z) g_P^+(Z')^T
                                   + qS^{-1} psi_S^-(Z) g_S^+(Z')^T ]

and the transposed arrangement for Z' < Z, where g^+ are the reflected
solutions built from the reflection coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .medium import MediumProfile, lame_derivatives
from .propagator import DEFAULT_TOL, jost_initial, propagate
from .riemann import SheetPoint
from .scattering import reflection_arrays

__all__ = [
    "GreensEvaluation",
    "DiagnosticsReport",
    "jost_columns",
    "reflected_solutions",
    "greens_kernel",
    "greens_matrix",
    "greens_diagnostics",
    "pole_scan",
    "locate_pole",
    "HOMOGENEOUS_JUMP",
]

# Jump of P dG/dZ from Z = Z'^- to Z'^+, fixed by the homogeneous closed
# form (see the test suite): G solves (H_0 - omega^2) G = delta I.
HOMOGENEOUS_JUMP = np.eye(2)


@dataclass
class GreensEvaluation:
    Z: float
    Zprime: float
    point: SheetPoint
    value: np.ndarray


@dataclass
class DiagnosticsReport:
    residual: float
    residual_scale: float
    jump_defect: float
    jump: np.ndarray
    continuity: float
    pole_exponent: float | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "residual_relative": self.residual / self.residual_scale if self.residual_scale else 0.0,
            "jump_defect": self.jump_defect,
            "jump": [[[float(v.real), float(v.imag)] for v in row] for row in self.jump],
            "continuity": self.continuity,
            "pole_exponent": self.pole_exponent,
            **self.details,
        }


def jost_columns(p: MediumProfile, xi, qP, qS, Z, tol=DEFAULT_TOL):
    """Jost states (psi_P^-, psi_S^-, psi_P^+, psi_S^+) at depths Z.

    Returns an array of shape (len(Z), 4, 4) for a scalar xi; depths below
    the slab use the exact plane waves.
    """
    Z = np.atleast_1d(np.asarray(Z, dtype=float))
    order = np.argsort(Z)
    Zs = Z[order]
    y0, logs = jost_initial(p, np.array([xi]), np.array([qP]), np.array([qS]))
    y0 = y0[0]
    logs = logs[0]
    out = np.empty((Z.size, 4, 4), dtype=complex)
    below = Zs <= -p.H
    qs = np.array([qP, qS, qP, qS])
    sg = np.array([-1, -1, 1, 1])
    if np.any(below):
        # exact tail: column j scales as exp(sg_j i Z q_j)
        ph = np.exp(sg[None, :] * 1j * Zs[below, None] * qs[None, :])
        out_b = y0[None, :, :] * ph[:, None, :]
        out[order[below]] = out_b
    if np.any(~below):
        ys = propagate(p, np.array(xi), y0, tol=tol, z_eval=Zs[~below])
        out[order[~below]] = ys * np.exp(logs)[None, None, :]
    return out


def _reflection(p, pt, tol):
    r = reflection_arrays(p, np.array([pt.xi]), pt.sheet, pt.rim, tol)
    return {k: (v[0] if isinstance(v, np.ndarray) and v.ndim >= 1 else v) for k, v in r.items()}


def reflected_solutions(p: MediumProfile, pt: SheetPoint, Z, tol=DEFAULT_TOL, refl=None):
    """(g_P^+, g_S^+, psi^- columns) at the depths Z.

    Each output has shape (len(Z), 4): displacement and traction components.
    """
    if refl is None:
        refl = _reflection(p, pt, tol)
    qP, qS = refl["qP"], refl["qS"]
    cols = jost_columns(p, pt.xi, qP, qS, Z, tol)
    psiPm, psiSm, psiPp, psiSp = (cols[:, :, j] for j in range(4))
    gP = psiPp + refl["R2"] * psiPm - qP * refl["R1"] * psiSm
    gS = psiSp + qS * refl["R1t"] * psiPm + refl["R2t"] * psiSm
    return gP, gS, (psiPm, psiSm)


def _assemble(p, qP, qS, gP, gS, psiPm, psiSm, Z, Zp, component=slice(0, 2)):
    """Kernel from state arrays evaluated at Z (index 0) and Z' (index 1)."""
    c = 1.0 / (2j * p.omega**2)
    if Z < Zp:
        G = (np.outer(psiPm[0][component], gP[1][:2]) / qP
             + np.outer(psiSm[0][component], gS[1][:2]) / qS)
    else:
        G = (np.outer(gP[0][component], psiPm[1][:2]) / qP
             + np.outer(gS[0][component], psiSm[1][:2]) / qS)
    return c * G


def greens_kernel(p: MediumProfile, pt: SheetPoint, Z, Zprime, tol=DEFAULT_TOL,
                  refl=None) -> GreensEvaluation:
    """Evaluate G(Z, Z'; xi) on the sheet of ``pt``."""
    Z = float(Z)
    Zprime = float(Zprime)
    if Z >= 0 or Zprime >= 0:
        raise ValueError("depths must be negative")
    if Z == Zprime:
        raise ValueError("diagonal Z = Z' is excluded")
    if refl is None:
        refl = _reflection(p, pt, tol)
    gP, gS, (psiPm, psiSm) = reflected_solutions(p, pt, [Z, Zprime], tol, refl)
    G = _assemble(p, refl["qP"], refl["qS"], gP, gS, psiPm, psiSm, Z, Zprime)
    return GreensEvaluation(Z, Zprime, pt, G)


def greens_matrix(p: MediumProfile, pt: SheetPoint, Zs, Zps, tol=DEFAULT_TOL, refl=None):
    """Kernel on a tensor grid; returns shape (len(Zs), len(Zps), 2, 2).

    Diagonal entries (Z == Z') are set to NaN.
    """
    Zs = np.atleast_1d(np.asarray(Zs, float))
    Zps = np.atleast_1d(np.asarray(Zps, float))
    if refl is None:
        refl = _reflection(p, pt, tol)
    allZ = np.concatenate([Zs, Zps])
    gP, gS, (psiPm, psiSm) = reflected_solutions(p, pt, allZ, tol, refl)
    n = Zs.size
    out = np.full((n, Zps.size, 2, 2), np.nan + 0j)
    for i in range(n):
        for j in range(Zps.size):
            if Zs[i] == Zps[j]:
                continue
            ii = [i, n + j]
            out[i, j] = _assemble(p, refl["qP"], refl["qS"], gP[ii], gS[ii], psiPm[ii],
                                  psiSm[ii], Zs[i], Zps[j])
    return out


def _dpsi(p, xi, state, Z):
    """psi' from a state: P^{-1}(v + xi N^T psi)."""
    lam, mu = lame_derivatives(p, np.array([Z]), order=0)
    lam, mu = float(lam[0, 0]), float(mu[0, 0])
    psi1, psi2, v1, v2 = state
    return np.array([(v1 + xi * mu * psi2) / mu, (v2 - xi * lam * psi1) / (lam + 2 * mu)])


def _operator_residual(p, xi, Zc, h, Gfun):
    """(P G')' + xi (N G' - (N^T G)') + (omega^2 - xi^2 M) G via 4th-order FD."""
    Zs = Zc + h * np.arange(-2, 3)
    G = np.array([Gfun(z) for z in Zs])
    d1 = (G[0] - 8 * G[1] + 8 * G[3] - G[4]) / (12 * h)
    d2 = (-G[0] + 16 * G[1] - 30 * G[2] + 16 * G[3] - G[4]) / (12 * h * h)
    lam, mu = lame_derivatives(p, np.array([Zc]), order=1)
    l0, l1 = float(lam[0, 0]), float(lam[1, 0])
    m0, m1 = float(mu[0, 0]), float(mu[1, 0])
    P = np.diag([m0, l0 + 2 * m0])
    dP = np.diag([m1, l1 + 2 * m1])
    M = np.diag([l0 + 2 * m0, m0])
    N = np.array([[0.0, -l0], [m0, 0.0]])
    dN = np.array([[0.0, -l1], [m1, 0.0]])
    G0 = G[2]
    terms = [dP @ d1, P @ d2, xi * (N @ d1), -xi * (dN.T @ G0), -xi * (N.T @ d1),
             p.omega**2 * G0, -xi**2 * (M @ G0)]
    res = sum(terms)
    scale = max(np.max(np.abs(t)) for t in terms)
    return res, scale


def pole_scan(p: MediumProfile, resonance: SheetPoint, Z, Zprime, tol=DEFAULT_TOL,
              direction=1.0, radii=None):
    """Fitted exponent of ||G|| against |xi - xi_n| along a ray into xi_n."""
    if radii is None:
        radii = np.logspace(-5, -3, 7)
    norms = []
    for t in radii:
        pt = SheetPoint(resonance.xi + t * direction, resonance.sheet, resonance.rim)
        g = greens_kernel(p, pt, Z, Zprime, tol, refl=_reflection_loose(p, pt, tol))
        norms.append(np.linalg.norm(g.value))
    slope = np.polyfit(np.log(radii), np.log(norms), 1)[0]
    return float(slope), np.asarray(radii), np.asarray(norms)


def locate_pole(p: MediumProfile, guess: SheetPoint, Z, Zprime, tol=DEFAULT_TOL, h=1e-6,
                max_iter=30, step_tol=1e-12):
    """Pole of G_11(Z, Z'; xi) near ``guess`` by Newton on 1/G_11.

    1/G_11 is analytic with a simple zero at a simple pole, so the iteration
    converges quadratically; the derivative is a central difference.
    """
    def f(xi):
        pt = SheetPoint(xi, guess.sheet, guess.rim)
        # both reflection routes lose accuracy at the pole itself
        refl = _reflection_loose(p, pt, tol, route_tol=np.inf)
        return 1.0 / greens_kernel(p, pt, Z, Zprime, tol, refl=refl).value[0, 0]

    xi = complex(guess.xi)
    for _ in range(max_iter):
        df = (f(xi + h) - f(xi - h)) / (2 * h)
        step = f(xi) / df
        xi -= step
        if abs(step) < step_tol * max(1.0, abs(xi)):
            break
    return SheetPoint(xi, guess.sheet, guess.rim)


def _reflection_loose(p, pt, tol, route_tol=1e-3):
    r = reflection_arrays(p, np.array([pt.xi]), pt.sheet, pt.rim, tol, near_tol=0.0,
                          route_tol=route_tol)
    return {k: (v[0] if isinstance(v, np.ndarray) and v.ndim >= 1 else v) for k, v in r.items()}


def greens_diagnostics(p: MediumProfile, pt: SheetPoint, grid, tol=DEFAULT_TOL,
                       resonance: SheetPoint | None = None, eps0=1e-2) -> DiagnosticsReport:
    """PDE residual, jump across the diagonal and (optionally) a pole scan.

    ``grid`` is a list of (Z, Z') pairs with |Z - Z'| >= eps0.
    """
    refl = _reflection(p, pt, tol)
    xi = pt.xi
    h = 1e-3 / max(1.0, abs(xi))
    worst = 0.0
    worst_scale = 1.0
    jumps = []
    cont = 0.0
    for Z, Zp in grid:
        if abs(Z - Zp) < eps0:
            raise ValueError("grid point too close to the diagonal")
        if max(Z, Zp) + 2 * h >= 0:
            raise ValueError("grid point too close to the surface")
        Zs = np.array([Z - 2 * h, Z - h, Z, Z + h, Z + 2 * h, Zp])
        gP, gS, (psiPm, psiSm) = reflected_solutions(p, pt, Zs, tol, refl)
        cache = {}
        for k, z in enumerate(Zs[:5]):
            ii = [k, 5]
            cache[z] = _assemble(p, refl["qP"], refl["qS"], gP[ii], gS[ii], psiPm[ii],
                                 psiSm[ii], z, Zp)
        res, scale = _operator_residual(p, xi, Z, h, lambda z: cache[z])
        r = float(np.max(np.abs(res)))
        if r / scale > worst / worst_scale:
            worst, worst_scale = r, scale
        # jump of P dG/dZ at Z = Z' from the analytic derivative of the states
        gP1, gS1, (pPm, pSm) = reflected_solutions(p, pt, [Zp], tol, refl)
        c = 1.0 / (2j * p.omega**2)
        st = {k: v[0] for k, v in (("gP", gP1), ("gS", gS1), ("pP", pPm), ("pS", pSm))}
        d = {k: _dpsi(p, xi, v, Zp) for k, v in st.items()}
        lam, mu = lame_derivatives(p, np.array([Zp]), order=0)
        P = np.diag([float(mu[0, 0]), float(lam[0, 0] + 2 * mu[0, 0])])
        below = c * (np.outer(d["pP"], st["gP"][:2]) / refl["qP"]
                     + np.outer(d["pS"], st["gS"][:2]) / refl["qS"])
        above = c * (np.outer(d["gP"], st["pP"][:2]) / refl["qP"]
                     + np.outer(d["gS"], st["pS"][:2]) / refl["qS"])
        jumps.append(P @ (above - below))
        vb = c * (np.outer(st["pP"][:2], st["gP"][:2]) / refl["qP"]
                  + np.outer(st["pS"][:2], st["gS"][:2]) / refl["qS"])
        va = c * (np.outer(st["gP"][:2], st["pP"][:2]) / refl["qP"]
                  + np.outer(st["gS"][:2], st["pS"][:2]) / refl["qS"])
        cont = max(cont, float(np.max(np.abs(va - vb)) / max(np.max(np.abs(va)), 1e-300)))
    jump = np.mean(jumps, axis=0) if jumps else np.zeros((2, 2))
    jdef = max((float(np.max(np.abs(j - HOMOGENEOUS_JUMP))) for j in jumps), default=0.0)
    exponent = None
    details = {}
    if resonance is not None and grid:
        Z, Zp = grid[0]
        exponent, radii, norms = pole_scan(p, resonance, Z, Zp, tol)
        details["pole_radii"] = radii.tolist()
        details["pole_norms"] = norms.tolist()
    return DiagnosticsReport(worst, worst_scale, jdef, jump, cont, exponent, details)
