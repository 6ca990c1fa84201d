"""Integration of the Rayleigh ODE through the slab.

The second-order system is reduced to first order with the traction vector
v = P psi' - xi N^T psi as the second half of the state, so a state is the
4-vector (psi1, psi2, v1, v2).  With P = diag(mu, lambda + 2 mu),
M = diag(lambda + 2 mu, mu) and N = [[0, -lambda], [mu, 0]]::

    psi' = P^{-1} (v + xi N^T psi)
    v'   = -xi N psi' - (omega^2 I - xi^2 M) psi

Everything here is batched: arrays of states with shape (..., 4, k) are
advanced together with shared step control.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .medium import MediumProfile
from .riemann import SheetPoint, quasimomenta

__all__ = [
    "IntegrationError",
    "DisplacementTractionState",
    "SurfaceBasis",
    "dormand_prince",
    "rayleigh_rhs",
    "propagate",
    "jost_initial",
    "entire_initial",
    "jost_surface",
    "entire_surface",
    "jost_basis_surface",
    "entire_basis_surface",
    "wronskian",
    "sinc_q",
]

DEFAULT_TOL = 1e-11


class IntegrationError(RuntimeError):
    """Step-size underflow or a non-finite state during integration."""


@dataclass(frozen=True)
class DisplacementTractionState:
    psi1: complex
    psi2: complex
    v1: complex
    v2: complex

    def to_array(self):
        return np.array([self.psi1, self.psi2, self.v1, self.v2], dtype=complex)

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=complex).reshape(4)
        return cls(*(complex(x) for x in a))


@dataclass
class SurfaceBasis:
    """Four states at Z = 0^-, stored as the columns of a (4, 4) array.

    For ``kind == "jost"`` the columns are psi_P^-, psi_S^-, psi_P^+, psi_S^+
    and ``point`` is a SheetPoint; for ``kind == "entire"`` they are
    theta_P, phi_P, theta_S, phi_S and ``point`` is the complex xi.
    ``log_scale[j]`` is zero when the column is stored unscaled; otherwise the
    true state is ``exp(log_scale[j]) * states[:, j]``.
    """

    kind: str
    states: np.ndarray
    point: object
    log_scale: np.ndarray = field(default_factory=lambda: np.zeros(4, complex))

    def state(self, j):
        return DisplacementTractionState.from_array(self.states[:, j])


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def dormand_prince(rhs, y0, t0, t_out, tol=DEFAULT_TOL, breakpoints=(), h_floor=None,
                   scale_axis=None, h0=None, max_steps=200000):
    """Adaptive embedded Runge-Kutta 5(4) for array-valued linear systems.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y)`` returning dy/dt with the shape of ``y``.
    y0 : ndarray
        Initial state at ``t0`` (any shape, complex or real).
    t_out : sequence of float
        Output abscissae, increasing and >= t0.
    tol : float
        Relative tolerance per step.
    breakpoints : sequence of float
        Points that are always stepped onto (kinks of the coefficients).
    scale_axis : int or tuple, optional
        Axes over which the magnitude reference of the error norm is pooled.
        Pooling over the component axis of a solution column gives an error
        relative to the column size rather than to each entry.
    h_floor : float, optional
        Minimal admissible step; defaults to 1e-12 times the span.

    Returns
    -------
    list of ndarray
        States at each entry of ``t_out``.
    """
    t_out = [float(t) for t in np.atleast_1d(t_out)]
    if any(b < a for a, b in zip(t_out, t_out[1:])) or (t_out and t_out[0] < t0):
        raise ValueError("t_out must be nondecreasing and >= t0")
    y = np.array(y0, copy=True)
    t = float(t0)
    span = (t_out[-1] - t0) if t_out else 0.0
    if h_floor is None:
        h_floor = 1e-12 * max(span, 1e-300)
    stops = sorted(set(t_out) | {float(b) for b in breakpoints if t0 < b < (t_out[-1] if t_out else t0)})
    out = {}
    if h0 is None:
        f0 = rhs(t, y)
        ymag = np.max(np.abs(y)) or 1.0
        fmag = np.max(np.abs(f0)) or 1.0
        h = min(span, 0.05 * ymag / fmag) if span > 0 else 0.0
    else:
        h = h0
        f0 = None
    k1 = f0
    steps = 0
    for stop in stops:
        while t < stop:
            h = min(h, stop - t)
            land = (stop - t) - h <= 1e-14 * max(1.0, abs(stop))
            if land:
                h = stop - t
            if k1 is None:
                k1 = rhs(t, y)
            ks = [k1]
            for i in range(1, 7):
                yi = y + h * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
                ks.append(rhs(t + _C[i] * h, yi))
            y_new = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
            err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
            mag = np.maximum(np.abs(y), np.abs(y_new))
            if scale_axis is not None:
                mag = np.max(mag, axis=scale_axis, keepdims=True)
            ratio = float(np.max(np.abs(err) / (tol * mag + 1e-300)))
            if not np.isfinite(ratio):
                raise IntegrationError("non-finite state during integration")
            steps += 1
            if steps > max_steps:
                raise IntegrationError("maximum number of steps exceeded")
            if ratio <= 1.0:
                t = stop if land else t + h
                y = y_new
                k1 = ks[6]
                fac = 5.0 if ratio == 0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
                h_next = h * fac
                h = max(h_next, h) if land else h_next
            else:
                h *= max(0.1, 0.9 * ratio ** -0.25)
                if h < h_floor:
                    raise IntegrationError(f"step-size underflow at t = {t:.6g}")
        if stop in t_out:
            out[stop] = y.copy()
    return [out[t] if t in out else np.array(y0, copy=True) for t in t_out]


def rayleigh_rhs(p: MediumProfile, xi):
    """Right-hand side of the first-order Rayleigh system for a batch.

    ``xi`` has shape ``batch``; states have shape ``batch + (4, k)``.
    """
    xi = np.asarray(xi, dtype=complex)[..., None]
    w2 = p.omega**2
    cache = {}

    def moduli(Z):
        val = cache.get(Z)
        if val is None:
            if Z > 0:
                raise ValueError("depth Z must be <= 0")
            val = p.slab.values(Z) if Z > -p.H else (p.lambda0, p.mu0)
            if len(cache) > 64:
                cache.clear()
            cache[Z] = val
        return val

    def f(Z, y):
        lam, mu = moduli(Z)
        sig = lam + 2 * mu
        psi1, psi2, v1, v2 = y[..., 0, :], y[..., 1, :], y[..., 2, :], y[..., 3, :]
        d1 = (v1 + xi * mu * psi2) / mu
        d2 = (v2 - xi * lam * psi1) / sig
        dv1 = xi * lam * d2 - (w2 - xi * xi * sig) * psi1
        dv2 = -xi * mu * d1 - (w2 - xi * xi * mu) * psi2
        return np.stack([d1, d2, dv1, dv2], axis=-2)

    return f


def propagate(p: MediumProfile, xi, initial, tol=DEFAULT_TOL, z_eval=None):
    """Advance states from Z = -H to the surface (or to ``z_eval``).

    Parameters
    ----------
    xi : complex or ndarray
        Wavenumbers, shape ``batch``.
    initial : ndarray or list of DisplacementTractionState
        States at Z = -H, shape ``batch + (4, k)``.
    z_eval : sequence of float, optional
        Increasing depths in [-H, 0].  When omitted the surface value is
        returned; otherwise an array with a leading axis over ``z_eval``.
    """
    if not (1e-14 <= tol <= 1e-4):
        raise ValueError("tol must lie in [1e-14, 1e-4]")
    if isinstance(initial, (list, tuple)) and initial and isinstance(initial[0], DisplacementTractionState):
        initial = np.stack([s.to_array() for s in initial], axis=-1)
    y0 = np.asarray(initial, dtype=complex)
    zs = [0.0] if z_eval is None else [float(z) for z in np.atleast_1d(z_eval)]
    if any(z > 0 or z < -p.H - 1e-15 for z in zs):
        raise ValueError("evaluation depths must lie in [-H, 0]")
    if p.H == 0.0:
        res = [y0.copy() for _ in zs]
    else:
        f = rayleigh_rhs(p, xi)
        res = dormand_prince(f, y0, -p.H, zs, tol=tol, breakpoints=p.breakpoints,
                             h_floor=1e-12 * p.H, scale_axis=-2)
    if z_eval is None:
        return res[0]
    return np.stack(res, axis=0)


def sinc_q(z, q):
    """sin(z q)/q, entire in q^2; Taylor series for small |z q|."""
    z = np.asarray(z, dtype=complex)
    q = np.asarray(q, dtype=complex)
    zq = z * q
    small = np.abs(zq) < 1e-3
    safe_q = np.where(small, 1.0, q)
    direct = np.sin(zq) / safe_q
    zq2 = zq * zq
    series = z * (1 - zq2 / 6 * (1 - zq2 / 20 * (1 - zq2 / 42)))
    return np.where(small, series, direct)


def _traction(lam, mu, xi, psi, dpsi):
    """Traction v = P psi' - xi N^T psi from displacement and derivative."""
    v1 = mu * dpsi[0] - xi * mu * psi[1]
    v2 = (lam + 2 * mu) * dpsi[1] + xi * lam * psi[0]
    return v1, v2


def _stack_state(psi, v):
    return np.stack([psi[0], psi[1], v[0], v[1]], axis=-1)


def jost_initial(p: MediumProfile, xi, qP, qS):
    """Jost states at Z = -H with the exponential factor stripped.

    Returns ``(states, log_scale)`` where ``states`` has shape
    ``batch + (4, 4)`` (columns psi_P^-, psi_S^-, psi_P^+, psi_S^+) and the
    true initial column j equals ``exp(log_scale[..., j]) * states[..., :, j]``.
    """
    xi = np.asarray(xi, dtype=complex)
    qP = np.asarray(qP, dtype=complex)
    qS = np.asarray(qS, dtype=complex)
    lam, mu = p.lambda0, p.mu0
    cols = []
    logs = []
    for sgn, kind in ((-1, "P"), (-1, "S"), (1, "P"), (1, "S")):
        if kind == "P":
            q = qP
            psi = (-xi, sgn * 1j * qP)
        else:
            q = qS
            psi = (sgn * 1j * qS, -xi + 0 * qS)
        dpsi = (sgn * 1j * q * psi[0], sgn * 1j * q * psi[1])
        v = _traction(lam, mu, xi, psi, dpsi)
        cols.append(_stack_state(psi, v))
        logs.append(sgn * 1j * (-p.H) * q)
    states = np.stack(cols, axis=-1)
    return states, np.stack(logs, axis=-1)


def entire_initial(p: MediumProfile, xi):
    """Entire states theta_P, phi_P, theta_S, phi_S at Z = -H (shape batch+(4,4))."""
    xi = np.asarray(xi, dtype=complex)
    Z = -p.H
    lam, mu = p.lambda0, p.mu0
    qP2 = p.kP2 - xi * xi
    qS2 = p.kS2 - xi * xi
    # cos(Zq) and sin(Zq)/q are even in q, so any root works
    qP = np.sqrt(qP2)
    qS = np.sqrt(qS2)
    cP, sP = np.cos(Z * qP), sinc_q(Z, qP)
    cS, sS = np.cos(Z * qS), sinc_q(Z, qS)
    one = np.ones_like(xi)
    thP = (-xi * cP, -qP2 * sP)
    phP = (-1j * xi * sP, 1j * cP * one)
    thS = (-qS2 * sS, -xi * cS)
    phS = (1j * cS * one, -1j * xi * sS)
    cols = []
    # theta' = i q^2 phi, phi' = i theta
    for th, ph, q2 in ((thP, phP, qP2), (thS, phS, qS2)):
        dth = (1j * q2 * ph[0], 1j * q2 * ph[1])
        dph = (1j * th[0], 1j * th[1])
        cols.append(_stack_state(th, _traction(lam, mu, xi, th, dth)))
        cols.append(_stack_state(ph, _traction(lam, mu, xi, ph, dph)))
    return np.stack(cols, axis=-1)


MAX_LOG = 600.0


def _apply_scale(states, log_scale):
    """Multiply columns by exp(log_scale) where representable."""
    ok = np.abs(log_scale.real) < MAX_LOG
    fac = np.exp(np.where(ok, log_scale, 0.0))
    states = states * fac[..., None, :]
    return states, np.where(ok, 0.0, log_scale)


def jost_surface(p: MediumProfile, xi, qP, qS, tol=DEFAULT_TOL, z_eval=None, unscale=True):
    """Batched Jost columns at the surface (or at ``z_eval``).

    Returns ``(states, log_scale)``; see :func:`jost_initial`.
    """
    y0, logs = jost_initial(p, xi, qP, qS)
    y = propagate(p, xi, y0, tol=tol, z_eval=z_eval)
    if unscale:
        y, logs = _apply_scale(y, logs)
    return y, logs


def entire_surface(p: MediumProfile, xi, tol=DEFAULT_TOL, z_eval=None):
    """Batched entire columns theta_P, phi_P, theta_S, phi_S at the surface."""
    y0 = entire_initial(p, xi)
    return propagate(p, xi, y0, tol=tol, z_eval=z_eval)


def jost_basis_surface(p: MediumProfile, pt: SheetPoint, tol=DEFAULT_TOL) -> SurfaceBasis:
    q = quasimomenta(p, pt)
    y, logs = jost_surface(p, pt.xi, q.qP, q.qS, tol=tol)
    return SurfaceBasis("jost", y, pt, logs)


def entire_basis_surface(p: MediumProfile, xi, tol=DEFAULT_TOL) -> SurfaceBasis:
    y = entire_surface(p, complex(xi), tol=tol)
    return SurfaceBasis("entire", y, complex(xi))


def wronskian(a, b):
    """W(a, b) = psi_b^T v_a - v_b^T psi_a for states or (..., 4) arrays.

    Matrix-valued when given (..., 4, k) arrays of column states: entry
    (n, m) pairs column n of ``a`` with column m of ``b``.
    """
    if isinstance(a, DisplacementTractionState):
        a = a.to_array()
    if isinstance(b, DisplacementTractionState):
        b = b.to_array()
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim >= 2 and b.ndim >= 2:
        pa, va = a[..., :2, :], a[..., 2:, :]
        pb, vb = b[..., :2, :], b[..., 2:, :]
        return np.einsum("...in,...im->...nm", va, pb) - np.einsum("...in,...im->...nm", pa, vb)
    return b[0] * a[2] + b[1] * a[3] - b[2] * a[0] - b[3] * a[1]
