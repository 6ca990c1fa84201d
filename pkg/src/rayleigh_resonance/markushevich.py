"""Markushevich transform of the Rayleigh system to a matrix Schroedinger
problem, and the Volterra/Faddeev construction of its Jost solutions.

Coordinates: x = -Z >= 0, and every derivative in this module is taken with
respect to x (odd Z-derivatives of the moduli change sign).

Pipeline for one SheetPoint:

1. gauge matrix G' = L G / 2, G(0) = I on [0, H], linear closed form beyond;
2. potentials Q = (G^{-1} B G)^T, background Q0 (linear in x), V = Q - Q0;
3. Faddeev solution H = exp(-i x qP) F of the Volterra equation on
   composite Gauss-Legendre panels, by successive approximation;
4. Jost function F_Theta = F'(0) + Theta F(0), and the boundary matrix
   recovered through the inverse transform at x = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .medium import MediumProfile, lame_derivatives
from .riemann import Rim, SheetPoint, quasimomenta

__all__ = [
    "GaugeMatrix",
    "PotentialSet",
    "ThetaSet",
    "FaddeevSolution",
    "JostFunction",
    "ConvergenceError",
    "gauge_matrix",
    "gauge_values",
    "potentials",
    "theta_set",
    "kernel_abc",
    "volterra_kernel",
    "volterra_kernel_dx",
    "unperturbed_jost",
    "faddeev_solve",
    "jost_function_and_bridge",
    "bftheta_prefactors",
    "asymptotic_compare",
    "delta_leading_fit",
    "weyl_diagnostic",
]

GAUGE_TOL = 1e-13


class ConvergenceError(RuntimeError):
    """Successive approximation failed to contract."""


# ---------------------------------------------------------------------------
# truncated Taylor arithmetic in x, used for derivative bookkeeping


class _Jet:
    """Truncated Taylor coefficients c_k = f^(k)/k! (leading axis = order)."""

    __slots__ = ("c",)

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    @classmethod
    def const(cls, value, like):
        c = np.zeros_like(like.c)
        c[0] = value
        return cls(c)

    def _coerce(self, other):
        return other if isinstance(other, _Jet) else _Jet.const(other, self)

    def __add__(self, o):
        return _Jet(self.c + self._coerce(o).c)

    __radd__ = __add__

    def __sub__(self, o):
        return _Jet(self.c - self._coerce(o).c)

    def __rsub__(self, o):
        return _Jet(self._coerce(o).c - self.c)

    def __neg__(self):
        return _Jet(-self.c)

    def __mul__(self, o):
        o = self._coerce(o)
        n = self.c.shape[0]
        out = np.zeros_like(self.c)
        for k in range(n):
            for i in range(k + 1):
                out[k] += self.c[i] * o.c[k - i]
        return _Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = self._coerce(o)
        n = self.c.shape[0]
        out = np.zeros_like(self.c)
        for k in range(n):
            acc = self.c[k].copy()
            for i in range(1, k + 1):
                acc -= o.c[i] * out[k - i]
            out[k] = acc / o.c[0]
        return _Jet(out)

    def __rtruediv__(self, o):
        return self._coerce(o) / self

    def d(self, k):
        """k-th derivative value."""
        return math.factorial(k) * self.c[k]

    def deriv(self):
        """Jet of the derivative (one order lower, padded with zero)."""
        n = self.c.shape[0]
        out = np.zeros_like(self.c)
        for k in range(n - 1):
            out[k] = (k + 1) * self.c[k + 1]
        return _Jet(out)


def _moduli_jets(p: MediumProfile, x):
    """Jets (lambda, mu) in x at points x (x-derivatives up to order 3)."""
    x = np.asarray(x, dtype=float)
    lamZ, muZ = lame_derivatives(p, -x, order=3)
    fact = np.array([1.0, -1.0, 0.5, -1.0 / 6.0]).reshape((4,) + (1,) * x.ndim)
    return _Jet(lamZ * fact), _Jet(muZ * fact)


def _coefficient_jets(p: MediumProfile, x):
    """Jets of c, d and the B1, B2 entries at x."""
    lam, mu = _moduli_jets(p, x)
    mu0 = p.mu0
    sig = lam + 2.0 * mu
    r = 1.0 / mu
    r1 = r.deriv()
    r2 = r1.deriv()
    r3 = r2.deriv()
    g = mu * (lam + mu) / sig
    c = g / mu0
    d = -2.0 * mu0 * r2
    mu1 = mu.deriv()
    mu2 = mu1.deriv()
    lam1 = lam.deriv()
    b11 = -0.5 * r2 * g + mu2 / mu
    b12 = mu0 * (2.0 * (mu1 / mu) * r2 + r3)
    b21 = (1.0 / mu0) * ((lam1 * mu * mu + mu1 * lam * (lam + mu)) / (sig * sig) - 0.5 * g.deriv())
    b22 = 0.5 * r2 * mu * (lam - mu) / sig
    inv_mu2 = r * r
    B2 = [[-r, mu0 * inv_mu2.deriv()], [0.0 * r, -1.0 / sig]]
    return {"lam": lam, "mu": mu, "sig": sig, "r": r, "c": c, "d": d,
            "B1": [[b11, b12], [b21, b22]], "B2": B2}


# ---------------------------------------------------------------------------
# gauge matrix


@dataclass
class GaugeMatrix:
    x: float
    G: np.ndarray
    GH: np.ndarray


def _gauge_rhs(p):
    def f(x, y):
        cj = _coefficient_jets(p, np.array(min(x, p.H)))
        c = float(cj["c"].c[0])
        d = float(cj["d"].c[0])
        G = y.reshape(2, 2)
        L = np.array([[0.0, -d], [-c, 0.0]])
        return 0.5 * (L @ G).ravel()
    return f


_GAUGE_CACHE: dict = {}


def _gauge_dense(p: MediumProfile, tol=GAUGE_TOL):
    """Dense solution of the gauge ODE on [0, H], one piece per smooth segment."""
    key = (p.profile_hash, tol)
    if key not in _GAUGE_CACHE:
        if len(_GAUGE_CACHE) > 32:
            _GAUGE_CACHE.clear()
        cuts = sorted({0.0, p.H, *(-z for z in p.breakpoints if -p.H <= z <= 0)})
        pieces = []
        y = np.eye(2).ravel()
        for a, b in zip(cuts, cuts[1:]):
            if b <= a:
                continue
            r = solve_ivp(_gauge_rhs(p), (a, b), y, method="DOP853", rtol=tol,
                          atol=tol, dense_output=True)
            if not r.success:
                raise RuntimeError(f"gauge integration failed: {r.message}")
            pieces.append((a, b, r.sol))
            y = r.y[:, -1]
        _GAUGE_CACHE[key] = (pieces, y.reshape(2, 2))
    return _GAUGE_CACHE[key]


def _gauge_H(p: MediumProfile, tol=GAUGE_TOL):
    if p.H == 0.0:
        return np.eye(2)
    return _gauge_dense(p, tol)[1]


def gauge_values(p: MediumProfile, x, tol=GAUGE_TOL):
    """G at the points x (any order, x >= 0); shape x.shape + (2, 2)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be >= 0")
    flat = x.ravel()
    out = np.empty((flat.size, 2, 2))
    inside = flat < p.H
    if np.any(inside):
        pieces, _ = _gauge_dense(p, tol)
        xin = flat[inside]
        vals = np.empty((xin.size, 4))
        for a, b, sol in pieces:
            m = (xin >= a) & (xin <= b)
            if np.any(m):
                vals[m] = sol(xin[m]).T
        out[inside] = vals.reshape(-1, 2, 2)
    outside = ~inside
    if np.any(outside):
        out[outside] = _gauge_tail(p, _gauge_H(p, tol), flat[outside])
    return out.reshape(x.shape + (2, 2))


def _gauge_tail(p, GH, x):
    """Closed-form G for the homogeneous region (also its linear extension)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (2, 2))
    out[..., 0, 0] = GH[0, 0]
    out[..., 0, 1] = GH[0, 1]
    out[..., 1, 0] = -0.5 * p.c0 * GH[0, 0] * (x - p.H) + GH[1, 0]
    out[..., 1, 1] = -0.5 * p.c0 * GH[0, 1] * (x - p.H) + GH[1, 1]
    return out


def gauge_matrix(p: MediumProfile, x, tol=GAUGE_TOL) -> GaugeMatrix:
    x = float(x)
    G = gauge_values(p, np.array([x]), tol)[0]
    return GaugeMatrix(x, G, _gauge_H(p, tol).copy())


# ---------------------------------------------------------------------------
# potentials


@dataclass
class PotentialSet:
    x: np.ndarray
    Q: np.ndarray
    Q0: np.ndarray
    V: np.ndarray
    B1: np.ndarray
    B2: np.ndarray


def _jet_matrix(m, k=0):
    return np.stack([np.stack([np.asarray(e.d(k) if isinstance(e, _Jet) else e) for e in row], -1)
                     for row in m], -2)


def _background(p, GH, x):
    """Q0 from the tail formula, extended linearly in x."""
    x = np.asarray(x, dtype=float)
    w2 = p.omega**2
    a1 = -0.5 * p.c0 * GH[0, 0] * (x - p.H) + GH[1, 0]
    a2 = -0.5 * p.c0 * GH[0, 1] * (x - p.H) + GH[1, 1]
    k = w2 * p.c0 / p.mu0
    Q0 = np.empty(x.shape + (2, 2))
    Q0[..., 0, 0] = -w2 / p.mu0 - k * GH[0, 1] * a1
    Q0[..., 0, 1] = k * GH[0, 0] * a1
    Q0[..., 1, 0] = -k * GH[0, 1] * a2
    Q0[..., 1, 1] = -w2 / p.sigma0 + k * GH[0, 1] * a1
    return Q0


def potentials(p: MediumProfile, x, tol=GAUGE_TOL, G=None) -> PotentialSet:
    """B1, B2, Q, Q0 and V at points x (vectorised)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cj = _coefficient_jets(p, x)
    B1 = _jet_matrix(cj["B1"])
    B2 = _jet_matrix(cj["B2"])
    B = B1 + p.omega**2 * B2
    if G is None:
        G = gauge_values(p, x, tol)
    Ginv = np.empty_like(G)
    Ginv[..., 0, 0] = G[..., 1, 1]
    Ginv[..., 0, 1] = -G[..., 0, 1]
    Ginv[..., 1, 0] = -G[..., 1, 0]
    Ginv[..., 1, 1] = G[..., 0, 0]
    Q = np.swapaxes(Ginv @ B @ G, -1, -2)
    Q0 = _background(p, _gauge_H(p, tol), x)
    V = Q - Q0
    V[x >= p.H] = 0.0
    return PotentialSet(x, Q, Q0, V, B1, B2)


# ---------------------------------------------------------------------------
# boundary matrix Theta


@dataclass
class ThetaSet:
    Theta: np.ndarray
    Da: np.ndarray
    Ca: np.ndarray
    theta1: float
    theta2: float
    theta3: float
    varpi: float
    c_at_0: float
    chi: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def Theta_from_DC(self):
        return np.linalg.solve(self.Da, self.Ca)


def _surface_values(p):
    cj = _coefficient_jets(p, np.array(0.0))
    lam, mu, r = cj["lam"], cj["mu"], cj["r"]
    return {"lam": float(lam.d(0)), "mu": float(mu.d(0)), "mu1": float(mu.d(1)),
            "mu2": float(mu.d(2)), "r2": float(r.d(2)), "cj": cj}


def theta_set(p: MediumProfile, xi) -> ThetaSet:
    """Theta(xi), D^a, C^a and the scalar symbols at the surface."""
    xi = complex(xi)
    if xi == 0:
        raise ValueError("Theta is undefined at xi = 0 (D^a singular)")
    s = _surface_values(p)
    mu, lam, mu1, mu2, r2 = s["mu"], s["lam"], s["mu1"], s["mu2"], s["r2"]
    mu0, w2 = p.mu0, p.omega**2
    sig = lam + 2 * mu
    varpi = mu0 / mu
    theta1 = varpi * (w2 / mu + mu * r2)
    theta2 = mu * mu / (2 * mu0 * sig)
    theta3 = mu1 / mu
    Theta = np.array([[-theta3, theta2], [2 * varpi * xi**2 - theta1, 0.0]], dtype=complex)
    Da = np.array([[-2 * mu0 * mu1 / mu, mu], [-2 * mu0 * xi, 0.0]], dtype=complex)
    Ca = np.array([[mu0 * (2 * xi**2 - w2 / mu + mu2 / mu), -mu1 * mu / sig],
                   [2 * mu0 * xi * mu1 / mu, -xi * mu * mu / sig]], dtype=complex)
    return ThetaSet(Theta, Da, Ca, theta1, theta2, theta3, varpi, 1 - 2 * varpi * theta2)


# ---------------------------------------------------------------------------
# Volterra kernel


def kernel_abc(p: MediumProfile, x, y, GH=None):
    """Matrices A(x), B(y) and C of the unperturbed kernel."""
    if GH is None:
        GH = _gauge_H(p)
    g11, g12, g21, g22 = GH[0, 0], GH[0, 1], GH[1, 0], GH[1, 1]
    h = 0.5 * p.c0
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.empty(x.shape + (2, 2))
    A[..., 0, 0] = g12 * (h * g11 * (x - p.H) - g21)
    A[..., 0, 1] = g11 * (-h * g11 * (x - p.H) + g21)
    A[..., 1, 0] = g12 * (h * g12 * (x - p.H) - g22)
    A[..., 1, 1] = g11 * (-h * g12 * (x - p.H) + g22)
    B = np.empty(y.shape + (2, 2))
    B[..., 0, 0] = g11 * (h * (p.H - y) * g12 + g22)
    B[..., 0, 1] = -g11 * (h * (p.H - y) * g11 + g21)
    B[..., 1, 0] = g12 * (h * (p.H - y) * g12 + g22)
    B[..., 1, 1] = -g12 * (h * (p.H - y) * g11 + g21)
    mu0 = p.mu0
    C = np.array([[mu0 * g12 * g11, -mu0 * g11**2], [mu0 * g12**2, -mu0 * g12 * g11]])
    return A, B, C


def _sinc(t, q):
    """sin(t q)/q with a series for small |t q| (entire in q^2)."""
    tq = t * q
    small = np.abs(tq) < 1e-3
    qs = np.where(small, 1.0, q)
    tq2 = tq * tq
    return np.where(small, t * (1 - tq2 / 6 * (1 - tq2 / 20 * (1 - tq2 / 42))), np.sin(tq) / qs)


def _cosdiff(t, qS, qP):
    """cos(t qS) - cos(t qP) written to avoid cancellation for small t."""
    return -2.0 * np.sin(0.5 * t * (qS + qP)) * np.sin(0.5 * t * (qS - qP))


def volterra_kernel(p: MediumProfile, x, y, xi, GH=None):
    """Unperturbed kernel G(x, y; xi) (entire in xi)."""
    xi = complex(xi)
    qP = np.sqrt(complex(p.kP2 - xi * xi))
    qS = np.sqrt(complex(p.kS2 - xi * xi))
    A, B, C = kernel_abc(p, x, y, GH)
    t = np.asarray(x, float) - np.asarray(y, float)
    return (A * _sinc(t, qP)[..., None, None] + B * _sinc(t, qS)[..., None, None]
            + C * (_cosdiff(t, qS, qP) / p.omega**2)[..., None, None])


def volterra_kernel_dx(p: MediumProfile, x, y, xi, GH=None):
    """Partial derivative of the kernel in x."""
    xi = complex(xi)
    qP2 = p.kP2 - xi * xi
    qS2 = p.kS2 - xi * xi
    qP = np.sqrt(complex(qP2))
    qS = np.sqrt(complex(qS2))
    A, B, C = kernel_abc(p, x, y, GH)
    dA = C * p.c0 / (2 * p.mu0)
    t = np.asarray(x, float) - np.asarray(y, float)
    sP, sS = _sinc(t, qP), _sinc(t, qS)
    out = (dA * sP[..., None, None] + A * np.cos(t * qP)[..., None, None]
           + B * np.cos(t * qS)[..., None, None]
           + C * ((-qS2 * sS + qP2 * sP) / p.omega**2)[..., None, None])
    return out


def _tilde_parts(t, q, qP):
    """exp(-i t qP) times sin(t q)/q, cos(t q) and q sin(t q), for t <= 0."""
    ep = np.exp(1j * t * (q - qP))
    em = np.exp(-1j * t * (q + qP))
    s = (ep - em) / 2j
    c = (ep + em) / 2
    tq = t * q
    small = np.abs(tq) < 1e-3
    qs = np.where(small, 1.0, q)
    tq2 = tq * tq
    series = t * (1 - tq2 / 6 * (1 - tq2 / 20 * (1 - tq2 / 42))) * np.exp(-1j * t * qP)
    sinc = np.where(small, series, s / qs)
    return sinc, c, q * s


def _tilde_kernel(p, A, B, C, t, qP, qS, derivative=False):
    """exp(i (y - x) qP) times the kernel (or its x-derivative)."""
    sP, cP, qsP = _tilde_parts(t, qP, qP)
    sS, cS, qsS = _tilde_parts(t, qS, qP)
    e = lambda a: a[..., None, None]
    w2 = p.omega**2
    if not derivative:
        return A * e(sP) + B * e(sS) + C * e((cS - cP) / w2)
    dA = C * p.c0 / (2 * p.mu0)
    return dA * e(sP) + A * e(cP) + B * e(cS) + C * e((-qsS + qsP) / w2)


# ---------------------------------------------------------------------------
# unperturbed Jost solutions


def unperturbed_jost(p: MediumProfile, x, qP, qS, xi, GH=None, faddeev=False):
    """F0^+ (and its x-derivative) at points x; shapes x.shape + (2, 2).

    With ``faddeev`` the common factor exp(i x qP) is removed.
    """
    if GH is None:
        GH = _gauge_H(p)
    x = np.asarray(x, dtype=float)
    kap = p.mu0 / p.omega**2
    a1 = -0.5 * p.c0 * GH[0, 0] * (x - p.H) + GH[1, 0]
    a2 = -0.5 * p.c0 * GH[0, 1] * (x - p.H) + GH[1, 1]
    eP = np.ones_like(x, dtype=complex) if faddeev else np.exp(1j * x * qP)
    eS = np.exp(1j * x * (qS - qP)) if faddeev else np.exp(1j * x * qS)
    F = np.empty(x.shape + (2, 2), dtype=complex)
    dF = np.empty_like(F)
    F[..., 0, 0] = (a1 + 1j * qP * kap * GH[0, 0]) * eP
    F[..., 1, 0] = (a2 + 1j * qP * kap * GH[0, 1]) * eP
    F[..., 0, 1] = -kap * xi * GH[0, 0] * eS
    F[..., 1, 1] = -kap * xi * GH[0, 1] * eS
    dF[..., 0, 0] = (-0.5 * p.c0 * GH[0, 0]) * eP + 1j * qP * F[..., 0, 0]
    dF[..., 1, 0] = (-0.5 * p.c0 * GH[0, 1]) * eP + 1j * qP * F[..., 1, 0]
    dF[..., 0, 1] = 1j * qS * F[..., 0, 1]
    dF[..., 1, 1] = 1j * qS * F[..., 1, 1]
    return F, dF


# ---------------------------------------------------------------------------
# Faddeev solver


class _Discretisation:
    """Composite Gauss-Legendre panels on [0, H] with partial-panel rules."""

    def __init__(self, p: MediumProfile, n_panels, n_nodes, tol=GAUGE_TOL):
        cuts = sorted({0.0, p.H, *(-z for z in p.breakpoints)})
        edges = []
        for a, b in zip(cuts, cuts[1:]):
            k = max(1, int(math.ceil(n_panels * (b - a) / p.H)))
            edges.extend(np.linspace(a, b, k + 1)[:-1].tolist())
        edges.append(p.H)
        self.edges = np.array(edges)
        gx, gw = np.polynomial.legendre.leggauss(n_nodes)
        self.ref_nodes, self.ref_weights = gx, gw
        nodes, weights, panel = [], [], []
        for k, (a, b) in enumerate(zip(self.edges, self.edges[1:])):
            nodes.append(0.5 * (b - a) * gx + 0.5 * (b + a))
            weights.append(0.5 * (b - a) * gw)
            panel.append(np.full(n_nodes, k))
        self.nodes = np.concatenate(nodes)
        self.weights = np.concatenate(weights)
        self.panel = np.concatenate(panel)
        self.n = n_nodes
        self.N = self.nodes.size
        self.bary = _bary_weights(gx)
        # partial rules on [x_i, b_k] for every node
        pn, pw = [], []
        interp = np.zeros((self.N, n_nodes, n_nodes))
        for i, xi_ in enumerate(self.nodes):
            k = self.panel[i]
            a, b = self.edges[k], self.edges[k + 1]
            z = 0.5 * (b - xi_) * gx + 0.5 * (b + xi_)
            pn.append(z)
            pw.append(0.5 * (b - xi_) * gw)
            interp[i] = _lagrange_matrix(gx, self.bary, 2 * (z - a) / (b - a) - 1)
        self.partial_nodes = np.array(pn)
        self.partial_weights = np.array(pw)
        self.interp = interp
        allx = np.concatenate([self.nodes, self.partial_nodes.ravel()])
        Gall = gauge_values(p, allx, tol)
        pot = potentials(p, allx, tol, G=Gall)
        self.V_nodes = pot.V[: self.N]
        self.V_partial = pot.V[self.N:].reshape(self.N, n_nodes, 2, 2)
        self.GH = _gauge_H(p, tol)
        self.Vmax = float(np.max(np.abs(pot.V))) if allx.size else 0.0

    def panel_of(self, x):
        k = int(np.searchsorted(self.edges, x, side="right") - 1)
        return min(max(k, 0), len(self.edges) - 2)


def _bary_weights(x):
    w = np.ones_like(x)
    for j in range(x.size):
        w[j] = 1.0 / np.prod(x[j] - np.delete(x, j))
    return w


def _lagrange_matrix(x, w, z):
    """Interpolation matrix from values at x to points z (barycentric)."""
    z = np.atleast_1d(z)
    diff = z[:, None] - x[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15)
    diff = np.where(exact, 1.0, diff)
    tmp = w[None, :] / diff
    M = tmp / tmp.sum(axis=1, keepdims=True)
    rows = np.nonzero(exact.any(axis=1))[0]
    for r in rows:
        M[r] = exact[r].astype(float)
    return M


_DISC_CACHE: dict = {}


def _discretisation(p, n_panels, n_nodes, tol=GAUGE_TOL):
    key = (p.profile_hash, n_panels, n_nodes, tol)
    if key not in _DISC_CACHE:
        if len(_DISC_CACHE) > 16:
            _DISC_CACHE.clear()
        _DISC_CACHE[key] = _Discretisation(p, n_panels, n_nodes, tol)
    return _DISC_CACHE[key]


@dataclass
class FaddeevSolution:
    point: SheetPoint
    F0: np.ndarray
    dF0: np.ndarray
    iterations: int
    tail_ratio: float
    qP: complex = 0j
    qS: complex = 0j
    term_norms: list = field(default_factory=list)
    _disc: object = field(default=None, repr=False)
    _H: np.ndarray = field(default=None, repr=False)

    def evaluate(self, p: MediumProfile, x):
        """F^+ and its x-derivative at arbitrary x >= 0."""
        return _evaluate(p, self, np.atleast_1d(np.asarray(x, float)))


def _operator_matrix(p, disc, qP, qS):
    """Discrete Volterra operator acting on the Faddeev unknown at the nodes.

    Returns M of shape (N, N, 2, 2) with (M h)_i = sum_j M_ij h_j.
    """
    N, n = disc.N, disc.n
    GH = disc.GH
    M = np.zeros((N, N, 2, 2), dtype=complex)
    x = disc.nodes
    # full panels after the one containing x_i
    A, _, C = kernel_abc(p, x, x, GH)
    _, B, _ = kernel_abc(p, x, x, GH)
    t = x[:, None] - x[None, :]
    later = disc.panel[None, :] > disc.panel[:, None]
    Kt = _tilde_kernel(p, A[:, None], B[None, :], C, np.where(later, t, 0.0), qP, qS)
    KV = Kt @ disc.V_nodes[None, :]
    M += np.where(later[..., None, None], KV * disc.weights[None, :, None, None], 0.0)
    # partial panel [x_i, end of panel]
    z = disc.partial_nodes
    _, Bz, _ = kernel_abc(p, x, z, GH)
    tz = x[:, None] - z
    Kz = _tilde_kernel(p, A[:, None], Bz, C, tz, qP, qS)
    KVz = Kz @ disc.V_partial * disc.partial_weights[..., None, None]
    contrib = np.einsum("izab,izl->ilab", KVz, disc.interp)
    for i in range(N):
        k = disc.panel[i]
        M[i, k * n:(k + 1) * n] += contrib[i]
    return M


def faddeev_solve(p: MediumProfile, pt: SheetPoint, max_iter=200, tol=1e-14,
                  n_panels=None, n_nodes=16) -> FaddeevSolution:
    """Successive approximation of the Faddeev-gauge Volterra equation.

    Returns F^+(0) and F^+'(0) (un-rescaled).  The iteration stops when the
    sup-norm of the latest term relative to the accumulated sum drops below
    ``tol``; a sustained term ratio >= 1 raises ``ConvergenceError``.
    """
    q = quasimomenta(p, pt)
    qP, qS, xi = q.qP, q.qS, pt.xi
    if p.H == 0.0:
        F0, dF0 = unperturbed_jost(p, np.array(0.0), qP, qS, xi, np.eye(2))
        return FaddeevSolution(pt, F0, dF0, 1, 0.0, qP, qS)
    if n_panels is None:
        n_panels = min(32, max(4, int(math.ceil(abs(xi) * p.H / 2.0))))
    disc = _discretisation(p, n_panels, n_nodes)
    GH = disc.GH
    H0, _ = unperturbed_jost(p, disc.nodes, qP, qS, xi, GH, faddeev=True)
    M = _operator_matrix(p, disc, qP, qS)
    Mflat = M.transpose(0, 2, 1, 3).reshape(2 * disc.N, 2 * disc.N)
    h0 = H0.reshape(2 * disc.N, 2)
    term = h0
    total = h0.copy()
    norms = [float(np.max(np.abs(term)))]
    ratio = 0.0
    it = 0
    growth = 0
    for it in range(1, max_iter + 1):
        term = -(Mflat @ term)
        tn = float(np.max(np.abs(term)))
        total = total + term
        ratio = tn / norms[-1] if norms[-1] > 0 else 0.0
        norms.append(tn)
        if tn <= tol * float(np.max(np.abs(total))):
            break
        growth = growth + 1 if (ratio >= 1.0 and it > 20) else 0
        if growth >= 5:
            raise ConvergenceError("successive approximation does not contract")
    else:
        raise ConvergenceError(f"no convergence within {max_iter} iterations")
    Hn = total.reshape(disc.N, 2, 2)
    sol = FaddeevSolution(pt, None, None, it, ratio, qP, qS, norms, disc, Hn)
    F, dF = _evaluate(p, sol, np.array([0.0]))
    sol.F0 = F[0]
    sol.dF0 = dF[0]
    return sol


def _evaluate(p, sol: FaddeevSolution, xs):
    """F and F' at arbitrary points from the node solution."""
    qP, qS, xi = sol.qP, sol.qS, sol.point.xi
    if sol._disc is None:
        return unperturbed_jost(p, xs, qP, qS, xi, np.eye(2))
    disc = sol._disc
    GH = disc.GH
    F0, dF0 = unperturbed_jost(p, xs, qP, qS, xi, GH)
    Fo = np.empty_like(F0)
    dFo = np.empty_like(dF0)
    n = disc.n
    for m, x in enumerate(xs):
        if x >= p.H:
            Fo[m], dFo[m] = F0[m], dF0[m]
            continue
        k = disc.panel_of(x)
        a, b = disc.edges[k], disc.edges[k + 1]
        later = disc.panel > k
        ys = disc.nodes[later]
        ws = disc.weights[later]
        Vy = disc.V_nodes[later]
        Hy = sol._H[later]
        z = 0.5 * (b - x) * disc.ref_nodes + 0.5 * (b + x)
        wz = 0.5 * (b - x) * disc.ref_weights
        L = _lagrange_matrix(disc.ref_nodes, disc.bary, 2 * (z - a) / (b - a) - 1)
        Hz = np.einsum("zl,lab->zab", L, sol._H[k * n:(k + 1) * n])
        Vz = potentials(p, z).V
        yy = np.concatenate([ys, z])
        ww = np.concatenate([ws, wz])
        VH = np.concatenate([Vy @ Hy, Vz @ Hz])
        A, B, C = kernel_abc(p, np.full(yy.shape, x), yy, GH)
        t = x - yy
        Kt = _tilde_kernel(p, A, B, C, t, qP, qS)
        dKt = _tilde_kernel(p, A, B, C, t, qP, qS, derivative=True)
        # F = exp(i x qP) H and the kernels carry exp(i (y - x) qP)
        ex = np.exp(1j * x * qP)
        Fo[m] = F0[m] - ex * np.einsum("y,yab,ybc->ac", ww, Kt, VH)
        dFo[m] = dF0[m] - ex * np.einsum("y,yab,ybc->ac", ww, dKt, VH)
    return Fo, dFo


# ---------------------------------------------------------------------------
# Jost function and the bridge to the boundary matrix


@dataclass
class JostFunction:
    FTheta: np.ndarray
    point: SheetPoint
    F0: np.ndarray = None
    dF0: np.ndarray = None


def _inverse_transform_surface(p: MediumProfile, xi, F, dF, theta=None):
    """Displacement and Z-derivative of the Rayleigh solutions at Z = 0.

    Uses Psi = -(xi mu0/omega^2)^{-1} J M^{-1}(F) J with
    M^{-1} = [[d/dx, 1], [-xi, 0]] diag(mu0/mu, mu/(lambda+2mu)) G^{-T}.
    """
    cj = _coefficient_jets(p, np.array(0.0))
    mu0 = p.mu0
    K1 = mu0 * cj["r"]
    K2 = cj["mu"] / cj["sig"]
    c = cj["c"]
    d = cj["d"]
    # G(0) = I, G' = L/2, G'' = L'/2 + L^2/4 with L = [[0, -d], [-c, 0]]
    L0 = np.array([[0.0, -d.d(0)], [-c.d(0), 0.0]])
    L1 = np.array([[0.0, -d.d(1)], [-c.d(1), 0.0]])
    G = [np.eye(2), 0.5 * L0, 0.5 * L1 + 0.25 * L0 @ L0]
    # G^{-T} = [[G22, -G21], [-G12, G11]] entrywise in each derivative
    GiT = [np.array([[g[1, 1], -g[1, 0]], [-g[0, 1], g[0, 0]]]) for g in G]
    K = [np.diag([K1.d(k), K2.d(k)]) for k in range(3)]
    T = [K[0] @ GiT[0],
         K[1] @ GiT[0] + K[0] @ GiT[1],
         K[2] @ GiT[0] + 2 * K[1] @ GiT[1] + K[0] @ GiT[2]]
    Q = potentials(p, np.array([0.0])).Q[0]
    ddF = (xi * xi * np.eye(2) + Q) @ F
    U = T[0] @ F
    dU = T[1] @ F + T[0] @ dF
    ddU = T[2] @ F + 2 * T[1] @ dF + T[0] @ ddF
    w = np.array([dU[0] + U[1], -xi * U[0]])
    dw = np.array([ddU[0] + dU[1], -xi * dU[0]])
    J = np.diag([1.0, -1.0])
    pref = -p.omega**2 / (xi * mu0)
    psi = pref * J @ w @ J
    dpsi_x = pref * J @ dw @ J
    return psi, -dpsi_x


def _tractions(p: MediumProfile, xi, psi, dpsi):
    """Boundary matrix [[a(P), a(S)], [b(P), b(S)]] from displacement data."""
    lam, mu = lame_derivatives(p, np.array(0.0), order=0)
    lam, mu = float(lam[0]), float(mu[0])
    a = 1j * (lam * xi * psi[0] + (lam + 2 * mu) * dpsi[1])
    b = -xi * mu * psi[1] + mu * dpsi[0]
    return np.array([a, b])


def bftheta_prefactors(p: MediumProfile, xi, corrected=True):
    """(left, right) with F_Theta = left @ B @ right.

    ``corrected=False`` gives the factors exactly as printed in the source
    relation; ``corrected=True`` gives the form that holds for the
    conventions implemented here (see the decisions ledger).
    """
    s = _surface_values(p)
    mu, mu1 = s["mu"], s["mu1"]
    mu0, w2 = p.mu0, p.omega**2
    Lm = np.array([[-mu, 0.0], [-2 * mu0 * mu1 / mu, 2 * mu0 * xi]], dtype=complex) / (2 * mu * w2)
    R = np.array([[1j, 0.0], [0.0, -1.0]], dtype=complex)
    if not corrected:
        return Lm, R
    return Lm @ np.diag([1.0, -1j]), R @ np.diag([1.0, 1j])


def jost_function_and_bridge(p: MediumProfile, pt: SheetPoint, tol=1e-14, sol=None, **kw):
    """F_Theta and the boundary matrix recovered from the Schroedinger side."""
    from .boundary import BoundaryMatrix

    xi = pt.xi
    if xi == 0:
        raise ValueError("singular prefactor at xi = 0")
    if sol is None:
        sol = faddeev_solve(p, pt, tol=tol, **kw)
    th = theta_set(p, xi)
    FTheta = sol.dF0 + th.Theta @ sol.F0
    psi, dpsi = _inverse_transform_surface(p, xi, sol.F0, sol.dF0)
    B = _tractions(p, xi, psi, dpsi)
    return JostFunction(FTheta, pt, sol.F0, sol.dF0), BoundaryMatrix(B, pt)


def _two_term_matrix(p, GH, x, n_quad=200):
    """O(1) coefficient of exp(x xi) F^+(x, xi) on the physical sheet."""
    kap = p.mu0 / p.omega**2
    lead = np.array([[GH[0, 0], GH[0, 0]], [GH[0, 1], GH[0, 1]]])
    M1 = np.array([[0.5 * GH[0, 0] * (p.c0 * p.H - x) + GH[1, 0], -0.5 * x * GH[0, 0]],
                   [0.5 * GH[0, 1] * (p.c0 * p.H - x) + GH[1, 1], -0.5 * x * GH[0, 1]]])
    IV = np.zeros((2, 2))
    if x < p.H:
        t, w = np.polynomial.legendre.leggauss(n_quad)
        y = 0.5 * (p.H - x) * t + 0.5 * (p.H + x)
        IV = 0.5 * (p.H - x) * np.einsum("y,yab->ab", w, potentials(p, y).V)
    return kap * (M1 - 0.5 * kap * IV @ lead)


def asymptotic_compare(p: MediumProfile, xs, xis, **kw):
    """Relative deviation of F^+ and F^+' from the large-xi expansions.

    For each physical-sheet xi the report lists, per x, the deviation from
    the leading term -exp(-x xi) xi (mu0/omega^2) [G11 G11; G12 G12] and
    from its derivative counterpart (+xi^2 factor) under "F" and "dF", and
    the deviation from the two-term expansions under "F_two_term" and
    "dF_two_term".  Deviations are max-norm, relative to the leading term.
    """
    GH = _gauge_H(p)
    kap = p.mu0 / p.omega**2
    lead = np.array([[GH[0, 0], GH[0, 0]], [GH[0, 1], GH[0, 1]]])
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    T = [_two_term_matrix(p, GH, x) for x in xs]
    out = []
    for xi in xis:
        xi = complex(xi)
        if abs(xi) * max(p.H, 1.0) < 20:
            raise ValueError("asymptotic comparison needs |xi| max(H, 1) >= 20")
        sol = faddeev_solve(p, SheetPoint(xi, "++"), **kw)
        F, dF = sol.evaluate(p, xs)
        row = {"xi": [xi.real, xi.imag], "F": [], "dF": [], "F_two_term": [],
               "dF_two_term": []}
        for m, x in enumerate(xs):
            e = np.exp(x * xi)
            L0 = -xi * kap * lead
            L1 = xi * xi * kap * lead
            s0 = np.max(np.abs(L0))
            s1 = np.max(np.abs(L1))
            row["F"].append(float(np.max(np.abs(e * F[m] - L0)) / s0))
            row["dF"].append(float(np.max(np.abs(e * dF[m] - L1)) / s1))
            row["F_two_term"].append(float(np.max(np.abs(e * F[m] - L0 - T[m])) / s0))
            row["dF_two_term"].append(float(np.max(np.abs(e * dF[m] - L1 + xi * T[m])) / s1))
        out.append(row)
    return {"x": xs.tolist(), "rows": out}


def weyl_diagnostic(p: MediumProfile, xis, **kw):
    """Fit det M^{-1}(xi) = a2 xi^2 + a1 xi + a0 on the physical sheet.

    Real points beyond kS give the cleanest fit (evanescent waves).

    Returns fitted coefficients next to the predictions c(0) and
    theta3 + varpi Q12(0).
    """
    xis = np.asarray(xis, dtype=complex)
    vals = []
    for xi in xis:
        pt = SheetPoint(xi, "++")
        jf, _ = jost_function_and_bridge(p, pt, **kw)
        vals.append(np.linalg.det(jf.FTheta) / np.linalg.det(jf.F0))
    vals = np.array(vals)
    V = np.stack([xis**2, xis, np.ones_like(xis)], axis=1)
    coef, *_ = np.linalg.lstsq(V, vals, rcond=None)
    th = theta_set(p, xis[0])
    Q12 = potentials(p, np.array([0.0])).Q[0, 0, 1]
    return {"a2": coef[0], "a1": coef[1], "a0": coef[2],
            "c_at_0": th.c_at_0, "theta3_plus_varpi_Q12": th.theta3 + th.varpi * Q12}


def delta_leading_fit(p: MediumProfile, radii, route="bridge", angle=math.pi / 2, **kw):
    """Fit Delta(xi)/(i xi^2) = A + B/xi along the ray xi = r exp(i angle).

    ``route`` selects the bridge (Faddeev) or the direct propagation for
    Delta.  Returns the fitted A, |B| and the prediction
    A = -2 omega^2 mu(0) c(0).  The sign of B is not asserted.  The default
    ray is the positive imaginary axis; there the waves propagate and the
    ratio carries a slowly decaying oscillation, so use a long window (|xi| H
    from about 40 to 160) and expect about a percent.  On the real axis
    beyond kS both waves are evanescent and the fit is much sharper.
    """
    radii = np.asarray(radii, dtype=float)
    xis = radii * np.exp(1j * angle)
    if np.isclose(angle % math.pi, 0.0):
        xis = xis.real.astype(complex)
    rim = Rim.UPPER if np.isclose(abs(math.cos(angle)), 0.0) else Rim.OFF_CUT
    if rim is Rim.UPPER:
        xis = 1j * xis.imag
    if route == "bridge":
        vals = np.array([jost_function_and_bridge(p, SheetPoint(complex(x), "++", rim),
                                                  **kw)[1].det for x in xis])
    elif route == "direct":
        from .boundary import delta_direct
        vals = delta_direct(p, xis, "++", rim, **kw)
    else:
        raise ValueError(f"unknown route {route!r}")
    r = vals / (1j * xis**2)
    V = np.stack([np.ones_like(xis), 1.0 / xis], axis=1)
    coef, *_ = np.linalg.lstsq(V, r, rcond=None)
    mu_s = _surface_values(p)["mu"]
    A_pred = -2.0 * p.omega**2 * mu_s * theta_set(p, xis[0]).c_at_0
    return {"A": complex(coef[0]), "abs_B": float(abs(coef[1])), "A_predicted": float(A_pred),
            "relative_error": float(abs(coef[0] - A_pred) / abs(A_pred)),
            "radii": radii.tolist(), "angle": float(angle)}
