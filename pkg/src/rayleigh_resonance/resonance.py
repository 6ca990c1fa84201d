"""Zeros of the Rayleigh determinant on each sheet, zero counting of F by the
argument principle, and distribution diagnostics of the resonance set.

All contour work is done on complex logarithms (log Delta, log F) so that the
exponentially large values on unphysical sheets never overflow; only phase
increments between neighbouring samples are used for winding numbers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boundary import _det2, boundary_from_states, log_F_direct
from .medium import MediumProfile
from .propagator import jost_initial, propagate
from .riemann import BranchPointError, Rim, parse_sheet, sheet_quasimomenta

__all__ = [
    "ContourNearZeroError",
    "Contour",
    "ResonanceEntry",
    "ResonanceCatalog",
    "CountingTable",
    "winding_count",
    "locate_zeros",
    "resonance_search",
    "split_region",
    "sheet_log_delta",
    "counting_function",
    "distribution_diagnostics",
    "default_workers",
]

SEARCH_TOL = 1e-12
CUT_MARGIN = 1e-7
RESIDUAL_THRESHOLD = 1e-8


class ContourNearZeroError(ArithmeticError):
    """The function is (numerically) zero on or next to the contour."""


# ---------------------------------------------------------------------------
# contours


@dataclass
class Contour:
    """Closed contour parametrised by t in [0, 1)."""

    point: object
    n0: int = 64
    label: str = ""

    @classmethod
    def circle(cls, center, r, n0=64):
        center = complex(center)
        return cls(lambda t: center + r * np.exp(2j * np.pi * np.asarray(t)), n0,
                   f"circle({center}, {r})")

    @classmethod
    def polyline(cls, vertices, n0=64):
        v = np.asarray(vertices, dtype=complex)
        closed = np.append(v, v[0])
        seg = np.abs(np.diff(closed))
        cum = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()

        def point(t):
            t = np.mod(np.asarray(t, dtype=float), 1.0)
            k = np.clip(np.searchsorted(cum, t, side="right") - 1, 0, len(seg) - 1)
            s = (t - cum[k]) / (cum[k + 1] - cum[k])
            return closed[k] + s * (closed[k + 1] - closed[k])

        return cls(point, n0, "polyline")

    @classmethod
    def rectangle(cls, x0, x1, y0, y1, n0=64):
        return cls.polyline([complex(x0, y0), complex(x1, y0), complex(x1, y1),
                             complex(x0, y1)], n0)

    @classmethod
    def half_disk(cls, r, side=+1, offset=1e-6, n0=64):
        """Half disk {|xi| < r, side * Re xi > offset} (anticlockwise)."""
        h = math.sqrt(max(r * r - offset * offset, 0.0))
        a = math.asin(offset / r)
        if side > 0:
            arc0, arc1 = -math.pi / 2 + a, math.pi / 2 - a
            start, end = complex(offset, -h), complex(offset, h)
        else:
            arc0, arc1 = math.pi / 2 + a, 3 * math.pi / 2 - a
            start, end = complex(-offset, h), complex(-offset, -h)
        frac = (arc1 - arc0) * r / ((arc1 - arc0) * r + 2 * h)

        def point(t):
            t = np.mod(np.asarray(t, dtype=float), 1.0)
            on_arc = t < frac
            th = arc0 + (arc1 - arc0) * np.where(on_arc, t / frac, 0.0)
            s = np.where(on_arc, 0.0, (t - frac) / (1 - frac))
            return np.where(on_arc, r * np.exp(1j * th), end + s * (start - end))

        return cls(point, n0, f"half_disk({r}, {side})")


def winding_count(f, contour: Contour, adapt_tol=math.pi / 2, floor=1e-300, log=False,
                  n0=None, min_dt=1e-13, return_samples=False):
    """Winding number of f along a closed contour.

    Parameters
    ----------
    f : callable
        Vectorised map of complex points to values (or to complex logarithms
        of the values when ``log`` is true).
    adapt_tol : float
        Segments are bisected until every phase increment is below this.
    floor : float
        |f| below this on the contour raises ``ContourNearZeroError``
        (compared against exp(Re log f) in log mode).

    Raises
    ------
    ContourNearZeroError
        When |f| drops below ``floor`` or refinement stalls at ``min_dt``.
    """
    n0 = int(n0 or contour.n0)
    t = (np.arange(n0) + 0.5) / n0
    lf = _log_values(f, contour.point(t), log, floor)
    verified = set()
    while True:
        tc = np.append(t, t[0] + 1.0)
        lc = np.append(lf, lf[0])
        d = _wrap(np.diff(lc.imag))
        # a large modulus jump also triggers refinement: it guards against
        # a full turn hiding between two samples
        bad = np.nonzero((np.abs(d) > adapt_tol) | (np.abs(np.diff(lc.real)) > 2.0))[0]
        if bad.size == 0:
            # a zero of even order sitting between two symmetric samples
            # leaves equal phases at both ends; the segment midpoint exposes it
            new = np.array([i for i in range(t.size) if (tc[i], tc[i + 1]) not in verified])
            if new.size == 0:
                break
            mid = 0.5 * (tc[new] + tc[new + 1])
            lm = _log_values(f, contour.point(np.mod(mid, 1.0)), log, floor)
            d1 = _wrap(lm.imag - lc[new].imag)
            d2 = _wrap(lc[new + 1].imag - lm.imag)
            dip = lm.real < np.minimum(lc[new].real, lc[new + 1].real) - 0.25
            flag = (np.abs(d1 + d2 - d[new]) > 1e-6) | dip
            verified.update((tc[i], tc[i + 1]) for i in new[~flag])
            if not np.any(flag):
                break
            bad = new[flag]
            mid = mid[flag]
            lm = lm[flag]
        else:
            mid = 0.5 * (tc[bad] + tc[bad + 1])
            lm = None
        if np.min(tc[bad + 1] - tc[bad]) < min_dt:
            raise ContourNearZeroError("contour near zero: phase refinement stalled")
        if lm is None:
            lm = _log_values(f, contour.point(np.mod(mid, 1.0)), log, floor)
        t = np.concatenate([t, np.mod(mid, 1.0)])
        lf = np.concatenate([lf, lm])
        order = np.argsort(t)
        t, lf = t[order], lf[order]
    w = d.sum() / (2 * math.pi)
    n = int(round(w))
    if abs(w - n) > 1e-6:
        raise ContourNearZeroError(f"non-integer winding {w}")
    if return_samples:
        return n, t.size
    return n


def _log_values(f, z, log, floor):
    v = np.asarray(f(z), dtype=complex)
    if log:
        if np.any(~np.isfinite(v.real)) or np.any(v.real < math.log(floor)):
            raise ContourNearZeroError("contour near zero")
        return v
    if np.any(~np.isfinite(v)) or np.any(np.abs(v) < floor):
        raise ContourNearZeroError("contour near zero")
    return np.log(v)


def _wrap(a):
    return np.angle(np.exp(1j * a))


# ---------------------------------------------------------------------------
# Delta on one sheet


def _stripped_delta(p, xi, sheet, tol):
    """Stripped boundary determinant, its log factor and the entry scale."""
    qP, qS = sheet_quasimomenta(p, xi, sheet, Rim.OFF_CUT)
    y0, logs = jost_initial(p, xi, qP, qS)
    y = propagate(p, xi, y0[..., :2], tol=tol)
    B = boundary_from_states(y)
    scale = np.abs(B[..., 0, 0] * B[..., 1, 1]) + np.abs(B[..., 0, 1] * B[..., 1, 0])
    return _det2(B), logs[..., 0] + logs[..., 1], scale


def sheet_log_delta(p: MediumProfile, sheet, tol=SEARCH_TOL):
    """Vectorised log Delta on one sheet (off the cuts), with a memo."""
    sheet = parse_sheet(sheet)
    memo: dict = {}

    def f(xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=complex))
        out = np.empty(xi.shape, dtype=complex)
        keys = [complex(z) for z in xi.ravel()]
        todo = [i for i, k in enumerate(keys) if k not in memo]
        if todo:
            z = xi.ravel()[todo]
            d, lg, _ = _stripped_delta(p, z, sheet, tol)
            with np.errstate(divide="ignore"):
                vals = np.log(d) + lg
            for i, v in zip(todo, vals):
                memo[keys[i]] = v
        out.ravel()[:] = [memo[k] for k in keys]
        return out

    return f


def _relative_residual(p, xi, sheet, tol):
    d, _, scale = _stripped_delta(p, np.array([xi]), sheet, tol)
    return float(abs(d[0]) / scale[0])


# ---------------------------------------------------------------------------
# region handling


def _cut_lines(p):
    return max(p.kP, p.kS)


def split_region(p: MediumProfile, region, margin=CUT_MARGIN):
    """Split a rectangle (x0, x1, y0, y1) into pieces clear of the cuts.

    Pieces never cross the imaginary axis or the real slit |Re xi| <= k_max;
    edges lying on a cut are pulled back by ``margin``.
    """
    x0, x1, y0, y1 = (float(v) for v in region)
    if not (x0 < x1 and y0 < y1):
        raise ValueError("region must satisfy x0 < x1 and y0 < y1")
    # slit breaks sit just outside the branch points so that no edge
    # passes through one
    k = _cut_lines(p) + margin
    xs = [x0]
    for c in (-k, 0.0, k):
        if x0 < c < x1:
            xs.append(c)
    xs.append(x1)
    pieces = []
    for a, b in zip(xs, xs[1:]):
        a2 = a + margin if a == 0.0 else a
        b2 = b - margin if b == 0.0 else b
        inside_slit = a >= -k and b <= k
        if inside_slit and y0 < 0.0 < y1:
            pieces.append((a2, b2, y0, -margin))
            pieces.append((a2, b2, margin, y1))
        else:
            lo = margin if (inside_slit and y0 == 0.0) else y0
            hi = -margin if (inside_slit and y1 == 0.0) else y1
            pieces.append((a2, b2, lo, hi))
    return [q for q in pieces if q[0] < q[1] and q[2] < q[3]]


def _branch_points(p):
    return [p.kP, -p.kP, p.kS, -p.kS, 0.0]


def _excision_radius(p):
    return 1e-3 * p.omega / math.sqrt(p.mu0)


# ---------------------------------------------------------------------------
# zero location


@dataclass
class ResonanceEntry:
    xi: complex
    sheet: str
    multiplicity: int
    residual: float
    refine_iters: int
    status: str = "ok"

    def to_dict(self):
        return {"xi": [self.xi.real, self.xi.imag], "sheet": self.sheet,
                "multiplicity": self.multiplicity, "residual": self.residual,
                "refine_iters": self.refine_iters, "status": self.status}


def _newton(logf, z0, m=1, max_iter=50, box=None):
    """Newton on g = exp(log f - Re log f(z0)).

    The derivative is the 4-point Richardson combination of central
    differences with steps h and h/2, h = 1e-6 max(1, |z|); the five samples
    of one iteration are evaluated as a single batch.
    """
    ref = float(logf(np.array([z0]))[0].real)
    if not np.isfinite(ref):
        return z0, 0, True
    z = complex(z0)
    step = np.inf
    for it in range(1, max_iter + 1):
        h = 1e-6 * max(1.0, abs(z))
        pts = np.array([z, z + h, z - h, z + h / 2, z - h / 2])
        with np.errstate(over="ignore", invalid="ignore"):
            g = np.exp(logf(pts) - ref)
        if g[0] == 0:
            return z, it, True
        d1 = (g[1] - g[2]) / (2 * h)
        d2 = (g[3] - g[4]) / h
        dg = (4 * d2 - d1) / 3
        if dg == 0 or not np.isfinite(dg):
            return z, it, False
        step = m * g[0] / dg
        z_new = z - step
        if box is not None:
            x0, x1, y0, y1 = box
            w = max(x1 - x0, y1 - y0)
            if not (x0 - w <= z_new.real <= x1 + w and y0 - w <= z_new.imag <= y1 + w):
                return z_new, it, False
        z = z_new
        # rescale so that g stays O(1) near the root
        ref = float(logf(np.array([z]))[0].real)
        if not np.isfinite(ref):
            return z, it, True
        if abs(step) <= 1e-13 * max(1.0, abs(z)):
            return z, it, True
    return z, max_iter, abs(step) <= 1e-9 * max(1.0, abs(z))


def _box_contour(box, n0=32, density=0.0):
    x0, x1, y0, y1 = box
    n = max(n0, int(math.ceil(2 * ((x1 - x0) + (y1 - y0)) * density)))
    return Contour.rectangle(*box, n0=n)


def _in_box(z, box, slack=1e-9):
    x0, x1, y0, y1 = box
    s = slack * max(1.0, abs(z))
    return x0 - s <= z.real <= x1 + s and y0 - s <= z.imag <= y1 + s


def locate_zeros(f, region, opts=None):
    """Zeros of an analytic function inside a rectangle.

    Parameters
    ----------
    f : callable
        Vectorised log f (complex logarithm of the analytic function).
    region : tuple
        (x0, x1, y0, y1).
    opts : dict, optional
        ``min_size`` (box edge at which subdivision stops), ``n0`` (minimal
        initial samples per box contour), ``density`` (initial samples per
        unit contour length; should exceed the phase rate of f divided by
        pi/2), ``max_boxes``.

    Returns
    -------
    list of dict
        Items with ``xi``, ``multiplicity``, ``iters``, ``converged``.
    """
    opts = dict(opts or {})
    x0, x1, y0, y1 = region
    size0 = max(x1 - x0, y1 - y0)
    min_size = opts.get("min_size", 1e-4 * max(1.0, size0))
    n0 = opts.get("n0", 32)
    density = opts.get("density", 8.0)
    max_boxes = opts.get("max_boxes", 4000)
    found = []
    stack = [(tuple(region), None, False)]
    boxes = 0
    while stack:
        box, count, boosted = stack.pop()
        boxes += 1
        if boxes > max_boxes:
            raise RuntimeError("zero search exceeded the box budget")
        if count is None:
            count = winding_count(f, _box_contour(box, n0, density), log=True)
        if count == 0:
            continue
        bx0, bx1, by0, by1 = box
        size = max(bx1 - bx0, by1 - by0)
        if count == 1 or size < min_size:
            c = complex(0.5 * (bx0 + bx1), 0.5 * (by0 + by1))
            z, it, ok = _newton(f, c, m=count, box=box)
            if ok and _in_box(z, box):
                # the box count can be off for clustered zeros; a tight circle
                # fixes the multiplicity
                m = _tight_multiplicity(f, z, region, count)
                found.append({"xi": z, "multiplicity": m, "iters": it, "converged": True})
                continue
            if ok and not boosted:
                # Newton left the box: an even-order zero grazing an edge can
                # hide from the phase test, so recount with dense sampling
                dense = winding_count(f, _box_contour(box, 16 * n0, 16 * density), log=True)
                if dense != count:
                    stack.append((box, dense, True))
                    continue
            if size < min_size:
                found.append({"xi": z if _in_box(z, box) else c, "multiplicity": count,
                              "iters": it, "converged": False})
                continue
        stack.extend((k, n, False) for k, n in _quarter(f, box, count, n0, density))
    return found


def _quarter(f, box, count, n0, density):
    """Four sub-boxes with their counts.

    The split point is nudged when a child contour hits a zero or when the
    child counts do not add up to the parent count (a zero grazing a shared
    edge can be seen by two children).  If no split balances, parent and
    children are recounted with denser initial sampling.
    """
    x0, x1, y0, y1 = box
    for boost in (1, 4, 16):
        n, dens = n0 * boost, density * boost
        if boost > 1:
            count = winding_count(f, _box_contour(box, n, dens), log=True)
        for shift in (0.0, 0.0137, -0.0211, 0.0293, -0.0371):
            xm = x0 + (0.5 + shift) * (x1 - x0)
            ym = y0 + (0.5 - shift) * (y1 - y0)
            kids = [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]
            try:
                counts = [winding_count(f, _box_contour(k, n, dens), log=True) for k in kids]
            except ContourNearZeroError:
                continue
            if sum(counts) == count:
                return list(zip(kids, counts))
    raise ContourNearZeroError("could not place sub-box contours away from zeros")


# ---------------------------------------------------------------------------
# catalog


@dataclass
class ResonanceCatalog:
    entries: list
    search_region: list
    profile_hash: str
    omega: float = 1.0
    H: float = 0.0
    failures: list = field(default_factory=list)

    def to_dict(self, tool_version="0.1.0"):
        return {"profile_hash": self.profile_hash, "omega": self.omega, "H": self.H,
                "entries": [e.to_dict() for e in self.entries],
                "search_regions": self.search_region, "failures": self.failures,
                "tool_version": tool_version}

    def on_sheet(self, sheet):
        s = str(parse_sheet(sheet))
        return [e for e in self.entries if e.sheet == s]

    @property
    def bound_states(self):
        return self.on_sheet("++")


def _sort_key(e: ResonanceEntry):
    return (e.sheet, round(abs(e.xi), 12), round(math.atan2(e.xi.imag, e.xi.real), 12))


def default_workers():
    try:
        return max(1, int(os.environ.get("RAYLEIGH_WORKERS", "1")))
    except ValueError:
        return 1


def _search_piece(args):
    p, sheet, piece, tol, opts = args
    opts = dict(opts or {})
    # Delta has exponential type at most 4H in xi: about 4H/(pi/2) phase
    # samples per unit length, doubled for safety
    opts.setdefault("density", max(4.0, 16.0 * p.H / math.pi))
    f = sheet_log_delta(p, sheet, tol)
    raw = locate_zeros(f, piece, opts)
    out = []
    rexc = _excision_radius(p)
    for item in raw:
        z = item["xi"]
        status = "ok" if item["converged"] else "newton-not-converged"
        if any(abs(z - b) < rexc for b in _branch_points(p)):
            status = "unresolved near branch point"
        try:
            res = _relative_residual(p, z, sheet, tol)
        except BranchPointError:
            res, status = float("nan"), "unresolved near branch point"
        out.append(ResonanceEntry(complex(z), str(sheet), item["multiplicity"], res,
                                  item["iters"], status))
    return out


def _tight_multiplicity(f, z, piece, fallback):
    """Winding count on a small circle about z inside ``piece``."""
    x0, x1, y0, y1 = piece
    dist = min(z.real - x0, x1 - z.real, z.imag - y0, y1 - z.imag)
    rho = min(1e-4 * max(1.0, abs(z)), 0.5 * dist)
    if rho <= 1e-10 * max(1.0, abs(z)):
        return fallback
    try:
        m = winding_count(f, Contour.circle(z, rho, 32), log=True)
    except ContourNearZeroError:
        return fallback
    return m if m >= 1 else fallback


def resonance_search(p: MediumProfile, regions, opts=None, tol=SEARCH_TOL, workers=None,
                     residual_threshold=RESIDUAL_THRESHOLD) -> ResonanceCatalog:
    """Zeros of Delta over the requested regions of each sheet.

    Parameters
    ----------
    regions : dict
        Sheet label -> list of rectangles (x0, x1, y0, y1).  Rectangles are
        split at the cuts before the search.
    """
    jobs = []
    record = []
    for sheet, rects in regions.items():
        sh = parse_sheet(sheet)
        for rect in rects:
            record.append({"sheet": str(sh), "region": [float(v) for v in rect]})
            for piece in split_region(p, rect):
                jobs.append((p, sh, piece, tol, opts))
    workers = default_workers() if workers is None else workers
    results = []
    failures = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_search_piece, j) for j in jobs]
            for j, fu in zip(jobs, futs):
                try:
                    results.extend(fu.result())
                except Exception as exc:  # recorded per region, not fatal
                    failures.append({"sheet": str(j[1]), "piece": list(j[2]), "error": str(exc)})
    else:
        for j in jobs:
            try:
                results.extend(_search_piece(j))
            except Exception as exc:
                failures.append({"sheet": str(j[1]), "piece": list(j[2]), "error": str(exc)})
    entries = []
    for e in sorted(results, key=_sort_key):
        if e.status == "ok" and not (e.residual <= residual_threshold):
            e.status = "residual above threshold"
        dup = any(o.sheet == e.sheet and abs(o.xi - e.xi) <= 1e-8 * max(1.0, abs(e.xi))
                  for o in entries)
        if not dup:
            entries.append(e)
    return ResonanceCatalog(entries, record, p.profile_hash, p.omega, p.H, failures)


# ---------------------------------------------------------------------------
# counting


@dataclass
class CountingTable:
    radii: list
    counts: list
    slope_fit: float
    reference_slope: float
    n_upper: int | None = None
    n_lower: int | None = None
    split_radius: float | None = None
    samples: list = field(default_factory=list)

    @property
    def slope_ratio(self):
        return self.slope_fit / self.reference_slope if self.reference_slope else float("nan")

    @property
    def balance(self):
        """|N+ - N-| / max(N+, N-) at the split radius."""
        if not self.n_upper and not self.n_lower:
            return float("nan")
        return abs(self.n_upper - self.n_lower) / max(self.n_upper, self.n_lower)

    def to_dict(self):
        return {"radii": self.radii, "counts": self.counts, "slope_fit": self.slope_fit,
                "reference_slope": self.reference_slope, "slope_ratio": self.slope_ratio,
                "n_upper": self.n_upper, "n_lower": self.n_lower,
                "split_radius": self.split_radius, "samples": self.samples}


def _counting_f(p, tol):
    return lambda z: log_F_direct(p, z, tol)


def _circle_count(p, r, tol, adapt_tol, retries=5):
    f = _counting_f(p, tol)
    n0 = max(64, int(8 * 16 * max(p.H, 0.25) * r / math.pi))
    rr = r
    for _ in range(retries + 1):
        try:
            n, used = winding_count(f, Contour.circle(0.0, rr, n0), adapt_tol=adapt_tol,
                                    log=True, return_samples=True)
            return n, used, rr
        except (ContourNearZeroError, BranchPointError):
            rr *= 1.005
    raise ContourNearZeroError(f"circle of radius {r} stays near zeros of F")


def counting_function(p: MediumProfile, radii, tol=1e-10, adapt_tol=math.pi / 4,
                      split=True) -> CountingTable:
    """N(r, F) for increasing radii, least-squares slope and half-plane split.

    Zeros of F(-i z) in |z| < r are the zeros of F in |xi| < r; the upper
    z half plane corresponds to Re xi > 0.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] <= 0:
        raise ValueError("radii must be positive and increasing")
    counts, samples, used_r = [], [], []
    for r in radii:
        n, used, rr = _circle_count(p, r, tol, adapt_tol)
        counts.append(n)
        samples.append(used)
        used_r.append(rr)
    half = used_r[len(used_r) // 2:] if len(used_r) > 1 else used_r
    ch = counts[len(counts) // 2:] if len(counts) > 1 else counts
    slope = float(np.polyfit(half, ch, 1)[0]) if len(half) > 1 else counts[0] / used_r[0]
    table = CountingTable(used_r, counts, slope, 16.0 * p.H / math.pi, samples=samples)
    if split:
        f = _counting_f(p, tol)
        r = used_r[-1]
        n0 = max(64, int(4 * 16 * max(p.H, 0.25) * r / math.pi))
        table.n_upper = winding_count(f, Contour.half_disk(r, +1, n0=n0), adapt_tol=adapt_tol,
                                      log=True)
        table.n_lower = winding_count(f, Contour.half_disk(r, -1, n0=n0), adapt_tol=adapt_tol,
                                      log=True)
        table.split_radius = r
    return table


# ---------------------------------------------------------------------------
# distribution diagnostics


def distribution_diagnostics(catalog: ResonanceCatalog, p: MediumProfile, delta=0.25,
                             im_min=5.0):
    """Sum condition, forbidden-region fit and sector concentration.

    Returns a report dict; nothing here is asserted, the fitted constants
    are diagnostics.
    """
    xs = np.array([e.xi for e in catalog.entries if e.status == "ok"], dtype=complex)
    if xs.size == 0:
        raise ValueError("catalog has no resolved entries")
    order = np.argsort(np.abs(xs))
    xs = xs[order]
    terms = np.abs(xs.imag) / np.abs(xs) ** 2
    partial = np.cumsum(terms)
    n = np.arange(1, xs.size + 1)
    trend = float(np.polyfit(np.log(n), np.log(partial + 1e-300), 1)[0]) if xs.size > 2 else float("nan")
    slope_ref = 7.0 / (4.0 * p.H) if p.H > 0 else float("inf")
    left = xs[(xs.real < 0) & (np.abs(xs.imag) >= im_min)]
    forb = {"reference_slope": slope_ref, "n_eligible": int(left.size)}
    if left.size and np.isfinite(slope_ref):
        A_n = -left.real - slope_ref * np.log(np.abs(left.imag))
        # smallest A keeping every eligible entry on the left, clipped at 0
        A_min = float(np.min(A_n))
        A = max(0.0, A_min)
        bad = A_n < A
        bound = -A - slope_ref * np.log(np.abs(left.imag))
        ok_left = left.real[~bad] <= bound[~bad] + 1e-12
        forb.update({"A_fit": A, "A_unconstrained": A_min,
                     "all_left_of_curve": bool(not np.any(bad)),
                     "violations": [[float(z.real), float(z.imag)] for z in left[bad]],
                     "consistent": bool(A >= 0.0 and np.all(ok_left)
                                        and int(bad.sum()) + int(ok_left.sum()) == left.size)})
        if np.unique(np.abs(left.imag)).size >= 2:
            fit = np.polyfit(np.log(np.abs(left.imag)), np.abs(left.real), 1)
            forb["log_curve_slope"] = float(fit[0])
    # sector concentration about the imaginary xi axis (real z axis)
    ang = np.abs(np.angle(1j * xs))
    ang = np.minimum(ang, math.pi - ang)
    outside = ang >= delta
    rs = np.abs(xs)
    edges = np.unique(np.quantile(rs, np.linspace(0, 1, min(5, xs.size) + 1)))
    frac = []
    for a, b in zip(edges, edges[1:]):
        m = (rs >= a) & (rs <= b)
        if np.any(m):
            frac.append({"r_min": float(a), "r_max": float(b), "fraction_outside": float(outside[m].mean())})
    return {
        "n_entries": int(xs.size),
        "sum_condition": {"partial_sums": partial.tolist(), "loglog_growth": trend},
        "forbidden_region": forb,
        "sectors": {"delta": delta, "bins": frac},
    }
