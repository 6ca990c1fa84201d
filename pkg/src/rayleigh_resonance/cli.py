"""Command-line front end: profile ingestion, batch runs and file outputs.

Every command reads a medium profile (``--config``), writes its artifacts
into ``--out-dir`` and prints a short JSON summary on stdout.  JSON files
carry ``schema_version`` and ``profile_hash``; floats are written with 17
significant digits so identical inputs give byte-identical files.

Exit codes
----------
0  success
1  the command ran but a checked defect exceeded its threshold
2  usage error (bad flags or values)
3  profile/config error (missing file, invalid TOML, failed validation)
4  numerical or module error
5  output could not be written
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .medium import MediumProfile, ProfileError, load_profile_file, validate_profile
from .riemann import SHEETS, Rim, SheetPoint, parse_sheet, sample_points

__all__ = ["RunConfig", "run_command", "main", "dumps", "EXIT_CODES", "SCHEMA_VERSION"]

SCHEMA_VERSION = "1.0"
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5
EXIT_CODES = {
    "ok": EXIT_OK,
    "check_failed": EXIT_CHECK_FAILED,
    "usage": EXIT_USAGE,
    "config": EXIT_CONFIG,
    "numerical": EXIT_NUMERICAL,
    "io": EXIT_IO,
}
COMMANDS = ("validate", "det-map", "resonances", "identities", "scattering", "greens",
            "counting", "cross-check")


class UsageError(Exception):
    """Invalid command line."""


# ---------------------------------------------------------------- serialisation

def _fmt_float(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _plain(obj):
    """Map numpy and complex values onto JSON-compatible Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, Rim):
        return obj.name.lower()
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _emit(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_emit(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_emit(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _emit(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, float):
        return _fmt_float(obj)
    return json.dumps(obj)


def dumps(obj, indent=2):
    """JSON text with every float in fixed 17-significant-digit form."""
    return _emit(_plain(obj), indent, 0) + "\n"


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([(_fmt_float(v) if math.isfinite(v) else "nan")
                    if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------- configuration

@dataclass
class RunConfig:
    """Resolved command-line run."""

    profile_path: Path
    command: str
    sheets: list
    out_dir: Path
    workers: int
    tol: float | None = None
    seed: int = 0
    params: dict = field(default_factory=dict)


_SHEET_ALIASES = {"pp": "++", "pm": "+-", "mp": "-+", "mm": "--"}


def _sheet_arg(s):
    """Sheet label; ``pp``/``pm``/``mp``/``mm`` spell the signs without dashes."""
    if s == "all":
        return "all"
    s = _SHEET_ALIASES.get(s.lower(), s)
    try:
        return str(parse_sheet(s))
    except (ValueError, TypeError):
        raise argparse.ArgumentTypeError(f"invalid sheet {s!r}; use ++, +-, -+, -- or all")


def _positive_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}")
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {s!r}")
    return v


def _finite_float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}")
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not finite: {s!r}")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    parser = _Parser(prog="rayleigh-resonance",
                     description="Wavenumber resonances of the Rayleigh system.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, sheets=False):
        sp.add_argument("--config", required=True, help="medium profile (TOML)")
        sp.add_argument("--out-dir", default=".", help="directory for output files")
        sp.add_argument("--tol", type=_finite_float, default=None,
                        help="integration tolerance (module default if omitted)")
        sp.add_argument("--workers", type=_positive_int, default=None,
                        help="worker processes (default: RAYLEIGH_WORKERS or 1)")
        sp.add_argument("--seed", type=int, default=0, help="seed for sampled points")
        if sheets:
            sp.add_argument("--sheet", type=_sheet_arg, action="append", default=None,
                            help="sheet label ++, +-, --sheet=-+, or pp, pm, mp, mm (use mm for --); "
                                 "repeatable; 'all' is the default")

    sp = sub.add_parser("validate", help="validate a profile")
    common(sp)
    sp.add_argument("--samples", type=_positive_int, default=401)

    sp = sub.add_parser("det-map", help="CSV grid of Delta per sheet")
    common(sp, sheets=True)
    sp.add_argument("--grid", type=_finite_float, nargs=4, metavar=("X0", "X1", "Y0", "Y1"),
                    default=[-3.0, 3.0, -2.0, 2.0])
    sp.add_argument("--n", type=_positive_int, nargs=2, metavar=("NX", "NY"), default=[61, 41])
    sp.add_argument("--rim", choices=("upper", "lower"), default="upper")

    sp = sub.add_parser("resonances", help="resonance catalog")
    common(sp, sheets=True)
    sp.add_argument("--region", type=_finite_float, nargs=4, action="append",
                    metavar=("X0", "X1", "Y0", "Y1"), default=None)
    sp.add_argument("--min-size", type=_finite_float, default=None)
    sp.add_argument("--residual-threshold", type=_finite_float, default=1e-8)

    sp = sub.add_parser("identities", help="boundary identity suite")
    common(sp, sheets=True)
    sp.add_argument("--samples", type=_positive_int, default=200, help="points per sheet")
    sp.add_argument("--threshold", type=_finite_float, default=1e-6)

    sp = sub.add_parser("scattering", help="unitarity identities")
    common(sp)
    sp.add_argument("--cut-samples", type=int, default=50)
    sp.add_argument("--band-samples", type=int, default=50)
    sp.add_argument("--threshold", type=_finite_float, default=1e-6)

    sp = sub.add_parser("greens", help="Green's kernel grid and diagnostics")
    common(sp, sheets=True)
    sp.add_argument("--xi", type=_finite_float, nargs=2, metavar=("RE", "IM"), default=[0.7, 0.3])
    sp.add_argument("--depth", type=_finite_float, nargs=2, metavar=("Z0", "Z1"),
                    default=[-2.0, -0.1])
    sp.add_argument("--n", type=_positive_int, default=12)
    sp.add_argument("--resonance", type=_finite_float, nargs=2, metavar=("RE", "IM"),
                    default=None, help="resonance for the pole scan (same sheet)")

    sp = sub.add_parser("counting", help="zero counting of F")
    common(sp)
    sp.add_argument("--radii", type=_finite_float, nargs="+",
                    default=[10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0])
    sp.add_argument("--no-split", action="store_true", help="skip the half-plane split")

    sp = sub.add_parser("cross-check", help="direct vs Markushevich boundary matrix")
    common(sp, sheets=True)
    sp.add_argument("--samples", type=_positive_int, default=13, help="points per sheet")
    sp.add_argument("--threshold", type=_finite_float, default=1e-6)
    return parser


def _resolve(args) -> RunConfig:
    path = Path(args.config)
    sheets = getattr(args, "sheet", None)
    if sheets and any(not isinstance(v, str) for v in sheets):
        # argparse swallows a bare "--" value
        raise UsageError("--sheet: write the -- sheet as 'mm'")
    if not sheets or "all" in sheets:
        sheets = [str(s) for s in SHEETS]
    else:
        sheets = list(dict.fromkeys(sheets))
    if args.workers is not None:
        workers = args.workers
    else:
        from .resonance import default_workers
        workers = default_workers()
    skip = {"config", "out_dir", "tol", "workers", "seed", "sheet", "command"}
    params = {k: v for k, v in vars(args).items() if k not in skip}
    return RunConfig(path, args.command, sheets, Path(args.out_dir), workers, args.tol,
                     args.seed, params)


# ---------------------------------------------------------------- commands

def _header(cfg: RunConfig, p: MediumProfile):
    return {"schema_version": SCHEMA_VERSION, "tool_version": __version__,
            "command": cfg.command, "profile_hash": p.profile_hash}


def _tol_kw(cfg):
    return {} if cfg.tol is None else {"tol": cfg.tol}


def _cmd_validate(cfg, p):
    rep = validate_profile(p, n_samples=cfg.params["samples"])
    d = {**_header(cfg, p), "report": rep.to_dict()}
    lines = [f"profile: {cfg.profile_path}", f"profile_hash: {p.profile_hash}",
             f"passed: {rep.passed}",
             f"mu_min: {rep.mu_min:.6g} at Z = {rep.mu_min_at:.6g}",
             f"ellipticity_min: {rep.ellipticity_min:.6g} at Z = {rep.ellipticity_min_at:.6g}"]
    lines += [f"tail {k}: {v:.3g}" for k, v in rep.tail_defects.items()]
    lines += [f"violation: {v}" for v in rep.violations]
    return {"validation.json": dumps(d), "validation.txt": "\n".join(lines) + "\n"}, \
        rep.passed, {"passed": rep.passed}


def _det_rows(args):
    p, sheet, xs, y, rim, tol_kw = args
    from .boundary import delta_direct
    xi = xs + 1j * y
    bad = np.abs(xi) < 1e-12
    for k in (p.kP, p.kS):
        bad |= np.minimum(np.abs(xi - k), np.abs(xi + k)) < 1e-9 * max(1.0, k)
    vals = np.full(xi.shape, np.nan + 1j * np.nan)
    if np.any(~bad):
        vals[~bad] = delta_direct(p, xi[~bad], sheet, rim, **tol_kw)
    return [(float(z.real), float(z.imag), sheet, float(v.real), float(v.imag), float(abs(v)))
            for z, v in zip(xi, vals)]


def _map(func, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(func, jobs))
    return [func(j) for j in jobs]


def _cmd_det_map(cfg, p):
    x0, x1, y0, y1 = cfg.params["grid"]
    nx, ny = cfg.params["n"]
    rim = Rim.UPPER if cfg.params["rim"] == "upper" else Rim.LOWER
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    jobs = [(p, s, xs, float(y), rim, _tol_kw(cfg)) for s in cfg.sheets for y in ys]
    rows = [r for chunk in _map(_det_rows, jobs, cfg.workers) for r in chunk]
    text = _csv_text(["re_xi", "im_xi", "sheet", "re_delta", "im_delta", "abs_delta"], rows)
    meta = {**_header(cfg, p), "grid": [x0, x1, y0, y1], "n": [nx, ny], "rim": rim,
            "sheets": cfg.sheets, "file": "det_map.csv"}
    return {"det_map.csv": text, "det_map.json": dumps(meta)}, True, {"points": len(rows)}


def _cmd_resonances(cfg, p):
    from .resonance import resonance_search
    regions = cfg.params["region"] or [[-3.0, 3.0, -3.0, 3.0]]
    opts = {}
    if cfg.params["min_size"] is not None:
        opts["min_size"] = cfg.params["min_size"]
    kw = {"tol": cfg.tol} if cfg.tol is not None else {}
    cat = resonance_search(p, {s: regions for s in cfg.sheets}, opts, workers=cfg.workers,
                           residual_threshold=cfg.params["residual_threshold"], **kw)
    d = {"schema_version": SCHEMA_VERSION, "command": cfg.command,
         **cat.to_dict(tool_version=__version__)}
    return {"catalog.json": dumps(d)}, True, {"entries": len(cat.entries),
                                              "failures": len(cat.failures)}


def _cmd_identities(cfg, p):
    from .boundary import boundary_identity_suite
    pts = sample_points(p, cfg.params["samples"], cfg.seed, sheets=cfg.sheets)
    rep = boundary_identity_suite(p, pts, threshold=cfg.params["threshold"], **_tol_kw(cfg))
    d = {**_header(cfg, p), "seed": cfg.seed, "samples_per_sheet": cfg.params["samples"],
         "sheets": cfg.sheets, **rep.to_dict()}
    return {"identities.json": dumps(d)}, rep.passed, {"passed": rep.passed,
                                                       "max_defect": rep.max_defect}


def scattering_samples(p: MediumProfile, n_cut, n_band, seed, clearance=1e-3):
    """Seeded points on the P cut (-kP, kP) and on the band kP < |xi| < kS."""
    rng = np.random.default_rng(seed)
    cut = rng.uniform(-p.kP + clearance, p.kP - clearance, n_cut)
    cut[np.abs(cut) < clearance] = clearance
    mag = rng.uniform(p.kP + clearance, p.kS - clearance, n_band)
    band = mag * rng.choice([-1.0, 1.0], n_band)
    return cut, band


def _cmd_scattering(cfg, p):
    from .scattering import scattering_identity_suite
    cut, band = scattering_samples(p, cfg.params["cut_samples"], cfg.params["band_samples"],
                                   cfg.seed)
    rep = scattering_identity_suite(p, cut, band, threshold=cfg.params["threshold"],
                                    **_tol_kw(cfg))
    d = {**_header(cfg, p), "seed": cfg.seed, **rep.to_dict()}
    return {"scattering.json": dumps(d)}, rep.passed, {"passed": rep.passed,
                                                       "max_defect": rep.max_defect}


def _cmd_greens(cfg, p):
    from .greens import greens_diagnostics, greens_matrix
    if len(cfg.sheets) != 1:
        raise UsageError("greens needs exactly one --sheet")
    sheet = cfg.sheets[0]
    pt = SheetPoint(complex(*cfg.params["xi"]), sheet, Rim.UPPER)
    z0, z1 = cfg.params["depth"]
    if not (z0 < z1 < 0):
        raise UsageError("--depth needs Z0 < Z1 < 0")
    Zs = np.linspace(z0, z1, cfg.params["n"])
    G = greens_matrix(p, pt, Zs, Zs, **_tol_kw(cfg))
    rows = []
    for a, Z in enumerate(Zs):
        for b, Zp in enumerate(Zs):
            v = G[a, b].ravel() if a != b else np.full(4, complex(np.nan, np.nan))
            parts = [float(x) for c in v for x in (c.real, c.imag)]
            rows.append((float(Z), float(Zp), sheet, *parts))
    comps = [f"G{i}{j}_{k}" for i in (1, 2) for j in (1, 2) for k in ("re", "im")]
    text = _csv_text(["Z", "Zprime", "sheet", *comps], rows)
    pairs = [(float(Zs[a]), float(Zs[b])) for a in range(len(Zs)) for b in range(len(Zs))
             if abs(Zs[a] - Zs[b]) >= 1e-2 and max(Zs[a], Zs[b]) < -1e-2]
    step = max(1, len(pairs) // 8)
    grid = pairs[::step][:8]
    res = cfg.params["resonance"]
    rpt = SheetPoint(complex(*res), sheet, Rim.UPPER) if res is not None else None
    rep = greens_diagnostics(p, pt, grid, resonance=rpt, **_tol_kw(cfg))
    d = {**_header(cfg, p), "xi": pt.xi, "sheet": sheet, "grid_pairs": grid, **rep.to_dict()}
    return {"greens_kernel.csv": text, "greens_diagnostics.json": dumps(d)}, True, \
        {"jump_defect": rep.jump_defect, "pole_exponent": rep.pole_exponent}


def _cmd_counting(cfg, p):
    from .resonance import counting_function
    radii = sorted(cfg.params["radii"])
    if radii[0] <= 0:
        raise UsageError("--radii must be positive")
    kw = {"tol": cfg.tol} if cfg.tol is not None else {}
    tab = counting_function(p, radii, split=not cfg.params["no_split"], **kw)
    rows = [(float(r), int(n), float(tab.slope_fit)) for r, n in zip(tab.radii, tab.counts)]
    d = {**_header(cfg, p), **tab.to_dict(), "slope_ratio": tab.slope_ratio,
         "balance": tab.balance if tab.n_upper is not None else None}
    return {"counting.csv": _csv_text(["r", "N", "slope_fit"], rows), "counting.json": dumps(d)}, \
        True, {"slope_ratio": tab.slope_ratio}


def _cross_point(args):
    p, pt = args
    from .boundary import boundary_matrix_and_delta
    from .markushevich import jost_function_and_bridge
    Bd, _ = boundary_matrix_and_delta(p, pt)
    _, Bm = jost_function_and_bridge(p, pt)
    num = float(np.linalg.norm(Bm.entries - Bd.entries))
    return num / float(np.linalg.norm(Bd.entries)), abs(Bm.det - Bd.det) / abs(Bd.det)


def _cmd_cross_check(cfg, p):
    from .markushevich import gauge_values, kernel_abc
    if p.H <= 0:
        raise ProfileError("cross-check needs a slab (H > 0)")
    pts = sample_points(p, cfg.params["samples"], cfg.seed, sheets=cfg.sheets, cut_fraction=0.0)
    res = _map(_cross_point, [(p, pt) for pt in pts], cfg.workers)
    defects = np.array([r[0] for r in res])
    ddef = np.array([r[1] for r in res])
    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(0, 3 * p.H, 200)
    y = rng.uniform(0, 3 * p.H, 200)
    A, B, C = kernel_abc(p, x, y)
    ident = A + B + C * ((y - x) * p.c0 / (2 * p.mu0))[:, None, None] - np.eye(2)
    G = gauge_values(p, np.linspace(0, p.H, 401))
    drift = float(np.max(np.abs(np.linalg.det(G) - 1.0)))
    checks = {"bridge_B": float(defects.max()), "bridge_delta": float(ddef.max()),
              "kernel_abc": float(np.max(np.abs(ident))), "detG_drift": drift}
    limits = {"bridge_B": cfg.params["threshold"], "bridge_delta": cfg.params["threshold"],
              "kernel_abc": 1e-12, "detG_drift": 1e-10}
    passed = all(checks[k] <= limits[k] for k in checks)
    d = {**_header(cfg, p), "seed": cfg.seed, "n_points": len(pts), "defects": checks,
         "thresholds": limits, "passed": passed,
         "points": [{"xi": pt.xi, "sheet": str(pt.sheet), "defect": float(e)}
                    for pt, e in zip(pts, defects)]}
    return {"cross_check.json": dumps(d)}, passed, {"passed": passed, **checks}


_HANDLERS = {
    "validate": _cmd_validate,
    "det-map": _cmd_det_map,
    "resonances": _cmd_resonances,
    "identities": _cmd_identities,
    "scattering": _cmd_scattering,
    "greens": _cmd_greens,
    "counting": _cmd_counting,
    "cross-check": _cmd_cross_check,
}


# ---------------------------------------------------------------- entry points

def _error(command, kind, exc, code, stream):
    d = {"schema_version": SCHEMA_VERSION, "command": command,
         "error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)},
         "exit_code": code}
    stream.write(dumps(d))
    return code


def run_command(argv, stdout=None) -> int:
    """Run one CLI command; returns the exit status."""
    out = sys.stdout if stdout is None else stdout
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        cfg = _resolve(args)
    except UsageError as exc:
        return _error(command, "usage", exc, EXIT_USAGE, out)
    try:
        p = load_profile_file(cfg.profile_path)
        if cfg.command != "validate":
            rep = validate_profile(p)
            if not rep.passed:
                raise ProfileError("profile failed validation: " + "; ".join(map(str, rep.violations)))
    except (ProfileError, OSError) as exc:
        return _error(command, "config", exc, EXIT_CONFIG, out)
    try:
        files, passed, summary = _HANDLERS[cfg.command](cfg, p)
    except UsageError as exc:
        return _error(command, "usage", exc, EXIT_USAGE, out)
    except ProfileError as exc:
        return _error(command, "config", exc, EXIT_CONFIG, out)
    except Exception as exc:  # module errors are reported, not raised
        return _error(command, "numerical", exc, EXIT_NUMERICAL, out)
    try:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (cfg.out_dir / name).write_text(text)
    except OSError as exc:
        return _error(command, "io", exc, EXIT_IO, out)
    code = EXIT_OK if passed else EXIT_CHECK_FAILED
    out.write(dumps({"schema_version": SCHEMA_VERSION, "command": command,
                     "profile_hash": p.profile_hash, "passed": bool(passed),
                     "outputs": [str(cfg.out_dir / n) for n in files], **summary,
                     "exit_code": code}))
    return code


def main(argv=None):
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
