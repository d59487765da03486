"""Command-line front end.

Exit codes: 0 success, 1 computation-level failure (certificate failed, no
convergence, ...), 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CertificateFailed, ComputationError
from .geometry import (CrystalSpec, InclusionShape, Lattice, brillouin_fractional, shape_from_dict,
                       spec_from_dict, spec_to_dict, validate_crystal_spec)
from .io import write_csv, write_json
from .parallel import resolve_jobs

EPILOG = {
    "design": "outputs: crystal.json (CrystalSpec), design_report.json",
    "selfenergy": "outputs: selfenergy.json",
    "edges": "outputs: edges.json",
    "gfun": "outputs: gfun.csv with columns E, theta1, theta2, g, dg_dE",
    "bands": ("outputs: bands_<kind>.csv with columns theta_index, s1, s2, band, value, err\n"
              "(s1, s2 fractional quasi-momentum; err = |fine - coarse| mesh difference),\n"
              "bands_<kind>.json, bands_<kind>.png and plot_bands_<kind>.py"),
    "gaps": "outputs: gaps.json (error-inflated gaps of the sampled spectrum)",
    "certify-tm": "outputs: certificate_r<r>.json per r in --r-list",
    "overlap-te": "outputs: overlap_te.json",
    "converge": ("outputs: converge.csv with columns r, inv_log_r, resolvent_error, F_error, C_error,\n"
                 "fitted_kappa (first entry of run.shells), converge_M<M>.csv for the others,\n"
                 "converge.json and converge.png"),
}

HELP = {
    "design": "inverse design of a crystal from target values",
    "selfenergy": "log self-energy C of an inclusion shape",
    "edges": "band edges E0, E1, E2 of a point-interaction model",
    "gfun": "regularised lattice sum g(E, theta) and its E-derivative",
    "bands": "Bloch band functions on the Brillouin grid",
    "gaps": "gaps of the sampled band structure",
    "certify-tm": "certify that the targets lie in TM gaps",
    "overlap-te": "check the TE band overlap (no gaps below b_{n0})",
    "converge": "convergence of the finite-inclusion resolvent to its point limit",
}

RUN_KEYS = {
    "bands": {"kind", "lam", "r"},
    "gaps": {"kind", "lam", "r", "lo", "hi"},
    "certify-tm": {"aux_slack"},
    "overlap-te": {"n0", "r"},
    "converge": {"n", "nu", "shells", "order", "corrected", "f"},
}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    input: str | None
    out: str
    jobs: int | None = None
    grid: int = 9
    mesh: int = 64
    levels: int = 3
    tol: float = 1e-10
    r_list: list | None = None
    bands: int = 8
    options: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        d = asdict(self)
        d["version"] = __version__
        return d


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bandgap-forge", description="Gap design and verification for "
                                "high-contrast photonic crystals.",
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name in HELP:
        s = sub.add_parser(name, help=HELP[name], description=HELP[name], epilog=EPILOG[name],
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        s.add_argument("--in", dest="input", required=name != "selfenergy" or False,
                       help="input JSON file")
        s.add_argument("--out", default="out", help="output directory (default: out)")
        s.add_argument("--jobs", type=int, default=None,
                       help="worker processes (default: $BANDGAP_FORGE_JOBS or 1)")
        s.add_argument("--grid", type=int, default=9, help="Brillouin grid size m (m x m midpoints)")
        s.add_argument("--mesh", type=int, default=64, help="base cells per lattice direction")
        s.add_argument("--tol", type=float, default=1e-10, help="root / lattice-sum tolerance")
        s.add_argument("--r-list", default=None, help="comma-separated scales r")
        s.add_argument("--bands", type=int, default=8, help="number of band functions")
    return p


def _parse_r_list(text):
    if text is None:
        return None
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--r-list: {exc}") from exc
    if not vals:
        raise UsageError("--r-list is empty")
    return vals


def _validate(cfg: RunConfig):
    if cfg.jobs is not None and cfg.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if cfg.grid < 1:
        raise UsageError("--grid must be >= 1")
    if cfg.mesh < 4 or cfg.mesh % 2:
        raise UsageError("--mesh must be an even number >= 4")
    if not 0 < cfg.tol < 1:
        raise UsageError("--tol must lie in (0, 1)")
    if cfg.bands < 1:
        raise UsageError("--bands must be >= 1")
    if cfg.r_list is not None and any(not 0 < r < 1 for r in cfg.r_list):
        raise UsageError("every r in --r-list must lie in (0, 1)")


def _load(cfg: RunConfig) -> dict:
    if cfg.input is None:
        raise UsageError("--in is required")
    try:
        with open(cfg.input) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"input file not found: {cfg.input}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON in {cfg.input}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("input JSON must be an object")
    return data


def _check_keys(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise UsageError(f"unknown keys in {where}: {sorted(unknown)}")


def _lattice(d) -> Lattice:
    _check_keys(d, {"a1", "a2"}, "lattice")
    return Lattice(d["a1"], d["a2"])


def _crystal(cfg: RunConfig, data: dict) -> CrystalSpec:
    data = dict(data)
    run = data.pop("run", {}) or {}
    _check_keys(run, RUN_KEYS.get(cfg.command, set()), "run")
    cfg.options = run
    spec = spec_from_dict(data)
    problems = [p for p in validate_crystal_spec(spec) if spec.n_inclusions]
    if problems:
        raise UsageError("invalid crystal spec: " + "; ".join(problems))
    return spec


def _mesh(cfg: RunConfig):
    from .bloch import MeshSpec
    return MeshSpec(cfg.mesh, cfg.levels)


def _r_single(cfg: RunConfig, spec: CrystalSpec) -> float:
    if cfg.r_list:
        return cfg.r_list[0]
    return float(cfg.options.get("r", spec.r))


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# subcommands -------------------------------------------------------------------

def cmd_design(cfg: RunConfig) -> int:
    from .design import DesignInputs, design_crystal, verify_design
    data = _load(cfg)
    _check_keys(data, {"targets", "shape", "base_lattice", "alpha0", "margin", "centers", "r"}, "design input")
    if "targets" not in data:
        raise UsageError("design input needs 'targets'")
    kw = {"targets": tuple(float(t) for t in np.ravel(data["targets"]))}
    if "shape" in data:
        kw["shape"] = shape_from_dict(data["shape"])
    if "base_lattice" in data:
        kw["base_lattice"] = _lattice(data["base_lattice"])
    for key in ("alpha0", "margin", "r"):
        if data.get(key) is not None:
            kw[key] = float(data[key])
    if data.get("centers") is not None:
        kw["centers"] = tuple(map(tuple, data["centers"]))
    spec, report = design_crystal(DesignInputs(**kw), tol=cfg.tol)
    ok = verify_design(spec, report)
    out = _out(cfg)
    conf = cfg.resolved()
    conf["input_data"] = data
    write_json(out / "crystal.json", spec_to_dict(spec), conf)
    rep = report.as_dict()
    rep["verified"] = ok
    write_json(out / "design_report.json", rep, conf)
    print(f"design: k={report.k:.10g} alpha_k={report.alpha_k:.10g} r={report.r:.6g} "
          f"r_max={report.r_max:.6g} verified={ok} -> {out / 'crystal.json'}")
    return 0


def cmd_selfenergy(cfg: RunConfig) -> int:
    from .design import log_self_energy
    data = _load(cfg) if cfg.input else {"shape": {"kind": "disk", "params": [1.0]}}
    _check_keys(data, {"shape"}, "selfenergy input")
    shape = shape_from_dict(data["shape"])
    C = log_self_energy(shape, tol=cfg.tol)
    out = _out(cfg)
    conf = cfg.resolved()
    conf["input_data"] = data
    write_json(out / "selfenergy.json", {"shape": data["shape"], "area": shape.area, "C": C}, conf)
    print(f"selfenergy: C={C:.17g} area={shape.area:.17g}")
    return 0


def cmd_edges(cfg: RunConfig) -> int:
    from .design import limit_coupling
    from .pointspec import PointInteractionModel, band_edges, threshold
    data = _load(cfg)
    if "alpha" in data:
        _check_keys(data, {"alpha", "lattice"}, "edges input")
        lat = _lattice(data["lattice"]) if "lattice" in data else Lattice.square()
        alpha = float(data["alpha"])
    else:
        spec = _crystal(cfg, data)
        if spec.n_inclusions != 1:
            raise UsageError("edges needs 'alpha' or a crystal with one inclusion per cell")
        lat = spec.lattice
        alpha = float(limit_coupling(spec.coefficients[0], spec.lambdas[0], spec.shape))
    model = PointInteractionModel(alpha, lat)
    edges = band_edges(model, tol=cfg.tol)
    thr = threshold(lat)
    out = _out(cfg)
    conf = cfg.resolved()
    conf["input_data"] = data
    write_json(out / "edges.json", {"alpha": alpha, "lattice": {"a1": list(lat.a1), "a2": list(lat.a2)},
                                    "threshold": thr, "edges": edges.as_dict(),
                                    "has_gap": bool(edges.E1 < edges.E2)}, conf)
    print(f"edges: E0={edges.E0:.12g} E1={edges.E1:.12g} E2={edges.E2:.12g} threshold={thr:.12g}")
    return 0


def cmd_gfun(cfg: RunConfig) -> int:
    from .latticesum import GFunEvaluator
    data = _load(cfg)
    _check_keys(data, {"lattice", "E", "theta"}, "gfun input")
    lat = _lattice(data["lattice"]) if "lattice" in data else Lattice.square()
    Es = [float(e) for e in np.ravel(data.get("E", [-1.0]))]
    if "theta" in data:
        thetas = np.asarray(data["theta"], dtype=float).reshape(-1, 2)
    else:
        thetas = brillouin_fractional(cfg.grid) @ lat.dual_basis
    ev = GFunEvaluator(lat, tolerance=cfg.tol)
    rows = []
    for E in Es:
        for th in thetas:
            rows.append((E, th[0], th[1], ev.g(E, th), ev.dg_dE(E, th)))
    out = _out(cfg)
    conf = cfg.resolved()
    conf["input_data"] = data
    write_csv(out / "gfun.csv", ["E", "theta1", "theta2", "g", "dg_dE"], rows, conf)
    print(f"gfun: {len(rows)} values -> {out / 'gfun.csv'}")
    return 0


def _bandset(cfg: RunConfig, spec: CrystalSpec, kind: str, r: float, n_max: int):
    from .bloch import band_set
    from .design import r_max
    if spec.n_inclusions and not 0 < r < r_max(spec):
        raise UsageError(f"r = {r} must lie in (0, r_max = {r_max(spec):.6g})")
    lam = float(cfg.options.get("lam", spec.lambdas[0] if (kind == "AUX" and spec.lambdas) else 0.0))
    return band_set(spec, r, kind, cfg.grid, n_max, _mesh(cfg), lam=lam, jobs=cfg.jobs)


def _kind(cfg: RunConfig) -> str:
    kind = str(cfg.options.get("kind", "TM")).upper()
    if kind not in ("TM", "TE", "AUX"):
        raise UsageError("run.kind must be TM, TE or AUX")
    return kind


def cmd_bands(cfg: RunConfig) -> int:
    from .bloch import find_gaps
    from .plotting import plot_bands, write_bands_script
    spec = _crystal(cfg, _load(cfg))
    kind = _kind(cfg)
    r = _r_single(cfg, spec)
    bs = _bandset(cfg, spec, kind, r, cfg.bands)
    rows = []
    for i in range(bs.values.shape[0]):
        for n in range(bs.n_bands):
            rows.append((i, bs.fractional[i, 0], bs.fractional[i, 1], n + 1, bs.values[i, n], bs.errors[i, n]))
    out = _out(cfg)
    conf = cfg.resolved()
    conf["crystal"] = spec_to_dict(spec)
    conf["r"] = r
    stem = f"bands_{kind.lower()}"
    csv = write_csv(out / f"{stem}.csv", ["theta_index", "s1", "s2", "band", "value", "err"], rows, conf)
    top = bs.intervals[-1][1]
    gaps = find_gaps(bs, 0.0, top)
    write_json(out / f"{stem}.json", {"kind": kind, "r": r, "intervals": bs.intervals,
                                       "band_errors": bs.band_errors, "gaps": gaps}, conf)
    write_bands_script(csv, kind, conf)
    targets = spec.lambdas if kind == "TM" else ()
    plot_bands(bs, out / f"{stem}.png", conf, targets=targets, gaps=gaps)
    print(f"bands: {kind} r={r:g} {bs.n_bands} bands on {cfg.grid}x{cfg.grid} grid, "
          f"{len(gaps)} gap(s) below {top:.6g} -> {csv}")
    return 0


def cmd_gaps(cfg: RunConfig) -> int:
    from .bloch import find_gaps
    spec = _crystal(cfg, _load(cfg))
    kind = _kind(cfg)
    r = _r_single(cfg, spec)
    bs = _bandset(cfg, spec, kind, r, cfg.bands)
    lo = float(cfg.options.get("lo", 0.0))
    hi = float(cfg.options.get("hi", bs.intervals[-1][1]))
    gaps = find_gaps(bs, lo, hi)
    out = _out(cfg)
    conf = cfg.resolved()
    conf["crystal"] = spec_to_dict(spec)
    conf["r"] = r
    write_json(out / "gaps.json", {"kind": kind, "r": r, "window": [lo, hi], "gaps": gaps,
                                   "intervals": bs.intervals, "band_errors": bs.band_errors}, conf)
    listing = ", ".join(f"({a:.6g}, {b:.6g})" for a, b in gaps) or "none"
    print(f"gaps: {kind} r={r:g} in [{lo:.6g}, {hi:.6g}]: {listing}")
    return 0


def cmd_certify(cfg: RunConfig) -> int:
    from .bloch import tm_gap_certificate
    spec = _crystal(cfg, _load(cfg))
    r_list = cfg.r_list or [spec.r]
    slack = float(cfg.options.get("aux_slack", 1.0))
    out = _out(cfg)
    conf = cfg.resolved()
    conf["crystal"] = spec_to_dict(spec)
    status = 0
    from .design import r_max
    for r in r_list:
        if spec.n_inclusions and not 0 < r < r_max(spec):
            raise UsageError(f"r = {r} must lie in (0, r_max = {r_max(spec):.6g})")
    for r in r_list:
        try:
            cert = tm_gap_certificate(spec, r, m=cfg.grid, mesh=_mesh(cfg), aux_slack=slack,
                                      jobs=cfg.jobs, n_max=cfg.bands)
            msg = "passed"
        except CertificateFailed as exc:
            cert = exc.certificate
            msg = str(exc)
            status = 1
        write_json(out / f"certificate_r{r:g}.json", cert.as_dict(), conf)
        detail = " ".join(f"lam={t.lam:g}: tm_margin={t.tm.margin:.6g} (need {t.tm_required:.6g}) "
                          f"aux_margin={t.aux.margin:.6g} (need {t.aux_required:.6g})" for t in cert.targets)
        print(f"certify-tm: r={r:g} {msg} {detail}".rstrip())
    return status


def cmd_overlap(cfg: RunConfig) -> int:
    from .bloch import te_overlap_check
    spec = _crystal(cfg, _load(cfg))
    r = _r_single(cfg, spec)
    from .design import r_max
    if spec.n_inclusions and not 0 < r < r_max(spec):
        raise UsageError(f"r = {r} must lie in (0, r_max = {r_max(spec):.6g})")
    n0 = int(cfg.options.get("n0", 4))
    rep = te_overlap_check(spec, r, n0=n0, m=cfg.grid, mesh=_mesh(cfg), jobs=cfg.jobs)
    out = _out(cfg)
    conf = cfg.resolved()
    conf["crystal"] = spec_to_dict(spec)
    conf["r"] = r
    write_json(out / "overlap_te.json", rep.as_dict(), conf)
    print(f"overlap-te: r={r:g} n0={n0} ok={rep.ok} covered=[0, {rep.covered[1]:.6g}] gaps={len(rep.gaps)}")
    return 0 if rep.ok else 1


def cmd_converge(cfg: RunConfig) -> int:
    from .approx import Gaussian, convergence_study
    from .plotting import plot_convergence
    spec = _crystal(cfg, _load(cfg))
    if not spec.n_inclusions:
        raise UsageError("converge needs a crystal with inclusions")
    o = cfg.options
    nu = o.get("nu", [0.0, 2.0])
    nu = complex(nu[0], nu[1]) if isinstance(nu, (list, tuple)) else complex(nu)
    shells = [int(s) for s in np.ravel(o.get("shells", [0]))]
    order = str(o.get("order", "standard"))
    if order not in ("coarse", "standard", "fine"):
        raise UsageError("run.order must be coarse, standard or fine")
    f = None
    if "f" in o:
        _check_keys(o["f"], {"center", "width"}, "run.f")
        f = Gaussian(tuple(o["f"]["center"]), float(o["f"].get("width", 0.2)))
    r_list = cfg.r_list or [0.1, 0.05, 0.02, 0.01]
    n = int(o.get("n", 0))
    results = [convergence_study(spec, n=n, nu=nu, r_list=r_list, f=f, shells=s, order=order,
                                 corrected=bool(o.get("corrected", True)), jobs=cfg.jobs) for s in shells]
    out = _out(cfg)
    conf = cfg.resolved()
    conf["crystal"] = spec_to_dict(spec)
    conf["r_list"] = r_list
    cols = ["r", "inv_log_r", "resolvent_error", "F_error", "C_error", "fitted_kappa"]
    for i, res in enumerate(results):
        name = "converge.csv" if i == 0 else f"converge_M{res.M}.csv"
        write_csv(out / name, cols, [[row[c] for c in cols] for row in res.rows], conf)
    write_json(out / "converge.json", {"studies": [res.as_dict() for res in results]}, conf)
    plot_convergence(results, out / "converge.png", conf)
    ok = all(res.monotone for res in results)
    for res in results:
        print(f"converge: M={res.M} kappa={res.kappa:.6g} residuals(1/|ln r|, r, sqrt r)="
              f"({res.residuals['inv_log_r']:.3g}, {res.residuals['r']:.3g}, {res.residuals['sqrt_r']:.3g}) "
              f"C slope={res.c_slope:.3g} monotone={res.monotone}")
    return 0 if ok else 1


COMMANDS = {
    "design": cmd_design, "selfenergy": cmd_selfenergy, "edges": cmd_edges, "gfun": cmd_gfun,
    "bands": cmd_bands, "gaps": cmd_gaps, "certify-tm": cmd_certify, "overlap-te": cmd_overlap,
    "converge": cmd_converge,
}


def run(argv=None) -> int:
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: usage errors exit 2, --help exits 0
        return int(exc.code or 0)
    try:
        try:
            jobs = resolve_jobs(ns.jobs)
        except ValueError as exc:
            raise UsageError(f"--jobs / BANDGAP_FORGE_JOBS: {exc}") from exc
        cfg = RunConfig(ns.command, ns.input, ns.out, jobs, ns.grid, ns.mesh, 3, ns.tol,
                        _parse_r_list(ns.r_list), ns.bands)
        _validate(cfg)
        return COMMANDS[ns.command](cfg)
    except CertificateFailed as exc:
        print(f"{ns.command}: {exc}", file=sys.stderr)
        return 1
    except ComputationError as exc:
        print(f"{ns.command}: computation failed: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ValueError, KeyError, TypeError) as exc:
        print(f"{ns.command}: configuration error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
