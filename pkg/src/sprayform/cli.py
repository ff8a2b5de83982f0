"""Command-line front end: config-driven audits with machine-readable reports.

Subcommands::

    sprayform symbol-audit --n-min 1 --n-max 4 [--json]
    sprayform classify CONFIG [--samples N] [--seed K]
    sprayform check-solution CONFIG
    sprayform geodesics CONFIG --x0 .. --y0 .. --t-end T --dt H [--compare CONFIG2]

Configs are TOML; expressions are plain strings inside it (see README for the
schema).  JSON reports carry ``"schema": 1``, the sha256 digest of the config
they were produced from and the tolerance set used; a fixed seed makes them
byte-identical across runs.  Exit status: 0 success / all outcomes as
expected, 1 mismatch or unexpected failure, 2 usage or config errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import symbols
from .expr import ParseError, ScalarModel, SprayModel, sample_points
from .geometry import (
    InternalConsistencyError,
    arc_length,
    arc_length_resample,
    classify_at,
    geodesic_flow,
    hausdorff_distance,
)
from .operators import solution_audit


class ConfigError(ValueError):
    pass


DEFAULT_TOLERANCES = {"audit": 1e-8, "classify": 1e-8}
DEFAULT_SAMPLES = {"count": 200, "seed": 7, "x_box": [-1.0, 1.0],
                   "y_annulus": [0.5, 2.0]}


def load_config(path: str) -> tuple[dict, str]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    digest = hashlib.sha256(raw).hexdigest()
    try:
        cfg = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    return cfg, digest


def spray_from_config(cfg: dict) -> SprayModel:
    spray = cfg.get("spray")
    if not isinstance(spray, dict):
        raise ConfigError("config needs a [spray] section")
    n = spray.get("n")
    fs = spray.get("f")
    if not isinstance(n, int) or n < 1:
        raise ConfigError("spray.n must be a positive integer")
    if not isinstance(fs, list) or len(fs) != n:
        raise ConfigError(f"spray.f must list exactly n={n} expressions")
    try:
        return SprayModel.from_strings(n, fs)
    except ParseError as exc:
        raise ConfigError(f"spray coefficient: {exc}") from None


def samples_from_config(cfg: dict, count=None, seed=None):
    merged = dict(DEFAULT_SAMPLES)
    merged.update(cfg.get("samples", {}))
    if count is not None:
        merged["count"] = count
    if seed is not None:
        merged["seed"] = seed
    n = cfg["spray"]["n"]
    pts = sample_points(n, int(merged["count"]), int(merged["seed"]),
                        x_box=merged["x_box"], y_annulus=tuple(merged["y_annulus"]))
    return pts, merged


def tolerances_from_config(cfg: dict) -> dict:
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(cfg.get("tolerances", {}))
    return tol


def _emit_json(doc: dict, stream) -> None:
    json.dump(doc, stream, indent=2)
    stream.write("\n")


# -- symbol-audit -------------------------------------------------------------


def run_symbol_audit(n_min: int, n_max: int) -> dict:
    rows = []
    all_ok = True
    for n in range(n_min, n_max + 1):
        for sysname in symbols.SYSTEMS:
            g2 = symbols.system_symbol(sysname, 2, n).kernel_dim()
            ex = symbols.exactness_check(sysname, n)
            inv = symbols.involutivity_audit(sysname, n)
            ok = (
                g2 == symbols.g2_dim_formula(sysname, n)
                and inv.g3 == symbols.g3_dim_formula(sysname, n)
                and ex.rank_sigma3 == symbols.rank_sigma3_formula(sysname, n)
                and ex.exact
                and inv.quasi_regular
            )
            all_ok &= ok
            rows.append({
                "n": n,
                "system": sysname,
                "g2": g2,
                "g2_formula": symbols.g2_dim_formula(sysname, n),
                "g3": inv.g3,
                "g3_formula": symbols.g3_dim_formula(sysname, n),
                "rank_sigma3": ex.rank_sigma3,
                "rank_sigma3_formula": symbols.rank_sigma3_formula(sysname, n),
                "ker_tau": ex.ker_tau,
                "composition_zero": ex.composition_zero,
                "exact_sequence": ex.exact,
                "flag_dims": inv.restricted,
                "flag_sum": inv.flag_sum,
                "quasi_regular": inv.quasi_regular,
                "printed_branch_mismatches": inv.printed_branch_mismatches,
                "match": ok,
            })
    return {"schema": 1, "command": "symbol-audit",
            "n_min": n_min, "n_max": n_max, "rows": rows, "all_match": all_ok}


def cmd_symbol_audit(args) -> int:
    if not 1 <= args.n_min <= args.n_max <= 6:
        print("symbol-audit: need 1 <= n-min <= n-max <= 6", file=sys.stderr)
        return 2
    doc = run_symbol_audit(args.n_min, args.n_max)
    if args.json:
        _emit_json(doc, sys.stdout)
    else:
        header = (f"{'n':>2} {'sys':<4} {'g2':>4} {'g3':>4} {'rank s3':>8} "
                  f"{'ker tau':>8} {'exact':>6} {'QR':>4} {'match':>6}")
        print(header)
        for r in doc["rows"]:
            print(f"{r['n']:>2} {r['system']:<4} {r['g2']:>4} {r['g3']:>4} "
                  f"{r['rank_sigma3']:>8} {r['ker_tau']:>8} "
                  f"{str(r['exact_sequence']):>6} {str(r['quasi_regular']):>4} "
                  f"{'match' if r['match'] else 'MISMATCH':>6}")
    return 0 if doc["all_match"] else 1


# -- classify -----------------------------------------------------------------


def run_classify(cfg: dict, digest: str, count=None, seed=None) -> dict:
    m = spray_from_config(cfg)
    pts, sample_cfg = samples_from_config(cfg, count, seed)
    tol = tolerances_from_config(cfg)
    counts = {"flat": 0, "isotropic": 0, "generic": 0}
    lams = []
    flat_defect = 0.0
    iso_defect = 0.0
    errors = []
    for i, p in enumerate(pts):
        try:
            cls = classify_at(m, p, rel_tol=tol["classify"])
        except (ArithmeticError, InternalConsistencyError) as exc:
            errors.append({"sample": i, "error": str(exc)})
            continue
        counts[cls.kind] += 1
        lams.append(cls.lam)
        flat_defect = max(flat_defect, cls.flat_defect)
        iso_defect = max(iso_defect, cls.isotropy_defect)
    evaluated = sum(counts.values())
    overall = "generic"
    if evaluated and counts["flat"] == evaluated:
        overall = "flat"
    elif evaluated and counts["flat"] + counts["isotropic"] == evaluated:
        overall = "isotropic"
    return {
        "schema": 1,
        "command": "classify",
        "config_digest": digest,
        "samples": sample_cfg,
        "tolerances": tol,
        "n": m.n,
        "counts": counts,
        "evaluated": evaluated,
        "classification": overall,
        "lambda_stats": {
            "min": min(lams) if lams else None,
            "max": max(lams) if lams else None,
            "mean": float(np.mean(lams)) if lams else None,
        },
        "max_flat_defect": flat_defect,
        "max_isotropy_defect": iso_defect,
        "errors": errors,
    }


def cmd_classify(args) -> int:
    cfg, digest = load_config(args.config)
    doc = run_classify(cfg, digest, args.samples, args.seed)
    _emit_json(doc, sys.stdout)
    return 0


# -- check-solution -----------------------------------------------------------


def run_check_solution(cfg: dict, digest: str) -> dict:
    m = spray_from_config(cfg)
    candidates = cfg.get("candidates")
    if not isinstance(candidates, list) or not candidates:
        raise ConfigError("config needs at least one [[candidates]] entry")
    pts, sample_cfg = samples_from_config(cfg)
    tol = tolerances_from_config(cfg)
    results = []
    exit_fail = False
    for cand in candidates:
        name = cand.get("name", "?")
        try:
            F = ScalarModel.from_string(m.n, cand["F"], float(cand.get("degree", 1)))
        except (KeyError, ParseError) as exc:
            raise ConfigError(f"candidate {name!r}: {exc}") from None
        expect = cand.get("expect")
        audit = solution_audit(m, F, pts, tol=tol["audit"])
        passed = audit.passed
        outcome = "pass" if passed else "fail"
        as_expected = expect is None or expect == outcome
        if expect == "pass" and not passed:
            exit_fail = True
        results.append({
            "name": name,
            "expect": expect,
            "outcome": outcome,
            "as_expected": as_expected,
            "order2_solution": audit.order2,
            "liftable_p1": audit.liftable_p1,
            "liftable_p2": audit.liftable_p2,
            "hessian_positive_definite": audit.hessian_ok,
            "max_residuals": {
                "rapcsak": audit.max_rapcsak,
                "homogeneity": audit.max_homogeneity,
                "extended_rapcsak": audit.max_extended,
                "curvature_obstruction": audit.max_curvature_obstruction,
            },
            "min_hessian_eigenvalue": audit.min_hessian_eigenvalue,
            "domain_failures": len(audit.failures),
        })
    return {
        "schema": 1,
        "command": "check-solution",
        "config_digest": digest,
        "samples": sample_cfg,
        "tolerances": tol,
        "n": m.n,
        "candidates": results,
        "all_as_expected": all(r["as_expected"] for r in results),
        "exit_failure": exit_fail,
    }


def cmd_check_solution(args) -> int:
    cfg, digest = load_config(args.config)
    doc = run_check_solution(cfg, digest)
    _emit_json(doc, sys.stdout)
    return 1 if doc["exit_failure"] else 0


# -- geodesics ----------------------------------------------------------------


def _parse_vector(text: str, n: int, flag: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"{flag} must be comma-separated floats") from None
    if len(vals) != n:
        raise ConfigError(f"{flag} must have {n} components")
    return np.array(vals)


def cmd_geodesics(args) -> int:
    cfg, digest = load_config(args.config)
    m = spray_from_config(cfg)
    if args.dt <= 0:
        print("geodesics: --dt must be positive", file=sys.stderr)
        return 2
    if args.t_end <= 0:
        print("geodesics: --t-end must be positive", file=sys.stderr)
        return 2
    x0 = _parse_vector(args.x0, m.n, "--x0")
    y0 = _parse_vector(args.y0, m.n, "--y0")
    path = geodesic_flow(m, x0, y0, args.t_end, args.dt)
    header = ["t"] + [f"x{i+1}" for i in range(m.n)] + [f"y{i+1}" for i in range(m.n)]
    out = sys.stdout
    out.write(",".join(header) + "\n")
    for t, state in zip(path.times, path.states):
        row = [t] + list(state)
        out.write(",".join(format(v, ".17g") for v in row) + "\n")
    if path.exit_time is not None:
        out.write(f"# domain exit at t = {path.exit_time:.17g}\n")
    if args.compare:
        cfg2, _ = load_config(args.compare)
        m2 = spray_from_config(cfg2)
        if m2.n != m.n:
            raise ConfigError("--compare spray has a different dimension")
        path2 = geodesic_flow(m2, x0, y0, args.t_end2 or args.t_end, args.dt)
        shared = min(arc_length(path.x), arc_length(path2.x))
        a = arc_length_resample(path.x, 800, span=shared)
        b = arc_length_resample(path2.x, 800, span=shared)
        d = hausdorff_distance(a, b)
        out.write(f"# hausdorff_distance = {d:.17g}\n")
        out.write(f"# config_digest = {digest}\n")
    return 0 if path.exit_time is None else 1


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sprayform",
        description="Spray geometry, metrizability operators and symbol audits")
    sub = ap.add_subparsers(dest="command", required=True)

    sa = sub.add_parser("symbol-audit",
                        help="verify symbol/obstruction dimensions against closed forms")
    sa.add_argument("--n-min", type=int, default=1)
    sa.add_argument("--n-max", type=int, default=4)
    sa.add_argument("--json", action="store_true")
    sa.set_defaults(fn=cmd_symbol_audit)

    cl = sub.add_parser("classify", help="flat/isotropic/generic classification")
    cl.add_argument("config")
    cl.add_argument("--samples", type=int, default=None)
    cl.add_argument("--seed", type=int, default=None)
    cl.set_defaults(fn=cmd_classify)

    cs = sub.add_parser("check-solution",
                        help="audit candidate Finsler functions against a spray")
    cs.add_argument("config")
    cs.set_defaults(fn=cmd_check_solution)

    ge = sub.add_parser("geodesics", help="integrate the geodesic flow, CSV output")
    ge.add_argument("config")
    ge.add_argument("--x0", required=True)
    ge.add_argument("--y0", required=True)
    ge.add_argument("--t-end", type=float, required=True)
    ge.add_argument("--dt", type=float, required=True)
    ge.add_argument("--compare", default=None,
                    help="second config; report Hausdorff distance after arc-length reparametrization")
    ge.add_argument("--t-end2", type=float, default=None,
                    help="integration horizon for the compared spray (defaults to --t-end)")
    ge.set_defaults(fn=cmd_geodesics)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"expression error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
