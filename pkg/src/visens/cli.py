"""Command-line entry point: run experiments from JSON configs and emit reports.

Exit codes: 0 when every verdict passes, 1 when some verdict fails and 2 on
configuration or solver errors (a JSON error object is printed).
"""

import argparse
import csv
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import bangbang as bb
from .core import affine_problem, solve_elliptic_vi
from .derivative import check_necessary_conditions, solve_derivative_vi
from .errors import ConfigError, VisensError
from .fd import DEFAULT_T_GRID, run_ray, second_order_quotient, verify_convergence
from .functionals import BUILTIN_KINDS, from_config
from .instances import make_generic_instance
from .plasticity import (build_instance, plasticity_derivative, random_instance, scaled_load,
                         solve_saddle_vi)
from .proxreg import ball_complement, projection_vi
from .schema import CONFIG_SCHEMA, CSV_COLUMNS, SCHEMA_VERSION
from .subderiv import catalog_subderivative
from .suites import SUITES

COMMANDS = ("solve", "derivative", "fd", "verify")

SET_KINDS = {
    "ball_complement": "complement of an open ball, prox-regular with r equal to the radius",
    "union_of_convex": "finite union of boxes and balls with a user-supplied prox constant",
    "convex": "single box or ball",
}


# ---------------------------------------------------------------------------
# config handling


def load_config(path, seed=None):
    """Read, validate and return a config dict; ``seed`` overrides the file."""
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if seed is not None:
        if isinstance(cfg, dict):
            cfg["seed"] = int(seed)
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc


def bundled_config(name):
    """Text of a config shipped with the package."""
    return resources.files("visens").joinpath("configs", name).read_text(encoding="utf-8")


def bundled_configs():
    return sorted(p.name for p in resources.files("visens").joinpath("configs").iterdir()
                  if p.name.endswith(".json"))


# ---------------------------------------------------------------------------
# JSON helpers


def clean(obj):
    """Convert numpy values to plain Python and non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj):
    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# applications


def _tolerances(cfg):
    tol = {"solver": 1e-13, "convergence": 1e-4, "soq": 1e-4, "expected": 1e-6, "samples": 1000}
    tol.update(cfg.get("tolerances", {}))
    return tol


def _generic_setup(cfg):
    inst = cfg["instance"]
    if "generator" in inst:
        gen = dict(inst["generator"])
        g = make_generic_instance(gen.pop("seed"), **gen)
        return g.problem, g.p0, g.q, None
    if "operator" not in inst or "nonsmooth" not in inst:
        raise ConfigError("generic_vi instances need operator and nonsmooth, or a generator")
    op = inst["operator"]
    j = from_config(inst["nonsmooth"])
    problem = affine_problem(op["M"], op.get("N"), op.get("offset"), j)
    return problem, None, None, None


def _ray_vectors(ray, p0_default, q_default, dim_p):
    p0 = ray.get("p0", None if p0_default is None else list(p0_default))
    q = ray.get("q", None if q_default is None else list(q_default))
    if p0 is None or q is None:
        raise ConfigError(f"ray {ray['id']!r} needs p0 and q")
    p0 = np.asarray(p0, dtype=float)
    q = np.asarray(q, dtype=float)
    if p0.size != dim_p or q.size != dim_p:
        raise ConfigError(f"ray {ray['id']!r}: p0 and q must have length {dim_p}")
    return p0, q


def _vi_ray(command, problem, ray, p0, q, tol, lipschitz=None):
    out = {"id": ray["id"]}
    t_grid = ray.get("t_grid", list(DEFAULT_T_GRID))
    sol = solve_elliptic_vi(problem, p0, tol=tol["solver"])
    out["x_bar"] = sol.x_bar
    out["residual"] = sol.residual
    out["iterations"] = sol.iterations
    if command == "solve":
        out["passed"] = bool(sol.residual <= tol["solver"])
        return out, None
    a0 = -problem.A(p0, sol.x_bar)
    Q = catalog_subderivative(problem.nonsmooth, sol.x_bar, a0)
    Ap = problem.Ap(p0, sol.x_bar)
    Ax = problem.Ax(p0, sol.x_bar)
    d = solve_derivative_vi(Ap, Ax, Q, q)
    out["derivative"] = d.to_dict()
    out["subderivative"] = Q.describe()
    verdicts = {}
    chk = check_necessary_conditions(d, Q, Ap, Ax, samples=tol["samples"],
                                     seed=int(ray.get("direction_seed", 0)))
    out["necessary_conditions"] = chk
    verdicts["value_identity"] = chk["value_identity_gap"] <= 1e-8
    verdicts["linearized_vi"] = chk["min_value"] >= -1e-8
    if "expected_derivative" in ray:
        exp = np.asarray(ray["expected_derivative"], dtype=float)
        gap = float(np.linalg.norm(d.y - exp)) if exp.size == d.y.size else float("inf")
        out["expected_gap"] = gap
        verdicts["expected_derivative"] = gap <= tol["expected"] * (1.0 + np.linalg.norm(exp))
    rows = None
    if command in ("fd", "verify"):
        bound = None if lipschitz is None else lipschitz * float(np.linalg.norm(q))
        rep = run_ray(problem, p0, q, t_grid, tol=tol["solver"], x0=sol.x_bar,
                      lipschitz_bound=bound)
        tol_conv = tol["convergence"] * (1.0 + float(np.linalg.norm(d.y)))
        ver = verify_convergence(rep, d, Q, Ax, tol_conv=tol_conv, tol_soq=tol["soq"])
        out["fd"] = rep.to_dict()
        out["fd_verdict"] = ver
        out["fitted_rate"] = ver["fitted_rate"]
        verdicts.update({f"fd_{k}": v for k, v in ver["items"].items()})
        rows = rep.csv_rows()
    if command == "derivative":
        verdicts = {k: v for k, v in verdicts.items()
                    if k in ("value_identity", "linearized_vi", "expected_derivative")}
    out["verdicts"] = verdicts
    out["passed"] = bool(all(verdicts.values()))
    return out, rows


def _plasticity_setup(cfg):
    inst_cfg = cfg["instance"]
    if "random" in inst_cfg:
        r = dict(inst_cfg["random"])
        s = r.pop("seed")
        inst = random_instance(s, **r)
        return inst, scaled_load(inst, s)
    return build_instance(inst_cfg), None


def _plasticity_ray(command, inst, default_load, ray, tol):
    rng = np.random.default_rng(int(ray.get("direction_seed", 0)))
    ell = np.asarray(ray["p0"], dtype=float) if "p0" in ray else default_load
    q = np.asarray(ray["q"], dtype=float) if "q" in ray else rng.standard_normal(inst.dim_V)
    if ell is None or ell.size != inst.dim_V or q.size != inst.dim_V:
        raise ConfigError(f"ray {ray['id']!r}: load and direction must have length {inst.dim_V}")
    sol = solve_saddle_vi(inst, ell, tol=min(tol["solver"] * 10, 1e-12))
    S, u, lam = sol.x_bar, sol.multipliers["u"], sol.multipliers["lam"]
    out = {"id": ray["id"], "sigma": S, "u": u, "lam": lam, "kkt_residual": sol.residual}
    verdicts = {"kkt": sol.residual <= 1e-9}
    rows = None
    if command != "solve":
        T, up, Q = plasticity_derivative(inst, S, u, lam, q)
        out["derivative"] = {"sigma": T, "u": up, "q_value": Q.quad(T)}
        if "expected_derivative" in ray:
            exp = np.asarray(ray["expected_derivative"], dtype=float)
            y = np.concatenate([T, up])
            gap = float(np.linalg.norm(y - exp)) if exp.size == y.size else float("inf")
            out["expected_gap"] = gap
            verdicts["expected_derivative"] = gap <= tol["expected"] * (1.0 + np.linalg.norm(exp))
        if command in ("fd", "verify"):
            j = inst.functional()
            xi = sol.multipliers["xi"]
            t_grid = sorted(ray.get("t_grid", [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]), reverse=True)
            warm = (S, xi)
            errors, rows = [], []
            target = float(T @ inst.A @ T)
            for t in t_grid:
                st = solve_saddle_vi(inst, ell + t * q, warm=warm)
                warm = (st.x_bar, st.multipliers["xi"])
                Tt = (st.x_bar - S) / t
                ut = (st.multipliers["u"] - u) / t
                err = float(np.linalg.norm(Tt - T) + np.linalg.norm(ut - up))
                errors.append(err)
                soq = second_order_quotient(j, S, xi, Tt, t)
                lip = float(np.linalg.norm(np.concatenate([Tt, ut])))
                rows.append((float(t), err, soq, lip, abs(float(Tt @ inst.A @ Tt) - target)))
            out["fd"] = {"t_grid": t_grid, "errors": errors}
            rate = np.polyfit(np.log(t_grid), np.log(np.maximum(errors, 1e-300)), 1)[0]
            out["fitted_rate"] = float(rate) if min(errors) > 1e-13 else None
            verdicts["fd_final_error"] = errors[-1] <= max(tol["convergence"], 1e-5)
    out["verdicts"] = verdicts
    out["passed"] = bool(all(verdicts.values()))
    return out, rows


def _bangbang_setup(cfg):
    ic = cfg["instance"]
    kw = {}
    if "f" in ic:
        kw["f_kind"] = ic["f"]["kind"]
        kw["f_coef"] = ic["f"].get("coef", 1.0)
    if "L" in ic and "weight" in ic["L"]:
        kw["weight"] = ic["L"]["weight"]
    if "manufactured" in ic:
        kw.update(ic["manufactured"])
    grid_n = ic.get("grid_n", 2000)
    if "template" in ic:
        return bb.template_instance(ic["template"], grid_n=grid_n, **kw)
    return bb.manufactured_instance(grid_n=grid_n, **kw)


def _bangbang_ray(command, inst, adj, ray, tol, seed):
    out = {"id": ray["id"], "stationary": adj.to_dict(),
           "invariants": bb.check_adjoint_invariants(adj)}
    verdicts = {"stationary": adj.residual <= 1e-10}
    rows = None
    if command != "solve":
        q = bb.smooth_direction(inst, int(ray.get("direction_seed", seed)))
        F2, jup = bb.second_order_data(adj, q)
        mu = bb.solve_sensitivity(adj, F2, jup)
        out["second_variation"] = F2
        out["measure"] = mu.to_dict()
        if "expected_derivative" in ray:
            exp = np.asarray(ray["expected_derivative"], dtype=float)
            gap = float(np.linalg.norm(mu.weights - exp)) if exp.size == mu.weights.size \
                else float("inf")
            out["expected_gap"] = gap
            verdicts["expected_derivative"] = gap <= tol["expected"] * (1.0 + np.linalg.norm(exp))
        if command in ("fd", "verify"):
            t_grid = ray.get("t_grid", list(bb.BANGBANG_T_GRID))
            chk = bb.weakstar_fd_check(inst, q, t_grid, base=adj)
            out["fd"] = chk
            ts = [r["t"] for r in chk["rows"]]
            gaps = [r["max_gap"] for r in chk["rows"]]
            out["fitted_rate"] = float(np.polyfit(np.log(ts), np.log(np.maximum(gaps, 1e-300)), 1)[0])
            verdicts.update({f"fd_{k}": v for k, v in chk["items"].items()})
            rows = [(r["t"], r["max_gap"], float("nan"), r["l1_ratio"], float("nan"))
                    for r in chk["rows"]]
    out["verdicts"] = verdicts
    out["passed"] = bool(all(verdicts.values()))
    return out, rows


def run_experiment(cfg, command="verify", jobs=1):
    """Run every ray of a validated config; returns ``(report, csv_rows_by_ray)``."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    app = cfg["application"]
    tol = _tolerances(cfg)
    seed = int(cfg["seed"])
    rays = cfg["rays"]
    ids = [r["id"] for r in rays]
    if len(set(ids)) != len(ids):
        raise ConfigError("ray ids must be unique")
    if app in ("generic_vi", "proxreg"):
        if app == "generic_vi":
            problem, p0d, qd, lip = _generic_setup(cfg)
        else:
            s = cfg["instance"]["set"]
            K = ball_complement(s.get("radius", 1.0), s.get("dim", 2))
            rho = float(cfg["instance"]["rho"])
            if rho >= K.prox_constant:
                raise ConfigError("rho must be smaller than the prox-regularity constant")
            problem = projection_vi(K, rho)
            p0d, qd, lip = None, None, K.prox_constant / (K.prox_constant - rho)

        def work(ray):
            p0, q = _ray_vectors(ray, p0d, qd, problem.dim_p)
            return _vi_ray(command, problem, ray, p0, q, tol, lip)
    elif app == "plasticity":
        inst, load = _plasticity_setup(cfg)

        def work(ray):
            return _plasticity_ray(command, inst, load, ray, tol)
    else:
        inst = _bangbang_setup(cfg)
        adj = bb.find_bangbang_stationary(inst)

        def work(ray):
            return _bangbang_ray(command, inst, adj, ray, tol, seed)

    with ThreadPoolExecutor(max_workers=max(1, int(jobs))) as pool:
        results = list(pool.map(work, rays))
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "application": app,
        "seed": seed,
        "rays": [r for r, _ in results],
        "passed": all(r["passed"] for r, _ in results),
    }
    csv_rows = {r["id"]: rows for r, rows in results if rows is not None}
    return report, csv_rows


def write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def write_outputs(out_dir, report, csv_rows, metadata, name="report.json", csv_prefix=""):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(dumps(report), encoding="utf-8")
    (out / "metadata.json").write_text(dumps(metadata), encoding="utf-8")
    for ray_id, rows in csv_rows.items():
        write_csv(out / f"{csv_prefix}{ray_id}.csv", rows)


def _metadata(start, argv):
    return {"started_unix": start, "elapsed_seconds": time.time() - start,
            "python": platform.python_version(), "numpy": np.__version__, "argv": list(argv)}


# ---------------------------------------------------------------------------
# catalog


def list_catalog(filter_text=None):
    """Deterministic listing of nonsmooth kinds, set kinds and bang-bang templates.

    An empty or missing filter returns everything; otherwise entries whose id
    or category contains the filter text are returned.
    """
    entries = []
    for kind in sorted(BUILTIN_KINDS):
        entries.append({"category": "nonsmooth", "id": kind,
                        "description": (BUILTIN_KINDS[kind].__doc__ or "").strip().split("\n")[0]})
    entries.append({"category": "nonsmooth", "id": "half_squared_norm_plus",
                    "description": "1/2 |x|^2 plus another functional (prox-regular shift)"})
    for kind in sorted(SET_KINDS):
        entries.append({"category": "set", "id": kind, "description": SET_KINDS[kind]})
    for tid in sorted(bb.TEMPLATES):
        p = bb.TEMPLATES[tid]
        entries.append({"category": "bangbang_template", "id": tid,
                        "description": f"f={p['f_kind']}, tracking weight {p['weight']}, "
                                       f"{p['frequency'] - 1} switching point(s)"})
    if not filter_text:
        return entries
    return [e for e in entries if filter_text in e["id"] or filter_text in e["category"]]


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="visens",
                                 description="Sensitivity analysis and FD verification for VIs.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"{name} for every ray in a config")
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", default=None, help="output directory for report and CSV")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for rays")
    p = sub.add_parser("catalog", help="list built-in kinds and templates")
    p.add_argument("--filter", default=None)
    p = sub.add_parser("suite", help="run a seeded acceptance suite")
    p.add_argument("name", choices=sorted(SUITES) + ["all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p = sub.add_parser("config", help="print a bundled config")
    p.add_argument("name", nargs="?", default=None)
    return ap


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    start = time.time()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if args.command == "catalog":
            sys.stdout.write(dumps(list_catalog(args.filter)))
            return 0
        if args.command == "config":
            if args.name is None:
                sys.stdout.write("\n".join(bundled_configs()) + "\n")
            else:
                sys.stdout.write(bundled_config(args.name))
            return 0
        if args.command == "suite":
            names = sorted(SUITES) if args.name == "all" else [args.name]
            report = {"schema_version": SCHEMA_VERSION, "command": "suite", "seed": args.seed,
                      "suites": {n: SUITES[n](seed=args.seed) for n in names}}
            report["passed"] = all(s["passed"] for s in report["suites"].values())
            if args.out:
                write_outputs(args.out, report, {}, _metadata(start, argv), "suite.json")
            summary = {n: s["passed"] for n, s in report["suites"].items()}
            sys.stdout.write(dumps({"passed": report["passed"], "suites": summary}))
            return 0 if report["passed"] else 1
        cfg = load_config(args.config, args.seed)
        report, rows = run_experiment(cfg, args.command, args.jobs)
        out_dir = args.out
        if out_dir is None and "output" in cfg:
            out_dir = str(Path(args.config).resolve().parent)
        if out_dir is not None:
            output = cfg.get("output", {})
            write_outputs(out_dir, report, rows, _metadata(start, argv),
                          output.get("report", "report.json"), output.get("csv_prefix", ""))
        sys.stdout.write(dumps({"passed": report["passed"],
                                "rays": {r["id"]: r["passed"] for r in report["rays"]}}))
        return 0 if report["passed"] else 1
    except (VisensError, ValueError, KeyError, NotImplementedError, OSError) as exc:
        err = exc.to_dict() if isinstance(exc, VisensError) else {
            "error": type(exc).__name__, "message": str(exc)}
        sys.stdout.write(dumps(err))
        return 2


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
