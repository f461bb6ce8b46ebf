"""Pipeline execution: model and data from a resolved config, analyses, artifacts."""
from __future__ import annotations

import copy
import csv
import itertools
import json
import platform
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .classifier import classify, verify_slow_conclusions
from .config import canonical, config_hash, resolve, set_path
from .exceptions import ConfigError, SlowFastError
from .fast import choose_params, solve_fixed_point, validate_solution
from .integrator import IntegratorConfig, Trajectory, integrate
from .models import (ProblemDefinition, make_custom, make_dirichlet_interval, make_neumann_interval,
                     make_ode2_fast, make_ode2_slow)
from .quotients import check_quotient_inequalities
from .slow import certify, compute_constants, monitor_certified_run, openness_probe
from .spectral import as_state, basis_vector, norm_DA_alpha

CSV_COLUMNS = ("t", "norm_H", "norm_Ahalf", "Q", "Q_2p")


def build_problem(cfg: dict) -> ProblemDefinition:
    m = cfg["model"]
    name, seed = m["name"], cfg["seed"]
    try:
        if name == "ode2_slow":
            return make_ode2_slow(R=m["R"])
        if name == "ode2_fast":
            return make_ode2_fast(m["lambda"], m["beta"], m["p"], m["q"], R=m["R"])
        if name == "neumann_interval":
            return make_neumann_interval(int(m["modes"]), m["p"], m["c"], R=m["R"], seed=seed,
                                         n_samples=int(m["samples"]))
        if name == "dirichlet_interval":
            return make_dirichlet_interval(int(m["modes"]), m["p"], m["c"], critical=bool(m["critical"]),
                                           shift=m["shift"], R=m["R"], seed=seed,
                                           n_samples=int(m["samples"]))
        return make_custom(m["eigenvalues"], m["terms"], m["multiplicities"], R=m["R"],
                           sign_condition=m["sign_condition"], seed=seed, n_samples=int(m["samples"]))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError("model", str(exc)) from None


def integrator_config(cfg: dict, **over) -> IntegratorConfig:
    ic = dict(cfg["integrator"])
    if ic["dt_max"] is None:
        ic["dt_max"] = float("inf")
    ic["store_states"] = True
    ic.update(over)
    try:
        return IntegratorConfig(**ic)
    except ValueError as exc:
        raise ConfigError("integrator", str(exc)) from None


def _slow_certificate(cfg, prob):
    cs = cfg["certify_slow"]
    spec = prob.spectrum
    return compute_constants(prob.bounds, spec.nu, spec.kernel_dim, strict=cs["strict"])


def _fast_data(cfg, prob):
    """(lambda, v0, w0, params) for construct-fast from the config section."""
    fc = cfg["construct_fast"]
    spec = prob.spectrum
    if fc["lambda_index"] is None:
        raise ConfigError("construct_fast.lambda_index", "missing")
    k = int(fc["lambda_index"])
    if not 0 <= k < len(spec.eigenvalues):
        raise ConfigError("construct_fast.lambda_index", "out of range")
    lam = spec.eigenvalues[k]
    params = choose_params(prob, lam, fc["r0"])
    modes = np.flatnonzero(spec.mode_block == k)
    if fc["v0"] is not None:
        v0 = as_state(spec, fc["v0"])
        w0 = as_state(spec, fc["w0"]) if fc["w0"] is not None else np.zeros(spec.total_dim)
    else:
        v_mode = int(fc["v0_mode"]) if fc["v0_mode"] is not None else int(modes[0])
        v0 = basis_vector(spec, v_mode)
        w0 = np.zeros(spec.total_dim)
        if fc["w0_mode"] is not None:
            w0 = basis_vector(spec, int(fc["w0_mode"]))
        # equal amplitudes, scaled to use the whole admissible budget r0
        eps = params.r0 / float(norm_DA_alpha(spec, v0) + norm_DA_alpha(spec, w0))
        v0, w0 = eps * v0, eps * w0
    return lam, v0, w0, params


def initial_state(cfg: dict, prob: ProblemDefinition, context: dict) -> np.ndarray:
    spec = prob.spectrum
    (source, value), = cfg["initial"].items()
    if source == "coefficients":
        try:
            return as_state(spec, value)
        except ValueError as exc:
            raise ConfigError("initial.coefficients", str(exc)) from None
    if source == "preset":
        if value["name"] == "kernel_constant":
            if spec.kernel_dim == 0:
                raise ConfigError("initial.preset", "kernel_constant needs a nontrivial kernel")
            return basis_vector(spec, 0, float(value["a"]))
        idx = int(value["index"])
        if not 0 <= idx < spec.total_dim:
            raise ConfigError("initial.preset.index", "out of range")
        return basis_vector(spec, idx, float(value["a"]))
    if source == "certificate":
        cert = context.setdefault("certificate", _slow_certificate(cfg, prob))
        if spec.kernel_dim == 0:
            raise ConfigError("initial.certificate", "needs a nontrivial kernel")
        return basis_vector(spec, 0, float(value["fraction"]) * cert.sigma0)
    sol = context.get("fast_solution")
    if sol is None:
        lam, v0, w0, params = _fast_data(cfg, prob)
        sol = solve_fixed_point(prob, lam, v0, w0, params, tol=cfg["construct_fast"]["tol"])
        context["fast_solution"], context["fast_params"] = sol, params
    return sol.u0


def versions() -> dict:
    return {"slowfast": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_csv(path: Path, traj: Trajectory, store_states: bool):
    cols = list(CSV_COLUMNS)
    data = [traj.times, traj.norm_H, traj.norm_Ahalf, traj.Q, traj.Q_2p]
    if store_states and traj.states is not None:
        cols += [f"c{j}" for j in range(traj.states.shape[1])]
        data += list(traj.states.T)
    table = np.column_stack(data)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in table:
            w.writerow(["%.16e" % x for x in row])


def write_json(path: Path, doc: dict):
    Path(path).write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if np.isnan(x):
            return None
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _resolve_d(values, p):
    out = []
    for d in values:
        if d == "2p":
            out.append(2 * p)
        elif isinstance(d, (int, float)) and d >= 0:
            out.append(float(d))
        else:
            raise ConfigError("quotients.d", f"invalid entry {d!r}")
    return out


def run_pipeline(cfg: dict, out_dir) -> dict:
    """Run the configured pipeline; returns the summary report (also written to ``report.json``)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prob = build_problem(cfg)
    header = {"config_hash": config_hash(cfg), "seed": cfg["seed"], "versions": versions(),
              "provenance": prob.bounds.provenance, "model": prob.describe()}
    context: dict = {}
    results: dict = {}
    u0 = initial_state(cfg, prob, context)
    traj = integrate(prob, u0, integrator_config(cfg))
    write_csv(out / "trajectory.csv", traj, cfg["output"]["store_states"])
    results["simulate"] = {"pass": True, "terminated": traj.terminated, "samples": len(traj),
                           "t_final": float(traj.times[-1])}

    for analysis in cfg["analyses"]:
        try:
            doc = _ANALYSES[analysis](cfg, prob, u0, traj, context)
        except SlowFastError as exc:
            doc = {"pass": False, "error": str(exc)}
        doc = {**header, **doc}
        write_json(out / f"{analysis}.json", doc)
        results[analysis] = {"pass": bool(doc["pass"]), "artifact": f"{analysis}.json"}

    summary = {**header, "analyses": cfg["analyses"], "results": results,
               "pass": all(r["pass"] for r in results.values()), "config": cfg}
    write_json(out / "report.json", summary)
    return summary


def _do_classify(cfg, prob, u0, traj, context):
    rep = classify(traj, prob)
    doc = rep.to_dict()
    expect = cfg["classify"]["expect"]
    ok = rep.verdict in ("null", "slow", "fast") and (expect is None or rep.verdict == expect)
    if rep.verdict == "slow" and cfg["classify"]["verify_slow"]:
        concl = verify_slow_conclusions(traj, prob.bounds.p, rep)
        doc["slow_conclusions"] = concl.to_dict()
        ok = ok and concl.passed
    doc["pass"] = bool(ok)
    return doc


def _do_certify(cfg, prob, u0, traj, context):
    cs = cfg["certify_slow"]
    cert = context.setdefault("certificate", _slow_certificate(cfg, prob))
    mem = certify(prob.spectrum, u0, cert)
    doc = {**cert.to_dict(), "membership": mem.member, "slacks": mem.slacks}
    ok = mem.member
    if mem.member:
        mon = monitor_certified_run(prob, u0, cert, integrator_config(cfg, t_end=cs["monitor_t_end"],
                                                                      dt_ratio=cfg["integrator"]["dt_ratio"] or 0.01))
        doc["monitor"] = mon.to_dict()
        doc["M1_hat"] = mon.M1_hat
        ok = ok and mon.passed
        if cs["openness"]:
            rng = np.random.default_rng(cfg["seed"])
            probe = openness_probe(prob.spectrum, u0, cert, rng, n=int(cs["openness_samples"]))
            doc["openness"] = probe
            ok = ok and probe["pass"]
    doc["pass"] = bool(ok)
    return doc


def _do_fast(cfg, prob, u0, traj, context):
    fc = cfg["construct_fast"]
    if "fast_solution" not in context:
        lam, v0, w0, params = _fast_data(cfg, prob)
        context["fast_solution"] = solve_fixed_point(prob, lam, v0, w0, params, tol=fc["tol"])
        context["fast_params"] = params
    sol, params = context["fast_solution"], context["fast_params"]
    doc = sol.to_dict()
    ok = sol.residual < 1e-10
    if fc["validate"]:
        window = tuple(fc["window"])
        val = validate_solution(sol, prob, params, integrator_config(cfg, t_end=window[1], dt_ratio=0.0, diag_stride=1),
                                window=window, window_tol=fc["window_tol"])
        doc["validation"] = val.to_dict()
        ok = ok and val.passed
    doc["pass"] = bool(ok)
    return doc


def _do_quotients(cfg, prob, u0, traj, context):
    qc = cfg["quotients"]
    checks = [check_quotient_inequalities(traj, prob, d, atol=qc["atol"]).to_dict()
              for d in _resolve_d(qc["d"], prob.bounds.p)]
    return {"checks": checks, "pass": all(c["pass"] for c in checks)}


_ANALYSES = {"classify": _do_classify, "certify-slow": _do_certify,
             "construct-fast": _do_fast, "quotient-check": _do_quotients}


def sweep_points(raw: dict, axes: dict | None = None) -> list:
    """Cartesian product of the sweep axes in declaration order, as override dicts."""
    axes = raw.get("sweep", {}).get("axes", {}) if axes is None else axes
    if not axes:
        return [{}]
    keys = list(axes)
    for k in keys:
        if not isinstance(axes[k], list) or not axes[k]:
            raise ConfigError(f"sweep.axes.{k}", "expected a non-empty list")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]


def _point_config(raw: dict, overrides: dict) -> dict:
    doc = copy.deepcopy(raw)
    doc.pop("sweep", None)
    for path, value in overrides.items():
        set_path(doc, path, value)
    return resolve(doc)


def _run_point(args):
    cfg, out = args
    try:
        return run_pipeline(cfg, out)["pass"], None
    except SlowFastError as exc:
        return False, str(exc)


def run_sweep(raw: dict, out_dir) -> dict:
    """One pipeline per grid point under ``out_dir/point_XXXX`` plus ``index.json``."""
    base = resolve(raw)
    sw = base["sweep"]
    points = sweep_points(raw, sw["axes"])
    if len(points) > int(sw["budget"]):
        raise ConfigError("sweep.budget", f"grid has {len(points)} points, budget is {sw['budget']}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfgs = [_point_config(raw, ov) for ov in points]
    jobs = [(c, out / f"point_{i:04d}") for i, c in enumerate(cfgs)]
    workers = max(1, int(sw["workers"]))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            status = list(pool.map(_run_point, jobs))
    else:
        status = [_run_point(j) for j in jobs]
    entries = [{"index": i, "dir": f"point_{i:04d}", "overrides": ov, "pass": ok, "error": err,
                "config_hash": config_hash(c)}
               for i, (ov, c, (ok, err)) in enumerate(zip(points, cfgs, status))]
    index = {"config_hash": config_hash(base), "versions": versions(), "points": entries,
             "pass": all(e["pass"] for e in entries), "axes": sw["axes"],
             "base_config": canonical(base)}
    write_json(out / "index.json", index)
    return index
