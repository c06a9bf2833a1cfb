"""Scenario-driven command line entry point.

Subcommands:

    kgsys run <config.yaml>     run one scenario, write artifacts
    kgsys validate              run the full property suite
    kgsys groundstate ...       solve one ground state, print JSON
    kgsys classify <snapshot>   region verdict for a stored phase point

Configs are YAML with a strict schema (unknown keys are rejected with their
path).  Every run writes a manifest.json holding the SHA-256 of the config
file before any experiment starts; a FAILED sentinel marks runs whose
declared checks did not pass.  Exit codes: 0 success, 1 check failure,
2 config error.  The KGSYS_WORKERS environment variable sizes the worker
pool used for independent ensemble members.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import yaml

from .classify import (REGION_PS_MINUS, REGION_PS_PLUS, VERDICT_BLOWUP,
                       VERDICT_GLOBAL, classify, make_dichotomy_ensemble,
                       perturbation_test, run_dichotomy)
from .functionals import FieldPair, NonlinearityParams, PhasePoint
from .groundstate import (candidate_levels, candidate_pair, get_ground_state,
                          default_grid)
from .lorentz import (dep_check, energy_momentum_rotation_check,
                      group_law_defect, make_block)
from .profiles import BubbleSpec, extract_profiles, synthesize_sequence
from .propagator import STATUS_COMPLETED, StepPolicy, evolve
from .sampling import gaussian_bump, random_phase
from .spectral import (make_grid, read_field_snapshot, write_field_snapshot,
                       zero_field)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2

KINDS = ("groundstate_sweep", "dichotomy_ensemble", "lorentz_check",
         "profile_test", "perturbation_study", "single_run")


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, float) or isinstance(v, np.floating):
        return "%.10g" % v
    return str(v)


# ---------------------------------------------------------------- schema

_FLOAT = (int, float)
_PARAMS_SCHEMA = {"beta": _FLOAT, "mu1": _FLOAT, "mu2": _FLOAT}
_GRID_SCHEMA = {"dim": int, "points": int, "box_half_length": _FLOAT}
_POLICY_SCHEMA = {"dt_base": _FLOAT, "dt_min": _FLOAT,
                  "amplitude_guard": _FLOAT, "tail_guard": _FLOAT,
                  "snapshot_stride": int, "diag_stride": int}

SCHEMA = {
    "kind": str,
    "seed": int,
    "output_dir": str,
    "params": _PARAMS_SCHEMA,
    "grid": _GRID_SCHEMA,
    "policy": _POLICY_SCHEMA,
    "groundstate_sweep": {"betas": [_FLOAT], "check_monotone": bool},
    "dichotomy_ensemble": {"n_members": int, "horizon_plus": _FLOAT,
                           "horizon_minus": _FLOAT, "h0_mode": str},
    "lorentz_check": {"t_half": _FLOAT, "snapshot_dt": _FLOAT,
                      "lambdas": [_FLOAT], "axis": int, "dep_tol": _FLOAT,
                      "rotation_tol": _FLOAT, "group_tol": _FLOAT},
    "profile_test": {"n_count": int, "max_bubbles": int, "nu_floor": _FLOAT,
                     "noise_amplitude": _FLOAT},
    "perturbation_study": {"deltas": [_FLOAT], "n_directions": int,
                           "horizon": _FLOAT, "exponent_low": _FLOAT,
                           "exponent_high": _FLOAT},
    "single_run": {"horizon": _FLOAT, "amplitude1": _FLOAT,
                   "amplitude2": _FLOAT, "width": _FLOAT,
                   "velocity_amplitude": _FLOAT, "max_energy_drift": _FLOAT},
}


def _check_type(value, expected, path):
    if isinstance(expected, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        for i, item in enumerate(value):
            _check_type(item, expected[0], f"{path}[{i}]")
        return
    if isinstance(expected, dict):
        _validate_section(value, expected, path)
        return
    if expected is int and isinstance(value, bool):
        raise ConfigError(f"{path}: expected an integer, got a boolean")
    if not isinstance(value, expected):
        name = getattr(expected, "__name__", "number")
        raise ConfigError(f"{path}: expected {name}, got {type(value).__name__}")


def _validate_section(section, schema, path):
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected a mapping")
    for key, value in section.items():
        if key not in schema:
            raise ConfigError(f"{path}.{key}: unknown key "
                              f"(allowed: {', '.join(sorted(schema))})")
        _check_type(value, schema[key], f"{path}.{key}")


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        config = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}")
    if not isinstance(config, dict):
        raise ConfigError(f"config {path}: top level must be a mapping")
    _validate_section(config, SCHEMA, "config")
    kind = config.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"config.kind: must be one of {', '.join(KINDS)}; "
                          f"got {kind!r}")
    for other in KINDS:
        if other != kind and other in config:
            raise ConfigError(f"config.{other}: section does not match "
                              f"kind {kind!r}")
    if "output_dir" not in config:
        raise ConfigError("config.output_dir: required")
    config["_hash"] = hashlib.sha256(raw).hexdigest()
    return config


def _params_from(config: dict) -> NonlinearityParams:
    p = config.get("params", {})
    try:
        return NonlinearityParams(beta=float(p.get("beta", 1.0)),
                                  mu1=float(p.get("mu1", 1.0)),
                                  mu2=float(p.get("mu2", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"config.params: {exc}")


def _grid_from(config: dict, dim=1, points=256, box=12.0):
    g = config.get("grid", {})
    try:
        return make_grid(int(g.get("dim", dim)), int(g.get("points", points)),
                         float(g.get("box_half_length", box)))
    except ValueError as exc:
        raise ConfigError(f"config.grid: {exc}")


def _policy_from(config: dict) -> StepPolicy:
    p = config.get("policy", {})
    try:
        return StepPolicy(
            dt_base=float(p.get("dt_base", 1e-2)),
            dt_min=float(p.get("dt_min", 1e-5)),
            amplitude_guard=float(p.get("amplitude_guard", 25.0)),
            tail_guard=float(p.get("tail_guard", 0.35)),
            snapshot_stride=int(p.get("snapshot_stride", 10)),
            diag_stride=int(p.get("diag_stride", 1)))
    except ValueError as exc:
        raise ConfigError(f"config.policy: {exc}")


def _n_workers() -> int:
    raw = os.environ.get("KGSYS_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"KGSYS_WORKERS must be an integer, got {raw!r}")
    return max(1, n)


def _write_csv(path, header, rows, config_hash):
    with open(path, "w") as f:
        f.write(f"# config_hash: {config_hash}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, default=_fmt)
        f.write("\n")


# ---------------------------------------------------------------- scenarios

def _run_groundstate_sweep(config, out_dir):
    opts = config.get("groundstate_sweep", {})
    betas = [float(b) for b in opts.get("betas", [0.0, 1.0, 2.0])]
    p = config.get("params", {})
    mu1 = float(p.get("mu1", 1.0))
    mu2 = float(p.get("mu2", 1.0))
    grid = _grid_from(config, dim=3, points=32, box=12.0)
    rows = []
    for beta in betas:
        params = NonlinearityParams(beta=beta, mu1=mu1, mu2=mu2)
        gs = get_ground_state(params, grid)
        cands = candidate_levels(params)
        level = min(gs.level, min(cands.values()))
        rows.append((beta, level, gs.kind, gs.k0_value(), gs.el_residual))
    _write_csv(os.path.join(out_dir, "sweep.csv"),
               ["beta", "level", "kind", "K0", "el_residual"],
               rows, config["_hash"])
    _write_json(os.path.join(out_dir, "sweep.json"),
                {"rows": [{"beta": r[0], "level": r[1], "kind": r[2]}
                          for r in rows]})
    checks = {}
    if opts.get("check_monotone", True) and len(rows) > 1:
        ordered = sorted(rows, key=lambda r: r[0])
        levels = [r[1] for r in ordered]
        checks["levels_nonincreasing"] = bool(
            np.all(np.diff(levels) <= 1e-8 * max(levels)))
    return checks


def _dichotomy_h0(params, opts):
    mode = opts.get("h0_mode", "candidates")
    if mode == "candidates":
        return min(candidate_levels(params).values())
    if mode == "solve":
        gs = get_ground_state(params)
        return min(gs.level, min(candidate_levels(params).values()))
    raise ConfigError("config.dichotomy_ensemble.h0_mode: "
                      "must be 'candidates' or 'solve'")


def _run_dichotomy_ensemble(config, out_dir):
    opts = config.get("dichotomy_ensemble", {})
    n = int(opts.get("n_members", 0))
    hp = float(opts.get("horizon_plus", 6.0))
    hm = float(opts.get("horizon_minus", 30.0))
    params = _params_from(config)
    grid = _grid_from(config, dim=3, points=48, box=12.0)
    policy = _policy_from(config)
    h0_val = _dichotomy_h0(params, opts)

    rows = []
    mis = 0
    if n > 0:
        kind = "symmetric" if abs(params.mu1 - params.mu2) < 1e-14 \
            else "semitrivial"
        ground = candidate_pair(params, grid, kind)
        members = make_dichotomy_ensemble(params, grid, h0_val, ground, n,
                                          seed=int(config.get("seed", 0)))

        def run_one(item):
            idx, (phase, expected) = item
            horizon = hm if expected == REGION_PS_MINUS else hp
            rep = run_dichotomy(phase, params, h0_val, horizon, policy)
            return idx, expected, rep

        with ThreadPoolExecutor(max_workers=_n_workers()) as pool:
            outcomes = list(pool.map(run_one, enumerate(members)))
        for idx, expected, rep in sorted(outcomes):
            ok = rep.region == expected and rep.invariance_ok and (
                rep.verdict == VERDICT_BLOWUP
                if expected == REGION_PS_MINUS
                else rep.verdict == VERDICT_GLOBAL)
            if not ok:
                mis += 1
            rows.append((idx, expected, rep.region, rep.verdict,
                         rep.escape_time, rep.peak_h1, rep.invariance_ok))
    _write_csv(os.path.join(out_dir, "dichotomy.csv"),
               ["index", "expected", "region", "verdict", "escape_time",
                "peak_h1", "invariance_ok"], rows, config["_hash"])
    _write_json(os.path.join(out_dir, "dichotomy_summary.json"),
                {"members": n, "misclassified": mis, "h0": h0_val})
    return {"zero_misclassifications": mis == 0}


def _run_lorentz_check(config, out_dir):
    opts = config.get("lorentz_check", {})
    t_half = float(opts.get("t_half", 6.0))
    snap_dt = float(opts.get("snapshot_dt", 0.02))
    lambdas = [float(x) for x in opts.get("lambdas", [0.1, 0.2, 0.3])]
    axis = int(opts.get("axis", 0))
    params = _params_from(config)
    grid = _grid_from(config, dim=1, points=384, box=16.0)
    policy = _policy_from(config)
    if "policy" not in config:
        policy = StepPolicy(dt_base=5e-3, diag_stride=100)

    g = grid
    phase = PhasePoint(FieldPair(gaussian_bump(g, 0.4, 1.2, center=[1.0]),
                                 gaussian_bump(g, 0.3, 1.5, center=[-0.5])),
                       gaussian_bump(g, 0.2, 1.5, center=[0.5]),
                       zero_field(g))
    block = make_block(phase, params, t_half, snap_dt, policy)
    dep = dep_check(block, axis)
    rows = energy_momentum_rotation_check(block, axis, lambdas)
    group = group_law_defect(block, 0.15, 0.1, axis=axis, inner_stride=0.04)
    _write_csv(os.path.join(out_dir, "rotation.csv"),
               ["lambda", "E_boosted", "P_boosted", "E_predicted",
                "P_predicted", "rel_err"],
               [(r.lam, r.E_boosted, r.P_boosted, r.E_predicted,
                 r.P_predicted, r.rel_err) for r in rows], config["_hash"])
    _write_json(os.path.join(out_dir, "lorentz_summary.json"),
                {"dep_defect": dep, "group_law_defect": group,
                 "rotation_worst": max(r.rel_err for r in rows)})
    return {
        "dep": dep <= float(opts.get("dep_tol", 1e-3)),
        "rotation": max(r.rel_err for r in rows)
        <= float(opts.get("rotation_tol", 2e-3)),
        "group_law": group <= float(opts.get("group_tol", 1e-4)),
    }


def _run_profile_test(config, out_dir):
    opts = config.get("profile_test", {})
    n = int(opts.get("n_count", 16))
    max_bubbles = int(opts.get("max_bubbles", 4))
    nu_floor = float(opts.get("nu_floor", 1e-2))
    noise = float(opts.get("noise_amplitude", 1e-4))
    grid = _grid_from(config, dim=1, points=256, box=12.0)
    dx = grid.dx

    def snap(a):
        return np.round(np.asarray(a, dtype=float) / dx) * dx

    V1 = PhasePoint(FieldPair(gaussian_bump(grid, 1.0, 0.8),
                              gaussian_bump(grid, 0.5, 1.0)),
                    zero_field(grid), zero_field(grid))
    V2 = PhasePoint(FieldPair(gaussian_bump(grid, 0.6, 1.0),
                              gaussian_bump(grid, 0.3, 0.9)),
                    zero_field(grid), zero_field(grid))
    x1 = snap(-3.5 - 0.3 * np.arange(n)).reshape(-1, 1)
    x2 = snap(3.5 + 0.3 * np.arange(n)).reshape(-1, 1)
    t2 = np.round(np.linspace(0.0, 1.0, n) * 10) / 10
    seq = synthesize_sequence([BubbleSpec(V1, np.zeros(n), x1),
                               BubbleSpec(V2, t2, x2)], noise, n, grid,
                              seed=int(config.get("seed", 0)))
    dec = extract_profiles(seq, max_bubbles, nu_floor)
    rows = [(i, dec.block_levels[i], dec.nu_series[i], b.energy_sq())
            for i, b in enumerate(dec.bubbles)]
    _write_csv(os.path.join(out_dir, "bubbles.csv"),
               ["index", "block", "nu", "energy_sq"], rows, config["_hash"])
    shift_rows = []
    for i, b in enumerate(dec.bubbles):
        for m in range(n):
            shift_rows.append((i, m, b.t_shifts[m], float(b.x_shifts[m][0])))
    _write_csv(os.path.join(out_dir, "shifts.csv"),
               ["bubble", "member", "t_shift", "x_shift"], shift_rows,
               config["_hash"])
    recovered = (len(dec.bubbles) == 2
                 and np.max(np.abs(dec.bubbles[0].x_shifts - x1)) <= 1e-9
                 and np.max(np.abs(dec.bubbles[1].x_shifts - x2)) <= 1e-9)
    return {"bubbles_recovered": bool(recovered),
            "complete": not dec.incomplete}


def _run_perturbation_study(config, out_dir):
    opts = config.get("perturbation_study", {})
    deltas = [float(d) for d in opts.get("deltas", [1e-4, 1e-3, 1e-2])]
    n_dirs = int(opts.get("n_directions", 2))
    horizon = float(opts.get("horizon", 6.0))
    lo = float(opts.get("exponent_low", 0.9))
    hi = float(opts.get("exponent_high", 1.1))
    params = _params_from(config)
    grid = _grid_from(config, dim=1, points=256, box=12.0)
    policy = _policy_from(config)
    if "policy" not in config:
        policy = StepPolicy(dt_base=5e-3, diag_stride=20, snapshot_stride=50)
    base = PhasePoint(FieldPair(gaussian_bump(grid, 0.1, 1.5),
                                gaussian_bump(grid, 0.08, 2.0)),
                      zero_field(grid), zero_field(grid))
    rng = np.random.default_rng(int(config.get("seed", 0)))
    dirs = [random_phase(grid, rng, 1.0, corr_length=1.5)
            for _ in range(n_dirs)]
    rep = perturbation_test(base, params, deltas, dirs, horizon, policy)
    rows = [(d, *(rep.sup_distances[i, j] for j in range(n_dirs)))
            for i, d in enumerate(rep.deltas)]
    _write_csv(os.path.join(out_dir, "perturbation.csv"),
               ["delta"] + [f"sup_distance_{j}" for j in range(n_dirs)],
               rows, config["_hash"])
    _write_json(os.path.join(out_dir, "perturbation_summary.json"),
                rep.to_json_dict())
    return {"exponent_in_range": bool(lo <= rep.exponent <= hi),
            "no_violations": not rep.hypothesis_violations}


def _run_single_run(config, out_dir):
    opts = config.get("single_run", {})
    horizon = float(opts.get("horizon", 5.0))
    a1 = float(opts.get("amplitude1", 0.3))
    a2 = float(opts.get("amplitude2", 0.2))
    width = float(opts.get("width", 1.5))
    va = float(opts.get("velocity_amplitude", 0.0))
    params = _params_from(config)
    grid = _grid_from(config, dim=1, points=256, box=12.0)
    policy = _policy_from(config)
    phase = PhasePoint(FieldPair(gaussian_bump(grid, a1, width),
                                 gaussian_bump(grid, a2, width)),
                       gaussian_bump(grid, va, width), zero_field(grid))
    traj = evolve(phase, horizon, policy, params)
    rows = []
    for t, rep in zip(traj.times, traj.reports):
        rows.append((t, rep.E, rep.J, rep.K0, rep.K2,
                     *(float(p) for p in np.atleast_1d(rep.P))))
    p_cols = [f"P{ax}" for ax in range(grid.dim)]
    _write_csv(os.path.join(out_dir, "functionals.csv"),
               ["t", "E", "J", "K0", "K2"] + p_cols, rows, config["_hash"])
    final = traj.final_state
    write_field_snapshot(os.path.join(out_dir, "final_state.kgdu"),
                         [final.pair.u1, final.pair.u2, final.v1, final.v2])
    _write_json(os.path.join(out_dir, "run_summary.json"),
                {"status": traj.status, "energy_drift": traj.energy_drift,
                 "horizon": horizon})
    checks = {"completed": traj.status == STATUS_COMPLETED}
    if "max_energy_drift" in opts:
        checks["energy_drift"] = bool(
            traj.energy_drift <= float(opts["max_energy_drift"]))
    return checks


_RUNNERS = {
    "groundstate_sweep": _run_groundstate_sweep,
    "dichotomy_ensemble": _run_dichotomy_ensemble,
    "lorentz_check": _run_lorentz_check,
    "profile_test": _run_profile_test,
    "perturbation_study": _run_perturbation_study,
    "single_run": _run_single_run,
}


def run_scenario(config_path: str) -> int:
    config = load_config(config_path)
    out_dir = config["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"kind": config["kind"], "seed": int(config.get("seed", 0)),
                "config_hash": config["_hash"],
                "created_unix": int(time.time())}
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    sentinel = os.path.join(out_dir, "FAILED")
    if os.path.exists(sentinel):
        os.remove(sentinel)
    try:
        checks = _RUNNERS[config["kind"]](config, out_dir)
    except Exception as exc:
        with open(sentinel, "w") as f:
            f.write(f"{type(exc).__name__}: {exc}\n")
        raise
    _write_json(os.path.join(out_dir, "checks.json"),
                {k: bool(v) for k, v in checks.items()})
    if all(checks.values()):
        return EXIT_OK
    with open(sentinel, "w") as f:
        for name, ok in checks.items():
            f.write(f"{name}: {'pass' if ok else 'FAIL'}\n")
    return EXIT_CHECK_FAILED


def validate_suite(output_path: str | None = None) -> int:
    from .validation import run_all
    results = run_all(printer=print)
    if output_path:
        _write_json(output_path,
                    {r.name: {"passed": r.passed, "elapsed": r.elapsed,
                              "details": {k: str(v) for k, v
                                          in r.details.items()}}
                     for r in results})
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def _cmd_groundstate(args) -> int:
    try:
        params = NonlinearityParams(beta=args.beta, mu1=args.mu1,
                                    mu2=args.mu2)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    grid = make_grid(args.dim, args.points, args.box) if args.points \
        else default_grid()
    gs = get_ground_state(params, grid)
    cands = candidate_levels(params)
    out = {"level": gs.level, "h0": min(gs.level, min(cands.values())),
           "kind": gs.kind, "K0": gs.k0_value(),
           "el_residual": gs.el_residual, "converged": gs.converged,
           "candidates": {k: v for k, v in cands.items()}}
    print(json.dumps(out, default=_fmt, indent=2))
    return EXIT_OK


def _cmd_classify(args) -> int:
    try:
        params = NonlinearityParams(beta=args.beta, mu1=args.mu1,
                                    mu2=args.mu2)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        fields = read_field_snapshot(args.snapshot)
    except (OSError, ValueError) as exc:
        print(f"config error: cannot read snapshot: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if len(fields) != 4:
        print("config error: snapshot must hold exactly the four fields "
              "u1, u2, v1, v2", file=sys.stderr)
        return EXIT_CONFIG
    phase = PhasePoint(FieldPair(fields[0], fields[1]), fields[2], fields[3])
    h0_val = args.h0 if args.h0 is not None \
        else min(candidate_levels(params).values())
    verdict = classify(phase, params, h0_val)
    out = verdict.to_json_dict()
    out["h0"] = h0_val
    print(json.dumps(out, default=_fmt, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kgsys",
        description="Numerical laboratory for a coupled cubic Klein-Gordon "
                    "system on a periodic box")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("config")

    p_val = sub.add_parser("validate", help="run the property suite")
    p_val.add_argument("--output", default=None,
                       help="write a JSON report to this path")

    p_gs = sub.add_parser("groundstate", help="solve one ground state")
    p_gs.add_argument("--beta", type=float, required=True)
    p_gs.add_argument("--mu1", type=float, default=1.0)
    p_gs.add_argument("--mu2", type=float, default=1.0)
    p_gs.add_argument("--dim", type=int, default=3)
    p_gs.add_argument("--points", type=int, default=None,
                      help="grid points per axis (default: reference grid)")
    p_gs.add_argument("--box", type=float, default=12.0)

    p_cl = sub.add_parser("classify", help="region verdict for a snapshot")
    p_cl.add_argument("snapshot")
    p_cl.add_argument("--beta", type=float, default=1.0)
    p_cl.add_argument("--mu1", type=float, default=1.0)
    p_cl.add_argument("--mu2", type=float, default=1.0)
    p_cl.add_argument("--h0", type=float, default=None,
                      help="pass level override (default: analytic candidates)")

    args = parser.parse_args(argv)
    if args.command == "run":
        try:
            return run_scenario(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except Exception as exc:
            print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_CHECK_FAILED
    if args.command == "validate":
        return validate_suite(args.output)
    if args.command == "groundstate":
        return _cmd_groundstate(args)
    if args.command == "classify":
        return _cmd_classify(args)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
