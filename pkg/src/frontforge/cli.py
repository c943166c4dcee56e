"""Batch front-end: parse a scenario config, dispatch to the solver,
diagnostics, or evolution machinery, and emit plot-ready artifacts.

One JSON document describes a scenario; every run writes its artifacts plus
a manifest listing each file together with the config hash. Artifacts are
deterministic for a fixed config (the manifest's timestamp field is the
only exception). Exit codes: 0 success, 1 config error, 2 solver
nonconvergence, 3 validation failure.
"""

import argparse
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import cauchy, diagnostics, measure as measure_mod
from . import nonlinearity as nl_mod
from . import operators, solver
from .errors import FrontforgeError, LevelNotAttained, UnboundedSupport

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_CONVERGENCE = 2
EXIT_VALIDATION = 3

TASKS = ("solve", "continue", "bounds", "evolve", "classify", "validate")


class _ConfigError(Exception):
    pass


def _require(cond, message):
    if not cond:
        raise _ConfigError(message)


def build_measure(block):
    _require(isinstance(block, dict), "measure block must be an object")
    kind = block.get("kind")
    eps = float(block.get("epsilon", 0.0))
    restrict = float(block.get("restrict_radius", math.inf))
    if kind == "fractional":
        _require("s" in block, "fractional measure needs 's'")
        return measure_mod.fractional(
            s=float(block["s"]),
            amplitude=float(block.get("amplitude", 1.0)),
            outer_cut=float(block.get("support_radius", math.inf)),
            epsilon=eps, restrict_radius=restrict)
    if kind == "uniform":
        m = measure_mod.uniform(
            radius=float(block.get("support_radius", 1.0)), epsilon=eps)
        return measure_mod.restrict(m, restrict) if math.isfinite(restrict) \
            else m
    if kind == "tabulated":
        _require("nodes" in block and "values" in block,
                 "tabulated measure needs 'nodes' and 'values'")
        return measure_mod.tabulated(block["nodes"], block["values"],
                                     epsilon=eps, restrict_radius=restrict)
    raise _ConfigError(f"unknown measure kind {kind!r}")


def build_nonlinearity(block):
    _require(isinstance(block, dict), "nonlinearity block must be an object")
    kind = block.get("kind")
    if kind == "cubic_bistable":
        nl = nl_mod.cubic_bistable(float(block.get("theta", 0.3)))
    elif kind == "ignition":
        nl = nl_mod.ignition(float(block.get("theta", 0.3)),
                             exponent=float(block.get("exponent", 2.0)),
                             scale=float(block.get("scale", 1.0)))
    elif kind == "allee_monostable":
        nl = nl_mod.allee_monostable(float(block.get("beta", 2.0)))
    else:
        raise _ConfigError(f"unknown nonlinearity kind {kind!r}")
    shift = float(block.get("shift", 0.0))
    if shift:
        nl = nl_mod.shift_by_tail_mass(nl, shift).descriptor
    cutoff = block.get("cutoff_n")
    if cutoff is not None:
        nl = nl_mod.ignition_cutoff(nl, int(cutoff))
    return nl


def build_grid(block):
    _require(isinstance(block, dict), "grid block must be an object")
    _require("L" in block and "N" in block, "grid block needs 'L' and 'N'")
    return operators.Grid(float(block["L"]), int(block["N"]))


def _fmt(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return float(x)


def _write_csv(path, header, columns):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_sanitize(payload), fh, indent=2, sort_keys=True,
                  allow_nan=False)
        fh.write("\n")


def diagnostics_block(sol, m, nl):
    """The per-front diagnostics summary; entries that need unavailable
    structure (unbounded mass, wrong class) stay null."""
    block = {k: None for k in
             ("identity1", "identity2", "identity3", "identity4", "sigma0",
              "cbar", "clow", "decay_rate_fit", "decay_rate_theory",
              "w_convex", "ign_identity")}
    if math.isfinite(measure_mod.total_mass(m)):
        rep = diagnostics.identity_checks(sol, m, nl)
        block["identity1"] = rep.residual1
        block["identity2"] = rep.slack2
        block["identity3"] = rep.slack3
        block["identity4"] = rep.slack4
    try:
        fit = diagnostics.tail_rate_fit(sol)
        block["decay_rate_fit"] = fit.rate if fit.exponential else None
    except (ValueError, FrontforgeError):
        pass
    tag = nl.class_tag
    if tag == nl_mod.BISTABLE:
        slope = nl_mod.evaluate_array(nl, 0.0)[1]
        if m.has_bounded_support and slope < 0.0:
            block["decay_rate_theory"] = diagnostics.dispersion_root(
                m, float(slope)).rate
        cc = diagnostics.chen_upper_bound(m, nl)
        block["sigma0"] = cc.sigma0
        block["cbar"] = cc.c_bar
    if m.has_bounded_support:
        try:
            rep = diagnostics.antiderivative_check(sol, m, nl)
            block["w_convex"] = bool(rep.w_convex)
        except (ValueError, FrontforgeError):
            pass
    if tag == nl_mod.IGNITION and \
            math.isfinite(measure_mod.moments(m).m_first):
        block["ign_identity"] = diagnostics.ignition_identity(
            sol, m).relative_residual
    return {k: (_fmt(v) if not isinstance(v, bool) else v)
            for k, v in block.items()}


def _front_artifacts(sol, m, nl, outdir, files, dump_jacobian=False):
    x = sol.profile.grid.nodes
    _write_csv(outdir / "front.csv", ["x", "u"], [x, sol.profile.values])
    files.append("front.csv")
    payload = {
        "c": sol.speed,
        "residual_norm": sol.residual_norm,
        "iterations": sol.iterations,
        "epsilon": sol.epsilon,
        "converged": sol.converged,
        "monotone": sol.monotone,
        "phase_level": sol.phase_level,
        "identity_checks": diagnostics_block(sol, m, nl),
    }
    _write_json(outdir / "front.json", payload)
    files.append("front.json")
    if dump_jacobian:
        A, w_left, w_right = operators.jacobian(m, sol.profile.grid)
        np.savetxt(outdir / "jacobian.csv", A, delimiter=",", fmt="%.17g")
        files.append("jacobian.csv")


def _initial_profile(cfg, grid):
    block = cfg.get("initial", {"kind": "ramp", "x0": 0.0})
    kind = block.get("kind", "ramp")
    if kind == "ramp":
        x0 = float(block.get("x0", 0.0))
        h = grid.spacing
        vals = np.clip((x0 + 3.0 * h - grid.nodes) / (3.0 * h), 0.0, 1.0)
        return operators.Profile(grid, vals, 1.0, 0.0)
    if kind == "logistic":
        return solver.initial_guess(grid, float(block.get("level", 0.5)),
                                    width=block.get("width"))
    raise _ConfigError(f"unknown initial data kind {kind!r}")


def run_scenario(cfg, outdir, dump_jacobian=False):
    """Execute one scenario; returns the process exit status."""
    task = cfg.get("task")
    _require(task in TASKS, f"task must be one of {TASKS}")
    m = build_measure(cfg.get("measure", {}))
    nl = build_nonlinearity(cfg.get("nonlinearity", {}))
    opts = cfg.get("options", {})
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    status = EXIT_OK

    if task == "validate":
        report = {"measure_ok": True}
        try:
            cls = nl_mod.classify(nl)
            report["class"] = cls.class_tag
            report["well_balanced"] = cls.well_balanced
            report["integral"] = cls.integral
            report["slope_at_zero"] = cls.slope_at_zero
            if cls.class_tag == nl_mod.BISTABLE and cls.well_balanced:
                report["verdict"] = "rejected: well balanced reaction"
                status = EXIT_VALIDATION
            else:
                report["verdict"] = "ok"
        except FrontforgeError as exc:
            report["verdict"] = f"rejected: {exc}"
            status = EXIT_VALIDATION
        _write_json(outdir / "validate.json", report)
        files.append("validate.json")

    elif task == "solve":
        grid = build_grid(cfg.get("grid", {}))
        sol = solver.newton_solve(
            m, nl, grid,
            phase_level=opts.get("phase_level"),
            tol=float(opts.get("tol", 1e-10)),
            delta=float(opts.get("delta", 0.0)))
        _front_artifacts(sol, m, nl, outdir, files, dump_jacobian)
        if not (sol.converged and sol.monotone):
            status = EXIT_NO_CONVERGENCE

    elif task == "continue":
        grid = build_grid(cfg.get("grid", {}))
        try:
            rep = solver.continue_in_epsilon(
                m, nl, grid,
                eps0=float(opts.get("eps0", 0.4)),
                factor=float(opts.get("factor", 0.5)),
                floor=opts.get("floor"),
                phase_level=opts.get("phase_level"))
        except FrontforgeError as exc:
            print(f"continuation failed: {exc}", file=sys.stderr)
            return EXIT_NO_CONVERGENCE
        _write_csv(outdir / "continuation.csv", ["epsilon", "c"],
                   [np.asarray(rep.schedule), np.asarray(rep.speeds)])
        files.append("continuation.csv")
        _write_json(outdir / "continuation.json", {
            "speeds": rep.speeds,
            "schedule": rep.schedule,
            "cauchy_converged": rep.converged,
            "extrapolated_speed": _fmt(rep.extrapolated_speed),
            "warning": rep.warning,
        })
        files.append("continuation.json")
        final = rep.solutions[-1]
        m_eff = measure_mod.truncate_small(m, final.epsilon)
        _front_artifacts(final, m_eff, nl, outdir, files, dump_jacobian)
        if not (final.converged and final.monotone):
            status = EXIT_NO_CONVERGENCE

    elif task == "bounds":
        grid = build_grid(cfg.get("grid", {}))
        cc = diagnostics.chen_upper_bound(m, nl, rho=opts.get("rho"))
        r = float(opts.get("restriction_radius", 2.0))
        eps = float(opts.get("eps", 0.0))
        low = diagnostics.truncated_lower_bound(m, nl, grid, r, eps)
        if math.isfinite(measure_mod.total_mass(m)):
            sol = solver.newton_solve(m, nl, grid)
            c_front = sol.speed
        else:
            rep = solver.continue_in_epsilon(m, nl, grid)
            c_front = rep.extrapolated_speed
        payload = {
            "c": _fmt(c_front),
            "clow": _fmt(low.c_low),
            "cbar": _fmt(cc.c_bar),
            "sigma0": _fmt(cc.sigma0),
            "reaction_floor": _fmt(cc.reaction_floor),
            "tail_radius": _fmt(cc.tail_radius),
            "window_moment": _fmt(cc.window_moment),
            "sandwich_ok": bool(low.c_low <= c_front <= cc.c_bar),
        }
        _write_json(outdir / "bounds.json", payload)
        files.append("bounds.json")
        if not payload["sandwich_ok"]:
            status = EXIT_VALIDATION

    elif task in ("evolve", "classify"):
        grid = build_grid(cfg.get("grid", {}))
        u0 = _initial_profile(opts, grid)
        level = float(opts.get("level", 0.5))
        try:
            tr = cauchy.evolve(u0, m, nl, float(opts.get("horizon", 10.0)),
                               level=level,
                               dt=opts.get("dt"))
        except LevelNotAttained as exc:
            print(f"evolution failed: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        _write_csv(outdir / "trajectory.csv", ["t", "x_lambda"],
                   [tr.times, tr.positions])
        files.append("trajectory.csv")
        stride = int(opts.get("snapshot_stride", 0))
        if stride > 0:
            rows = [s.values for s in tr.states[::stride]]
            _write_csv(outdir / "snapshots.csv",
                       [f"t={t:.6g}" for t in tr.sample_times[::stride]],
                       rows)
            files.append("snapshots.csv")
        if task == "classify":
            verdict = cauchy.classify_spreading(
                tr, burn_in=float(opts.get("burn_in", 0.3)))
            _write_json(outdir / "verdict.json", {
                "tag": verdict.tag,
                "value": _fmt(verdict.value),
                "r2": _fmt(verdict.r_squared),
            })
            files.append("verdict.json")

    manifest = {
        "config_hash": config_hash(cfg),
        "created": datetime.now(timezone.utc).isoformat(),
        "files": sorted(files),
    }
    _write_json(outdir / "manifest.json", manifest)
    return status


def config_hash(cfg):
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _limit_threads():
    cap = os.environ.get("FRONTFORGE_THREADS")
    if not cap:
        return
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(int(cap))
    except (ImportError, ValueError):
        pass


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="frontforge",
        description="Nonlocal traveling-front solver and regime diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute a scenario config")
    run_p.add_argument("config", help="path to the scenario JSON")
    run_p.add_argument("--out", default=None,
                       help="output directory (default: config's, else cwd)")
    run_p.add_argument("--dump-jacobian", action="store_true",
                       help="write the dense operator matrix as CSV")
    args = parser.parse_args(argv)
    _limit_threads()
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise _ConfigError("config root must be a JSON object")
        outdir = args.out or cfg.get("output", ".")
        return run_scenario(cfg, outdir, dump_jacobian=args.dump_jacobian)
    except (_ConfigError, json.JSONDecodeError, OSError, KeyError,
            TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnboundedSupport as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FrontforgeError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
