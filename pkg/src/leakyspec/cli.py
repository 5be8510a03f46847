"""Batch driver: ``python -m leakyspec {solve,schatten,verify,convergence} [config.json]``.

Exit codes: 0 success, 1 task failure (partial artifacts kept, ``<task>.FAILED``
marker written), 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
import traceback
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import config as cfgmod
from .boundary_ops import (
    UnsupportedConfigurationError,
    assemble_single_layer,
    fourier_mode_eigenvalues,
    mode_weyl_circle,
    mode_weyl_sphere,
)
from .bs_solver import InteractionSpec, bs_eigenvalues, count_bound_states, find_bound_states
from .geometry import ClosedCurve, SphereSurface, build_grid
from .krein_schatten import (
    VolumeGrid,
    expected_slope,
    fit_profile,
    krein_difference,
    mode_singular_values,
    power_difference,
    singular_profile,
    write_singular_values_csv,
    write_slopes_json,
)
from .op_algebra import random_trials

logger = logging.getLogger("leakyspec")

EXIT_OK, EXIT_TASK, EXIT_CONFIG = 0, 1, 2


def fmt(x) -> str:
    """Fixed 17-significant-digit scientific notation."""
    return f"{float(x):.16e}"


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# tasks


def task_bound_states(cfg, out: Path):
    sv = cfg.solver
    states = find_bound_states(cfg.make_interaction(), cfg.make_geometry(), sv.bracket, sv.tol,
                               sv.N, sv.l_max, sv.backend, with_densities=False)
    rows = [(fmt(s.lam), s.multiplicity, fmt(s.residual), "" if s.mode is None else s.mode,
             s.backend) for s in states]
    write_csv(out / "bound_states.csv", ["lam", "multiplicity", "residual", "mode", "backend"], rows)
    return {"count": int(sum(s.multiplicity for s in states))}


def default_fit_range(l, N):
    return (4, min(32, N // 4)) if l == 1 else (3, 12)


def schatten_profiles(cfg):
    spec, geom = cfg.make_interaction(), cfg.make_geometry()
    lam = cfg.schatten.lam
    if isinstance(geom, SphereSurface):
        raise UnsupportedConfigurationError("Schatten profiles are implemented in two dimensions")
    modes = spec.kind == "delta_prime" or cfg.solver.backend == "modes"
    profiles = []
    if modes:
        if geom.kind != "circle":
            raise UnsupportedConfigurationError("mode-basis profiles need the circle")
        if cfg.schatten.powers != [1]:
            raise UnsupportedConfigurationError("mode-basis profiles are computed for power 1 only")
        R = geom.params["R"]
        fr = (4, 32)
        versus = ["free", "neumann"] if spec.kind == "delta_prime" else ["free"]
        for vs in versus:
            s = mode_singular_values(spec, lam, R, cfg.solver.l_max, vs)
            tag = f"{spec.kind}_vs_{vs}_l1"
            profiles.append(fit_profile(s, fr, tag, expected_slope(spec.kind, 1, 2, vs)))
        return profiles
    kappa = np.sqrt(-lam)
    v = cfg.volume
    grid = build_grid(geom, cfg.solver.N)
    if v.L is None:
        vol = VolumeGrid.for_decay(kappa, geom, v.m, tube=v.tube, boundary=grid)
    else:
        vol = VolumeGrid.box(v.L, v.m, v.tube, grid)
    for l in sorted(cfg.schatten.powers):
        op = power_difference(l, lam, spec, grid, vol, factored=True)
        profiles.append(singular_profile(op, None, default_fit_range(l, cfg.solver.N),
                                         f"delta_l{l}", expected_slope("delta", l)))
    return profiles


def task_schatten(cfg, out: Path):
    profiles = schatten_profiles(cfg)
    write_singular_values_csv(profiles, out / "singular_values.csv")
    write_slopes_json(profiles, out / "slopes.json")
    return {p.tag: p.slope for p in profiles}


def _observed_orders(errors, scale):
    """``log2(e_i / e_{i+1})``; nan once an error sits at rounding level."""
    floor = 1e3 * np.finfo(float).eps * max(abs(scale), 1.0)
    orders = [float("nan")]
    for e0, e1 in zip(errors[:-1], errors[1:]):
        orders.append(np.log2(e0 / e1) if e0 > floor and e1 > floor else float("nan"))
    return orders


def task_convergence(cfg, out: Path):
    spec, geom = cfg.make_interaction(), cfg.make_geometry()
    lam = cfg.schatten.lam
    dense = isinstance(geom, ClosedCurve) and spec.kind == "delta" and cfg.solver.backend != "modes"
    if dense:
        sizes = [n for n in (cfg.solver.N // 8, cfg.solver.N // 4, cfg.solver.N // 2, cfg.solver.N)
                 if n >= 8 and n % 2 == 0]
        obs = [float(bs_eigenvalues(lam, spec, geom, N=n).values.max()) for n in sizes]
        label = "N"
    else:
        sizes = [max(1, cfg.solver.l_max // 8), cfg.solver.l_max // 4, cfg.solver.l_max // 2,
                 cfg.solver.l_max]
        obs = [float(bs_eigenvalues(lam, spec, geom, l_max=n).values.max()) for n in sizes]
        label = "l_max"
    ref = obs[-1]
    errs = [abs(o - ref) for o in obs[:-1]]
    orders = _observed_orders(errs, ref) + [float("nan")]
    rows = [(n, fmt(o), fmt(e) if i < len(errs) else "nan", fmt(p))
            for i, (n, o, e, p) in enumerate(zip(sizes, obs, errs + [float("nan")], orders))]
    write_csv(out / "convergence.csv", [label, "observable", "error_vs_finest", "observed_order"], rows)
    return {"finest": ref}


def verification_checks(seed=0):
    """Invariant suite; each entry is ``(name, value, threshold)`` with pass iff value < threshold."""
    checks = []
    worst = 0.0
    for l_fn in (mode_weyl_circle, mode_weyl_sphere):
        for kappa in (0.3, 1.0, 3.0):
            for R in (0.7, 1.0, 2.0):
                res = l_fn(np.arange(41), kappa, R).residuals()
                worst = max(worst, res["weyl_tilde"], res["weyl_hat"])
    checks.append(("weyl_identities", worst, 1e-10))

    circle = ClosedCurve.circle(1.0)
    grid = build_grid(circle, 128)
    checks.append(("circle_perimeter", abs(grid.weights.sum() - 2 * np.pi), 1e-13))
    ev = fourier_mode_eigenvalues(assemble_single_layer(grid, 1.0), 8)
    ref = mode_weyl_circle(np.arange(9), 1.0, 1.0).m_tilde
    checks.append(("nystrom_modes", float(np.max(np.abs(ev - ref) / ref)), 1e-8))

    conj, tele = random_trials(seed=seed)
    checks.append(("conjugation_identity", float(conj.max()), 1e-10))
    checks.append(("telescoping_identity", float(tele.max()), 1e-10))

    spec = InteractionSpec.delta(2.0)
    vol = VolumeGrid.box(2.0, 16)
    D = krein_difference(-1.0, spec, circle, vol, N=32)
    checks.append(("krein_symmetry", float(np.linalg.norm(D - D.T) / np.linalg.norm(D)), 1e-10))
    s = np.linalg.svd(D, compute_uv=False)
    tail = float(s[32:].max() / s[0]) if len(s) > 32 else 0.0
    checks.append(("krein_rank_bound", tail, 1e3 * np.finfo(float).eps))

    dense = find_bound_states(spec, circle, N=64, with_densities=False)
    modes = find_bound_states(spec, circle, backend="modes", with_densities=False)
    ground = abs(dense[0].lam - modes[0].lam) / abs(modes[0].lam) if dense and modes else np.inf
    checks.append(("dense_vs_mode_ground_state", float(ground), 1e-6))
    cnt = count_bound_states(InteractionSpec.delta_prime(1.0), circle, l_max=64)
    cnt2 = count_bound_states(InteractionSpec.delta_prime(1.0), circle, l_max=128)
    checks.append(("delta_prime_count_stable", float(abs(cnt.count - cnt2.count)), 0.5))
    return checks


def task_verify(cfg, out: Path):
    checks = verification_checks(cfg.seed)
    doc = {name: {"value": value, "threshold": thr, "passed": bool(value < thr)}
           for name, value, thr in checks}
    Path(out / "verify.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    failed = [name for name, d in doc.items() if not d["passed"]]
    if failed:
        raise RuntimeError(f"verification failed: {', '.join(failed)}")
    return {"checks": len(doc)}


TASK_FUNCS = {
    "bound_states": task_bound_states,
    "schatten": task_schatten,
    "convergence": task_convergence,
    "verify": task_verify,
}


# ---------------------------------------------------------------------------
# driver


def _versions():
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"package": pkg, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def _thread_limit():
    raw = os.environ.get("SOLVER_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise cfgmod.ConfigError(f"SOLVER_THREADS must be a positive integer, got {raw!r}")
    return n


def run(cfg: cfgmod.RunConfig) -> int:
    """Execute the configured tasks; returns the process exit code."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    limit = _thread_limit()
    meta = {"versions": _versions(), "seed": cfg.seed, "config": cfgmod.to_dict(cfg),
            "tasks": {}, "timings": {}, "threads": limit}
    code = EXIT_OK
    np.random.seed(cfg.seed)
    with threadpool_limits(limits=limit):
        for task in cfg.tasks:
            marker = out / f"{task}.FAILED"
            if marker.exists():
                marker.unlink()
            t0 = time.perf_counter()
            try:
                info = TASK_FUNCS[task](cfg, out)
                meta["tasks"][task] = {"status": "ok", **info}
            except Exception as err:  # keep going; partial artifacts stay on disk
                logger.error("task %s failed: %s", task, err)
                marker.write_text(f"{type(err).__name__}: {err}\n{traceback.format_exc()}")
                meta["tasks"][task] = {"status": "failed", "error": str(err)}
                code = EXIT_TASK
            meta["timings"][task] = time.perf_counter() - t0
    (out / "run_meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True, default=str) + "\n")
    return code


SUBCOMMAND_TASKS = {"schatten": ["schatten"], "verify": ["verify"], "convergence": ["convergence"]}
VERIFY_DEFAULTS = {"geometry": {"kind": "circle", "R": 1.0},
                   "interaction": {"kind": "delta", "strength": 2.0}}


def build_parser():
    p = argparse.ArgumentParser(prog="leakyspec", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve", "run the configured tasks (default: bound states)"),
                        ("schatten", "singular-value profiles and decay slopes"),
                        ("verify", "invariant suite; exit 0 iff all checks pass"),
                        ("convergence", "grid-refinement study")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", nargs="?", help="JSON run configuration")
        sp.add_argument("--geometry", choices=["circle", "ellipse", "kite", "sphere"])
        sp.add_argument("--radius", type=float)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--grid-n", type=int)
        sp.add_argument("--task", action="append", choices=list(cfgmod.TASKS))
        sp.add_argument("--out", help="output directory (overrides the config)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    tasks = args.task or SUBCOMMAND_TASKS.get(args.command)
    try:
        doc = {}
        if args.config is not None:
            try:
                doc = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as err:
                raise cfgmod.ConfigError(f"cannot read config {args.config}: {err}") from None
        elif args.command == "verify":
            doc = dict(VERIFY_DEFAULTS)
        doc = cfgmod.apply_overrides(doc, args.geometry, args.radius, args.alpha, args.beta,
                                     args.grid_n, tasks)
        if args.out is not None:
            doc["output"] = args.out
        cfg = cfgmod.from_dict(doc)
        _thread_limit()
    except (cfgmod.ConfigError, UnsupportedConfigurationError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
