"""Command-line entry point.

Exit codes: 0 success, 1 a verification check failed, 2 usage or configuration error.
Verbosity follows the ``QMS_LOG`` environment variable (DEBUG, INFO, WARNING, ...).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import QmetroError
from .hamiltonians import gibbs
from .lindblad import mixing_time_estimate, propagator, spectral_gap
from .norms import trace_norm
from .qpe import gram_family, single_round_amplitudes
from .trajectory import KrausSampler, RegisterSampler, bootstrap_sigma, empirical_state, run_chain, run_ensemble
from .verify import report_json, run_all

log = logging.getLogger("qmetro")

SWEEP_COLUMNS = ["r", "g", "tau", "beta", "residual", "gap", "tmix_est", "dist"]


def _matrix(m):
    m = np.asarray(m)
    return {"real": m.real.tolist(), "imag": m.imag.tolist()}


def _write_json(out, sub, name, payload):
    path = os.path.join(out, sub)
    os.makedirs(path, exist_ok=True)
    payload = {"version": __version__, **payload}
    full = os.path.join(path, name)
    with open(full, "w") as fh:
        json.dump(payload, fh, indent=2)
    log.info("wrote %s", full)
    return full


def _initial_state(d):
    psi = np.zeros(d, dtype=complex)
    psi[0] = 1
    return psi


def cmd_model(cfg, args):
    es = cfg.eigensystem()
    grid = cfg.grid()
    _write_json(
        args.out,
        "reports",
        "model.json",
        {
            "config": cfg.to_dict(),
            "warnings": cfg.warnings,
            "energies": es.energies.tolist(),
            "kappa": es.kappa,
            "grid_spacing": grid.spacing,
            "minimal_r": grid.minimal_r(cfg.beta),
            "gibbs_probabilities": gibbs(es, cfg.beta).probabilities.tolist(),
        },
    )
    return 0


def cmd_qpe_table(cfg, args):
    es = cfg.eigensystem()
    table = single_round_amplitudes(es, cfg.grid())
    fam = gram_family(table, cfg.g)
    diag = np.real(np.einsum("mjj->jm", fam.by_median))
    _write_json(
        args.out,
        "reports",
        "qpe_table.json",
        {
            "r": cfg.r,
            "g": cfg.g,
            "offsets": table.offsets.tolist(),
            "gamma": _matrix(table.gamma),
            "floor_index": table.floor_index.tolist(),
            "epsilon": table.epsilon.tolist(),
            "median_distribution": diag.tolist(),
        },
    )
    return 0


def cmd_channel_build(cfg, args):
    parts = cfg.parts()
    dec = parts.at(cfg.tau)
    os.makedirs(os.path.join(args.out, "states"), exist_ok=True)
    path = os.path.join(args.out, "states", "channel.npz")
    np.savez(path, version=__version__, E_tau=dec.E_tau.matrix, L=dec.L.matrix, J=dec.J_tau.matrix, tau=cfg.tau)
    _write_json(
        args.out,
        "reports",
        "channel.json",
        {
            "config": cfg.to_dict(),
            "warnings": cfg.warnings,
            "npz": path,
            "trace_preservation_error": dec.E_tau.trace_preservation_error(),
            "choi_min_eigenvalue": dec.E_tau.choi_min_eigenvalue(),
            "convention": "column-stacking vec(X)[i + d*j] = X[i, j]",
        },
    )
    return 0


def cmd_gap(cfg, args):
    parts = cfg.parts()
    L = parts.generator()
    rep = spectral_gap(L)
    est = mixing_time_estimate(L, cfg.epsilon, rep, seed=cfg.seed)
    rb = gibbs(parts.es, cfg.beta).matrix
    _write_json(
        args.out,
        "reports",
        "gap.json",
        {
            "config": cfg.to_dict(),
            "gap": rep.gap,
            "generator_eigenvalues": [[z.real, z.imag] for z in rep.eigenvalues],
            "fixed_point": _matrix(rep.fixed_point),
            "fixed_point_to_gibbs": trace_norm(rep.fixed_point - rb),
            "residual": trace_norm(L.apply(rb)),
            "t_mix_estimate": est.t_mix,
            "t_mix_bound": est.analytic_bound,
            "epsilon": cfg.epsilon,
        },
    )
    return 0


def cmd_evolve(cfg, args):
    parts = cfg.parts()
    L = parts.generator()
    d = parts.dim
    rho = np.outer(_initial_state(d), _initial_state(d).conj())
    t = args.time if args.time is not None else cfg.iterations * cfg.tau**2
    cont = propagator(L, t).apply(rho)
    K = int(round(t / cfg.tau**2))
    disc = parts.at(cfg.tau).E_tau.power(K).apply(rho)
    rb = gibbs(parts.es, cfg.beta).matrix
    _write_json(
        args.out,
        "states",
        "evolve.json",
        {
            "t": t,
            "iterations": K,
            "continuous": _matrix(cont),
            "discrete": _matrix(disc),
            "continuous_to_gibbs": trace_norm(cont - rb),
            "discrete_to_gibbs": trace_norm(disc - rb),
        },
    )
    return 0


def cmd_trajectory(cfg, args):
    parts = cfg.parts()
    es = parts.es
    if args.engine == "register":
        sampler = RegisterSampler(es, parts.grid, cfg.g, parts.ensemble, cfg.beta, cfg.tau)
    else:
        sampler = KrausSampler(parts, cfg.tau)
    psi = _initial_state(parts.dim)
    rec = run_chain(sampler, psi, cfg.iterations, cfg.seed)
    os.makedirs(os.path.join(args.out, "states"), exist_ok=True)
    path = os.path.join(args.out, "states", "trajectory.csv")
    with open(path, "w") as fh:
        fh.write(rec.to_csv(__version__))
    ens = run_ensemble(sampler, psi, cfg.iterations, cfg.trajectories, cfg.seed + 1)
    emp = empirical_state(ens.states)
    exact = parts.at(cfg.tau).E_tau.power(cfg.iterations).apply(np.outer(psi, psi.conj()))
    _write_json(
        args.out,
        "reports",
        "trajectory.json",
        {
            "engine": args.engine,
            "iterations": cfg.iterations,
            "trajectories": cfg.trajectories,
            "case_counts": ens.case_counts,
            "empirical_state": _matrix(emp),
            "distance_to_exact": trace_norm(emp - exact),
            "bootstrap_sigma": bootstrap_sigma(ens.states, seed=cfg.seed),
            "chain_csv": path,
        },
    )
    return 0


def cmd_verify(cfg, args):
    results = run_all(cfg, quick=not args.full)
    for r in results:
        print(r.line())
    path = os.path.join(args.out, "reports")
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "verify.json"), "w") as fh:
        fh.write(report_json(results, cfg))
    return 0 if all(r.passed for r in results) else 1


def sweep_point(payload):
    cfg_dict, r, g, tau, beta = payload
    cfg = ExperimentConfig(**{**cfg_dict, "r": r, "g": g, "tau": tau, "beta": beta})
    parts = cfg.parts()
    L = parts.generator()
    rb = gibbs(parts.es, beta).matrix
    row = {"r": r, "g": g, "tau": tau, "beta": beta, "residual": trace_norm(L.apply(rb))}
    try:
        rep = spectral_gap(L)
        row["gap"] = rep.gap
        row["tmix_est"] = mixing_time_estimate(L, cfg.epsilon, rep).t_mix
        row["dist"] = trace_norm(rep.fixed_point - rb)
    except QmetroError as exc:
        log.warning("r=%s g=%s: %s", r, g, exc)
        row.update(gap=math.nan, tmix_est=math.nan, dist=math.nan)
    return row


def cmd_sweep(cfg, args):
    s = cfg.sweep
    base = cfg.to_dict()
    points = [(base, r, g, tau, beta) for r in s.r for g in s.g for tau in s.tau for beta in s.beta]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(sweep_point, points))
    else:
        rows = [sweep_point(p) for p in points]
    os.makedirs(os.path.join(args.out, "sweeps"), exist_ok=True)
    path = os.path.join(args.out, "sweeps", "sweep.csv")
    with open(path, "w", newline="") as fh:
        fh.write(f"# qmetro {__version__}\n")
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    log.info("wrote %s", path)
    return 0


COMMANDS = {
    "model": cmd_model,
    "qpe-table": cmd_qpe_table,
    "channel-build": cmd_channel_build,
    "gap": cmd_gap,
    "evolve": cmd_evolve,
    "trajectory": cmd_trajectory,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config (defaults used if omitted)")
    common.add_argument("--out", metavar="DIR", default=".", help="output root (reports/, sweeps/, states/)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    p = argparse.ArgumentParser(prog="qmetro", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qmetro {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "evolve":
            sp.add_argument("--time", type=float, help="continuous time (default: iterations * tau^2)")
        if name == "trajectory":
            sp.add_argument("--engine", choices=["kraus", "register"], default="kraus")
        if name == "verify":
            sp.add_argument("--full", action="store_true", help="512 restarts for induced-norm estimates")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("QMS_LOG", "WARNING").upper(), format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        for w in cfg.warnings:
            log.warning(w)
        t0 = time.time()
        code = COMMANDS[args.command](cfg, args)
        log.info("%s finished in %.2fs", args.command, time.time() - t0)
        return code
    except (QmetroError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
