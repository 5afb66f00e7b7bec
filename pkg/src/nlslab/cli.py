"""Command-line front end: ``nlslab <command> [options]``.

Exit codes: 0 success, 1 experiment failure, 2 usage or configuration error.
Every JSON/CSV output embeds the resolved configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config

log = logging.getLogger("nlslab")

COMMANDS = ("gs", "spectrum", "coercivity", "convexity-scan", "distance", "evolve",
            "stability", "nehari", "verify-all")

OUTPUTS = {
    "gs": "gs.json (residuals, mass, energy), gs.nls1 (binary profile), gs.csv columns: x, u1, u2",
    "spectrum": "spectrum.json: params, grid, eigenvalues[], kernel_dim, zero_tol",
    "coercivity": "coercivity.json: min Rayleigh quotients (L2 and H1) over V, V0, the L- "
                  "constraint set and the whole space; lower-bound constants D, D1, D2",
    "convexity-scan": "convexity.csv columns: amplitude, d2 (squared H1 orbit distance), "
                      "gap_I (action gap), gap_E (energy gap); convexity.json: slopes, counts",
    "distance": "distance.json: x0, theta1, theta2, distance_sq_h1, orthogonality residuals",
    "evolve": "trace.csv columns: t, mass1, mass2, energy, gamma; final.nls1; evolve.json",
    "stability": "stability.csv columns: t, mass1, mass2, energy, gamma; stability.json: "
                 "gamma0, sup_gamma, verdict",
    "nehari": "nehari.json: S1, T1, a, I(Z), upper bound, A0/A/Ar estimates, chain flag; "
              "region.csv columns: x, y (feasible points of the algebraic system)",
    "verify-all": "stdout: one PASS/FAIL line per acceptance criterion; verify.json",
}


class ExperimentFailure(RuntimeError):
    pass


def _common(sp):
    sp.add_argument("--config", help="key = value configuration file")
    for name, typ in (("p", float), ("beta", float), ("L", float), ("N", int), ("tol", float),
                      ("T", float), ("dt", float), ("epsilon", float), ("seed", int),
                      ("samples", int), ("amplitude", float), ("resolution", int),
                      ("record_every", int), ("K", float), ("k", int), ("max_iter", int)):
        sp.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)
    sp.add_argument("--out", default=None, help="output directory (NLSLAB_OUT overrides the config file)")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes for sample sweeps")
    sp.add_argument("--describe-output", action="store_true", help="describe the files written and exit")
    sp.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="nlslab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", metavar="command")
    sps = {c: sub.add_parser(c) for c in COMMANDS}
    for sp in sps.values():
        _common(sp)
    sps["gs"].add_argument("--method", choices=("closed-form", "newton", "gradient-flow"),
                           default="closed-form")
    sps["spectrum"].add_argument("--operator", choices=("Lplus", "Lminus"), default="Lplus")
    sps["coercivity"].add_argument("--no-fit", action="store_true", help="skip the lower-bound fit")
    sps["distance"].add_argument("--input", help="NLS1 field file (default: perturbed, shifted Z)")
    sps["evolve"].add_argument("--initial", default="Z",
                               help="Z, gaussian, or a path to an NLS1 field file")
    sps["verify-all"].add_argument("--quick", action="store_true")
    return ap


def resolve_config(args) -> RunConfig:
    keys = [k for k in RunConfig.__dataclass_fields__ if k != "out"]
    overrides = {k: getattr(args, k, None) for k in keys}
    cfg = load_config(args.config, overrides)
    env = os.environ.get("NLSLAB_OUT")
    if env:
        cfg.out = env
    if args.out:
        cfg.out = args.out
    return cfg


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def write_json(path: Path, cfg: RunConfig, command: str, payload: dict):
    doc = {"command": command, "config": cfg.to_dict(), "version": __version__,
           "result": _jsonable(payload)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_table(path: Path, cfg: RunConfig, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write("# config " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def _setup(cfg):
    from .grid import make_grid
    from .ground_state import synthesized_ground_state
    grid = make_grid(cfg.L, cfg.N)
    P = cfg.params
    return grid, P, synthesized_ground_state(P, grid)


def cmd_gs(cfg, args, out):
    from . import fieldio
    from .functionals import energy
    from .ground_state import elliptic_residual, gradient_flow_minimize, newton_solve
    grid, P, gs = _setup(cfg)
    if args.method == "newton":
        from .checks import newton_perturbation
        gs = newton_solve(newton_perturbation(gs.profile, cfg.seed), P, tol=cfg.tol, max_iter=cfg.max_iter)
    elif args.method == "gradient-flow":
        x = grid.x
        from .grid import RealPair
        init = RealPair(grid, np.exp(-x**2 / 3), np.exp(-x**2 / 5))
        gs = gradient_flow_minimize(init, P, np.sqrt(gs.mass), dt=cfg.gf_dt, tol=cfg.gf_tol)
    res = elliptic_residual(gs.profile, P)
    fieldio.write_field(out / "gs.nls1", gs.profile)
    fieldio.write_csv(out / "gs.csv", gs.profile, ["config " + json.dumps(cfg.to_dict(), sort_keys=True)])
    payload = {"provenance": gs.provenance, "residual": res, "residual_norm": gs.residual_norm,
               "iterations": gs.iterations, "mass": gs.mass, "energy": energy(gs.profile, P),
               "multiplier": gs.multiplier, "semitrivial": gs.semitrivial}
    write_json(out / "gs.json", cfg, "gs", payload)
    print(f"gs {gs.provenance}: residual {max(res.values()):.3e}, mass {gs.mass:.12g}")
    return 0


def cmd_spectrum(cfg, args, out):
    from .linearized import assemble_Lminus, assemble_Lplus, symmetric_spectrum
    grid, P, gs = _setup(cfg)
    op = (assemble_Lplus if args.operator == "Lplus" else assemble_Lminus)(gs.profile, P)
    rep = symmetric_spectrum(op, k=cfg.k)
    payload = rep.to_json()
    write_json(out / "spectrum.json", cfg, "spectrum", payload)
    print(f"spectrum {args.operator}: kernel_dim {rep.kernel_dim}, lowest {rep.eigenvalues[0]:.6g}")
    if rep.ambiguous:
        raise ExperimentFailure("zero_tol does not separate the kernel cluster")
    return 0


def cmd_coercivity(cfg, args, out):
    from . import coercivity as co
    grid, P, gs = _setup(cfg)
    R = gs.profile
    reps = {"V": co.min_rayleigh_over_V(R, P), "V0": co.min_rayleigh_over_V0(R, P),
            "Lminus": co.min_rayleigh_Lminus_constrained(R, P),
            "unconstrained": co.min_rayleigh_unconstrained(R, P)}
    payload = {k: v.to_json() for k, v in reps.items()}
    if not args.no_fit:
        payload["lower_bound"] = co.lower_bound_constants_fit(
            R, P, sample_count=cfg.samples, amplitude=cfg.amplitude, seed=cfg.seed,
            alpha=reps["V0"].min_rayleigh_h1)
    write_json(out / "coercivity.json", cfg, "coercivity", payload)
    print("coercivity: " + ", ".join(f"{k} {v.min_rayleigh_l2:.6g}" for k, v in reps.items()))
    return 0


def cmd_convexity(cfg, args, out):
    from . import coercivity as co
    grid, P, gs = _setup(cfg)
    scan = co.energy_gap_scan(gs.profile, P, sample_count=cfg.samples, seed=cfg.seed, d_max=0.05,
                              jobs=args.jobs)
    write_table(out / "convexity.csv", cfg, ["amplitude", "d2", "gap_I", "gap_E"], scan.rows())
    neg = int(np.sum(scan.gap_I < 0))
    payload = {"samples": len(scan.d2), "dropped": scan.dropped, "negative_gaps": neg,
               "slope": scan.slope, "slope_affine": scan.slope_affine, "min_ratio": scan.min_ratio}
    write_json(out / "convexity.json", cfg, "convexity-scan", payload)
    print(f"convexity-scan: {len(scan.d2)} samples, {neg} negative gaps, slope {scan.slope:.6g}")
    if neg or scan.slope <= 0:
        raise ExperimentFailure("convexity property violated")
    return 0


def cmd_distance(cfg, args, out):
    from . import dynamics as dy
    from . import fieldio
    from .grid import shift_and_phase
    from .modulation import modulation_fit
    grid, P, gs = _setup(cfg)
    R = gs.profile
    if args.input:
        Phi = fieldio.read_field(args.input)
        if Phi.grid != grid:
            raise ConfigError(f"input field lives on {Phi.grid}, config grid is {grid}")
    else:
        Phi = shift_and_phase(R.to_complex() + dy.perturbation(grid, cfg.seed) * cfg.epsilon, 0.5, 1.0, 2.0)
    fit = modulation_fit(Phi, R, P, norm="standard")
    fit_e = modulation_fit(Phi, R, P, norm="energy")
    payload = {"standard": {"x0": fit.x0, "theta1": fit.theta1, "theta2": fit.theta2,
                            "distance_sq_h1": fit.distance_sq_h1,
                            "orthogonality_residuals": fit.orthogonality_residuals,
                            "iterations": fit.iterations},
               "energy": {"x0": fit_e.x0, "theta1": fit_e.theta1, "theta2": fit_e.theta2,
                          "distance_sq": fit_e.distance_sq_h1,
                          "orthogonality_residuals": fit_e.orthogonality_residuals,
                          "iterations": fit_e.iterations}}
    write_json(out / "distance.json", cfg, "distance", payload)
    print(f"distance: d^2 = {fit.distance_sq_h1:.6e} at x0 = {fit.x0:.6f}")
    return 0


def _trace_rows(tr):
    gam = tr.gamma if tr.gamma else [float("nan")] * len(tr.times)
    return zip(tr.times, tr.mass1, tr.mass2, tr.energy, gam)


def cmd_evolve(cfg, args, out):
    from . import dynamics as dy
    from . import fieldio
    from .checks import gaussian_pair
    grid, P, gs = _setup(cfg)
    if args.initial == "Z":
        Psi0, orbit = gs.profile.to_complex(), gs.profile
    elif args.initial == "gaussian":
        Psi0, orbit = gaussian_pair(grid), None
    else:
        Psi0, orbit = fieldio.read_field(args.initial), None
        if Psi0.grid != grid:
            raise ConfigError(f"initial field lives on {Psi0.grid}, config grid is {grid}")
    tr = dy.evolve(Psi0, cfg.T, cfg.dt, P, record_every=cfg.record_every, track_orbit=orbit)
    write_table(out / "trace.csv", cfg, ["t", "mass1", "mass2", "energy", "gamma"], _trace_rows(tr))
    fieldio.write_field(out / "final.nls1", tr.final)
    payload = {"mass_drift": tr.mass_drift(), "energy_drift": tr.energy_drift(),
               "max_gamma": max(tr.gamma) if tr.gamma else None, "records": len(tr.times)}
    write_json(out / "evolve.json", cfg, "evolve", payload)
    print(f"evolve: mass drift {tr.mass_drift():.3e}, energy drift {tr.energy_drift():.3e}")
    return 0


def cmd_stability(cfg, args, out):
    from . import dynamics as dy
    grid, P, gs = _setup(cfg)
    tr, s = dy.stability_experiment(gs.profile, P, cfg.epsilon, T=cfg.T, dt=cfg.dt,
                                    perturbation_seed=cfg.seed, K=cfg.K, record_every=cfg.record_every)
    write_table(out / "stability.csv", cfg, ["t", "mass1", "mass2", "energy", "gamma"], _trace_rows(tr))
    write_json(out / "stability.json", cfg, "stability", s)
    print(f"stability: gamma0 {s['gamma0']:.3e}, sup gamma {s['sup_gamma']:.3e}, "
          f"{'stable' if s['stable'] else 'NOT within bound'}")
    if not s["stable"]:
        raise ExperimentFailure("orbit distance exceeded K * gamma0")
    return 0


def cmd_nehari(cfg, args, out):
    from .variational import algebraic_region_check, infima_estimate
    grid, P, _ = _setup(cfg)
    payload = {}
    if P.beta > 1:
        payload["infima"] = infima_estimate(P, grid, n_samples=cfg.samples, seed=cfg.seed).to_json()
    reg = algebraic_region_check(P, cfg.resolution)
    write_table(out / "region.csv", cfg, ["x", "y"], reg["feasible_points"])
    payload["region"] = {k: v for k, v in reg.items() if k != "feasible_points"}
    payload["region"]["n_feasible"] = len(reg["feasible_points"])
    write_json(out / "nehari.json", cfg, "nehari", payload)
    inf = payload.get("infima")
    msg = f"nehari: pinch {reg['pinch_ok']}"
    if inf:
        msg += f", I(Z) {inf['I_at_Z']:.9f}, chain {inf['chain_ok']}"
    print(msg)
    return 0


def cmd_verify(cfg, args, out):
    from .checks import run_all
    from .grid import make_grid
    results = run_all(quick=args.quick, grid=make_grid(cfg.L, cfg.N))
    payload = [{"criterion": r.number, "name": r.name, "pass": r.ok, "detail": r.detail} for r in results]
    write_json(out / "verify.json", cfg, "verify-all", {"quick": args.quick, "checks": payload})
    failed = [r.number for r in results if not r.ok]
    print(f"verify-all: {len(results) - len(failed)}/{len(results)} passed"
          + (f"; failed: {failed}" if failed else ""))
    return 1 if failed else 0


HANDLERS = {"gs": cmd_gs, "spectrum": cmd_spectrum, "coercivity": cmd_coercivity,
            "convexity-scan": cmd_convexity, "distance": cmd_distance, "evolve": cmd_evolve,
            "stability": cmd_stability, "nehari": cmd_nehari, "verify-all": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse exits 2 on usage errors, 0 on --help
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.describe_output:
        print(OUTPUTS[args.command])
        return 0
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = resolve_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](cfg, args, out)
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # experiment failure: report and exit 1
        print(f"failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
