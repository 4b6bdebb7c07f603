"""Command-line entry point: ``reactcoef {forward,gradcheck,invert,example}``.

Every command is a pure function of its configuration and seed. Options may
come from a flat JSON file (``--config``); explicit flags override it.
Exit status: 0 on success, 1 when a requested check fails, 2 on invalid input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import catalog, experiments
from .forward import ForwardProblem, dump_field
from .inverse import Objective, SolverConfig, gradient_projection, history_csv
from .mesh import SIDES, BoundaryRegion, boundary_nodes, build_square_mesh, dump_mesh
from .report import manifest_json, table_csv, write_report, write_text

GRADCHECK_TOL = 1e-4

DEFAULTS = {
    "level": 4,
    "levels": None,
    "seed": 0,
    "rho": None,
    "rho_rule": None,  # example preset, else sqrt
    "theta": None,
    "theta_rule": None,  # example preset, else ex1
    "gamma": "bottom",
    "abcd": "1,-2,3,-4",
    "out": "out",
    "max_iter": 600,
    "rel_tol": 1e-12,
    "gradient": "projected",
    "beta": "true",
    "directions": 5,
    "consistent": False,
    "flip_sign": False,
    "I": "1,6,16",
}


class UsageError(ValueError):
    pass


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _gamma(text):
    sides = text if isinstance(text, (list, tuple)) else str(text).split(",")
    return BoundaryRegion.parse([s.strip() for s in sides if s.strip()]).sides


def _abcd(text):
    vals = _float_list(text)
    if len(vals) != 4:
        raise UsageError("--abcd needs four comma-separated numbers")
    return tuple(vals)


def _beta_field(spec, mesh):
    spec = str(spec)
    if spec == "true":
        return catalog.beta_true
    try:
        return float(spec)
    except ValueError:
        pass
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"--beta must be 'true', a number or a field dump file, got {spec!r}")
    data = np.loadtxt(path, ndmin=2)
    if data.shape != (mesh.n_nodes, 3) or not np.allclose(data[:, :2], mesh.nodes):
        raise UsageError(f"field dump {spec} does not match the level-{mesh.level} mesh")
    return data[:, 2]


def _options(args) -> dict:
    """Merge built-in defaults, the JSON config file and explicit flags."""
    opts = dict(DEFAULTS)
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a flat JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = set(cfg) - set(DEFAULTS) - {"command", "example"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        opts.update(cfg)
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "func"):
            opts[k] = v
    return opts


def _problem(level, gamma, rel_tol):
    return ForwardProblem(build_square_mesh(level), catalog.coefficients(), gamma, rel_tol)


# commands -------------------------------------------------------------------

def cmd_forward(o) -> int:
    """Neumann, mixed and Dirichlet solves for the catalog problem at one coefficient."""
    p = _problem(int(o["level"]), _gamma(o["gamma"]), float(o["rel_tol"]))
    mesh = p.mesh
    beta = _beta_field(o["beta"], mesh)
    flux = catalog.edge_flux(mesh, _abcd(o["abcd"]))
    n = p.neumann(beta, flux)
    m = p.mixed(beta, flux, n[p.gamma_nodes])
    d = ForwardProblem(mesh, p.coeffs, SIDES, p.rel_tol).dirichlet(beta, n[boundary_nodes(mesh, SIDES)])
    out = Path(o["out"])
    write_text(out / "mesh.txt", dump_mesh(mesh))
    for name, u in (("neumann", n), ("mixed", m), ("dirichlet", d)):
        write_text(out / f"{name}.txt", dump_field(mesh, u))
    print(f"level {mesh.level}: {mesh.n_nodes} nodes, |N-M| = {p.disc.l2_norm(n - m):.3e}, "
          f"|N-D| = {p.disc.l2_norm(n - d):.3e}")
    return 0


def _measurement(p, o):
    level = p.mesh.level
    rho = (float(o["rho"]) if o["rho"] is not None
           else experiments.rho_schedule(o["rho_rule"] or "sqrt", level))
    theta = (float(o["theta"]) if o["theta"] is not None
             else experiments.theta_schedule(o["theta_rule"] or "ex1", level, rho))
    exact = experiments.synthesize_exact(p, _abcd(o["abcd"]))
    return rho, experiments.add_noise(p, exact, theta, int(o["seed"]))


def cmd_gradcheck(o) -> int:
    """Adjoint gradient against central differences of the cost along seeded directions."""
    p = _problem(int(o["level"]), _gamma(o["gamma"]), float(o["rel_tol"]))
    n = p.mesh.n_nodes
    rng = np.random.default_rng(int(o["seed"]))
    if o["consistent"]:
        beta = catalog.beta_true(*p.mesh.nodes.T)
        exact = experiments.synthesize_exact(p, _abcd(o["abcd"]), beta=beta)
        data = experiments.add_noise(p, exact, 0.0, int(o["seed"])).cauchy()
        rho = 0.0 if o["rho"] is None else float(o["rho"])
        cfg = SolverConfig(rho=rho, beta_star=beta, gradient=o["gradient"])
    else:
        rho, meas = _measurement(p, o)
        data = meas.cauchy()
        beta = rng.uniform(0.5, 4.0, n)
        cfg = SolverConfig(rho=rho, gradient=o["gradient"])
    obj = Objective(p, data, cfg)
    g = obj.gradient(obj.evaluate(beta))
    if o["flip_sign"]:
        g = -g
    print(f"gradient norm {p.disc.l2_norm(g):.6e}")
    t = 1e-5
    worst = 0.0
    for i in range(int(o["directions"])):
        kappa = rng.standard_normal(n)
        adj = 2.0 * (p.mass @ g) @ kappa
        fd = (obj.cost(beta + t * kappa) - obj.cost(beta - t * kappa)) / (2 * t)
        err = abs(adj - fd) / max(1.0, abs(fd))
        worst = max(worst, err)
        print(f"direction {i}: adjoint {adj:.10e} fd {fd:.10e} rel.err {err:.3e}")
    ok = worst <= GRADCHECK_TOL
    print(f"{'PASS' if ok else 'FAIL'}: max relative error {worst:.3e} (tol {GRADCHECK_TOL:g})")
    return 0 if ok else 1


def cmd_invert(o) -> int:
    """Single-level reconstruction from seeded noisy data."""
    p = _problem(int(o["level"]), _gamma(o["gamma"]), float(o["rel_tol"]))
    rho, meas = _measurement(p, o)
    cfg = SolverConfig(rho=rho, max_iter=int(o["max_iter"]), gradient=o["gradient"])
    obj = Objective(p, meas.cauchy(), cfg)
    res = gradient_projection(np.full(p.mesh.n_nodes, 1.5), obj)
    exact = experiments.synthesize_exact(p, _abcd(o["abcd"]))
    metrics = experiments.error_metrics(p, res.beta, exact, meas)
    row = {"level": p.mesh.level, "h": p.mesh.mesh_size, "rho": rho, "theta": meas.theta,
           "delta": meas.delta, **metrics, "iterations": res.iterations, "stop": res.stop_reason}
    out = Path(o["out"])
    write_text(out / "beta.txt", dump_field(p.mesh, res.beta))
    write_text(out / "history.csv", history_csv(res.history))
    write_text(out / "summary.csv", table_csv([row]))
    write_text(out / "manifest.json", manifest_json(
        {"command": "invert", "level": p.mesh.level, "seed": int(o["seed"]),
         "gamma": list(p.gamma.sides), "rho": rho, "theta": meas.theta,
         "abcd": list(_abcd(o["abcd"])), "max_iter": cfg.max_iter, "gradient": cfg.gradient}))
    print(f"{res.stop_reason} after {res.iterations} iterations, J = {res.final.J:.4e}, "
          f"L2_beta = {metrics['L2_beta']:.4e}")
    return 0


def cmd_example(o) -> int:
    """Reproduce one of the four benchmark examples and write its tables."""
    ex = int(o["example"])
    levels = _int_list(o["levels"]) if o["levels"] is not None else None
    rho_rule = o["rho_rule"]
    if rho_rule is not None and ex == 2:
        rho_rule = [r.strip() for r in str(rho_rule).split(",")]
    report = experiments.run_example(ex, seed=int(o["seed"]), levels=levels,
                                     max_iter=int(o["max_iter"]),
                                     measurements=tuple(_int_list(o["I"])), rho_rule=rho_rule,
                                     theta_rule=o["theta_rule"], gradient=o["gradient"],
                                     keep_fields=True)
    written = write_report(report, o["out"])
    for name, rows in report["tables"].items():
        print(f"== {name} ==")
        print(table_csv(rows), end="")
    print(f"wrote {len(written)} files under {o['out']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON file with option values")
    common.add_argument("--level", type=int)
    common.add_argument("--levels", help="comma-separated doubling levels, e.g. 4,8,16")
    common.add_argument("--seed", type=int)
    common.add_argument("--rho", type=float, help="fixed regularization parameter")
    common.add_argument("--rho-rule", help=f"one of {sorted(experiments.RHO_RULES)}")
    common.add_argument("--theta", type=float, help="fixed noise amplitude")
    common.add_argument("--theta-rule", help=f"one of {sorted(experiments.THETA_RULES)}")
    common.add_argument("--gamma", help="comma-separated sides carrying Cauchy data")
    common.add_argument("--abcd", help="flux parameters A,B,C,D")
    common.add_argument("--out", help="output directory (created if missing)")
    common.add_argument("--max-iter", type=int)
    common.add_argument("--rel-tol", type=float)
    common.add_argument("--gradient", choices=("projected", "nodal"))

    parser = argparse.ArgumentParser(prog="reactcoef", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", parents=[common], help="forward solves and field dumps")
    p.add_argument("--beta", help="'true', a constant, or a field dump file")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("gradcheck", parents=[common], help="adjoint vs finite-difference gradient")
    p.add_argument("--directions", type=int)
    p.add_argument("--consistent", action="store_true", default=None,
                   help="noiseless data at the interpolated true coefficient")
    p.add_argument("--flip-sign", action="store_true", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("invert", parents=[common], help="single-level reconstruction")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("example", parents=[common], help="run benchmark example 1-4")
    p.add_argument("example", type=int, choices=(1, 2, 3, 4))
    p.add_argument("--I", help="measurement counts for example 4, e.g. 1,6,16")
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    del args.verbose
    try:
        return args.func(_options(args))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
