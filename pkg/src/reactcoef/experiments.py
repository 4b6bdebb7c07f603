"""Synthetic data, error metrics and the four benchmark examples."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import catalog
from .forward import CauchyData, ForwardProblem
from .inverse import Objective, SolverConfig, multilevel_run
from .mesh import SIDES, BoundaryRegion, Mesh, boundary_nodes

log = logging.getLogger(__name__)


@dataclass
class ExactData:
    phi: np.ndarray  # exact state on the mesh
    flux: np.ndarray  # per boundary edge
    trace: np.ndarray  # phi at the Gamma nodes
    abcd: tuple


@dataclass
class Measurement:
    flux: np.ndarray  # noisy on Gamma, exact elsewhere
    trace: np.ndarray
    delta: float
    theta: float
    seed: int
    region: BoundaryRegion

    def cauchy(self) -> CauchyData:
        return CauchyData(self.flux, self.trace, self.region)


def synthesize_exact(problem: ForwardProblem, abcd=catalog.DEFAULT_ABCD,
                     beta=catalog.beta_true) -> ExactData:
    """Exact state from the Neumann problem at the true coefficient on the same mesh."""
    flux = catalog.edge_flux(problem.mesh, abcd)
    phi = problem.neumann(beta, flux)
    return ExactData(phi, flux, phi[problem.gamma_nodes].copy(), tuple(abcd))


def noise_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox counter-based generator keyed by ``(seed, stream)``.

    Uniform(-1, 1) samples are ``2 u - 1`` with ``u`` the 53-bit doubles of
    ``Generator.random``.
    """
    return np.random.Generator(np.random.Philox(key=[int(seed), int(stream)]))


def _uniform(rng, n):
    return 2.0 * rng.random(n) - 1.0


def boundary_l2(mesh: Mesh, edge_mask, edge_values=None, node_values=None) -> float:
    """L2 norm over the masked edges of a per-edge constant or a nodal P1 trace."""
    L = mesh.edge_lengths()[edge_mask]
    if edge_values is not None:
        return float(np.sqrt(np.sum(L * np.asarray(edge_values) ** 2)))
    e = mesh.boundary_edges[edge_mask]
    a, b = node_values[e[:, 0]], node_values[e[:, 1]]
    return float(np.sqrt(np.sum(L / 3.0 * (a * a + a * b + b * b))))


def add_noise(problem: ForwardProblem, exact: ExactData, theta: float, seed: int,
              stream: int = 0) -> Measurement:
    """Perturb flux and trace on Gamma by ``theta`` times uniform(-1, 1) samples.

    Trace samples are drawn first (Gamma nodes in lexicographic order), then
    one sample per Gamma edge (edges sorted by midpoint).
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    mesh = problem.mesh
    rng = noise_generator(seed, stream)
    gmask = problem.gamma_edges
    gidx = np.flatnonzero(gmask)
    mid = mesh.edge_midpoints()[gidx]
    gidx = gidx[np.lexsort((mid[:, 1], mid[:, 0]))]
    r_trace = _uniform(rng, problem.gamma_nodes.size)
    r_flux = _uniform(rng, gidx.size)

    flux = exact.flux.copy()
    trace = exact.trace.copy()
    if theta > 0:
        flux[gidx] += theta * r_flux
        trace += theta * r_trace
    dflux = (flux - exact.flux)[gmask]
    dtrace = np.zeros(mesh.n_nodes)
    dtrace[problem.gamma_nodes] = trace - exact.trace
    delta = boundary_l2(mesh, gmask, edge_values=dflux) + boundary_l2(mesh, gmask, node_values=dtrace)
    return Measurement(flux, trace, delta, theta, seed, problem.gamma)


# schedules ------------------------------------------------------------------

RHO_RULES = {
    "sqrt": lambda h: 1e-3 * np.sqrt(h),
    "h2e-0": lambda h: h**2,
    "h2e-1": lambda h: 0.1 * h**2,
    "h2e-2": lambda h: 0.01 * h**2,
    "h2e-3": lambda h: 0.001 * h**2,
}

THETA_RULES = {
    "ex1": lambda h, rho: h * np.sqrt(10.0 * rho),
    "ex2": lambda h, rho: 1e-2 * h * np.sqrt(rho),
    "ex3": lambda h, rho: 0.5 * h * np.sqrt(10.0 * rho),
    "ex4": lambda h, rho: 0.2,
}


def mesh_size(level: int) -> float:
    return float(np.sqrt(8.0) / level)


def rho_schedule(kind: str, level: int) -> float:
    try:
        return float(RHO_RULES[kind](mesh_size(level)))
    except KeyError:
        raise ValueError(f"unknown rho rule {kind!r}; choose from {sorted(RHO_RULES)}") from None


def theta_schedule(kind: str, level: int, rho: float) -> float:
    try:
        return float(THETA_RULES[kind](mesh_size(level), rho))
    except KeyError:
        raise ValueError(f"unknown theta rule {kind!r}; choose from {sorted(THETA_RULES)}") from None


# error metrics --------------------------------------------------------------

def beta_error(problem: ForwardProblem, beta, beta_true=catalog.beta_true) -> float:
    disc = problem.disc
    return disc.l2_norm_qp(disc.scalar_at_qp(beta) - disc.scalar_at_qp(beta_true))


def error_metrics(problem: ForwardProblem, beta, exacts, measurements,
                  beta_true=catalog.beta_true) -> dict:
    """``L2_beta``, and ``L2_N``, ``L2_M``, ``L2_D`` averaged over the measurements."""
    if isinstance(exacts, ExactData):
        exacts, measurements = [exacts], [measurements]
    disc = problem.disc
    dproblem = ForwardProblem(problem.mesh, problem.coeffs, SIDES, problem.rel_tol)
    bnodes = dproblem.boundary_all
    sys_b = problem.system(beta)
    sys_t = problem.system(beta_true)
    eN = eM = eD = 0.0
    for ex, ms in zip(exacts, measurements):
        eN += disc.l2_norm(problem.neumann(sys_b, ms.flux) - ex.phi)
        m_true = problem.mixed(sys_t, ex.flux, ex.trace)
        eM += disc.l2_norm(problem.mixed(sys_b, ms.flux, ms.trace) - m_true)
        g_noisy = ex.phi.copy()
        g_noisy[problem.gamma_nodes] = ms.trace
        d_beta = dproblem.dirichlet(beta, g_noisy[bnodes])
        d_true = dproblem.dirichlet(beta_true, ex.phi[bnodes])
        eD += disc.l2_norm(d_beta - d_true)
    n = len(exacts)
    out = {"L2_beta": beta_error(problem, beta, beta_true),
           "L2_N": eN / n, "L2_M": eM / n, "L2_D": eD / n}
    if callable(beta_true):
        # distance to the nodal interpolant, the quantity shown in difference plots
        out["L2_beta_interp"] = problem.disc.l2_norm(
            np.asarray(beta, dtype=float) - beta_true(*problem.mesh.nodes.T))
    return out


def eoc(errors, sizes):
    """Per-step experimental orders of convergence and their mean."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(sizes, dtype=float)
    if e.shape != h.shape or e.size < 2:
        raise ValueError("need matching error and mesh-size lists of length >= 2")
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and mesh sizes must be positive")
    steps = np.diff(np.log(e)) / np.diff(np.log(h))
    return steps.tolist(), float(np.mean(steps))


# examples -------------------------------------------------------------------

EXAMPLES = {
    1: dict(gamma=("bottom",), rho_rule="sqrt", theta_rule="ex1"),
    2: dict(gamma=("bottom",), rho_rule=("h2e-0", "h2e-1", "h2e-2", "h2e-3"), theta_rule="ex2"),
    3: dict(gamma=("bottom", "left"), rho_rule="sqrt", theta_rule="ex3"),
    4: dict(gamma=("bottom", "left"), rho_rule="sqrt", theta_rule="ex4"),
}
DEFAULT_LEVELS = (4, 8, 16, 32, 64)


def measurement_tuples(I: int):
    """(A, B, C, D) tuples for ``I`` measurements."""
    base = catalog.DEFAULT_ABCD
    if I == 1:
        return [base]
    if I == 6:
        return [p + (base[3],) for p in itertools.permutations(base[:3])]
    perms = list(itertools.permutations(base))
    if not 1 <= I <= len(perms):
        raise ValueError(f"I must be between 1 and {len(perms)}")
    return perms[:I]


@dataclass
class RunSpec:
    levels: tuple = DEFAULT_LEVELS
    gamma: tuple = ("bottom",)
    rho_rule: str = "sqrt"
    theta_rule: str = "ex1"
    abcd: list = field(default_factory=lambda: [catalog.DEFAULT_ABCD])
    seed: int = 0
    max_iter: int = 600
    gradient: str = "projected"
    rel_tol: float = 1e-12
    beta_start: float = 1.5


def run_protocol(spec: RunSpec, keep_fields: bool = False, step_callback=None) -> dict:
    """Multilevel reconstruction with per-level data synthesis; returns rows and logs."""
    coeffs = catalog.coefficients()
    rows, logs, fields = [], [], {}
    state = {}

    def setup(level, mesh, beta0):
        problem = ForwardProblem(mesh, coeffs, spec.gamma, spec.rel_tol)
        rho = rho_schedule(spec.rho_rule, level)
        theta = theta_schedule(spec.theta_rule, level, rho)
        exacts = [synthesize_exact(problem, t) for t in spec.abcd]
        meas = [add_noise(problem, ex, theta, spec.seed, stream=level * 1024 + i)
                for i, ex in enumerate(exacts)]
        state.update(problem=problem, exacts=exacts, meas=meas, rho=rho, theta=theta)
        cfg = SolverConfig(rho=rho, beta_star=beta0, lower=catalog.BETA_LOWER,
                           upper=catalog.BETA_UPPER, max_iter=spec.max_iter,
                           gradient=spec.gradient)
        return Objective(problem, [m.cauchy() for m in meas], cfg)

    def record(lr):
        p = state["problem"]
        metrics = error_metrics(p, lr.result.beta, state["exacts"], state["meas"])
        delta = float(np.mean([m.delta for m in state["meas"]]))
        row = {"level": lr.level, "h": lr.mesh.mesh_size, "rho": state["rho"],
               "theta": state["theta"], "delta": delta, **metrics,
               "iterations": lr.result.iterations, "stop": lr.result.stop_reason}
        lr.extra.update(row=row, measurements=state["meas"], exacts=state["exacts"])
        rows.append(row)
        logs.append((lr.level, lr.result.history))
        if keep_fields:
            fields[lr.level] = {"mesh": lr.mesh, "beta": lr.result.beta,
                                "phi": state["exacts"][0].phi}
        log.info("level %d: %s", lr.level, row)

    results = multilevel_run(spec.levels, setup, spec.beta_start, callback=record,
                             step_callback=step_callback)
    return {"rows": rows, "logs": logs, "fields": fields, "results": results}


def eoc_rows(rows, keys=("L2_beta", "L2_N", "L2_M", "L2_D")):
    out = [{"level": rows[0]["level"], **{k: None for k in keys}}]
    means = {}
    if len(rows) >= 2:
        h = [r["h"] for r in rows]
        for k in keys:
            steps, means[k] = eoc([r[k] for r in rows], h)
            for i, s in enumerate(steps):
                if len(out) <= i + 1:
                    out.append({"level": rows[i + 1]["level"]})
                out[i + 1][k] = s
    return out, means


def run_example(example: int, seed: int = 0, levels=None, max_iter: int = 600,
                measurements=(1, 6, 16), rho_rule=None, theta_rule=None, gradient="projected",
                keep_fields=False, step_callback=None) -> dict:
    """Run one of the four benchmark examples and collect its tables.

    ``rho_rule`` and ``theta_rule`` override the example's schedules; for
    Example 2 ``rho_rule`` may be a sequence of rules, one table row each.
    ``step_callback(record, beta)`` sees every accepted step of every run.
    """
    if example not in EXAMPLES:
        raise ValueError(f"unknown example {example!r}")
    preset = dict(EXAMPLES[example])
    if rho_rule is not None:
        if example != 2 and not isinstance(rho_rule, str):
            raise ValueError("only example 2 accepts several rho rules")
        preset["rho_rule"] = (rho_rule,) if example == 2 and isinstance(rho_rule, str) else rho_rule
    if theta_rule is not None:
        preset["theta_rule"] = theta_rule
    for r in ([preset["rho_rule"]] if isinstance(preset["rho_rule"], str) else preset["rho_rule"]):
        rho_schedule(r, 4)
    theta_schedule(preset["theta_rule"], 4, 1.0)
    levels = tuple(levels or DEFAULT_LEVELS)
    base = dict(levels=levels, gamma=preset["gamma"], theta_rule=preset["theta_rule"],
                seed=seed, max_iter=max_iter, gradient=gradient)
    manifest = {"example": example, "seed": seed, "levels": list(levels),
                "gamma": list(preset["gamma"]), "theta_rule": preset["theta_rule"],
                "max_iter": max_iter, "gradient": gradient}
    report = {"manifest": manifest, "tables": {}, "logs": {}, "fields": {}, "level_rows": {}}

    if example in (1, 3):
        out = run_protocol(RunSpec(rho_rule=preset["rho_rule"], **base), keep_fields, step_callback)
        manifest.update(rho_rule=preset["rho_rule"], abcd=[list(catalog.DEFAULT_ABCD)])
        report["tables"]["errors"] = out["rows"]
        report["level_rows"]["main"] = out["rows"]
        steps, means = eoc_rows(out["rows"])
        report["tables"]["eoc"] = steps + [{"level": "mean", **means}] if means else steps
        report["logs"] = {f"level{lv}": h for lv, h in out["logs"]}
        report["fields"] = {f"level{k}": v for k, v in out["fields"].items()}
        report["results"] = out["results"]
    elif example == 2:
        rules = tuple(preset["rho_rule"])
        manifest.update(rho_rule=list(rules), abcd=[list(catalog.DEFAULT_ABCD)])
        rows = []
        for rule in rules:
            out = run_protocol(RunSpec(rho_rule=rule, **base), keep_fields, step_callback)
            rows.append({"rho_rule": rule, **out["rows"][-1]})
            report["level_rows"][rule] = out["rows"]
            report["logs"].update({f"{rule}_level{lv}": h for lv, h in out["logs"]})
            report["fields"].update({f"{rule}_level{k}": v for k, v in out["fields"].items()})
        report["tables"]["regularization"] = rows
    else:
        rows = []
        manifest.update(rho_rule=preset["rho_rule"], measurements=list(measurements),
                        abcd={str(I): [list(t) for t in measurement_tuples(I)]
                              for I in measurements})
        for I in measurements:
            out = run_protocol(RunSpec(rho_rule=preset["rho_rule"], abcd=measurement_tuples(I),
                                       **base), keep_fields, step_callback)
            rows.append({"I": I, **out["rows"][-1]})
            report["level_rows"][f"I{I}"] = out["rows"]
            report["logs"].update({f"I{I}_level{lv}": h for lv, h in out["logs"]})
            report["fields"].update({f"I{I}_level{k}": v for k, v in out["fields"].items()})
        report["tables"]["measurements"] = rows
    return report
