"""Tikhonov output-least-squares identification of the reaction coefficient.

The cost at a nodal coefficient ``beta`` is

    J(beta) = (1/I) sum_i ||N_i(beta) - M_i(beta)||^2 + rho ||beta - beta*||^2

with consistent-mass L2 norms. ``gradient`` returns the field
``G = (1/I) sum_i (M_i A_M,i - N_i A_N,i) + rho (beta - beta*)``, i.e. one half
of the L2 Riesz representative of ``dJ``; the step rule below is calibrated to
that scaling. The product terms are represented either by their L2 projection
onto P1 (``"projected"``, exact for the discrete cost) or by nodal products
(``"nodal"``).
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .forward import CauchyData, ForwardProblem
from .linalg import solve_spd

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    rho: float
    beta_star: object = 1.5
    lower: float = 0.05
    upper: float = 10.0
    mu0: float = 0.75
    tau: float = 1e-4
    tau1: float | None = None  # default 1e-3 h
    tau2: float | None = None  # default 1e-2 h
    max_iter: int = 600
    gradient: str = "projected"
    mu_min: float = 1e-16

    def __post_init__(self):
        if not 0 < self.lower <= self.upper:
            raise ValueError("bounds must satisfy 0 < lower <= upper")
        if not 0 < self.mu0 < 1:
            raise ValueError("initial step must lie in (0, 1)")
        if self.tau <= 0 or (self.tau1 is not None and self.tau1 <= 0) or (
                self.tau2 is not None and self.tau2 <= 0):
            raise ValueError("tau, tau1, tau2 must be positive")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.gradient not in ("projected", "nodal"):
            raise ValueError(f"unknown gradient representation {self.gradient!r}")

    def stopping_constants(self, h):
        return (1e-3 * h if self.tau1 is None else self.tau1,
                1e-2 * h if self.tau2 is None else self.tau2)


@dataclass
class IterationRecord:
    k: int
    J: float
    grad_norm: float
    mu: float
    Q: float
    halvings: int


@dataclass
class Evaluation:
    """States and cost at one coefficient."""

    beta: object
    system: object
    N: list
    M: list
    misfit: float
    J: float
    adjoints: tuple | None = None
    grad: np.ndarray | None = None
    sens: np.ndarray | None = None


@dataclass
class InversionResult:
    beta: np.ndarray
    history: list
    stop_reason: str
    grad_norm0: float
    final: Evaluation = field(repr=False)

    @property
    def iterations(self) -> int:
        return len(self.history)


def project(values, lower, upper) -> np.ndarray:
    """Componentwise clamp to ``[lower, upper]``."""
    return np.maximum(lower, np.minimum(np.asarray(values, dtype=float), upper))


class Objective:
    """Cost, gradient and optimality measure for a fixed data set on one mesh."""

    def __init__(self, problem: ForwardProblem, data, config: SolverConfig):
        if isinstance(data, CauchyData):
            data = [data]
        data = list(data)
        if not data:
            raise ValueError("at least one measurement is required")
        if any(d.region != problem.gamma for d in data):
            raise ValueError("measurement region differs from the problem's Gamma")
        self.problem = problem
        self.data = data
        self.config = config
        self.disc = problem.disc

    def with_config(self, config):
        return Objective(self.problem, self.data, config)

    def regularization(self, beta) -> float:
        d = self.disc.scalar_at_qp(beta) - self.disc.scalar_at_qp(self.config.beta_star)
        return self.disc.l2_norm_qp(d) ** 2

    def evaluate(self, beta, warm: Evaluation | None = None) -> Evaluation:
        p = self.problem
        s = p.system(beta)
        N, M = [], []
        misfit = 0.0
        for i, d in enumerate(self.data):
            n = p.neumann(s, d.flux, x0=None if warm is None else warm.N[i])
            m = p.mixed(s, d.flux, d.trace, x0=None if warm is None else warm.M[i])
            N.append(n)
            M.append(m)
            r = n - m
            misfit += r @ (p.mass @ r)
        misfit /= len(self.data)
        J = misfit + self.config.rho * self.regularization(beta)
        return Evaluation(beta, s, N, M, misfit, J)

    def cost(self, beta) -> float:
        return self.evaluate(beta).J

    def adjoints(self, ev: Evaluation, warm: Evaluation | None = None):
        if ev.adjoints is None:
            p = self.problem
            AN, AM = [], []
            for i, (n, m) in enumerate(zip(ev.N, ev.M)):
                r = n - m
                x0n = x0m = None
                if warm is not None and warm.adjoints is not None:
                    x0n, x0m = warm.adjoints[0][i], warm.adjoints[1][i]
                AN.append(p.adjoint_neumann(ev.system, r, x0=x0n))
                AM.append(p.adjoint_mixed(ev.system, r, x0=x0m))
            ev.adjoints = (AN, AM)
        return ev.adjoints

    def sensitivity(self, ev: Evaluation, warm: Evaluation | None = None) -> np.ndarray:
        """``(1/I) sum_i (N_i A_N,i - M_i A_M,i)`` as a nodal field (representation per config)."""
        AN, AM = self.adjoints(ev, warm)
        disc = self.disc
        I = len(ev.N)
        if self.config.gradient == "nodal":
            return sum(n * an - m * am for n, m, an, am in zip(ev.N, ev.M, AN, AM)) / I
        q = sum(disc.nodal_to_qp(n) * disc.nodal_to_qp(an) - disc.nodal_to_qp(m) * disc.nodal_to_qp(am)
                for n, m, an, am in zip(ev.N, ev.M, AN, AM)) / I
        x0 = None if warm is None else warm.sens
        ev.sens = solve_spd(self.problem.mass, disc.weighted_load(q), self.problem.rel_tol,
                            x0=x0, check=False)
        return ev.sens

    def _reg_field(self, beta):
        bs = self.config.beta_star
        if callable(bs):
            d = self.disc.scalar_at_qp(beta) - self.disc.scalar_at_qp(bs)
            return solve_spd(self.problem.mass, self.disc.weighted_load(d), self.problem.rel_tol,
                             check=False)
        return np.asarray(beta, dtype=float) - bs

    def gradient(self, ev: Evaluation, warm: Evaluation | None = None) -> np.ndarray:
        if ev.grad is None:
            s = self.sensitivity(ev, warm)
            g = -s
            if self.config.rho:
                g = g + self.config.rho * self._reg_field(ev.beta)
            ev.grad = g
        return ev.grad

    def optimality_residual(self, beta, ev: Evaluation | None = None) -> float:
        """``||beta - P(S / rho + beta*)||`` with ``S = N A_N - M A_M``."""
        rho = self.config.rho
        if rho <= 0:
            raise ValueError("optimality residual needs rho > 0")
        ev = self.evaluate(beta) if ev is None else ev
        s = self.sensitivity(ev)
        bs = self.config.beta_star
        bs = np.asarray(bs, dtype=float) if not callable(bs) else bs(*self.problem.mesh.nodes.T)
        target = project(s / rho + bs, self.config.lower, self.config.upper)
        return self.disc.l2_norm(np.asarray(beta, dtype=float) - target)


def cost(beta, data, problem, config) -> float:
    return Objective(problem, data, config).cost(beta)


def gradient(beta, data, problem, config) -> np.ndarray:
    obj = Objective(problem, data, config)
    return obj.gradient(obj.evaluate(beta))


def optimality_residual(beta, data, problem, config) -> float:
    return Objective(problem, data, config).optimality_residual(beta)




def gradient_projection(beta0, objective: Objective, callback=None) -> InversionResult:
    """Projected gradient iteration with the halving step rule.

    The step ``mu`` is halved until ``Q = J(beta_k) - J(beta_hat) + tau mu ||beta_hat - beta_k||^2``
    is non-negative and is not restored afterwards. The loop stops when
    ``||G(beta_k)|| - tau1 - tau2 ||G(beta_0)|| <= 0`` or after ``max_iter``
    accepted steps. A step below ``mu_min`` ends the run with reason ``"stall"``.
    """
    cfg = objective.config
    disc = objective.disc
    lo, hi = cfg.lower, cfg.upper
    beta = np.asarray(beta0, dtype=float).copy()
    if beta.min() < lo - 1e-14 or beta.max() > hi + 1e-14:
        raise ValueError("initial coefficient violates the bounds")
    tau1, tau2 = cfg.stopping_constants(objective.problem.mesh.mesh_size)
    mu = cfg.mu0
    ev = objective.evaluate(beta)
    g = objective.gradient(ev)
    gnorm0 = disc.l2_norm(g)
    history = []
    k = 0
    while True:
        gnorm = disc.l2_norm(g)
        if gnorm - tau1 - tau2 * gnorm0 <= 0:
            reason = "tolerance"
            break
        if k >= cfg.max_iter:
            reason = "max_iter"
            break
        halvings = 0
        while True:
            trial = project(beta - mu * g, lo, hi)
            step = disc.l2_norm(trial - beta)
            ev_trial = objective.evaluate(trial, warm=ev)
            Q = ev.J - ev_trial.J + cfg.tau * mu * step**2
            if Q >= 0:
                break
            mu *= 0.5
            halvings += 1
            if mu < cfg.mu_min:
                break
        if Q < 0:
            log.warning("step size underflow at iteration %d", k)
            reason = "stall"
            break
        rec = IterationRecord(k, ev.J, gnorm, mu, Q, halvings)
        history.append(rec)
        if callback is not None:
            callback(rec, trial)
        g_new = objective.gradient(ev_trial, warm=ev)
        beta, ev, g = trial, ev_trial, g_new
        k += 1
    return InversionResult(beta, history, reason, gnorm0, ev)


def history_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "J", "grad_norm", "mu", "Q", "halvings"])
    for r in history:
        w.writerow([r.k, *(repr(float(v)) for v in (r.J, r.grad_norm, r.mu, r.Q)), r.halvings])
    return buf.getvalue()


@dataclass
class LevelResult:
    level: int
    mesh: object
    objective: Objective
    result: InversionResult
    extra: dict = field(default_factory=dict)


def multilevel_run(levels, setup, beta_start=1.5, callback=None, step_callback=None) -> list:
    """Coarse-to-fine continuation.

    ``setup(level, mesh, beta0)`` returns the :class:`Objective` for that level;
    it is expected to use ``beta0`` as the a priori guess. The first level
    starts from the constant ``beta_start``; each later level starts from the
    prolongation of the previous result. ``callback`` receives each
    :class:`LevelResult`, ``step_callback`` every accepted step.
    """
    from .mesh import build_square_mesh, prolongate

    levels = [int(v) for v in levels]
    if not levels:
        raise ValueError("need at least one level")
    for a, b in zip(levels, levels[1:]):
        if b != 2 * a:
            raise ValueError(f"levels must double: {a} -> {b}")
    out = []
    prev = None
    for level in levels:
        mesh = build_square_mesh(level)
        if prev is None:
            beta0 = np.full(mesh.n_nodes, float(beta_start))
        else:
            beta0 = prolongate(prev.result.beta, prev.mesh, mesh)
        objective = setup(level, mesh, beta0)
        res = gradient_projection(beta0, objective, callback=step_callback)
        log.info("level %d: %d iterations (%s), J=%.4e", level, res.iterations,
                 res.stop_reason, res.final.J)
        lr = LevelResult(level, mesh, objective, res)
        if callback is not None:
            callback(lr)
        out.append(lr)
        prev = lr
    return out


def discretization_error_estimate(beta, coeffs, flux, g, gamma, coarse_level, reference_level,
                                  rel_tol=1e-12) -> float:
    """Reference-mesh surrogate for ``||N - N^h|| + ||M - M^h||``.

    ``beta`` and ``g`` are callables of ``(x1, x2)``; ``flux(mesh)`` returns the
    edge flux of a mesh. Coarse solutions are prolongated to the reference mesh.
    """
    from .mesh import build_square_mesh, prolongate_to

    if reference_level < coarse_level:
        raise ValueError("reference level must not be coarser than the coarse level")
    sols = []
    for level in (coarse_level, reference_level):
        mesh = build_square_mesh(level)
        p = ForwardProblem(mesh, coeffs, gamma, rel_tol)
        fl = flux(mesh)
        gv = np.asarray(g(*mesh.nodes[p.gamma_nodes].T), dtype=float)
        gv = np.broadcast_to(gv, p.gamma_nodes.shape)
        sols.append((mesh, p, p.neumann(beta, fl), p.mixed(beta, fl, gv)))
    (mc, _, nc, mc_), (mr, pr, nr, mr_) = sols
    if mc.level == mr.level:
        return 0.0
    en = pr.disc.l2_norm(nr - prolongate_to(nc, mc, mr))
    em = pr.disc.l2_norm(mr_ - prolongate_to(mc_, mc, mr))
    return en + em
