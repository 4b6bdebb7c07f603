"""Discrete state, adjoint and sensitivity solves.

``N(beta)``: Neumann problem, flux prescribed on the whole boundary.
``M(beta)``: mixed problem, trace ``g`` on the observation boundary and the
known flux elsewhere. ``D(beta)``: Dirichlet trace on the whole boundary.
The adjoints share the bilinear form with the L2 misfit as source; the mixed
adjoint vanishes on the observation boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import CoefficientError, Discretization, dirichlet_split
from .linalg import solve_spd
from .mesh import SIDES, BoundaryRegion, Mesh, boundary_nodes


@dataclass(frozen=True)
class Coefficients:
    """Known data of the elliptic operator: diffusion, boundary weight and source."""

    alpha: object = 1.0
    f: object = 0.0
    sigma: object = 0.0


@dataclass
class CauchyData:
    """One Neumann/Dirichlet pair: flux on every boundary edge and the trace on the Gamma nodes."""

    flux: np.ndarray
    trace: np.ndarray
    region: BoundaryRegion


class _System:
    """Stiffness matrix at a fixed beta and its reduction to the non-Gamma nodes."""

    def __init__(self, K, free):
        self.K = K
        self._free = free
        self._K_ff = None
        self._K_fc = None

    def reduced(self, constrained):
        if self._K_ff is None:
            Kf = self.K[self._free]
            self._K_ff = Kf[:, self._free].tocsr()
            self._K_fc = Kf[:, constrained].tocsr()
        return self._K_ff, self._K_fc


class ForwardProblem:
    """Solver for the boundary-value problems on one mesh for one observation boundary."""

    def __init__(self, mesh: Mesh, coeffs: Coefficients, gamma=("bottom",), rel_tol=1e-12):
        self.mesh = mesh
        self.coeffs = coeffs
        self.gamma = BoundaryRegion.parse(gamma)
        self.rel_tol = rel_tol
        self.disc = Discretization.of(mesh)
        self.gamma_nodes = boundary_nodes(mesh, self.gamma)
        self.free, _ = dirichlet_split(mesh.n_nodes, self.gamma_nodes)
        self.gamma_edges = mesh.edge_mask(self.gamma)
        self.boundary_all = boundary_nodes(mesh, SIDES)
        self.interior, _ = dirichlet_split(mesh.n_nodes, self.boundary_all)
        # beta-independent part of the bilinear form and the volume source
        self.K0 = self.disc.assemble(alpha=coeffs.alpha, sigma=coeffs.sigma)
        self.f_load = self.disc.weighted_load(self.disc.scalar_at_qp(coeffs.f))
        self._dirichlet_system = {}

    @property
    def mass(self):
        return self.disc.mass()

    def system(self, beta) -> _System:
        if isinstance(beta, _System):
            return beta
        bq = self.disc.scalar_at_qp(beta)
        if not np.all(np.isfinite(bq)) or bq.min() <= 0.0:
            raise CoefficientError("reaction coefficient must be positive at all quadrature points")
        K = self.K0 + self.disc.assemble(beta_q=bq)
        return _System(K, self.free)

    def _solve(self, A, b, x0=None):
        return solve_spd(A, b, self.rel_tol, x0=x0, check=False)

    def neumann(self, beta, flux, x0=None) -> np.ndarray:
        s = self.system(beta)
        b = self.f_load + self.disc.edge_load(flux)
        return self._solve(s.K, b, x0)

    def mixed(self, beta, flux, g, x0=None) -> np.ndarray:
        s = self.system(beta)
        g = np.asarray(g, dtype=float)
        if g.shape != self.gamma_nodes.shape:
            raise ValueError(f"trace needs {self.gamma_nodes.size} values on Gamma, got {g.shape}")
        K_ff, K_fc = s.reduced(self.gamma_nodes)
        flux = np.where(self.gamma_edges, 0.0, np.asarray(flux, dtype=float))
        b = (self.f_load + self.disc.edge_load(flux))[self.free] - K_fc @ g
        u = np.empty(self.mesh.n_nodes)
        u[self.gamma_nodes] = g
        u[self.free] = self._solve(K_ff, b, None if x0 is None else np.asarray(x0)[self.free])
        return u

    def dirichlet(self, beta, g_boundary) -> np.ndarray:
        """Full Dirichlet problem; ``g_boundary`` is ordered like ``boundary_nodes(mesh, SIDES)``."""
        s = self.system(beta)
        g = np.asarray(g_boundary, dtype=float)
        if g.shape != self.boundary_all.shape:
            raise ValueError("Dirichlet trace must cover every boundary node")
        Kf = s.K[self.interior]
        b = self.f_load[self.interior] - Kf[:, self.boundary_all] @ g
        u = np.empty(self.mesh.n_nodes)
        u[self.boundary_all] = g
        u[self.interior] = self._solve(Kf[:, self.interior].tocsr(), b)
        return u

    def adjoint_neumann(self, beta, residual, x0=None) -> np.ndarray:
        s = self.system(beta)
        return self._solve(s.K, self.mass @ np.asarray(residual, dtype=float), x0)

    def adjoint_mixed(self, beta, residual, x0=None) -> np.ndarray:
        s = self.system(beta)
        K_ff, _ = s.reduced(self.gamma_nodes)
        rhs = (self.mass @ np.asarray(residual, dtype=float))[self.free]
        a = np.zeros(self.mesh.n_nodes)
        a[self.free] = self._solve(K_ff, rhs, None if x0 is None else np.asarray(x0)[self.free])
        return a

    def derivative(self, beta, kappa, base, kind="neumann") -> np.ndarray:
        """Directional derivative of N (or M) at beta in direction kappa, given the state ``base``."""
        s = self.system(beta)
        kq = self.disc.scalar_at_qp(kappa)
        rhs = -self.disc.weighted_load(kq * self.disc.nodal_to_qp(base))
        if kind == "neumann":
            return self._solve(s.K, rhs)
        if kind == "mixed":
            K_ff, _ = s.reduced(self.gamma_nodes)
            d = np.zeros(self.mesh.n_nodes)
            d[self.free] = self._solve(K_ff, rhs[self.free])
            return d
        raise ValueError(f"unknown derivative kind {kind!r}")


# functional interface --------------------------------------------------------

def solve_neumann(mesh, coeffs, beta, flux, rel_tol=1e-12):
    return ForwardProblem(mesh, coeffs, rel_tol=rel_tol).neumann(beta, flux)


def solve_mixed(mesh, coeffs, beta, flux, g, gamma=("bottom",), rel_tol=1e-12):
    return ForwardProblem(mesh, coeffs, gamma, rel_tol).mixed(beta, flux, g)


def solve_dirichlet(mesh, coeffs, beta, g_boundary, rel_tol=1e-12):
    return ForwardProblem(mesh, coeffs, SIDES, rel_tol).dirichlet(beta, g_boundary)


def solve_adjoint_neumann(mesh, coeffs, beta, residual, rel_tol=1e-12):
    return ForwardProblem(mesh, coeffs, rel_tol=rel_tol).adjoint_neumann(beta, residual)


def solve_adjoint_mixed(mesh, coeffs, beta, residual, gamma=("bottom",), rel_tol=1e-12):
    return ForwardProblem(mesh, coeffs, gamma, rel_tol).adjoint_mixed(beta, residual)


def directional_derivative(mesh, coeffs, beta, kappa, base, kind="neumann",
                           gamma=("bottom",), rel_tol=1e-12):
    return ForwardProblem(mesh, coeffs, gamma, rel_tol).derivative(beta, kappa, base, kind)


def dump_field(mesh: Mesh, values) -> str:
    """One ``x y value`` line per node, 17 significant digits."""
    values = np.asarray(values, dtype=float)
    return "".join(f"{x:.17g} {y:.17g} {v:.17g}\n"
                   for (x, y), v in zip(mesh.nodes.tolist(), values.tolist()))
