"""P1 Galerkin assembly of ``(a grad u, grad v) + (b u, v) + (s u, v)_boundary``.

Quadrature: the three-point edge-midpoint rule on triangles (exact for
quadratics) and two-point Gauss on boundary edges (exact for cubics).
Discontinuous data are sampled pointwise at the quadrature nodes.

Coefficients are given as a number, a nodal array (a P1 field, interpolated
at quadrature points) or a callable ``c(x1, x2)`` evaluated at the points.
The diffusion matrix may also be a constant 2x2 array or a callable returning
shape ``(..., 2, 2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh

# basis values at the midpoints of edges (v0,v1), (v1,v2), (v2,v0)
TRI_QUAD_BASIS = np.array([[0.5, 0.5, 0.0],
                           [0.0, 0.5, 0.5],
                           [0.5, 0.0, 0.5]])
_g = 0.5 / np.sqrt(3.0)
EDGE_QUAD_BASIS = np.array([[0.5 + _g, 0.5 - _g],
                            [0.5 - _g, 0.5 + _g]])


class CoefficientError(ValueError):
    pass


def triangle_quadrature_points(coords: np.ndarray) -> np.ndarray:
    """Edge midpoints, shape ``(n_tri, 3, 2)``, for vertex coordinates ``(n_tri, 3, 2)``."""
    return np.einsum("qa,tad->tqd", TRI_QUAD_BASIS, coords)


def edge_quadrature_points(coords: np.ndarray) -> np.ndarray:
    return np.einsum("qa,ead->eqd", EDGE_QUAD_BASIS, coords)


def _p1_gradients(coords):
    """Areas and constant basis gradients ``(n_tri, 3, 2)``."""
    x, y = coords[..., 0], coords[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    grads = np.stack([b, c], axis=-1) / (2.0 * area)[:, None, None]
    return area, grads


def eval_scalar(coef, points, nodal_at=None):
    """Evaluate a scalar coefficient at ``points`` (shape ``(..., 2)``).

    ``nodal_at`` is a callable mapping a nodal array to values at the same
    points; it is required when ``coef`` is a nodal array.
    """
    if callable(coef):
        val = np.asarray(coef(points[..., 0], points[..., 1]), dtype=float)
        return np.broadcast_to(val, points.shape[:-1])
    arr = np.asarray(coef, dtype=float)
    if arr.ndim == 0:
        return np.full(points.shape[:-1], float(arr))
    if nodal_at is None:
        raise CoefficientError("nodal coefficient given where no mesh interpolation is available")
    return nodal_at(arr)


def eval_matrix(coef, points):
    if callable(coef):
        val = np.asarray(coef(points[..., 0], points[..., 1]), dtype=float)
    else:
        val = np.asarray(coef, dtype=float)
        if val.ndim == 0:
            val = val * np.eye(2)
    return np.broadcast_to(val, points.shape[:-1] + (2, 2))


def check_elliptic(alpha_q, tol=1e-12):
    if not np.allclose(alpha_q, np.swapaxes(alpha_q, -1, -2), rtol=0.0, atol=tol):
        raise CoefficientError("diffusion matrix is not symmetric")
    a, b, d = alpha_q[..., 0, 0], alpha_q[..., 0, 1], alpha_q[..., 1, 1]
    lam_min = 0.5 * (a + d) - np.sqrt(0.25 * (a - d) ** 2 + b * b)
    if not np.all(np.isfinite(lam_min)) or lam_min.min() <= 0.0:
        raise CoefficientError(
            f"diffusion matrix not uniformly elliptic (min eigenvalue {lam_min.min():.3e})")


def element_matrices(coords, alpha=None, beta=None, alpha_q=None, beta_q=None):
    """Local 3x3 matrices for ``(alpha grad u, grad v) + (beta u, v)``.

    ``coords`` has shape ``(n_tri, 3, 2)``. Either pass coefficients (numbers
    or callables) or their values at the quadrature points directly.
    """
    coords = np.asarray(coords, dtype=float)
    area, grads = _p1_gradients(coords)
    out = np.zeros((coords.shape[0], 3, 3))
    if alpha_q is None and alpha is not None:
        alpha_q = eval_matrix(alpha, triangle_quadrature_points(coords))
    if alpha_q is not None:
        abar = alpha_q.mean(axis=1)  # equal weights, constant gradients
        out += area[:, None, None] * np.einsum("tad,tde,tbe->tab", grads, abar, grads)
    if beta_q is None and beta is not None:
        beta_q = eval_scalar(beta, triangle_quadrature_points(coords))
    if beta_q is not None:
        out += np.einsum("t,tq,qa,qb->tab", area / 3.0, beta_q, TRI_QUAD_BASIS, TRI_QUAD_BASIS)
    return out


def edge_matrices(coords, sigma=None, sigma_q=None):
    """Local 2x2 boundary matrices for ``(sigma u, v)`` on edges ``(n_edge, 2, 2)``."""
    coords = np.asarray(coords, dtype=float)
    length = np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1)
    if sigma_q is None:
        sigma_q = eval_scalar(sigma, edge_quadrature_points(coords))
    return np.einsum("e,eq,qa,qb->eab", 0.5 * length, sigma_q, EDGE_QUAD_BASIS, EDGE_QUAD_BASIS)


class _Pattern:
    """CSR sparsity pattern with a scatter map from local entries."""

    def __init__(self, n, rows, cols):
        keys = rows.astype(np.int64) * n + cols
        uniq, self.inverse = np.unique(keys, return_inverse=True)
        self.n = n
        self.indices = (uniq % n).astype(np.int32)
        counts = np.bincount(uniq // n, minlength=n)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)

    def build(self, local_values):
        data = np.bincount(self.inverse, weights=local_values.ravel(), minlength=len(self.indices))
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


class Discretization:
    """Per-mesh cache of geometry, quadrature and sparsity structure."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        tri = mesh.triangles
        self.coords = mesh.nodes[tri]
        self.area, self.grads = _p1_gradients(self.coords)
        if np.any(self.area <= 0):
            raise ValueError("mesh has non-positive triangle areas")
        self.qpoints = triangle_quadrature_points(self.coords)
        self.edge_coords = mesh.nodes[mesh.boundary_edges]
        self.edge_length = np.linalg.norm(self.edge_coords[:, 1] - self.edge_coords[:, 0], axis=1)
        self.edge_qpoints = edge_quadrature_points(self.edge_coords)
        n = mesh.n_nodes
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        e = mesh.boundary_edges
        erows = np.repeat(e, 2, axis=1).ravel()
        ecols = np.tile(e, (1, 2)).ravel()
        self._pattern = _Pattern(n, np.concatenate([rows, erows]), np.concatenate([cols, ecols]))
        self._n_tri_entries = rows.size
        self._n_edge_entries = erows.size
        self._mass = None

    @classmethod
    def of(cls, mesh: Mesh) -> "Discretization":
        disc = mesh._cache.get("disc")
        if disc is None:
            disc = mesh._cache["disc"] = cls(mesh)
        return disc

    # interpolation of nodal fields to quadrature points
    def nodal_to_qp(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.mesh.n_nodes,):
            raise CoefficientError(
                f"nodal field has shape {u.shape}, mesh has {self.mesh.n_nodes} nodes")
        return u[self.mesh.triangles] @ TRI_QUAD_BASIS.T

    def nodal_to_edge_qp(self, u):
        return np.asarray(u, dtype=float)[self.mesh.boundary_edges] @ EDGE_QUAD_BASIS.T

    def scalar_at_qp(self, coef):
        return eval_scalar(coef, self.qpoints, self.nodal_to_qp)

    def scalar_at_edge_qp(self, coef):
        return eval_scalar(coef, self.edge_qpoints, self.nodal_to_edge_qp)

    def assemble(self, alpha=None, beta=None, sigma=None, beta_q=None) -> sp.csr_matrix:
        alpha_q = None
        if alpha is not None:
            alpha_q = eval_matrix(alpha, self.qpoints)
            check_elliptic(alpha_q)
        if beta_q is None and beta is not None:
            beta_q = self.scalar_at_qp(beta)
        local = element_matrices(self.coords, alpha_q=alpha_q, beta_q=beta_q)
        if sigma is None:
            elocal = np.zeros((self.edge_coords.shape[0], 2, 2))
        else:
            sigma_q = self.scalar_at_edge_qp(sigma)
            if np.any(sigma_q < 0) or not np.all(np.isfinite(sigma_q)):
                raise CoefficientError("boundary coefficient sigma must be finite and >= 0")
            elocal = edge_matrices(self.edge_coords, sigma_q=sigma_q)
        return self._pattern.build(np.concatenate([local.ravel(), elocal.ravel()]))

    def mass(self) -> sp.csr_matrix:
        """Consistent P1 mass matrix (exact for the midpoint rule)."""
        if self._mass is None:
            self._mass = self.assemble(beta=1.0)
        return self._mass

    def weighted_load(self, values_q):
        """``b_p = sum_T |T|/3 sum_q w(q) phi_p(q)`` for values ``w`` at quadrature points."""
        local = (self.area / 3.0)[:, None] * (np.asarray(values_q) @ TRI_QUAD_BASIS)
        return np.bincount(self.mesh.triangles.ravel(), weights=local.ravel(),
                           minlength=self.mesh.n_nodes)

    def edge_load(self, flux):
        """Boundary term for a piecewise-constant flux given per boundary edge."""
        flux = np.asarray(flux, dtype=float)
        if flux.shape != (self.mesh.boundary_edges.shape[0],):
            raise CoefficientError("edge flux must hold one value per boundary edge")
        if not np.all(np.isfinite(flux)):
            raise CoefficientError("edge flux has non-finite values")
        half = 0.5 * self.edge_length * flux
        return np.bincount(self.mesh.boundary_edges.ravel(), weights=np.repeat(half, 2),
                           minlength=self.mesh.n_nodes)

    def l2_norm(self, u) -> float:
        """``||u||_{L2}`` of a nodal field through the consistent mass matrix."""
        u = np.asarray(u, dtype=float)
        return float(np.sqrt(max(u @ (self.mass() @ u), 0.0)))

    def l2_norm_qp(self, values_q) -> float:
        """L2 norm of a function known at quadrature points (midpoint rule)."""
        return float(np.sqrt(np.sum(self.area[:, None] / 3.0 * np.asarray(values_q) ** 2)))


def assemble_stiffness(mesh: Mesh, alpha, beta, sigma=0.0) -> sp.csr_matrix:
    """Matrix of ``[phi_q, phi_p]_(alpha, beta, sigma)`` for the P1 basis."""
    disc = Discretization.of(mesh)
    if beta is not None:
        bq = disc.scalar_at_qp(beta)
        if not np.all(np.isfinite(bq)) or bq.min() < 0.0:
            raise CoefficientError("reaction coefficient must be finite and non-negative")
    else:
        bq = None
    return disc.assemble(alpha=alpha, beta_q=bq, sigma=sigma)


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    return Discretization.of(mesh).mass()


def assemble_load(mesh: Mesh, f, flux=None) -> np.ndarray:
    """``b_p = int f phi_p + sum_e int_e flux phi_p`` (flux piecewise constant per edge)."""
    disc = Discretization.of(mesh)
    b = disc.weighted_load(disc.scalar_at_qp(f))
    if flux is not None:
        b = b + disc.edge_load(flux)
    return b


@dataclass(frozen=True)
class Lifting:
    """Rebuilds a full nodal vector from the free-node solution of a reduced system."""

    n: int
    free: np.ndarray
    constrained: np.ndarray
    values: np.ndarray

    def expand(self, x_free) -> np.ndarray:
        x = np.empty(self.n)
        x[self.free] = x_free
        x[self.constrained] = self.values
        return x


def dirichlet_split(n, constrained):
    constrained = np.asarray(constrained, dtype=np.int64).ravel()
    if constrained.size and (constrained.min() < 0 or constrained.max() >= n):
        raise IndexError("constrained node index out of range")
    if np.unique(constrained).size != constrained.size:
        raise ValueError("constrained nodes must be distinct")
    mask = np.ones(n, dtype=bool)
    mask[constrained] = False
    return np.flatnonzero(mask), constrained


def apply_dirichlet(A, b, constrained, values):
    """Eliminate constrained unknowns: returns ``(A_ff, b_f - A_fc g, lifting)``."""
    A = sp.csr_matrix(A)
    n = A.shape[0]
    free, constrained = dirichlet_split(n, constrained)
    values = np.broadcast_to(np.asarray(values, dtype=float), constrained.shape).copy()
    A_ff = A[free][:, free]
    rhs = np.asarray(b, dtype=float)[free]
    if constrained.size:
        rhs = rhs - A[free][:, constrained] @ values
    return A_ff, rhs, Lifting(n, free, constrained, values)
