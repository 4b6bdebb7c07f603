"""
Forward problems on the unit-square benchmark
=============================================

Build a mesh, solve the Neumann, mixed and Dirichlet problems for the
benchmark coefficients, and check that Neumann data and its own trace
reproduce the same state.
"""
import numpy as np

from reactcoef import catalog
from reactcoef.forward import ForwardProblem, solve_dirichlet
from reactcoef.mesh import SIDES, boundary_nodes, build_square_mesh

# a level-l mesh has (l+1)^2 nodes and 2 l^2 triangles
mesh = build_square_mesh(16)
print(f"level {mesh.level}: {mesh.n_nodes} nodes, {mesh.n_triangles} triangles, h = {mesh.mesh_size:.4f}")

# Cauchy data are observed on the bottom side
problem = ForwardProblem(mesh, catalog.coefficients(), gamma=("bottom",))
flux = catalog.edge_flux(mesh, (1, -2, 3, -4))

# Neumann state at the true coefficient; its bottom trace feeds the mixed problem
N = problem.neumann(catalog.beta_true, flux)
M = problem.mixed(catalog.beta_true, flux, N[problem.gamma_nodes])
print("||N - M||      =", problem.disc.l2_norm(N - M))

# the Dirichlet problem with the full boundary trace gives the same state again
D = solve_dirichlet(mesh, problem.coeffs, catalog.beta_true, N[boundary_nodes(mesh, SIDES)])
print("||N - D||      =", problem.disc.l2_norm(N - D))

# a wrong coefficient breaks the consistency, which is what the inverse solver exploits
M_wrong = problem.mixed(1.5, flux, N[problem.gamma_nodes])
N_wrong = problem.neumann(1.5, flux)
print("misfit at 1.5  =", problem.disc.l2_norm(N_wrong - M_wrong) ** 2)
print("state range    =", np.ptp(N))
