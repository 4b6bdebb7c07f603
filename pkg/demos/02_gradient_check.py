"""
Adjoint gradient versus finite differences
==========================================

The cost gradient is assembled from two state and two adjoint solves. Here
it is compared with centred differences of the cost along random directions.
"""
import numpy as np

from reactcoef import catalog
from reactcoef.experiments import add_noise, synthesize_exact
from reactcoef.forward import ForwardProblem
from reactcoef.inverse import Objective, SolverConfig
from reactcoef.mesh import build_square_mesh

mesh = build_square_mesh(4)
problem = ForwardProblem(mesh, catalog.coefficients())

# noisy Cauchy data on the bottom side
meas = add_noise(problem, synthesize_exact(problem), theta=0.05, seed=0)
print(f"noise level delta = {meas.delta:.4e}")

rng = np.random.default_rng(1)
beta = rng.uniform(0.5, 4.0, mesh.n_nodes)

for kind in ("projected", "nodal"):
    obj = Objective(problem, meas.cauchy(), SolverConfig(rho=1e-3, gradient=kind))
    G = obj.gradient(obj.evaluate(beta))
    errs = []
    for _ in range(5):
        kappa = rng.standard_normal(mesh.n_nodes)
        # the returned field is half the L2 representative of dJ
        adj = 2.0 * (problem.mass @ G) @ kappa
        t = 1e-5
        fd = (obj.cost(beta + t * kappa) - obj.cost(beta - t * kappa)) / (2 * t)
        errs.append(abs(adj - fd) / max(1.0, abs(fd)))
    print(f"{kind:>9}: max relative error {max(errs):.2e}")
