"""
One gradient-projection run
===========================

Reconstruct the reaction coefficient on a single mesh from noisy bottom-side
data and look at the iteration log.
"""
import numpy as np

from reactcoef import catalog
from reactcoef.experiments import (add_noise, error_metrics, rho_schedule, synthesize_exact,
                                   theta_schedule)
from reactcoef.forward import ForwardProblem
from reactcoef.inverse import Objective, SolverConfig, gradient_projection, history_csv
from reactcoef.mesh import build_square_mesh

level = 8
mesh = build_square_mesh(level)
problem = ForwardProblem(mesh, catalog.coefficients())

rho = rho_schedule("sqrt", level)
theta = theta_schedule("ex1", level, rho)
exact = synthesize_exact(problem)
meas = add_noise(problem, exact, theta, seed=0)
print(f"rho = {rho:.4e}, theta = {theta:.4e}, delta = {meas.delta:.4e}")

obj = Objective(problem, meas.cauchy(), SolverConfig(rho=rho))
res = gradient_projection(np.full(mesh.n_nodes, 1.5), obj)
print(f"stopped by {res.stop_reason} after {res.iterations} iterations")

# first and last few rows of the log
lines = history_csv(res.history).splitlines()
print("\n".join(lines[:4] + ["..."] + lines[-3:]))

for k, v in error_metrics(problem, res.beta, exact, meas).items():
    print(f"{k:>15} = {v:.4e}")
print("optimality residual:", obj.optimality_residual(res.beta, res.final))
