import numpy as np
import pytest

from reactcoef import catalog
from reactcoef.experiments import add_noise, eoc, synthesize_exact
from reactcoef.forward import CauchyData, Coefficients, ForwardProblem
from reactcoef.inverse import (Objective, SolverConfig, cost, discretization_error_estimate,
                               gradient, gradient_projection, history_csv, multilevel_run,
                               optimality_residual, project)
from reactcoef.mesh import build_square_mesh


def interpolant(mesh):
    return catalog.beta_true(*mesh.nodes.T)


def consistent_data(problem, beta, abcd=catalog.DEFAULT_ABCD):
    ex = synthesize_exact(problem, abcd, beta=beta)
    return CauchyData(ex.flux, ex.trace, problem.gamma)


@pytest.fixture
def noisy_objective(example1_problem):
    p = example1_problem
    ex = synthesize_exact(p)
    meas = add_noise(p, ex, theta=0.05, seed=3)
    return Objective(p, meas.cauchy(), SolverConfig(rho=1e-3))


def test_project():
    np.testing.assert_array_equal(project([5.0, -1.0, 12.0], 0.05, 10.0), [5.0, 0.05, 10.0])


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(rho=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(rho=1.0, lower=2.0, upper=1.0)
    with pytest.raises(ValueError):
        SolverConfig(rho=1.0, gradient="spectral")
    assert SolverConfig(rho=1.0).stopping_constants(0.5) == (5e-4, 5e-3)


def test_cost_vanishes_for_consistent_data(example1_problem):
    p = example1_problem
    data = consistent_data(p, catalog.beta_true)
    obj = Objective(p, data, SolverConfig(rho=1.0, beta_star=catalog.beta_true))
    ev = obj.evaluate(catalog.beta_true)
    assert ev.misfit <= 1e-18 and ev.J <= 1e-18
    beta = interpolant(p.mesh)
    data = consistent_data(p, beta)
    assert cost(beta, data, p, SolverConfig(rho=0.7, beta_star=beta)) <= 1e-20


def test_cost_permutation_invariant(example1_problem):
    p = example1_problem
    data = [add_noise(p, synthesize_exact(p, t), 0.1, 0, i).cauchy()
            for i, t in enumerate([(1, -2, 3, -4), (3, 1, -2, -4), (-2, 3, 1, -4)])]
    cfg = SolverConfig(rho=1e-3)
    beta = np.linspace(1.0, 3.0, p.mesh.n_nodes)
    assert cost(beta, data, p, cfg) == pytest.approx(cost(beta, data[::-1], p, cfg), rel=1e-13)


def test_identical_copies_reduce_to_single(example1_problem):
    p = example1_problem
    d = add_noise(p, synthesize_exact(p), 0.1, 0).cauchy()
    cfg = SolverConfig(rho=1e-3)
    beta = np.linspace(1.0, 3.0, p.mesh.n_nodes)
    for I in (2, 5):
        assert abs(cost(beta, [d] * I, p, cfg) - cost(beta, d, p, cfg)) <= 1e-14
        np.testing.assert_allclose(gradient(beta, [d] * I, p, cfg), gradient(beta, d, p, cfg),
                                   rtol=0, atol=1e-14)


@pytest.mark.parametrize("kind", ["projected", "nodal"])
def test_gradient_equals_regularization_for_consistent_data(example1_problem, kind):
    p = example1_problem
    beta = interpolant(p.mesh)
    data = consistent_data(p, beta)
    cfg = SolverConfig(rho=0.3, beta_star=1.5, gradient=kind)
    np.testing.assert_allclose(gradient(beta, data, p, cfg), 0.3 * (beta - 1.5), atol=1e-9)
    cfg0 = SolverConfig(rho=0.0, gradient=kind)
    assert np.abs(gradient(beta, data, p, cfg0)).max() <= 1e-9


@pytest.mark.parametrize("pair", range(10))
def test_gradient_matches_central_difference(noisy_objective, pair):
    obj = noisy_objective
    r = np.random.default_rng(100 + pair)
    n = obj.problem.mesh.n_nodes
    beta = r.uniform(0.5, 4.0, n)
    kappa = r.standard_normal(n)
    g = obj.gradient(obj.evaluate(beta))
    # G is half the Riesz representative of dJ
    adj = 2.0 * (obj.problem.mass @ g) @ kappa
    t = 1e-5
    fd = (obj.cost(beta + t * kappa) - obj.cost(beta - t * kappa)) / (2 * t)
    assert abs(adj - fd) / max(1.0, abs(fd)) <= 1e-4
    assert abs(adj - fd) / abs(fd) <= 1e-4


def test_zero_gradient_start_stops_immediately(example1_problem):
    p = example1_problem
    beta = interpolant(p.mesh)
    obj = Objective(p, consistent_data(p, beta), SolverConfig(rho=0.0))
    res = gradient_projection(beta, obj)
    assert res.stop_reason == "tolerance"
    assert res.iterations == 0
    np.testing.assert_array_equal(res.beta, beta)


def test_run_contract(noisy_objective):
    records, iterates = [], []
    res = gradient_projection(np.full(25, 1.5), noisy_objective,
                              callback=lambda rec, b: (records.append(rec), iterates.append(b)))
    assert res.stop_reason in ("tolerance", "max_iter")
    assert res.iterations == len(records) <= 600
    assert all(r.Q >= 0 for r in res.history)
    for b in iterates:
        assert b.min() >= 0.05 and b.max() <= 10.0
    # mu never grows
    mus = [r.mu for r in res.history]
    assert all(a >= b for a, b in zip(mus, mus[1:]))
    assert res.history[0].J >= res.final.J - 1e-4 * sum(r.mu for r in res.history)
    text = history_csv(res.history)
    assert text.splitlines()[0] == "k,J,grad_norm,mu,Q,halvings"
    assert len(text.splitlines()) == res.iterations + 1
    row = text.splitlines()[1].split(",")
    assert [float(v) for v in row] == pytest.approx(
        [0, res.history[0].J, res.history[0].grad_norm, res.history[0].mu, res.history[0].Q,
         res.history[0].halvings], rel=1e-15)


def test_max_iter_cap(noisy_objective):
    obj = noisy_objective.with_config(SolverConfig(rho=1e-3, max_iter=3))
    res = gradient_projection(np.full(25, 1.5), obj)
    assert res.stop_reason == "max_iter" and res.iterations == 3


def test_rejects_infeasible_start(noisy_objective):
    with pytest.raises(ValueError):
        gradient_projection(np.full(25, 20.0), noisy_objective)


def test_optimality_residual_fixed_points(example1_problem):
    p = example1_problem
    beta = interpolant(p.mesh)
    data = consistent_data(p, beta)
    assert optimality_residual(beta, data, p, SolverConfig(rho=0.1, beta_star=beta)) <= 1e-12
    top = np.full(p.mesh.n_nodes, 10.0)
    data_top = consistent_data(p, top)
    assert optimality_residual(top, data_top, p, SolverConfig(rho=0.1, beta_star=20.0)) == 0.0
    with pytest.raises(ValueError):
        optimality_residual(beta, data, p, SolverConfig(rho=0.0))


def test_optimality_residual_decreases_on_consistent_data(example1_problem):
    p = example1_problem
    obj = Objective(p, consistent_data(p, catalog.beta_true), SolverConfig(rho=1e-2))
    beta0 = np.full(p.mesh.n_nodes, 1.5)
    res = gradient_projection(beta0, obj)
    assert obj.optimality_residual(res.beta) <= obj.optimality_residual(beta0)


def test_optimality_residual_along_run_level8():
    mesh = build_square_mesh(8)
    p = ForwardProblem(mesh, catalog.coefficients())
    meas = add_noise(p, synthesize_exact(p), 0.02, seed=0)
    obj = Objective(p, meas.cauchy(), SolverConfig(rho=1e-2, max_iter=60))
    trace = []
    gradient_projection(np.full(mesh.n_nodes, 1.5), obj,
                        callback=lambda rec, b: trace.append(obj.optimality_residual(b))
                        if rec.k % 20 == 0 else None)
    beta0_res = obj.optimality_residual(np.full(mesh.n_nodes, 1.5))
    assert trace[-1] < beta0_res


def test_multilevel_single_level_matches_plain_call(example1_problem):
    def setup(level, mesh, beta0):
        p = ForwardProblem(mesh, catalog.coefficients())
        meas = add_noise(p, synthesize_exact(p), 0.05, seed=1)
        return Objective(p, meas.cauchy(), SolverConfig(rho=1e-3, beta_star=beta0))

    (lr,) = multilevel_run([4], setup)
    plain = gradient_projection(np.full(25, 1.5), setup(4, lr.mesh, np.full(25, 1.5)))
    np.testing.assert_array_equal(lr.result.beta, plain.beta)
    assert lr.result.iterations == plain.iterations
    with pytest.raises(ValueError):
        multilevel_run([4, 16], setup)


def test_region_mismatch_rejected(example1_problem):
    p = example1_problem
    other = ForwardProblem(p.mesh, p.coeffs, ("bottom", "left"))
    data = consistent_data(other, 1.0)
    with pytest.raises(ValueError):
        Objective(p, data, SolverConfig(rho=1.0))


SMOOTH = Coefficients(alpha=1.0, f=lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y) + 2.0)


def smooth_trace(x, y):
    return np.cos(np.pi * x) * np.cos(np.pi * y) / (2 * np.pi**2 + 1) + 2.0


def zero_flux(mesh):
    return np.zeros(len(mesh.boundary_edges))


def test_discretization_error_estimate_equal_levels():
    assert discretization_error_estimate(lambda x, y: 1.0 + 0 * x, SMOOTH, zero_flux,
                                         smooth_trace, ("bottom",), 8, 8) == 0.0


def test_discretization_error_estimate_second_order():
    one = lambda x, y: np.ones_like(x)
    est = [discretization_error_estimate(one, SMOOTH, zero_flux, smooth_trace, ("bottom",), lv, 64)
           for lv in (4, 8, 16)]
    steps, mean = eoc(est, [np.sqrt(8) / lv for lv in (4, 8, 16)])
    assert abs(mean - 2.0) <= 0.3, steps
    assert abs(steps[-1] - 2.0) <= 0.3, steps


def test_discretization_error_estimate_decreases_for_catalog():
    est = [discretization_error_estimate(catalog.beta_true, catalog.coefficients(),
                                         catalog.edge_flux, lambda x, y: 0.0 * x, ("bottom",), lv, 32)
           for lv in (4, 8)]
    assert est[1] < est[0]
