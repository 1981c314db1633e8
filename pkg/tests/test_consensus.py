import numpy as np
import pytest

from saddlenet import catalog
from saddlenet.consensus import (ConsensusAgentSpec, ConsensusProblem,
                                 as_saddle_problem, consensus_residual,
                                 initial_state, lagrangian_L1, operator_phi,
                                 simulate_consensus, step_consensus_eg,
                                 step_consensus_ogda)
from saddlenet.core import ValidationError, operator_F
from saddlenet.graphs import NetworkGraph, ring
from saddlenet.sets import Box


def zero_agents(n, box=(-10.0, 10.0)):
    return [ConsensusAgentSpec(
        objective=lambda s: 0.0,
        gradient=lambda s: np.zeros(s.shape),
        cset=Box(box[0], box[1], dim=1),
        lipschitz=0.0) for _ in range(n)]


def path2_problem():
    return ConsensusProblem(NetworkGraph(2, [(0, 1)]), 1, zero_agents(2))


def test_lagrangian_vanishing_laplacian_terms():
    prob = catalog.consensus_quadratics(n=5)
    x = np.full((5, 1), 1.5)
    v = np.arange(5.0).reshape(5, 1)
    expect = sum((1.5 - t) ** 2 for t in range(1, 6))
    assert lagrangian_L1(prob, x, v) == pytest.approx(expect, abs=1e-12)


def test_lagrangian_path_hand_value():
    prob = path2_problem()
    x = np.array([[1.0], [0.0]])
    v = np.zeros((2, 1))
    assert lagrangian_L1(prob, x, v) == pytest.approx(0.5, abs=1e-15)


def test_lagrangian_at_origin():
    prob = catalog.consensus_quadratics(n=5)
    x = np.zeros((5, 1))
    v = np.zeros((5, 1))
    expect = sum(t ** 2 for t in range(1, 6))
    assert lagrangian_L1(prob, x, v) == pytest.approx(expect, abs=1e-12)


def test_operator_at_consensus_with_zero_duals():
    prob = catalog.consensus_quadratics(n=5)
    x = np.full((5, 1), 2.0)
    v = np.zeros((5, 1))
    rows = operator_phi(prob, x, v)
    grads = np.array([2.0 * (2.0 - t) for t in range(1, 6)])
    assert np.allclose(rows[:5], grads, atol=1e-12)
    assert np.allclose(rows[5:], 0.0, atol=1e-15)


def test_operator_path_hand_value():
    prob = path2_problem()
    x = np.array([[1.0], [0.0]])
    v = np.zeros((2, 1))
    rows = operator_phi(prob, x, v)
    assert np.allclose(rows, [1.0, -1.0, -1.0, 1.0], atol=1e-15)


def test_operator_matches_generic_saddle_operator():
    prob = catalog.consensus_quadratics(n=5)
    saddle = as_saddle_problem(prob)
    rng = np.random.default_rng(17)
    for _ in range(100):
        x = rng.uniform(-10.0, 10.0, size=(5, 1))
        v = rng.normal(scale=3.0, size=(5, 1))
        z = np.concatenate([x.ravel(), v.ravel()])
        direct = operator_phi(prob, x, v)
        generic = operator_F(saddle, z)
        assert np.max(np.abs(direct - generic)) <= 1e-12


def test_consensus_residual_values():
    prob = path2_problem()
    assert consensus_residual(prob, np.full((2, 1), 3.0)) == 0.0
    r = consensus_residual(prob, np.array([[1.0], [0.0]]))
    assert r == pytest.approx(np.sqrt(2.0), abs=1e-15)


def test_steps_preserve_fixed_point_zero_gradients():
    # identical targets: every agent minimized at 2, so zero duals suffice
    agents = [ConsensusAgentSpec(
        objective=lambda s: float((s[0] - 2.0) ** 2),
        gradient=lambda s: 2.0 * (s - 2.0),
        cset=Box(-10.0, 10.0, dim=1),
        lipschitz=2.0) for _ in range(5)]
    prob = ConsensusProblem(ring(5), 1, agents)
    x = np.full((5, 1), 2.0)
    v = np.zeros((5, 1))
    alpha = 0.4 / prob.kappa_c
    nxt = step_consensus_ogda(prob, initial_state(prob, x, v), alpha)
    assert np.allclose(nxt.x, x, atol=1e-15)
    assert np.allclose(nxt.v, v, atol=1e-15)
    nxt = step_consensus_eg(prob, initial_state(prob, x, v), alpha)
    assert np.allclose(nxt.x, x, atol=1e-15)
    assert np.allclose(nxt.v, v, atol=1e-15)


def test_steps_preserve_certified_saddle_point():
    from saddlenet.oracle import solve_consensus_reference
    prob = catalog.consensus_quadratics(n=5)
    ref = solve_consensus_reference(prob)
    alpha = 0.4 / prob.kappa_c
    state = initial_state(prob, ref.x, ref.v)
    for step in (step_consensus_ogda, step_consensus_eg):
        nxt = step(prob, initial_state(prob, ref.x, ref.v), alpha)
        assert np.max(np.abs(nxt.x - ref.x)) <= 1e-12
        assert np.max(np.abs(nxt.v - ref.v)) <= 1e-12
    assert state.x.shape == (5, 1)


def test_stacked_matches_generic_solver():
    from saddlenet.solvers import SolverConfig, run
    prob = catalog.consensus_quadratics(n=5)
    saddle = as_saddle_problem(prob)
    alpha = 0.9 / (2.0 * prob.kappa_c)
    trace = simulate_consensus(prob, "OGDA", alpha=alpha, max_iters=200,
                               stop_tol=0.0)
    z0 = np.concatenate([trace.x[0].ravel(), trace.v[0].ravel()])
    generic = run(saddle, SolverConfig("OGDA", step_size=alpha, max_iters=200,
                                       stop_tol=0.0), z0)
    stacked = np.concatenate(
        [trace.x.reshape(trace.x.shape[0], -1),
         trace.v.reshape(trace.v.shape[0], -1)], axis=1)
    assert np.max(np.abs(stacked - generic.z)) <= 1e-12


def test_quadratics_converge_to_mean_both_methods():
    prob = catalog.consensus_quadratics(n=5)
    for method in ("OGDA", "EG"):
        trace = simulate_consensus(prob, method, max_iters=100000,
                                   record_every=100, stop_tol=1e-8)
        assert trace.stopped_at is not None
        assert np.max(np.abs(trace.x[-1] - 3.0)) <= 1e-4
        assert trace.consensus_residual[-1] <= 1e-6


def test_gda_rejected_for_distributed_runs():
    prob = catalog.consensus_quadratics(n=5)
    with pytest.raises(ValidationError):
        simulate_consensus(prob, "GDA", max_iters=10)


def test_step_size_validated_against_kappa_c():
    prob = catalog.consensus_quadratics(n=5)
    too_big = 1.1 / (2.0 * prob.kappa_c)
    with pytest.raises(ValidationError):
        simulate_consensus(prob, "OGDA", alpha=too_big, max_iters=10)


def test_kappa_c_value():
    # l_f + 2 lambda_max on the 5-ring with f_i = (s - i)^2
    prob = catalog.consensus_quadratics(n=5)
    from saddlenet.graphs import lambda_max
    lam = lambda_max(prob.graph)
    assert prob.kappa_c == pytest.approx(2.0 + 2.0 * lam, rel=1e-10)


def test_residual_decreases_below_tolerance():
    prob = catalog.consensus_quadratics(n=5)
    trace = simulate_consensus(prob, "EG", max_iters=100000,
                               record_every=1000, stop_tol=1e-8)
    assert trace.vi_residual[-1] <= 1e-8
    assert trace.consensus_residual[-1] <= 1e-6


def test_trace_csv_layout(tmp_path):
    prob = catalog.consensus_quadratics(n=5)
    trace = simulate_consensus(prob, "OGDA", max_iters=10, stop_tol=0.0)
    path = tmp_path / "c.csv"
    trace.to_csv(str(path))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "iter,agent_id,x0,v0,consensus_residual,objective_sum"
    assert len(lines) == 1 + 11 * 5
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "0"


def test_ergodic_average_tracks_iterates():
    prob = catalog.consensus_quadratics(n=5)
    trace = simulate_consensus(prob, "OGDA", max_iters=50, stop_tol=0.0)
    expect = np.mean(trace.x[1:], axis=0)
    assert np.allclose(trace.erg_x[-1], expect, atol=1e-12)


def test_infeasible_start_feasible_after_first_step():
    # row 0 keeps the raw start; the first projected step lands inside
    prob = catalog.consensus_quadratics(n=5)
    x0 = np.full((5, 1), 50.0)
    trace = simulate_consensus(prob, "OGDA", max_iters=3, x0=x0, stop_tol=0.0)
    assert np.all(np.abs(trace.x[1]) <= 10.0)
