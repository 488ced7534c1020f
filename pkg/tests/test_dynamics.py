import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from opinionlearn.dynamics import (
    AgentRule,
    MixedModel,
    ModelError,
    ModelGenConfig,
    RuleType,
    Trajectory,
    build_model,
    one_step,
    read_trajectory_csv,
    repell_weights,
    sample_model,
    simulate,
    step_degroot,
    step_fj,
    step_hk,
    step_repell,
    validate_assumptions,
    write_trajectory_csv,
)
from opinionlearn.graph import SignedGraph, degrees, from_edges

from oracles import direct_simulate

states = st.integers(2, 8).flatmap(
    lambda n: arrays(float, n, elements=st.floats(-1, 1, allow_nan=False)))


def test_rule_labels_and_arms():
    assert [r.value for r in RuleType] == [1, 2, 3, 4]
    assert [r.arm for r in RuleType] == [0, 1, 2, 3]
    assert RuleType.from_arm(2) is RuleType.REPELL


def test_degroot_examples():
    x = np.array([0.3, -0.7, 0.1])
    assert step_degroot(np.eye(3)[1], x) == x[1]
    assert step_degroot([1 / 3] * 3, [0.9, 0, -0.9]) == pytest.approx(0.0, abs=1e-15)
    assert step_degroot([0.7, 0.3], [1, -1]) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        step_degroot([1.0], [1.0, 2.0])


def test_fj_examples():
    w, x = np.array([0.25, 0.75]), np.array([0.4, -0.2])
    assert step_fj(np.append(w, 1.0), x, 0.9) == pytest.approx(step_degroot(w, x), abs=1e-15)
    assert step_fj(np.append(w, 0.0), x, 0.9) == 0.9
    assert step_fj([1.0, 0.5], [0.4], 0.2) == pytest.approx(0.3)


def test_repell_examples():
    assert step_repell([1.2, -0.2], [1, -1]) == pytest.approx(1.4)
    g = from_edges(2, [(0, 1, -1)])
    w = repell_weights(g, 0, 0.0, 0.2)
    assert np.allclose(w, [1.2, -0.2])
    assert step_repell(w, [0.37, 0.37]) == pytest.approx(0.37)


def test_hk_examples():
    row = np.ones(3)
    x = np.array([0.0, 0.2, 1.0])
    assert step_hk(0.5, row, x, 0) == pytest.approx(0.1)
    assert step_hk(0.0, row, x, 0) == 0.0
    assert step_hk(5.0, row, x, 0) == pytest.approx(x.mean())


def test_hk_includes_ties_at_the_bound():
    assert step_hk(0.5, [1, 1], [0.0, 0.5], 0) == pytest.approx(0.25)


@given(x=states, seed=st.integers(0, 10**6))
def test_degeneracy_triple(x, seed):
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    w = rng.random(n) + 0.01
    w /= w.sum()
    d = step_degroot(w, x)
    assert abs(step_fj(np.append(w, 1.0), x, rng.uniform(-1, 1)) - d) <= 1e-12
    assert abs(step_repell(w, x) - d) <= 1e-12
    row = np.ones(n)
    rng_span = np.ptp(x) + 1.0
    assert abs(step_hk(rng_span, row, x, 0) - x.mean()) <= 1e-12


@given(x=states, s=st.floats(-3, 3), seed=st.integers(0, 10**6))
def test_linear_steps_scale(x, s, seed):
    w = np.random.default_rng(seed).normal(size=x.shape[0])
    assert step_repell(w, s * x) == pytest.approx(s * step_repell(w, x), abs=1e-12)
    assert step_degroot(np.abs(w), s * x) == pytest.approx(s * step_degroot(np.abs(w), x), abs=1e-12)


def _model(seed=0, gen=ModelGenConfig()):
    return sample_model(gen, np.random.default_rng(seed))


def test_sample_model_defaults():
    m = _model(4)
    assert m.n == 20
    assert [r.rule for r in m.rules] == [RuleType(k) for k in (1, 2, 3, 4) for _ in range(5)]
    assert np.all(np.abs(m.x0) < 1)
    assert validate_assumptions(m) == []
    for i, r in enumerate(m.rules):
        if r.rule is RuleType.FJ:
            assert r.theta[-1] == 0.5
        if r.rule is RuleType.HK:
            assert r.confidence == 0.25
        if r.rule is RuleType.REPELL:
            dp, dm = degrees(m.graph, i)
            off = [j for j in range(20) if j != i and m.graph.adj[i, j] != 0]
            assert np.allclose(np.abs(r.theta[off]), 0.2 / (dp + dm))
            assert r.theta.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_simulate_matches_direct_oracle(seed):
    gen = ModelGenConfig(counts=(2, 1, 2, 1))
    m = _model(seed, gen)
    traj = simulate(m, 12)
    labels = [r.rule.value for r in m.rules]
    ref = direct_simulate(m.graph.adj, labels, m.x0, 12)
    assert np.max(np.abs(traj.states - ref)) <= 1e-12


def test_simulate_rows_follow_one_step():
    m = _model(2)
    traj = simulate(m, 15)
    for t in range(15):
        assert np.max(np.abs(traj.states[t + 1] - one_step(m, traj.states[t]))) <= 1e-12


def test_consensus_fixed_point_and_horizon():
    g = from_edges(3, [(0, 1, 1), (1, 2, 1)])
    m = build_model(g, [RuleType.DEGROOT] * 3, np.full(3, 0.3))
    traj = simulate(m, 6)
    assert np.allclose(traj.states, 0.3)
    assert simulate(m, 1).states.shape == (2, 3)


def test_simulate_rejects_invalid_model():
    g = from_edges(2, [(0, 1, -1)])
    m = MixedModel(g, (AgentRule(RuleType.DEGROOT, [1.0, 0.0]), AgentRule(RuleType.DEGROOT, [0.0, 1.0])),
                   np.array([0.1, 0.2]))
    with pytest.raises(ModelError):
        simulate(m, 2)


def test_validate_reports_clause_iii_and_iv():
    m = _model(1)
    adj = m.graph.adj.copy()
    # give DeGroot agent 0 a negative edge to HK agent 19
    adj[0, 19] = adj[19, 0] = -1
    bad = MixedModel(SignedGraph(adj), m.rules, m.x0)
    assert any(v.startswith("(iii) agent 0") for v in validate_assumptions(bad))
    rules = list(m.rules)
    rules[19] = AgentRule(RuleType.HK, [2 * np.max(np.abs(m.x0))])
    bad = MixedModel(m.graph, tuple(rules), m.x0)
    assert any(v.startswith("(iv) agent 19") for v in validate_assumptions(bad))


def test_validate_reports_lambda_and_connectivity():
    g = SignedGraph(np.eye(2, dtype=int))
    m = MixedModel(g, (AgentRule(RuleType.FJ, [1.0, 0.0, 0.05]), AgentRule(RuleType.DEGROOT, [0.0, 1.0])),
                   np.array([0.1, 0.2]))
    report = validate_assumptions(m)
    assert any(v.startswith("(i)") for v in report)
    assert any(v.startswith("(ii)") for v in report)


def test_trajectory_views():
    s = np.arange(12.0).reshape(4, 3)
    tr = Trajectory(s)
    assert tr.T == 3 and tr.n == 3
    assert np.array_equal(tr.X, s[:3])
    assert np.array_equal(tr.b(1), s[1:, 1])
    assert tr.prefix(2).T == 2
    with pytest.raises(ValueError):
        Trajectory(s[:1])


def test_trajectory_csv_round_trip(tmp_path):
    traj = simulate(_model(3), 5)
    p = tmp_path / "t.csv"
    write_trajectory_csv(traj, p)
    assert p.read_text().splitlines()[0].startswith("x1,x2")
    assert np.array_equal(read_trajectory_csv(p).states, traj.states)


def test_sampling_is_deterministic():
    a, b = _model(9), _model(9)
    assert np.array_equal(a.graph.adj, b.graph.adj) and np.array_equal(a.x0, b.x0)
