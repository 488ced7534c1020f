import math

import numpy as np
import pytest
from scipy.stats import chisquare

from opinionlearn.bandit import (
    NEG_SENTINEL,
    BanditConfig,
    BanditState,
    Evaluator,
    JsonlCheckpoint,
    edge_flip_refine,
    epsilon_greedy,
    initialize,
    inconsistency_repair,
    propose_adjacency,
    random_adjacency,
    random_search,
    random_search_config,
    read_checkpoints,
    repair_phase,
    run_bandit,
    select_rules,
    split_trajectory,
    update_q,
)
from opinionlearn.dynamics import RuleType, simulate
from opinionlearn.learners import LearnerConfig

from helpers import generic_model, mixed_instance

LCFG = LearnerConfig()


def _ev(traj, plus=False, t_split=None):
    return Evaluator(split_trajectory(traj, (4 * traj.T) // 5 if t_split is None else t_split),
                     LCFG, least_squares=plus, repell_simplex=plus)


def _state(n, q=None):
    q = np.zeros((n, 4)) if q is None else np.asarray(q, float)
    adj = np.zeros((4, n, n), dtype=np.int8)
    for k in range(4):
        np.fill_diagonal(adj[k], 1)
    err = np.ones((n, 4))
    return BanditState(q, adj, [[None] * n for _ in range(4)], err.copy(), err.copy(), np.zeros(n, int))


# update rule ----------------------------------------------------------------

def test_update_q_examples():
    assert update_q(2.0, math.exp(-3), 0.1) == pytest.approx(2.1)
    assert update_q(7.0, 0.25, 1.0) == pytest.approx(-math.log(0.25))
    assert update_q(2.0, math.inf, 0.1) == NEG_SENTINEL


def test_config_validation():
    with pytest.raises(ValueError):
        BanditConfig(eps_m=1.5)
    with pytest.raises(ValueError):
        BanditConfig(step_alpha=0)
    assert BanditConfig().split_for(20) == 16
    rs = random_search_config(BanditConfig())
    assert (rs.eps_m, rs.eps_g) == (1.0, 1.0)


# initialisation -------------------------------------------------------------

def test_init_degroot_arm_wins_on_degroot_data():
    m = generic_model(RuleType.DEGROOT, 0)
    st = initialize(_ev(simulate(m, 30)))
    assert np.all(np.argmax(st.q, axis=1) == RuleType.DEGROOT.arm)


def test_init_q_is_negative_log_error():
    m = generic_model(RuleType.DEGROOT, 1)
    st = initialize(_ev(simulate(m, 30)))
    finite = np.isfinite(st.best_err)
    assert np.allclose(st.q[finite], -np.log(st.best_err[finite]))
    assert np.all(st.q[~finite] == NEG_SENTINEL)
    # the floor gives -log(1e-12)
    floor = st.best_err == LCFG.err_floor
    assert floor.any() and np.allclose(st.q[floor], 27.631021115928547)


def test_init_infeasible_arm_gets_sentinel():
    # FJ needs lambda <= 1 - eps_lambda, so pure DeGroot data with self-only hints is infeasible for most agents
    m = generic_model(RuleType.DEGROOT, 2)
    st = initialize(_ev(simulate(m, 30)))
    fj = st.q[:, RuleType.FJ.arm]
    assert np.any(fj == NEG_SENTINEL)
    assert np.all(np.argmax(st.q, axis=1) != RuleType.FJ.arm)


# arm selection --------------------------------------------------------------

def test_select_greedy():
    q = np.array([[5.0, 1, 1, 1], [0, 0, 3, 3], [NEG_SENTINEL, -4, NEG_SENTINEL, NEG_SENTINEL]])
    picks = select_rules(q, 0.0, np.random.default_rng(0))
    assert picks.tolist() == [0, 2, 1]


def test_select_uniform_chi_square():
    q = np.tile([9.0, 0, 0, 0], (10_000, 1))
    picks = select_rules(q, 1.0, np.random.default_rng(5))
    counts = np.bincount(picks, minlength=4)
    assert chisquare(counts).pvalue > 0.01


# topology proposal ----------------------------------------------------------

def test_propose_greedy_copies_selected_rows():
    st = _state(3)
    st.adj_by_rule[1, 0] = [1, -1, 0]
    st.adj_by_rule[2, 0] = [1, 1, 1]
    st.adj_by_rule[3, 2] = [0, 1, 1]
    A = propose_adjacency(st, np.array([1, 0, 3]), 0.0, 0.5, np.random.default_rng(0))
    assert A.tolist() == [[1, 1, 0], [0, 1, 0], [0, 1, 1]]


@pytest.mark.parametrize("seed", range(10))
def test_random_branch_symmetric_unit_diagonal(seed):
    A = propose_adjacency(_state(8), np.zeros(8, int), 1.0, 0.4, np.random.default_rng(seed))
    assert np.array_equal(A, A.T) and np.all(np.diag(A) == 1)


def test_random_branch_zero_probability_is_identity():
    assert np.array_equal(random_adjacency(6, 0.0, np.random.default_rng(0)), np.eye(6))


# edge flips -----------------------------------------------------------------

def test_flip_adds_missing_edge():
    m = generic_model(RuleType.DEGROOT, 3)
    ev = _ev(simulate(m, 16))
    for i in range(m.n):
        true_row = m.graph.adj[i].copy()
        nbrs = [j for j in np.flatnonzero(true_row) if j != i]
        row = true_row.copy()
        row[nbrs[0]] = 0
        res, j = edge_flip_refine(ev, i, RuleType.DEGROOT.arm, row)
        assert j == nbrs[0]
        others = [ev.run(RuleType.DEGROOT.arm, i, h).val_err for h in _other_flips(i, row, j)]
        assert all(res.val_err < e for e in others)


def _other_flips(i, row, skip):
    from opinionlearn.bandit import flip_hints
    return [flip_hints(i, k, row, False) for k in range(len(row)) if k not in (i, skip)]


def test_two_agents_one_flip():
    tr = simulate(generic_model(RuleType.DEGROOT, 0, n=2), 5)
    ev = _ev(tr)
    edge_flip_refine(ev, 0, 0, np.array([1, 0]))
    assert ev.calls == 1


def test_all_flips_infeasible_gives_inf():
    # FJ on DeGroot data: lambda would have to be 1
    m = generic_model(RuleType.DEGROOT, 4)
    ev = _ev(simulate(m, 30))
    res, j = edge_flip_refine(ev, 0, RuleType.FJ.arm, m.graph.adj[0])
    assert j == -1 and res.val_err == math.inf and res.theta is None


# repair ---------------------------------------------------------------------

def test_repair_no_inconsistency_is_a_no_op():
    m = generic_model(RuleType.DEGROOT, 5)
    ev = _ev(simulate(m, 16), plus=True)
    snap = np.stack([m.graph.adj.astype(np.int8)] * 4)
    row = m.graph.adj[0]
    out = inconsistency_repair(ev, 0, 0, snap, np.zeros(m.n, int), row, None, 0.5, 16,
                               np.random.default_rng(0))
    assert out.inconsistent == [] and out.n_candidates == 0 and ev.calls == 0
    assert out.err == 0.5


def test_repair_enumerates_all_subsets():
    m = generic_model(RuleType.DEGROOT, 6)
    ev = _ev(simulate(m, 16), plus=True)
    n = m.n
    snap = np.zeros((4, n, n), dtype=np.int8)
    for k in range(4):
        np.fill_diagonal(snap[k], 1)
    snap[0, 3, 0] = 1
    snap[0, 5, 0] = 1
    out = inconsistency_repair(ev, 0, 0, snap, np.zeros(n, int), snap[0, 0], None, math.inf, 4,
                               np.random.default_rng(0))
    assert out.inconsistent == [3, 5] and out.n_candidates == 4


def test_repair_budget_samples_subsets():
    m = generic_model(RuleType.DEGROOT, 6)
    ev = _ev(simulate(m, 16), plus=True)
    n = m.n
    snap = np.zeros((4, n, n), dtype=np.int8)
    snap[0] = 1
    row = np.eye(n, dtype=np.int8)[0]
    out = inconsistency_repair(ev, 0, 0, snap, np.zeros(n, int), row, None, math.inf, 16,
                               np.random.default_rng(0))
    assert len(out.inconsistent) == n - 1 and out.n_candidates == 16


@pytest.mark.parametrize("seed", range(5))
def test_repair_restores_planted_missing_edge(seed):
    m = generic_model(RuleType.DEGROOT, seed)
    ev = _ev(simulate(m, 16), plus=True)
    n = m.n
    i = 0
    j = next(j for j in np.flatnonzero(m.graph.adj[i]) if j != i)
    snap = np.stack([m.graph.adj.astype(np.int8)] * 4)
    snap[0, i, j] = 0  # agent i lost the edge; agent j still reports it
    start = ev.run(0, i, _complement(snap[0, i]), least_squares=True)
    out = inconsistency_repair(ev, i, 0, snap, np.zeros(n, int), snap[0, i], start.theta, start.val_err,
                               16, np.random.default_rng(0))
    assert out.inconsistent == [j]
    assert np.array_equal(out.row, m.graph.adj[i])
    assert np.max(np.abs(out.theta - m.rules[i].theta)) <= 1e-6


def _complement(row):
    from opinionlearn.learners import NeighborHints
    return NeighborHints.complement(np.flatnonzero(row).tolist(), row.shape[0])


def test_repair_phase_is_order_independent():
    m, tr = mixed_instance(3, T=15)
    ev = _ev(tr, plus=True)
    st = initialize(ev)
    rng = np.random.default_rng(1)
    picks = select_rules(st.q, 0.5, rng)
    for k in range(4):
        st.adj_by_rule[k] = random_adjacency(m.n, 0.4, rng)
    p = st.cur_err.copy()
    fwd = repair_phase(ev, st.copy(), picks, p, BanditConfig(), 7, 1)
    rev = repair_phase(ev, st.copy(), picks, p, BanditConfig(), 7, 1, order=list(reversed(range(m.n))))
    assert any(o.inconsistent for o in fwd.values())
    for i in range(m.n):
        assert np.array_equal(fwd[i].row, rev[i].row) and fwd[i].err == rev[i].err


# whole-run invariants -------------------------------------------------------

class _Recorder:
    def __init__(self):
        self.states = []

    def __call__(self, l, state):
        self.states.append(state.copy())


def _record(seed, plus, cfg=BanditConfig(n_iter=10)):
    _, tr = mixed_instance(seed, T=15)
    rec = _Recorder()
    run = run_bandit(tr, cfg, LCFG, seed, plus=plus, checkpoint=rec)
    return run, rec.states


@pytest.mark.parametrize("plus", [False, True])
@pytest.mark.parametrize("seed", range(5))
def test_best_error_monotone_and_carry_over(seed, plus):
    _, states = _record(seed, plus)
    for prev, cur in zip(states, states[1:]):
        assert np.all(cur.best_err <= prev.best_err)
        for i in range(cur.n):
            for k in range(4):
                if k != cur.rule_pick[i]:
                    assert np.array_equal(cur.adj_by_rule[k, i], prev.adj_by_rule[k, i])
                    assert cur.q[i, k] == prev.q[i, k]
        assert np.array_equal(cur.best_err, np.minimum.reduce(cur.history))


@pytest.mark.parametrize("seed", range(5))
def test_full_exploration_is_random_search(seed):
    _, tr = mixed_instance(seed, T=15)
    a, b = _Recorder(), _Recorder()
    cfg = BanditConfig(n_iter=10)
    e1 = epsilon_greedy(tr, BanditConfig(eps_m=1, eps_g=1, n_iter=10), LCFG, seed, a)
    e2 = random_search(tr, cfg, LCFG, seed, b)
    assert np.array_equal(e1.adjacency, e2.adjacency) and e1.rules == e2.rules
    for s, t in zip(a.states, b.states):
        assert np.array_equal(s.q, t.q) and np.array_equal(s.adj_by_rule, t.adj_by_rule)
        assert np.array_equal(s.rule_pick, t.rule_pick)


@pytest.mark.parametrize("plus", [False, True])
def test_zero_iterations_returns_initialisation(plus):
    _, tr = mixed_instance(0, T=15)
    run = run_bandit(tr, BanditConfig(n_iter=0), LCFG, 0, plus=plus)
    assert np.array_equal(run.estimate.adjacency, run.initial.adjacency)
    assert run.estimate.rules == run.initial.rules


@pytest.mark.parametrize("plus", [False, True])
def test_fixed_seed_is_deterministic(plus):
    _, tr = mixed_instance(1, T=15)
    cfg = BanditConfig(n_iter=5)
    a = run_bandit(tr, cfg, LCFG, 42, plus=plus).estimate
    b = run_bandit(tr, cfg, LCFG, 42, plus=plus).estimate
    assert np.array_equal(a.adjacency, b.adjacency) and a.rules == b.rules
    for x, y in zip(a.thetas, b.thetas):
        assert (x is None and y is None) or np.array_equal(x, y)


def test_dominant_arm_never_changes_without_exploration():
    m = generic_model(RuleType.DEGROOT, 8)
    tr = simulate(m, 30)
    rec = _Recorder()
    run_bandit(tr, BanditConfig(eps_m=0, eps_g=0, n_iter=5), LCFG, 0, checkpoint=rec)
    for s in rec.states:
        assert np.all(s.rule_pick == RuleType.DEGROOT.arm)


def test_plus_perfect_init_is_kept():
    m = generic_model(RuleType.DEGROOT, 9)
    tr = simulate(m, 30)
    rec = _Recorder()
    run = run_bandit(tr, BanditConfig(eps_m=0, eps_g=0, n_iter=1), LCFG, 0, plus=True, checkpoint=rec)
    s0, s1 = rec.states
    assert np.array_equal(s0.adj_by_rule, s1.adj_by_rule)
    assert np.array_equal(run.estimate.adjacency, m.graph.adj)


def test_checkpoint_file(tmp_path):
    _, tr = mixed_instance(2, T=15)
    path = tmp_path / "ck.jsonl"
    run = run_bandit(tr, BanditConfig(n_iter=3), LCFG, 0, checkpoint=JsonlCheckpoint(path))
    recs = read_checkpoints(path)
    assert [r["iteration"] for r in recs] == [0, 1, 2, 3]
    q0 = np.array([[-1e300 if v is None else v for v in row] for row in recs[0]["q"]])
    assert np.array_equal(np.argmax(q0, axis=1) + 1, [r.value for r in run.initial.rules])
