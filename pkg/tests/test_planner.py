import numpy as np
import pytest

from filteraware import geodesic, nn
from filteraware.darkzone import DarkZoneConfig, DarkZoneEnv
from filteraware.pfilter import ParticleBelief, init_perfect_carry
from filteraware.planner import (ConstraintSpec, MpcPolicy, Plan, PlannerConfig,
                                 evaluate_plan, evaluate_plans, mpc_policy_step,
                                 propose_plans, select_plan)

DISABLED = ConstraintSpec(enabled=False)


def constant_net(value):
    rng = np.random.default_rng(0)
    net = nn.init_mlp(2, rng, hidden=(4,))
    for w in net.weights:
        w[:] = 0.0
    net.biases[-1][:] = value
    return net


def goal_field(env, res=50):
    return geodesic.compute_field(env.obstacle_mask(res), env.goal_mask(res), 1.0 / res)


class Linear1DEnv:
    """x' = x + u + w; the stage cost is the squared pre-transition state."""

    def __init__(self, noise=0.2):
        self.noise = noise

    def transition(self, states, control, rng):
        return states + control + rng.normal(0.0, self.noise, size=np.shape(states))

    def step_cost(self, prev_state, control, next_state):
        return prev_state[..., 0] ** 2


def test_propose_plans_darkzone_shapes_and_bounds():
    env = DarkZoneEnv()
    plans = propose_plans(env, 5, 7, np.random.default_rng(0))
    assert plans.shape == (5, 7, 2)
    for p in plans:
        np.testing.assert_array_equal(p, np.tile(p[0], (7, 1)))
        assert np.linalg.norm(p[0]) <= 0.05 + 1e-12


def test_propose_single_one_step_plan():
    env = DarkZoneEnv()
    plans = propose_plans(env, 1, 1, np.random.default_rng(1))
    assert plans.shape == (1, 1, 2)


def test_evaluate_plan_matches_hand_rolled_deterministic():
    env = DarkZoneEnv(DarkZoneConfig(process_noise=0.0))
    field = goal_field(env)
    k = 4
    gamma = 0.9
    cfg = PlannerConfig(n_candidates=1, horizon=k, mc_samples=1,
                        lambda_obj=1.0, gamma_obj=gamma, use_terminal=True)
    start = np.array([0.8, 0.5])
    belief = init_perfect_carry(start, 1)
    controls = np.tile([-0.04, 0.01], (k, 1))

    plan = evaluate_plan(controls, belief, env, cfg, DISABLED,
                         np.random.default_rng(2), terminal=field)

    state = start
    expected = 0.0
    for t in range(k):
        expected += gamma**t * float(env.stage_cost(state))
        state = env.transition_mean(state, controls[t])
    expected += gamma**k * geodesic.query(field, state)
    assert plan.objective == pytest.approx(expected, rel=1e-12)


def test_evaluate_plan_lambda_blend_matches_manual():
    env = DarkZoneEnv(DarkZoneConfig(process_noise=0.0))
    field = goal_field(env)
    k, lam, gamma = 3, 0.5, 0.9
    cfg = PlannerConfig(n_candidates=1, horizon=k, mc_samples=1,
                        lambda_obj=lam, gamma_obj=gamma, use_terminal=True)
    start = np.array([0.7, 0.3])
    belief = init_perfect_carry(start, 1)
    controls = np.tile([-0.03, 0.02], (k, 1))
    plan = evaluate_plan(controls, belief, env, cfg, DISABLED,
                         np.random.default_rng(3), terminal=field)

    states = [start]
    for t in range(k):
        states.append(env.transition_mean(states[-1], controls[t]))
    costs = [float(env.stage_cost(s)) for s in states[:-1]]
    returns = []
    for j in range(1, k + 1):
        g = sum(gamma ** (t - 1) * costs[t - 1] for t in range(1, j + 1))
        g += gamma**j * geodesic.query(field, states[j])
        returns.append(g)
    expected = sum((1 - lam) * lam ** (j - 1) * returns[j - 1] for j in range(1, k))
    expected += lam ** (k - 1) * returns[-1]
    assert plan.objective == pytest.approx(expected, rel=1e-12)


def test_constraint_inactive_when_net_below_threshold():
    env = DarkZoneEnv()
    field = goal_field(env)
    cfg = PlannerConfig(n_candidates=4, horizon=3, mc_samples=5)
    spec = ConstraintSpec(delta=0.6, enabled=True)
    belief = init_perfect_carry(np.array([0.5, 0.5]), 8)
    plans = propose_plans(env, 4, 3, np.random.default_rng(4))
    out = evaluate_plans(plans, belief, env, cfg, spec,
                         np.random.default_rng(5), terminal=field,
                         net=constant_net(0.5))
    for p in out:
        assert p.constraint_satisfaction == 1.0
        assert p.violation == 0.0


def test_constraint_violation_is_mean_excess():
    env = DarkZoneEnv()
    field = goal_field(env)
    cfg = PlannerConfig(n_candidates=2, horizon=3, mc_samples=4)
    spec = ConstraintSpec(delta=0.6, enabled=True)
    belief = init_perfect_carry(np.array([0.5, 0.5]), 8)
    plans = propose_plans(env, 2, 3, np.random.default_rng(6))
    out = evaluate_plans(plans, belief, env, cfg, spec,
                         np.random.default_rng(7), terminal=field,
                         net=constant_net(0.6 + 0.2))
    for p in out:
        assert p.constraint_satisfaction == 0.0
        assert p.violation == pytest.approx(0.2, abs=1e-12)


def test_select_plan_worked_examples():
    def plan(obj, sat, viol=0.0):
        return Plan(controls=np.zeros((1, 2)), objective=obj,
                    constraint_satisfaction=sat, violation=viol)

    spec = ConstraintSpec(delta=0.6, min_prob=1.0, enabled=True)
    best_feasible = select_plan([plan(5, 1.0), plan(3, 0.0, 0.4), plan(4, 1.0)], spec)
    assert best_feasible.objective == 4

    fallback = select_plan([plan(1, 0.0, 0.2), plan(9, 0.0, 0.1)], spec)
    assert fallback.violation == 0.1

    all_feasible = select_plan([plan(5, 1.0), plan(2, 1.0), plan(4, 1.0)], spec)
    assert all_feasible.objective == 2


def test_select_plan_tie_breaking_order():
    def plan(obj, viol):
        return Plan(controls=np.zeros((1, 2)), objective=obj,
                    constraint_satisfaction=0.0, violation=viol)

    spec = ConstraintSpec(delta=0.0, enabled=True)
    chosen = select_plan([plan(7, 0.3), plan(2, 0.3), plan(2, 0.3)], spec)
    assert chosen.objective == 2
    assert chosen is not None


def test_select_plan_permutation_invariant():
    rng = np.random.default_rng(8)
    plans = [Plan(controls=rng.normal(size=(2, 2)), objective=float(o),
                  constraint_satisfaction=1.0, violation=0.0)
             for o in rng.permutation(10)]
    spec = ConstraintSpec(enabled=True)
    chosen = select_plan(plans, spec)
    shuffled = list(plans)
    rng.shuffle(shuffled)
    np.testing.assert_array_equal(select_plan(shuffled, spec).controls, chosen.controls)


def test_delta_infinity_matches_vanilla_selection():
    env = DarkZoneEnv()
    field = goal_field(env)
    cfg = PlannerConfig(n_candidates=20, horizon=5, mc_samples=10)
    belief = init_perfect_carry(np.array([0.8, 0.5]), 16)
    net = constant_net(3.0)

    controls_v, plan_v = mpc_policy_step(belief, env, cfg, DISABLED,
                                         np.random.default_rng(9), terminal=field)
    controls_a, plan_a = mpc_policy_step(belief, env, cfg,
                                         ConstraintSpec(delta=np.inf, enabled=True),
                                         np.random.default_rng(9), terminal=field,
                                         net=net)
    np.testing.assert_array_equal(controls_v, controls_a)
    np.testing.assert_array_equal(plan_v.controls, plan_a.controls)
    assert plan_v.objective == plan_a.objective


def test_violation_and_satisfaction_monotone_in_delta():
    env = DarkZoneEnv()
    field = goal_field(env)
    cfg = PlannerConfig(n_candidates=6, horizon=4, mc_samples=8)
    rng_net = np.random.default_rng(10)
    net = nn.init_mlp(2, rng_net, hidden=(8,))
    belief = init_perfect_carry(np.array([0.6, 0.6]), 8)
    plans = propose_plans(env, 6, 4, np.random.default_rng(11))

    prev_viol = None
    prev_sat = None
    for delta in (-1.0, -0.2, 0.0, 0.2, 1.0):
        out = evaluate_plans(plans, belief, env, cfg,
                             ConstraintSpec(delta=delta, enabled=True),
                             np.random.default_rng(12), terminal=field, net=net)
        viol = np.array([p.violation for p in out])
        sat = np.array([p.constraint_satisfaction for p in out])
        if prev_viol is not None:
            assert np.all(viol <= prev_viol + 1e-15)
            assert np.all(sat >= prev_sat - 1e-15)
        prev_viol, prev_sat = viol, sat


def test_violation_zero_iff_fully_satisfied():
    env = DarkZoneEnv()
    field = goal_field(env)
    cfg = PlannerConfig(n_candidates=8, horizon=4, mc_samples=6)
    net = nn.init_mlp(2, np.random.default_rng(13), hidden=(8,))
    belief = init_perfect_carry(np.array([0.4, 0.4]), 8)
    plans = propose_plans(env, 8, 4, np.random.default_rng(14))
    out = evaluate_plans(plans, belief, env, cfg,
                         ConstraintSpec(delta=0.05, enabled=True),
                         np.random.default_rng(15), terminal=field, net=net)
    for p in out:
        assert (p.violation == 0.0) == (p.constraint_satisfaction == 1.0)


def test_mpc_policy_step_returns_replan_interval_controls():
    env = DarkZoneEnv()
    field = goal_field(env)
    cfg = PlannerConfig(n_candidates=10, horizon=6, mc_samples=4, replan_interval=1)
    belief = init_perfect_carry(np.array([0.8, 0.5]), 8)
    controls, plan = mpc_policy_step(belief, env, cfg, DISABLED,
                                     np.random.default_rng(16), terminal=field)
    assert controls.shape == (1, 2)
    cfg3 = PlannerConfig(n_candidates=10, horizon=6, mc_samples=4, replan_interval=3)
    controls3, _ = mpc_policy_step(belief, env, cfg3, DISABLED,
                                   np.random.default_rng(16), terminal=field)
    assert controls3.shape == (3, 2)
    np.testing.assert_array_equal(controls3[0], controls[0])


def test_mpc_policy_buffers_controls_between_replans():
    env = DarkZoneEnv()
    field = goal_field(env)
    cfg = PlannerConfig(n_candidates=5, horizon=6, mc_samples=2, replan_interval=3)
    policy = MpcPolicy(env, cfg, terminal=field)
    belief = init_perfect_carry(np.array([0.8, 0.5]), 8)
    rng = np.random.default_rng(17)
    u1, u2, u3 = policy(belief, rng), policy(belief, rng), policy(belief, rng)
    np.testing.assert_array_equal(np.stack([u1, u2, u3]), policy.last_plan.controls[:3])
    policy.reset()
    assert policy.last_plan is None


def test_monte_carlo_objective_matches_analytic_expectation():
    sigma = 0.2
    env = Linear1DEnv(noise=sigma)
    k = 4
    x0 = 0.7
    controls = np.array([[0.5], [-0.2], [0.1], [0.3]])
    cfg = PlannerConfig(n_candidates=1, horizon=k, mc_samples=40_000,
                        lambda_obj=1.0, gamma_obj=1.0, use_terminal=False)
    belief = ParticleBelief(np.array([[x0]]), np.array([1.0]))
    plan = evaluate_plan(controls, belief, env, cfg, DISABLED,
                         np.random.default_rng(18))

    mean = x0
    expected = 0.0
    for t in range(k):
        expected += mean**2 + t * sigma**2
        mean += controls[t, 0]
    assert plan.objective == pytest.approx(expected, rel=0.02)
