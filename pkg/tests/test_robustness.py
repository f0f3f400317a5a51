from dataclasses import replace

import numpy as np
import pytest

from crnstab.complex_balance import solve_cb_steady_state
from crnstab.kinetics import RateAssignment
from crnstab.robustness import (PROBE_CONFIG, PerturbationPlan, PlanError, ShapeError, bifurcation_scan_1d,
                                default_eps, default_initial_conditions, global_stability_probe, permanence_probe,
                                perturb_sample, positive_real_roots, run_trials, variable_schedule)
from crnstab.network import parse_network
from support import CB_RATES

X0 = np.array([1.0, 2.0, 0.5])


def make_plan(net, eps=0.05, trials=3, seed=7, cfg=PROBE_CONFIG):
    return PerturbationPlan(RateAssignment.of(net, CB_RATES), eps, trials, seed,
                            default_initial_conditions(net, X0), cfg)


def test_default_initial_conditions_share_a_class(triangle):
    ics = default_initial_conditions(triangle, X0)
    assert len(ics) == 1 + 2 * triangle.analysis.dim_S
    W = triangle.analysis.complement_basis
    for x in ics:
        assert np.all(x > 0)
        assert np.linalg.norm(W @ (x - X0)) <= 1e-12


def test_plan_validation(triangle):
    k = RateAssignment.of(triangle, CB_RATES)
    ics = default_initial_conditions(triangle, X0)
    with pytest.raises(PlanError, match="smaller than the smallest"):
        PerturbationPlan(k, 1.0, 3, 0, ics)
    with pytest.raises(PlanError):
        PerturbationPlan(k, -0.1, 3, 0, ics)
    with pytest.raises(PlanError):
        PerturbationPlan(k, 0.1, 0, 0, ics)
    with pytest.raises(PlanError):
        PerturbationPlan(k, 0.1, 3, 2**64, ics)
    with pytest.raises(ValueError, match="strictly positive"):
        PerturbationPlan(k, 0.1, 3, 0, (np.array([1.0, 0.0, 1.0]),))
    off = PerturbationPlan(k, 0.1, 3, 0, (X0, X0 + np.array([0.1, 0.1, 0.1])))
    with pytest.raises(PlanError, match="compatibility class"):
        off.validate(triangle)
    assert default_eps(k) == pytest.approx(0.05 * np.sqrt(14))


def test_samples_deterministic_and_independent(triangle):
    plan = make_plan(triangle, trials=5)
    a = [perturb_sample(plan, i).values for i in range(5)]
    b = [perturb_sample(plan, i).values for i in range(5)]
    assert a == b
    assert len(set(a)) == 5
    other = perturb_sample(replace(plan, seed=8), 0).values
    assert other != a[0]
    # a trial's sample does not depend on how many trials the plan has
    assert perturb_sample(replace(plan, trials=50), 3).values == a[3]


def test_samples_fill_the_ball(triangle):
    plan = make_plan(triangle, eps=0.1, trials=1000)
    center = np.array(CB_RATES, dtype=float)
    d = np.array([np.linalg.norm(perturb_sample(plan, i).as_array() - center) for i in range(1000)])
    assert np.all(d <= 0.1 * (1 + 1e-12))
    # uniform in a 5-ball: P(|u| <= eps/2) = 1/32, P(|u| >= 0.9 eps) = 1 - 0.9^5
    assert 0.01 < np.mean(d <= 0.05) < 0.06
    assert 0.35 < np.mean(d >= 0.09) < 0.47
    dirs = np.array([perturb_sample(plan, i).as_array() - center for i in range(1000)])
    assert np.all(np.abs(dirs.mean(axis=0)) < 0.01)


def test_zero_eps_limits_equal_solver(triangle):
    plan = make_plan(triangle, eps=0.0, trials=2)
    verdict = global_stability_probe(triangle, plan)
    x_star = solve_cb_steady_state(triangle, plan.kappa_star, X0)
    assert verdict.all_unique
    for t in verdict.per_trial:
        for lim in t.limits:
            assert np.max(np.abs(np.array(lim) - x_star)) <= 1e-6


def test_probe_rejects_unbalanced_reference(triangle):
    plan = PerturbationPlan(RateAssignment.of(triangle, [1, 1, 1, 1, 1]), 0.05, 1, 0,
                            default_initial_conditions(triangle, X0))
    with pytest.raises(PlanError, match="not complex-balanced"):
        global_stability_probe(triangle, plan)


def test_limits_continuous_in_eps(triangle):
    x_star = solve_cb_steady_state(triangle, RateAssignment.of(triangle, CB_RATES), X0)
    dists = []
    for eps in (0.2, 0.05, 0.01):
        v = global_stability_probe(triangle, make_plan(triangle, eps=eps, trials=4))
        assert v.all_unique
        dists.append(v.max_distance_to(x_star))
    assert dists[0] > dists[1] > dists[2]
    assert dists[2] < 0.01


def test_doubling_horizon_keeps_verdict(triangle):
    plan = make_plan(triangle, trials=2)
    v1 = global_stability_probe(triangle, plan)
    v2 = global_stability_probe(triangle, replace(plan, cfg=replace(plan.cfg, t_end=2 * plan.cfg.t_end)))
    assert v1.all_unique and v2.all_unique
    for a, b in zip(v1.per_trial, v2.per_trial):
        assert np.allclose(a.limits, b.limits, rtol=1e-6)


def test_short_horizon_is_inconclusive_not_a_pass(triangle):
    plan = make_plan(triangle, trials=1, cfg=replace(PROBE_CONFIG, t_end=0.05))
    v = global_stability_probe(triangle, plan)
    assert not v.all_unique
    assert v.inconclusive == [0]


def test_permanence_envelope(triangle):
    plan = make_plan(triangle, trials=2)
    runs = run_trials(triangle, plan)
    env = permanence_probe(triangle, plan, runs=runs)
    assert env.passed
    assert env.margin_to_boundary > 0
    assert np.all(env.box_lo <= env.box_hi)
    assert env.window_start == pytest.approx(0.5 * plan.cfg.t_end)


def test_variable_rate_permanence(triangle):
    plan = make_plan(triangle, trials=2, cfg=replace(PROBE_CONFIG, t_end=8.0, detect_convergence=False))
    env = permanence_probe(triangle, plan, variable_eps=0.2)
    assert env.passed
    assert env.margin_to_boundary > 0


def test_variable_schedule_stays_in_bounds():
    k = RateAssignment((1.0, 2.0, 2.0, 2.0, 1.0))
    sched = variable_schedule(k, seed=3, index=0, eps_bound=0.2)
    for t in np.linspace(0, 50, 501):
        v = sched(t)
        assert np.all(v >= 0.2) and np.all(v <= 5.0)
    with pytest.raises(PlanError):
        variable_schedule(k, seed=3, index=0, eps_bound=0.6)


CLOSED_FORM = [1.0, 2.0, 2.9, 3.1, 4.0, 5.0]


def closed_form_roots(k1, k2):
    d = (k2 - k1) ** 2 - 4 * k1**2
    if d < 0:
        return [1.0]
    r = np.sqrt(d)
    return sorted([1.0, (k2 - k1 - r) / (2 * k1), (k2 - k1 + r) / (2 * k1)])


def test_bifurcation_counts_and_roots(cubic):
    pts = bifurcation_scan_1d(cubic, [(1.0, k2) for k2 in CLOSED_FORM])
    for p in pts:
        roots = [s.root for s in p.steady_states]
        expected = closed_form_roots(p.kappa1, p.kappa2)
        assert len(roots) == (1 if p.kappa2 < 3 else 3)
        assert np.allclose(roots, expected, rtol=0, atol=1e-9)


def test_bifurcation_eigenvalue_and_flip(cubic):
    pts = bifurcation_scan_1d(cubic, [(k1, k2) for k1 in (0.5, 1.0, 2.0) for k2 in (1.0, 2.9, 3.1, 5.0, 8.0)])
    for p in pts:
        at_one = [s for s in p.steady_states if abs(s.root - 1.0) < 1e-9]
        assert len(at_one) == 1
        ev = at_one[0].eigenvalue
        assert ev == pytest.approx(p.kappa2 - 3 * p.kappa1, abs=1e-10)
        assert at_one[0].stability == ("stable" if p.kappa2 < 3 * p.kappa1 else "unstable")


def test_bifurcation_golden_roots(cubic):
    (p,) = bifurcation_scan_1d(cubic, [(1.0, 5.0)])
    assert [s.root for s in p.steady_states] == pytest.approx([2 - np.sqrt(3), 1.0, 2 + np.sqrt(3)], abs=1e-12)
    assert [s.stability for s in p.steady_states] == ["stable", "unstable", "stable"]


def test_triple_root_is_degenerate(cubic):
    (p,) = bifurcation_scan_1d(cubic, [(1.0, 3.0)])
    assert len(p.steady_states) == 1
    s = p.steady_states[0]
    assert s.multiplicity == 3
    assert s.root == pytest.approx(1.0, abs=1e-6)
    assert s.stability == "degenerate"


def test_positive_real_roots_filters():
    assert positive_real_roots(np.array([1.0, 0.0, 1.0])) == []
    assert positive_real_roots(np.array([1.0, 1.0, -2.0])) == [(pytest.approx(1.0), 1)]


def test_scan_requires_one_species_shape():
    with pytest.raises(ShapeError):
        bifurcation_scan_1d(parse_network("X <-> Y"), [(1.0, 1.0)])
    with pytest.raises(ShapeError):
        bifurcation_scan_1d(parse_network("0 <-> X\nX <-> 2X"), [(1.0, 1.0)])
