"""Probabilistic bisection: posterior updates, stopping rules, engine runs."""
import json
import math

import numpy as np
import pytest

from prefalign.bisect import (MapbConfig, MapbEngine, PiecewiseDensity,
                              StoppingConstants, VerticalTestState, db_align,
                              density_update, hbar, mapb_align, median,
                              smallest_credible_interval, tau_horizontal,
                              tau_vertical, vertical_step)
from prefalign.core import (ComparisonAnswer, DeterministicResponder,
                            DistanceSpec, OracleParams, SimulatedResponder)
from prefalign._kernels import derive_stream, walk_test


def _answer(choice, query_id="q-0-0"):
    return ComparisonAnswer(query_id=query_id, choice=choice)


def _density_at(rho, x):
    idx = int(np.searchsorted(rho.breakpoints, x, side="right")) - 1
    idx = min(max(idx, 0), len(rho.densities) - 1)
    return float(rho.densities[idx])


# -- boundary ----------------------------------------------------------------

def test_hbar_frozen_values():
    assert hbar(1, 1.0) == pytest.approx(1.1774100225154747, abs=1e-15)
    assert hbar(1, 0.1) == pytest.approx(2.4477468306808166, abs=1e-15)
    assert hbar(3, 0.5) == pytest.approx(3.5322300675464238, abs=1e-15)


def test_hbar_monotone_in_m():
    assert hbar(10, 0.1) < hbar(100, 0.1)
    ms = np.arange(1, 500)
    vals = np.array([hbar(int(m), 0.1) for m in ms])
    assert np.all(np.diff(vals) > 0)
    # ...while the boundary-to-steps ratio vanishes, which is what makes
    # the test power-one.
    assert hbar(10**6, 0.1) / 10**6 < 0.006


def test_hbar_validation():
    with pytest.raises(ValueError):
        hbar(0, 0.1)
    with pytest.raises(ValueError):
        hbar(1, 0.0)
    with pytest.raises(ValueError):
        hbar(1, 1.5)


# -- vertical test -----------------------------------------------------------

def test_vertical_step_counts_and_signs():
    state = VerticalTestState(eta=0.5)
    state = vertical_step(state, _answer("minus"))
    assert (state.m, state.S) == (1, -1)
    assert not state.stopped


def test_three_straight_pluses_do_not_cross_at_eta_half():
    # S=3 at m=3 sits below the boundary 3.5322..., so the walk continues;
    # two more pluses reach S=5 >= hbar(5, 0.5) = 4.985 and decide +1.
    state = VerticalTestState(eta=0.5, m=2, S=2)
    state = vertical_step(state, _answer("plus"))
    assert (state.m, state.S) == (3, 3)
    assert not state.stopped
    state = vertical_step(state, _answer("plus"))
    assert not state.stopped
    state = vertical_step(state, _answer("plus"))
    assert state.stopped
    assert state.outcome == 1
    assert state.m == 5


def test_all_same_answers_stop_at_the_first_crossing():
    # First m with m >= 2(ln(m+1) - ln eta): 3 for eta=1, 5 for 0.5, 10 for 0.1.
    for eta, expect in ((0.999999, 3), (0.5, 5), (0.1, 10)):
        state = VerticalTestState(eta=eta)
        while not state.stopped:
            state = vertical_step(state, _answer("minus"))
        assert state.m == expect
        assert state.outcome == -1


def test_alternating_answers_never_stop():
    state = VerticalTestState(eta=0.5)
    for i in range(10_000):
        state = vertical_step(state, _answer("plus" if i % 2 == 0 else "minus"))
        assert not state.stopped
    assert state.S in (-1, 0, 1)


def test_stepping_a_stopped_test_is_an_error():
    state = VerticalTestState(eta=0.5, m=5, S=5, outcome=1)
    with pytest.raises(ValueError):
        vertical_step(state, _answer("plus"))


def test_wrong_sign_rate_stays_under_eta_half():
    # 10^4 independent tests against a 0.7-biased stream: the declared sign
    # may be wrong in at most eta/2 of them (plus Monte-Carlo slack).
    wrong = 0
    for i in range(10_000):
        sign, m, s, crossed = walk_test(0.7, 0.1, 1_000_000,
                                        derive_stream(99, i), 0)
        assert crossed
        wrong += sign == -1
    assert wrong / 10_000 <= 0.05 + 0.0066


# -- posterior density -------------------------------------------------------

def test_density_update_median_query_needs_no_renormalization():
    rho = PiecewiseDensity.uniform(0.0, 1.0)
    updated = density_update(rho, 0.5, z=1, p=0.6)
    assert updated.breakpoints == pytest.approx([0.0, 0.5, 1.0])
    assert updated.densities == pytest.approx([0.8, 1.2])
    assert updated.renorm_factor == pytest.approx(1.0, abs=1e-15)
    assert updated.integral() == pytest.approx(1.0, abs=1e-15)


def test_density_update_with_half_weight_is_identity():
    rho = PiecewiseDensity.uniform(0.0, 1.0)
    updated = density_update(rho, 0.3, z=-1, p=0.5)
    assert np.all(updated.densities == pytest.approx(1.0))
    assert updated.integral() == pytest.approx(1.0, abs=1e-12)


def test_density_update_outside_support_is_an_error():
    rho = PiecewiseDensity.uniform(0.0, 1.0)
    with pytest.raises(ValueError):
        density_update(rho, 1.5, z=1, p=0.6)
    with pytest.raises(ValueError):
        density_update(rho, 0.0, z=1, p=0.6)
    with pytest.raises(ValueError):
        density_update(rho, 0.5, z=0, p=0.6)


def test_density_update_raises_mass_on_the_indicated_side():
    rho = PiecewiseDensity.uniform(-2.0, 2.0)
    for z, point in ((1, 0.7), (-1, -0.3), (1, 0.0)):
        before = rho.integral() - rho.mass_below(point) if z > 0 else rho.mass_below(point)
        rho = density_update(rho, point, z=z, p=0.7)
        after = rho.integral() - rho.mass_below(point) if z > 0 else rho.mass_below(point)
        assert after > before


def test_median_of_uniform_and_of_the_worked_update():
    assert median(PiecewiseDensity.uniform(-1.0, 1.0)) == pytest.approx(0.0)
    rho = density_update(PiecewiseDensity.uniform(0.0, 1.0), 0.5, z=1, p=0.6)
    assert median(rho) == pytest.approx(0.5833333333333334, abs=1e-12)


def test_median_against_exact_segment_accumulation():
    # Build a random 50-segment density, then find the half-mass point by
    # plain segment-by-segment summation and compare.
    rng = np.random.default_rng(33)
    bps = np.concatenate([[-4.0], np.sort(rng.uniform(-4.0, 4.0, size=49)), [4.0]])
    dens = rng.uniform(0.1, 2.0, size=50)
    dens /= np.dot(np.diff(bps), dens)
    rho = PiecewiseDensity(bps, dens)
    rho.validate()

    acc = 0.0
    expected = None
    for i in range(50):
        seg = (bps[i + 1] - bps[i]) * dens[i]
        if acc + seg >= 0.5:
            expected = bps[i] + (0.5 - acc) / dens[i]
            break
        acc += seg
    assert expected is not None
    m = median(rho)
    assert m == pytest.approx(expected, abs=1e-12)
    assert rho.mass_below(m) == pytest.approx(0.5, abs=1e-12)


def test_repeated_median_updates_preserve_mass():
    rho = PiecewiseDensity.uniform(-1.0, 1.0)
    rng = np.random.default_rng(8)
    for _ in range(60):
        z = 1 if rng.random() < 0.5 else -1
        rho = density_update(rho, median(rho), z=z, p=0.9)
        assert rho.renorm_factor == pytest.approx(1.0, abs=1e-9)
        assert rho.integral() == pytest.approx(1.0, abs=1e-9)
    rho.validate()
    # Longer chains at a gentler tilt: mass stays conserved even after the
    # posterior has accumulated hundreds of breakpoints.
    rho = PiecewiseDensity.uniform(-1.0, 1.0)
    for _ in range(500):
        z = 1 if rng.random() < 0.5 else -1
        rho = density_update(rho, median(rho), z=z, p=0.7)
        assert rho.integral() == pytest.approx(1.0, abs=1e-9)
    rho.validate()


def test_smallest_credible_interval_on_known_shapes():
    uniform = PiecewiseDensity.uniform(0.0, 1.0)
    lo, hi = smallest_credible_interval(uniform, 0.9)
    assert hi - lo == pytest.approx(0.9, abs=1e-9)

    # Two-level density: all the requested mass fits inside the tall side.
    rho = PiecewiseDensity(np.array([0.0, 0.5, 1.0]),
                           np.array([0.2, 1.8]))
    lo, hi = smallest_credible_interval(rho, 0.9)
    assert hi - lo == pytest.approx(0.5, abs=1e-9)
    assert lo == pytest.approx(0.5, abs=1e-9)
    mass = rho.mass_below(hi) - rho.mass_below(lo)
    assert mass == pytest.approx(0.9, abs=1e-9)


def test_quantile_and_mass_below_are_inverses():
    rng = np.random.default_rng(14)
    bps = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, size=9)), [1.0]])
    dens = rng.uniform(0.2, 3.0, size=10)
    dens /= np.dot(np.diff(bps), dens)
    rho = PiecewiseDensity(bps, dens)
    for q in np.linspace(0.0, 1.0, 21):
        assert rho.mass_below(rho.quantile(q)) == pytest.approx(q, abs=1e-12)


# -- stopping budgets --------------------------------------------------------

def test_tau_horizontal_worked_value():
    # All constants 1, delta = eps = 0.1, truth bound 1: the first term
    # dominates at 8 ln 800 = 53.47..., so the budget is 54.
    tau = tau_horizontal(0.1, 0.1, StoppingConstants(theta_star_bound=1.0))
    assert tau == 54


def test_tau_horizontal_monotone_in_delta_and_epsilon():
    base = StoppingConstants(theta_star_bound=1.0)
    assert tau_horizontal(0.01, 0.1, base) >= tau_horizontal(0.1, 0.1, base)
    assert tau_horizontal(0.1, 0.01, base) >= tau_horizontal(0.1, 0.1, base)
    with pytest.raises(ValueError):
        tau_horizontal(0.0, 0.1, base)


def _config(**kw):
    defaults = dict(epsilon=0.1, delta=0.1, granularity=0.1, local_radius=0.3,
                    prior_half_width=1.0, kappa=0.3, lambda_delta=1.0, gamma=1.0)
    defaults.update(kw)
    return MapbConfig(**defaults)


def test_tau_vertical_efficiency_constant_picks_the_smaller_branch():
    # lambda/(8 gamma ln 2) = 0.1803 vs 1/(6 a^kappa) = 1/6 at a = kappa = 1.
    cfg = _config(kappa=1.0, local_radius=0.999999, epsilon=0.5)
    target = (1.0 / 6.0) * 0.5 / 2.0
    # Independent scan for the last s with hbar(s)/s still above the target.
    s = 1
    while hbar(s, cfg.eta) / s >= target:
        s += 1
    tau0 = s - 1
    tail = 8.0 * math.log(1.0 / 0.5) / ((1.0 / 6.0) ** 2 * 0.5**2)
    assert tau0 > tail
    assert tau_vertical(0.5, 0.5, cfg) == pytest.approx(tau0, abs=1)


def test_tau_vertical_tail_dominates_at_small_delta():
    cfg = _config(kappa=1.0, local_radius=0.999999, epsilon=0.5)
    c = 1.0 / 6.0
    tail = 8.0 * math.log(1.0 / 1e-6) / (c**2 * 0.5**2)
    assert tau_vertical(1e-6, 0.5, cfg) == math.ceil(tail)


def test_tau_vertical_kappa_zero_returns_the_cap():
    cfg = _config(kappa=0.0, kappa_zero_cap=777)
    assert tau_vertical(0.1, 0.1, cfg) == 777
    assert tau_vertical(0.1, 0.001, cfg) == 777


def test_config_validation_window():
    _config(update_weight=0.9, eta=0.1)  # accepted: 0.9 < 1 - 0.1/2
    with pytest.raises(ValueError):
        _config(update_weight=0.97, eta=0.1)
    with pytest.raises(ValueError):
        _config(update_weight=0.5)
    with pytest.raises(ValueError):
        _config(local_radius=0.05)  # below epsilon
    with pytest.raises(ValueError):
        _config(local_radius=1.5)  # above the prior half-width
    with pytest.raises(ValueError):
        _config(kappa=1.2)
    with pytest.raises(ValueError):
        _config(horizontal_rule="whenever")


# -- engine ------------------------------------------------------------------

def test_deterministic_runs_recover_the_truth():
    cfg = _config(epsilon=0.01, granularity=0.05, local_radius=0.1)
    rng = np.random.default_rng(4)
    for _ in range(100):
        theta_star = float(rng.uniform(-0.99, 0.99))
        theta_hat, trace = mapb_align(cfg, None, DeterministicResponder(theta_star))
        assert abs(theta_hat - theta_star) <= 0.01
        # Every decided test is a straight run to the first boundary
        # crossing, which for eta=0.1 is exactly ten steps.
        decided = [mv for mv in trace.moves if mv.event == "decided"]
        assert decided
        assert all(mv.steps == 10 for mv in decided)


def test_simulated_runs_meet_the_success_target():
    cfg = _config()
    dist = DistanceSpec(kind="parametric-kappa", lambda_delta=1.0, kappa=0.3)
    rng = np.random.default_rng(123)
    successes = 0
    for seed in range(200):
        theta_star = float(rng.uniform(-0.9, 0.9))
        responder = SimulatedResponder(
            OracleParams(theta_star=theta_star, gamma=1.0, distance=dist),
            seed=seed)
        theta_hat, _ = mapb_align(cfg, None, responder)
        successes += abs(theta_hat - theta_star) <= cfg.epsilon
    assert successes / 200 >= 1.0 - cfg.delta - 0.05


def test_trace_accounts_for_every_comparison():
    cfg = _config()
    dist = DistanceSpec(kind="parametric-kappa", lambda_delta=1.0, kappa=0.3)
    responder = SimulatedResponder(
        OracleParams(theta_star=0.4, gamma=1.0, distance=dist), seed=7)
    theta_hat, trace = mapb_align(cfg, None, responder)
    assert trace.total_comparisons == sum(mv.steps for mv in trace.moves)
    assert trace.reason in ("horizontal-budget", "vertical-early-stop",
                            "vertical-hard-cap")
    decided = sum(mv.event == "decided" for mv in trace.moves)
    assert decided <= tau_horizontal(cfg.delta, cfg.epsilon,
                                     StoppingConstants(theta_star_bound=1.0))
    lines = trace.to_jsonl().strip().splitlines()
    assert len(lines) == len(trace.moves)
    rec = json.loads(lines[0])
    assert set(rec) == {"k", "theta_k", "m", "S", "Z", "reason"}


def test_batched_and_stepwise_runs_are_bit_identical():
    cfg = _config()
    dist = DistanceSpec(kind="parametric-kappa", lambda_delta=1.0, kappa=0.3)
    params = OracleParams(theta_star=0.55, gamma=1.0, distance=dist)

    batched = MapbEngine(cfg)
    responder = SimulatedResponder(params, seed=21)
    while batched.status == "running":
        batched.run_move(responder)

    stepwise = MapbEngine(cfg)
    responder = SimulatedResponder(params, seed=21)
    while stepwise.status == "running":
        answer = responder.answer(stepwise.current_query())
        stepwise.observe(answer)

    assert batched.state_dict() == stepwise.state_dict()


def test_engine_state_round_trips_mid_run():
    cfg = _config()
    dist = DistanceSpec(kind="parametric-kappa", lambda_delta=1.0, kappa=0.3)
    params = OracleParams(theta_star=-0.2, gamma=1.0, distance=dist)

    reference = MapbEngine(cfg)
    live = MapbEngine(cfg)
    ref_responder = SimulatedResponder(params, seed=2)
    responder = SimulatedResponder(params, seed=2)
    for _ in range(137):
        if reference.status != "running":
            break
        reference.observe(ref_responder.answer(reference.current_query()))
        live.observe(responder.answer(live.current_query()))

    resumed = MapbEngine.from_state(cfg, live.state_dict())
    while resumed.status == "running" and reference.status == "running":
        answer = responder.answer(resumed.current_query())
        resumed.observe(answer)
        reference.observe(ref_responder.answer(reference.current_query()))
    state_a = reference.state_dict()
    state_b = resumed.state_dict()
    assert state_a == state_b


def test_observe_rejects_mismatched_query_ids():
    engine = MapbEngine(_config())
    with pytest.raises(ValueError):
        engine.observe(ComparisonAnswer(query_id="q-9-9", choice="plus"))


def test_hard_cap_is_reported_not_decided():
    # A stream pinned to p = 1/2 cannot cross the boundary, so a tiny cap
    # fires; the estimate falls back to the posterior median and the
    # trace says so explicitly.
    cfg = _config(vertical_hard_cap=25)
    responder = SimulatedResponder(
        OracleParams(theta_star=0.0, gamma=1.0,
                     distance=DistanceSpec(kind="euclidean-1d")), seed=3)
    engine = MapbEngine(cfg)
    while engine.status == "running":
        engine.run_move(responder)
    assert engine.reason == "vertical-hard-cap"
    assert engine.moves[-1].event == "vertical-hard-cap"
    assert engine.moves[-1].outcome == 0
    assert engine.theta_hat == pytest.approx(median(engine.rho))


def test_density_at_truth_grows_under_correct_answers():
    cfg = _config(epsilon=0.01, granularity=0.05, local_radius=0.1)
    theta_star = 0.37
    engine = MapbEngine(cfg)
    responder = DeterministicResponder(theta_star)
    last = _density_at(engine.rho, theta_star)
    while engine.status == "running":
        moves_before = engine.k
        engine.observe(responder.answer(engine.current_query()))
        if engine.k > moves_before:
            now = _density_at(engine.rho, theta_star)
            assert now >= last - 1e-12
            last = now


def test_integer_lattice_query_placement():
    cfg = _config(epsilon=1.0, delta=0.1, granularity=20, local_radius=4,
                  prior_half_width=64)
    prior = PiecewiseDensity.uniform(0.0, 128.0)
    engine = MapbEngine(cfg, prior, integer_lattice=True)
    query = engine.current_query()
    assert engine.theta_k == 64.0
    assert (query.c_minus, query.c_plus) == (54.0, 74.0)
    # Near the support edge the spacing shrinks to keep candidates valid.
    assert engine._granularity_at(1.0) == 2.0
    assert engine._granularity_at(127.0) == 2.0
    with pytest.raises(ValueError):
        MapbEngine(_config(epsilon=0.5, granularity=20, local_radius=0.7),
                   PiecewiseDensity.uniform(0.0, 128.0), integer_lattice=True)


# -- deterministic bisection -------------------------------------------------

def test_db_align_hits_the_power_of_two_bound():
    result = db_align(2**-10, 0.01, 1.0, DeterministicResponder(0.3))
    assert result.rounds <= 11
    assert abs(result.theta_hat - 0.3) <= 2**-10


def test_db_align_centered_truth_converges_monotonically():
    estimates = [db_align(2.0**-r, 0.01, 1.0, DeterministicResponder(0.0)).theta_hat
                 for r in range(1, 13)]
    mags = [abs(e) for e in estimates]
    assert all(b <= a for a, b in zip(mags, mags[1:]))
    assert mags[-1] <= 2.0**-12


def test_db_align_round_bound_over_random_truths():
    rng = np.random.default_rng(6)
    bound = math.ceil(math.log2(8.0 / 0.01)) + 1
    for _ in range(100):
        theta_star = float(rng.uniform(-8.0, 8.0))
        result = db_align(0.01, 0.05, 8.0, DeterministicResponder(theta_star))
        assert result.rounds <= bound
        assert abs(result.theta_hat - theta_star) <= 0.01


def test_db_align_refuses_noisy_responders():
    responder = SimulatedResponder(
        OracleParams(theta_star=0.3, gamma=1.0,
                     distance=DistanceSpec(kind="euclidean-1d")), seed=0)
    with pytest.raises(ValueError):
        db_align(0.01, 0.05, 1.0, responder)
