"""Two-stage orchestration, sample-level alignment, and cost diagnostics."""
import dataclasses
import math

import numpy as np
import pytest

from prefalign._kernels import derive_stream
from prefalign.core import (DeterministicResponder, DistanceSpec, OracleParams,
                            SimulatedResponder)
from prefalign.pipeline import (AssConfig, DiagnosticsConfig, LncaResult,
                                SlLhfConfig, ass_align, gram_schmidt,
                                lnca_check, optimal_refinement_width,
                                phi_bound, sl_lhf_run)
from prefalign.sparse import Dataset, RecoveryParams

POWER_LAW = DistanceSpec(kind="parametric-kappa", lambda_delta=1.0, kappa=0.3)


# -- orthogonalization ---------------------------------------------------------

def test_gram_schmidt_two_vector_worked_case():
    basis = gram_schmidt(np.array([[1.0, 0.0], [1.0, 1.0]]))
    assert basis.alphas == pytest.approx(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert basis.cross[1, 0] == pytest.approx(1.0)
    assert basis.norms_sq == pytest.approx([1.0, 1.0])


def test_gram_schmidt_defect_stays_tiny_under_bad_conditioning():
    rng = np.random.default_rng(20)
    u, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    v, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    z = u @ np.diag(np.logspace(0, -5, 8)) @ v  # condition number ~1e5
    basis = gram_schmidt(z)
    assert basis.condition > 1e4
    assert basis.orthogonality_defect() <= 1e-10


def test_gram_schmidt_names_the_dependent_sample():
    z = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
    with pytest.raises(ValueError, match="sample 2"):
        gram_schmidt(z)


def test_gram_schmidt_rejects_more_samples_than_dimensions():
    with pytest.raises(ValueError):
        gram_schmidt(np.ones((3, 2)))


# -- sample-level alignment -----------------------------------------------------

def _ass_config(**kw):
    defaults = dict(epsilon=0.05, delta=0.1, refine_half_width=1.2)
    defaults.update(kw)
    return AssConfig(**defaults)


def test_ass_back_solve_worked_case():
    z = np.array([[1.0, 0.0], [1.0, 1.0]])
    theta_star = np.array([2.0, 3.0])
    result = ass_align(list(z), lambda x: x, _ass_config(),
                       value_oracle=lambda k: float(z[k] @ theta_star))
    assert result.omega_hat == pytest.approx([2.0, 3.0])
    assert result.theta_hat == pytest.approx([2.0, 3.0])


def test_ass_orthonormal_samples_read_values_directly():
    z = np.eye(3)
    values = [0.4, -1.1, 2.2]
    result = ass_align(list(z), lambda x: x, _ass_config(),
                       value_oracle=lambda k: values[k])
    assert result.omega_hat == pytest.approx(values)


def test_ass_exact_oracle_reproduces_the_truth():
    rng = np.random.default_rng(21)
    for _ in range(20):
        s = int(rng.integers(2, 7))
        z = rng.standard_normal((s, s)) + 2.0 * np.eye(s)
        theta_star = rng.uniform(-2.0, 2.0, size=s)
        result = ass_align(list(z), lambda x: x, _ass_config(),
                           value_oracle=lambda k: float(z[k] @ theta_star))
        rel = np.linalg.norm(result.theta_hat - theta_star) / np.linalg.norm(theta_star)
        assert rel <= 1e-10


def test_ass_rejects_ill_conditioned_sample_sets():
    z = np.array([[1.0, 0.0], [1.0, 1e-9]])
    with pytest.raises(ValueError):
        ass_align(list(z), lambda x: x, _ass_config(condition_limit=1e6))


def test_ass_needs_either_oracle_or_responders():
    with pytest.raises(ValueError):
        ass_align([np.array([1.0, 0.0]), np.array([0.0, 1.0])],
                  lambda x: x, _ass_config())


def test_ass_simulated_runs_stay_within_the_propagated_budget():
    # The back-solve multiplies per-value errors by the reported
    # amplification factor, so the pass criterion is
    # ||theta_hat - theta*|| <= amplification * sqrt(s) * epsilon.
    rng = np.random.default_rng(40)
    z = rng.standard_normal((5, 5)) + 2.0 * np.eye(5)
    theta_star = rng.uniform(-1.0, 1.0, size=5)
    cfg = _ass_config()
    successes = 0
    for seed in range(200):
        def factory(k, center, half, seed=seed):
            truth = float(z[k] @ theta_star)
            return SimulatedResponder(
                OracleParams(theta_star=truth, gamma=1.0, distance=POWER_LAW),
                seed=derive_stream(seed, 51, k))
        result = ass_align(list(z), lambda x: x, cfg,
                           responder_factory=factory)
        budget = result.amplification * math.sqrt(5) * cfg.epsilon
        successes += np.linalg.norm(result.theta_hat - theta_star) <= budget
        if seed == 0:
            assert result.n_comparisons == sum(
                t.total_comparisons for t in result.traces.values())
    assert successes / 200 >= 1.0 - cfg.delta - 0.05


# -- diagnostics -----------------------------------------------------------------

def test_phi_bound_worked_values():
    assert phi_bound(1.0, 1.0, 7.0) == 7.0
    assert phi_bound(0.75, 1.0, 1.0) == pytest.approx(3.772588722239781,
                                                      abs=1e-12)
    assert phi_bound(0.51, 1.0, 1.0) > 100 * phi_bound(0.6, 1.0, 1.0)
    with pytest.raises(ValueError):
        phi_bound(0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        phi_bound(0.2, 1.0, 1.0)


def test_lnca_worked_example():
    result = lnca_check(sigma=2.0, s=10, kappa=0.5, epsilon=0.1)
    assert result.ratio == pytest.approx(1.2649110640673518, abs=1e-12)
    assert result.favors_two_stage


def test_lnca_limiting_regimes():
    # kappa = 0: the condition is sigma^2 >= epsilon^2.
    assert lnca_check(0.2, 10, 0.0, 0.1).favors_two_stage
    assert not lnca_check(0.05, 10, 0.0, 0.1).favors_two_stage
    # kappa = 1: the condition is sigma^2 >= s.
    assert not lnca_check(2.0, 10, 1.0, 0.1).favors_two_stage
    assert lnca_check(4.0, 10, 1.0, 0.1).favors_two_stage
    with pytest.raises(ValueError):
        lnca_check(0.0, 10, 0.5, 0.1)
    with pytest.raises(ValueError):
        lnca_check(1.0, 10, 1.5, 0.1)


def test_optimal_width_single_point_grid():
    cfg = SlLhfConfig(epsilon=0.1, delta=0.1,
                      recovery=RecoveryParams(sigma=1.0, theta_min=1.0, s=10, d=100))
    assert optimal_refinement_width(cfg, DiagnosticsConfig(), grid=[0.5]) == 0.5


def test_optimal_width_rejects_infeasible_grids():
    cfg = SlLhfConfig(epsilon=0.1, delta=0.1,
                      recovery=RecoveryParams(sigma=1.0, theta_min=1.0, s=10, d=100))
    # Every candidate is at or below the per-coordinate precision.
    with pytest.raises(ValueError):
        optimal_refinement_width(cfg, DiagnosticsConfig(), grid=[0.01, 0.03])


def test_optimal_width_noise_pushes_toward_wider_boxes():
    # More label noise inflates the stage-1 term, which falls with width,
    # so the optimum moves up (verified numerically, frozen here).
    grid = tuple(np.linspace(0.1, 1.0, 10))
    widths = {}
    for sigma in (1.0, 5.0):
        cfg = SlLhfConfig(epsilon=0.1, delta=0.1,
                          recovery=RecoveryParams(sigma=sigma, theta_min=1.0,
                                                  s=10, d=100))
        widths[sigma] = optimal_refinement_width(cfg, DiagnosticsConfig(),
                                                 grid=grid)
    assert widths[1.0] == pytest.approx(0.1)
    assert widths[5.0] == pytest.approx(0.2)
    assert widths[5.0] >= widths[1.0]


# -- two-stage runs ---------------------------------------------------------------

def _small_problem():
    recovery = RecoveryParams(sigma=0.5, theta_min=1.0, s=3, d=20)
    config = SlLhfConfig(epsilon=0.1, delta=0.1, recovery=recovery)
    theta_star = np.zeros(20)
    theta_star[:3] = [1.5, -2.0, 1.0]
    return theta_star, config


def test_two_stage_run_end_to_end():
    theta_star, config = _small_problem()
    theta_hat, report = sl_lhf_run(theta_star, config, seed=42)
    assert report.plan.support == (0, 1, 2)
    assert report.support_match
    assert np.all(theta_hat[3:] == 0.0)
    assert np.max(np.abs(theta_hat[:3] - theta_star[:3])) <= report.plan.per_dim_epsilon
    assert report.n_comparisons == sum(
        t.total_comparisons for t in report.traces.values())
    assert report.n_labels == 473
    assert isinstance(report.lnca, LncaResult)


def test_two_stage_deterministic_responders_always_hit_the_target():
    theta_star, config = _small_problem()

    def factory(j, center, half):
        return DeterministicResponder(float(theta_star[j]))

    for seed in (0, 1, 2):
        theta_hat, report = sl_lhf_run(theta_star, config, seed=seed,
                                       responder_factory=factory)
        for j in report.plan.refine:
            assert abs(theta_hat[j] - theta_star[j]) <= report.plan.per_dim_epsilon


def test_two_stage_coordinates_are_decoupled():
    theta_star, config = _small_problem()

    def factory(j, center, half):
        return DeterministicResponder(float(theta_star[j]))

    # Permuting the order in which extra coordinates are requested must not
    # change the estimate: each walk only sees its own responder.
    config_a = dataclasses.replace(config, must_refine=(15, 11))
    config_b = dataclasses.replace(config, must_refine=(11, 15))
    theta_a, report_a = sl_lhf_run(theta_star, config_a, seed=7,
                                   responder_factory=factory)
    theta_b, report_b = sl_lhf_run(theta_star, config_b, seed=7,
                                   responder_factory=factory)
    assert report_a.plan.refine == report_b.plan.refine
    assert np.array_equal(theta_a, theta_b)

    # With stage 1 pinned, moving the truth of one refined coordinate
    # leaves every other coordinate's estimate untouched.
    rng = np.random.default_rng(9)
    X = rng.standard_normal((300, 20))
    data = Dataset(X, X @ theta_star)
    pinned = dataclasses.replace(config, stage1_lambda=0.01, must_refine=(15,))
    shifted = theta_star.copy()
    shifted[15] = 0.4

    def factory_shifted(j, center, half):
        return DeterministicResponder(float(shifted[j]))

    theta_c, _ = sl_lhf_run(theta_star, pinned, seed=7, data=data,
                            responder_factory=factory)
    theta_d, report_d = sl_lhf_run(shifted, pinned, seed=7, data=data,
                                   responder_factory=factory_shifted)
    for j in (0, 1, 2):
        assert theta_d[j] == theta_c[j]
    assert abs(theta_d[15] - 0.4) <= report_d.plan.per_dim_epsilon


def test_two_stage_runs_on_provided_data_and_lambda():
    theta_star, config = _small_problem()
    rng = np.random.default_rng(3)
    X = rng.standard_normal((300, 20))
    data = Dataset(X, X @ theta_star)
    config = dataclasses.replace(config, stage1_lambda=0.01)
    theta_hat, report = sl_lhf_run(theta_star, config, seed=0, data=data)
    assert report.n_labels == 300
    assert report.stage1_lambda == 0.01
    assert report.plan.support == (0, 1, 2)


def test_two_stage_records_a_support_mismatch_and_continues():
    theta_star, config = _small_problem()
    # A penalty far above lambda_max empties the support; the run must
    # still refine the must_refine coordinates and report the mismatch.
    config = dataclasses.replace(config, stage1_lambda=50.0, must_refine=(0,))
    theta_hat, report = sl_lhf_run(theta_star, config, seed=1)
    assert report.plan.support == ()
    assert not report.support_match
    assert report.plan.refine == (0,)
    assert abs(theta_hat[0] - theta_star[0]) <= config.box_half_width()


def test_two_stage_validates_truth_length():
    _, config = _small_problem()
    with pytest.raises(ValueError):
        sl_lhf_run(np.zeros(5), config, seed=0)
