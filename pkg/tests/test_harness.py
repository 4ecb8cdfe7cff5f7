"""Matched-budget experiment cells, sweeps, and their CSV artifacts."""
import csv
import math

import numpy as np
import pytest

from prefalign.calibrate import CalibrationResult
from prefalign.harness import (ORACLE_DETERMINISTIC, ExperimentConfig,
                               calibrated_precision_sweep, crossing_kappa,
                               run_matched_budget_cell, sweep,
                               universal_lambda)


def _read_csv(path):
    with open(path) as fh:
        comment = fh.readline()
        rows = list(csv.DictReader(fh))
    return comment, rows


def test_universal_lambda_value():
    assert universal_lambda(1.0, 100, 100) == pytest.approx(
        0.30348542587702926, rel=1e-15)
    assert universal_lambda(2.0, 100, 100) == pytest.approx(
        2.0 * universal_lambda(1.0, 100, 100), rel=1e-15)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(repetitions=0)
    with pytest.raises(ValueError):
        ExperimentConfig(sigmas=())
    with pytest.raises(ValueError):
        ExperimentConfig(oracle_kind="psychic")
    with pytest.raises(ValueError):
        ExperimentConfig(truth_low=0.0, truth_high=1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(truth_low=2.0, truth_high=1.0)


def test_cell_budget_accounting_and_stage1_size():
    cfg = ExperimentConfig(repetitions=1)
    result = run_matched_budget_cell(cfg, 1.0, 1.0, 0.0, rep=0)
    # n1 = ceil(2 * sigma^2 * log d) * mult = ceil(9.21...) * 20 at sigma=1.
    assert result.n_labels == 200
    assert result.budget == result.n_labels + result.n_comparisons
    assert result.ratio == result.err_two_stage / result.err_pure_sl
    assert result.err_two_stage <= cfg.epsilon


def test_cell_rerun_is_bit_identical():
    cfg = ExperimentConfig(repetitions=3)
    assert (run_matched_budget_cell(cfg, 1.0, 1.0, 0.3, rep=2)
            == run_matched_budget_cell(cfg, 1.0, 1.0, 0.3, rep=2))


def test_cells_share_stage1_across_kappa():
    # The rep seed ignores kappa, so one curve's cells see the same truth
    # and stage-1 data; only responder accuracy varies along the curve.
    cfg = ExperimentConfig(repetitions=2)
    a = run_matched_budget_cell(cfg, 1.0, 1.0, 0.1, rep=1)
    b = run_matched_budget_cell(cfg, 1.0, 1.0, 0.5, rep=1)
    assert a.n_labels == b.n_labels
    assert a.support_ok == b.support_ok


def test_low_kappa_low_noise_favors_two_stage():
    cfg = ExperimentConfig(repetitions=5)
    ratios = [run_matched_budget_cell(cfg, 1.0, 1.0, 0.0, rep).ratio
              for rep in range(5)]
    assert float(np.median(ratios)) < 0.3


def test_deterministic_oracle_always_meets_epsilon():
    cfg = ExperimentConfig(repetitions=3, oracle_kind=ORACLE_DETERMINISTIC,
                           sigmas=(2.0,), kappa_grid=(0.3,))
    for rep in range(3):
        result = run_matched_budget_cell(cfg, 2.0, 1.0, 0.3, rep)
        assert result.err_two_stage <= cfg.epsilon


def test_crossing_kappa_cases():
    kappas = (0.0, 0.1, 0.2, 0.3)
    assert crossing_kappa(kappas, (0.2, 0.4, 0.6, 0.9)) is None
    assert crossing_kappa(kappas, (0.2, 0.4, 1.1, 1.5)) == 0.2
    assert crossing_kappa((0.2, 0.3), (0.8, 1.2), interpolate=True) == \
        pytest.approx(0.25)
    # Crossing at the first grid point cannot interpolate backwards.
    assert crossing_kappa(kappas, (1.2, 1.3, 1.4, 1.5), interpolate=True) == 0.0
    # A flat segment at the crossing lands on its right edge.
    assert crossing_kappa((0.1, 0.2), (1.0, 1.0), interpolate=True) == 0.1


def test_sweep_writes_rows_and_summary(tmp_path):
    out = tmp_path / "sweep.csv"
    cfg = ExperimentConfig(repetitions=2, sigmas=(1.0,), gammas=(1.0,),
                           kappa_grid=(0.0, 0.3),
                           oracle_kind=ORACLE_DETERMINISTIC,
                           output_path=str(out))
    result = sweep(cfg)
    assert len(result.rows) == 4

    comment, rows = _read_csv(out)
    assert comment.startswith("# defaults:")
    assert "1 comparison = 1 sample" in comment
    assert len(rows) == 4
    parsed = float(rows[0]["ratio"])
    assert parsed == result.rows[0].ratio

    comment, srows = _read_csv(tmp_path / "sweep_summary.csv")
    assert comment.startswith("# defaults:")
    assert len(srows) == 2
    assert float(srows[0]["median_ratio"]) == result.median_ratio(1.0, 1.0, 0.0)
    assert int(srows[0]["reps"]) == 2

    kappas, medians = result.ratio_curve(1.0, 1.0)
    assert kappas.tolist() == [0.0, 0.3]
    assert medians[0] == result.median_ratio(1.0, 1.0, 0.0)
    with pytest.raises(KeyError):
        result.median_ratio(9.0, 1.0, 0.0)


def _toy_calibration():
    return CalibrationResult(kappa_hat=0.3, rate_hat=1.0, sigma_hat=1.0,
                             n_resamples=1, bootstrap_means=(0.3, 1.0, 1.0),
                             bootstrap_variances=(0.0, 0.0, 0.0),
                             degenerate=False)


def test_precision_sweep_shape_and_csvs(tmp_path):
    out = tmp_path / "precision.csv"
    result = calibrated_precision_sweep(_toy_calibration(),
                                        eps_grid=(0.2, 0.1), d=30, s=3,
                                        repetitions=3, stage1_mult=10,
                                        output_path=str(out))
    assert len(result.rows) == 6
    assert result.eps_grid == (0.2, 0.1)
    for eps in (0.2, 0.1):
        assert result.median_rel_err(eps) <= eps
    # Tighter precision costs more samples.
    assert result.median_budget(0.1) >= result.median_budget(0.2)

    comment, rows = _read_csv(out)
    assert "relative errors" in comment
    assert len(rows) == 6
    assert {row["epsilon"] for row in rows} == {"0.2", "0.1"}

    comment, srows = _read_csv(tmp_path / "precision_summary.csv")
    assert len(srows) == 2
    assert float(srows[1]["median_rel_err"]) == result.median_rel_err(0.1)
    assert float(srows[0]["median_budget"]) == result.median_budget(0.2)
