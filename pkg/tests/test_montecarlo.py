"""Moment reduction, gap estimation, bound verdicts, and sweeps."""

import dataclasses
import math

import numpy as np
import pytest

import lastiter as li
from lastiter.montecarlo import MomentState


def two_quadratics():
    """f_1 = x^2/2, f_2 = x^2 with shared minimizer 0 (exact L = 2)."""
    design = np.zeros((2, 2, 1))
    design[0, 0, 0] = 1.0
    design[1, :, 0] = 1.0
    return li.LeastSquaresProblem(design, np.zeros((2, 2)))


def manual_tree_state(values):
    """Reference binary-tree reduction, written independently of the module."""
    values = np.asarray(values, dtype=float)

    def rec(block):
        if block.size == 1:
            return MomentState(count=1, mean=float(block[0]), m2=0.0)
        mid = block.size // 2
        return li.merge_moments(rec(block[:mid]), rec(block[mid:]))

    return rec(values)


# -- moment state --------------------------------------------------------------


@pytest.mark.parametrize("size", [1, 2, 3, 7, 8, 100, 257])
def test_reduce_moments_matches_numpy(size):
    rng = np.random.default_rng(size)
    values = rng.standard_normal(size) * 3.0 + 1.0
    state = li.reduce_moments(values)
    assert state.count == size
    assert state.mean == pytest.approx(float(np.mean(values)), rel=1e-13)
    if size > 1:
        var = state.m2 / (state.count - 1)
        assert var == pytest.approx(float(np.var(values, ddof=1)), rel=1e-12)
    else:
        assert state.m2 == 0.0


@pytest.mark.parametrize("size", [1, 2, 5, 16, 33])
def test_reduce_moments_is_the_canonical_tree(size):
    rng = np.random.default_rng(1000 + size)
    values = rng.standard_normal(size)
    assert li.reduce_moments(values) == manual_tree_state(values)


def test_merge_of_halves_is_bitwise_identical_to_full_reduce():
    rng = np.random.default_rng(42)
    for n in (1, 4, 10, 64):
        values = rng.standard_normal(2 * n)
        whole = li.reduce_moments(values)
        merged = li.merge_moments(li.reduce_moments(values[:n]), li.reduce_moments(values[n:]))
        assert whole == merged  # exact dataclass equality, no tolerance


def test_merge_with_empty_state_is_identity():
    empty = li.reduce_moments(np.array([]))
    assert empty == MomentState(count=0, mean=0.0, m2=0.0)
    state = li.reduce_moments(np.array([2.0, 4.0]))
    assert li.merge_moments(empty, state) == state
    assert li.merge_moments(state, empty) == state


# -- gap estimation -------------------------------------------------------------


def estimate_template(T=5):
    problem = two_quadratics()
    cert = li.closed_form_certificate(problem)
    config = li.RunConfig(T=T, seed=0, schedule=li.ConstantStep(0.25), x0=np.array([1.0]))
    return problem, cert, config


def test_estimate_single_seed_has_zero_spread():
    problem, cert, config = estimate_template()
    est = li.estimate_gap(problem, cert, config, n_seeds=1, base_seed=17)
    assert est.n_seeds == 1
    assert est.std_error == 0.0
    assert est.ci95_upper == est.mean_gap
    assert est.per_seed_gaps is None
    direct = li.minibatch_run(problem, cert, dataclasses.replace(config, seed=17)).final_gap
    assert est.mean_gap == direct


def test_estimate_keeps_per_seed_gaps_in_seed_order():
    problem, cert, config = estimate_template()
    est = li.estimate_gap(problem, cert, config, n_seeds=6, base_seed=3, keep_per_seed=True)
    assert est.per_seed_gaps.shape == (6,)
    for offset, gap in enumerate(est.per_seed_gaps):
        run = li.minibatch_run(problem, cert, dataclasses.replace(config, seed=3 + offset))
        assert gap == run.final_gap
    state = li.reduce_moments(est.per_seed_gaps)
    assert est.mean_gap == state.mean


def test_estimate_is_bitwise_worker_independent():
    problem, cert, config = estimate_template(T=4)
    serial = li.estimate_gap(problem, cert, config, n_seeds=12, base_seed=0)
    parallel = li.estimate_gap(problem, cert, config, n_seeds=12, base_seed=0, workers=2)
    assert serial.mean_gap == parallel.mean_gap
    assert serial.std_error == parallel.std_error
    assert serial.ci95_upper == parallel.ci95_upper


def test_estimate_rejects_bad_seed_counts():
    problem, cert, config = estimate_template()
    with pytest.raises(ValueError):
        li.estimate_gap(problem, cert, config, n_seeds=0, base_seed=0)


def test_estimate_matches_interpolation_law():
    """E[gap_T] = 0.75 * 0.40625^T for the two-quadratic pair at gamma 1/4."""
    problem, cert, config = estimate_template(T=2)
    est = li.estimate_gap(problem, cert, config, n_seeds=2000, base_seed=0)
    exact = 0.75 * 0.40625**2
    assert abs(est.mean_gap - exact) <= 4.0 * est.std_error
    assert est.std_error > 0


def test_fingerprint_ignores_seed_but_tracks_config():
    problem, cert, config = estimate_template(T=8)
    a = li.run_fingerprint(problem, config)
    assert a == li.run_fingerprint(problem, dataclasses.replace(config, seed=999))
    assert a != li.run_fingerprint(problem, dataclasses.replace(config, T=9))
    assert a != li.run_fingerprint(problem, dataclasses.replace(config, x0=np.array([2.0])))


def test_estimate_reports_the_fingerprint():
    problem, cert, config = estimate_template(T=3)
    est = li.estimate_gap(problem, cert, config, n_seeds=2, base_seed=5)
    assert est.fingerprint == li.run_fingerprint(problem, config)


# -- bound verdicts ---------------------------------------------------------------


def test_compare_to_bound_verdicts():
    problem, cert, config = estimate_template()
    est = li.estimate_gap(problem, cert, config, n_seeds=4, base_seed=0)
    good = li.compare_to_bound(est, est.ci95_upper * 2.0)
    assert good.satisfied
    assert good.slack_ratio == pytest.approx(2.0, rel=1e-12)
    bad = li.compare_to_bound(est, est.ci95_upper * 0.5)
    assert not bad.satisfied
    assert bad.slack_ratio == pytest.approx(0.5, rel=1e-12)
    edge = li.compare_to_bound(est, est.ci95_upper)
    assert edge.satisfied


def test_compare_to_bound_rejects_nonfinite():
    problem, cert, config = estimate_template()
    est = li.estimate_gap(problem, cert, config, n_seeds=2, base_seed=0)
    with pytest.raises(ValueError):
        li.compare_to_bound(est, math.inf)
    with pytest.raises(ValueError):
        li.compare_to_bound(est, math.nan)


# -- sweeps -----------------------------------------------------------------------


def sweep_entries():
    problem = two_quadratics()
    cert = li.closed_form_certificate(problem)
    return [("twoq", problem, cert, np.array([1.0]))]


def test_sweep_row_ordering_and_columns():
    rows = li.sweep(
        sweep_entries(),
        T_grid=[3, 6],
        schedule_grid=[li.PolynomialStep(2.0, 0.5), li.ConstantStep(0.1)],
        b_grid=[1, 2],
        n_seeds=3,
        base_seed=0,
    )
    assert len(rows) == 2 * 2 * 2
    key = [(r.T, r.C, r.b) for r in rows]
    assert key == [
        (3, 2.0, 1), (3, 2.0, 2), (3, None, 1), (3, None, 2),
        (6, 2.0, 1), (6, 2.0, 2), (6, None, 1), (6, None, 2),
    ]
    assert li.SWEEP_COLUMNS == tuple(f.name for f in dataclasses.fields(li.SweepRow))


def test_sweep_rows_is_deterministic():
    kwargs = dict(
        T_grid=[4],
        schedule_grid=[li.PolynomialStep(2.0, 0.5)],
        b_grid=[1],
        n_seeds=5,
        base_seed=0,
    )
    assert li.sweep(sweep_entries(), **kwargs) == li.sweep(sweep_entries(), **kwargs)


def test_sweep_corollary_bounds_by_schedule_kind():
    rows = li.sweep(
        sweep_entries(),
        T_grid=[10],
        schedule_grid=[
            li.ConstantStep(0.1),
            li.PolynomialStep(2.0, 0.5),
            li.PolynomialStep(3.0, 0.5),
            li.PolynomialStep(2.0, 0.25),
        ],
        b_grid=[1],
        n_seeds=2,
        base_seed=0,
    )
    constant, c2, c3, beta_q = rows
    problem = two_quadratics()
    cert = li.closed_form_certificate(problem)
    d_sq = 1.0
    assert constant.corollary_bound is None
    assert constant.C is None and constant.beta is None
    assert c2.corollary_bound == li.sqrt_step_bound_c2(problem.L, d_sq, cert.sigma_star_sq, 10)
    assert c3.corollary_bound == li.sqrt_step_bound(3.0, problem.L, d_sq, cert.sigma_star_sq, 10)
    expected = li.polynomial_step_bound(2.0, 0.25, problem.L, d_sq, cert.sigma_star_sq, 10)
    assert beta_q.corollary_bound == expected.value
    for row in rows:
        assert row.error is None
        assert row.theorem1_bound == li.last_iterate_bound(
            row.gamma, problem.L, d_sq, cert.sigma_star_sq, 10
        )


def test_sweep_error_rows_do_not_abort():
    rows = li.sweep(
        sweep_entries(),
        T_grid=[5],
        schedule_grid=[li.ConstantStep(10.0), li.PolynomialStep(2.0, 0.5)],
        b_grid=[1],
        n_seeds=2,
        base_seed=0,
    )
    failed, ok = rows
    assert failed.error is not None and "Schedule" in failed.error
    assert failed.mean_gap is None
    assert failed.theorem1_bound is None
    assert failed.satisfied is None
    assert ok.error is None
    assert ok.satisfied is not None


def test_sweep_batch_cells_use_effective_constants():
    problem = two_quadratics()
    cert = li.closed_form_certificate(problem)
    rows = li.sweep(
        [("twoq", problem, cert, np.array([1.0]))],
        T_grid=[8],
        schedule_grid=[li.PolynomialStep(2.0, 0.5)],
        b_grid=[2],
        n_seeds=2,
        base_seed=0,
    )
    (row,) = rows
    eff = li.effective_constants(problem, 2, cert)
    # b = n is full GD with the mean smoothness in charge of the step
    assert row.gamma == 1.0 / (2.0 * eff.L_b * math.sqrt(8.0))
    assert row.error is None
    assert row.satisfied


def test_sweep_estimates_match_direct_estimator():
    problem = two_quadratics()
    cert = li.closed_form_certificate(problem)
    rows = li.sweep(
        [("twoq", problem, cert, np.array([1.0]))],
        T_grid=[6],
        schedule_grid=[li.PolynomialStep(2.0, 0.5)],
        b_grid=[1],
        n_seeds=50,
        base_seed=7,
    )
    (row,) = rows
    config = li.RunConfig(
        T=6, seed=0, schedule=li.PolynomialStep(2.0, 0.5), x0=np.array([1.0])
    )
    est = li.estimate_gap(problem, cert, config, n_seeds=50, base_seed=7)
    assert row.mean_gap == est.mean_gap
    assert row.ci95_upper == est.ci95_upper
