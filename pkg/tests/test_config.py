"""Config loading: grids, problem specs, x0 policies, plan validation."""

import numpy as np
import pytest

import lastiter as li
from lastiter.config import DEFAULT_LEMMA_CONFIG, resolve_lemma_grids


def run_doc(**run_overrides):
    run = {
        "T": 50,
        "n_seeds": 4,
        "base_seed": 0,
        "schedule": {"variant": "polynomial", "C": 2.0, "beta": 0.5},
    }
    run.update(run_overrides)
    return {
        "problem": {"generator": "least_squares", "n": 6, "d": 3, "spread": 1.0, "seed": 5},
        "run": run,
    }


def sweep_doc(**sweep_overrides):
    sweep = {
        "T_grid": [10, 20],
        "schedules": [{"variant": "polynomial", "C": 2.0, "beta": 0.5}],
        "b_grid": [1, 2],
        "n_seeds": 3,
        "base_seed": 1,
    }
    sweep.update(sweep_overrides)
    return {
        "problems": [
            {"generator": "least_squares", "n": 6, "d": 2, "spread": 1.0, "seed": 7},
            {"generator": "least_squares", "n": 4, "d": 2, "spread": 0.5, "seed": 8},
        ],
        "sweep": sweep,
    }


# -- grids -----------------------------------------------------------------


def test_resolve_grid_explicit_list():
    grid = li.resolve_grid([1, 2.5, 4])
    assert grid.dtype == float
    assert grid.tolist() == [1.0, 2.5, 4.0]


def test_resolve_grid_linear_and_log():
    lin = li.resolve_grid({"min": 0.0, "max": 1.0, "count": 5})
    assert np.allclose(lin, np.linspace(0.0, 1.0, 5))
    log = li.resolve_grid({"min": 0.01, "max": 100.0, "count": 5, "spacing": "log"})
    assert np.allclose(log, np.logspace(-2, 2, 5))


def test_resolve_grid_log_int_is_unique_integers():
    grid = li.resolve_grid({"min": 2, "max": 50, "count": 40, "spacing": "log-int"})
    assert np.all(grid == np.rint(grid))
    assert np.all(np.diff(grid) > 0)
    assert grid[0] >= 2 and grid[-1] == 50


@pytest.mark.parametrize(
    "spec",
    [
        [],
        ["x", 1],
        [True, 2.0],
        "not-a-grid",
        {"min": 1.0, "max": 0.0, "count": 3},
        {"min": 0.0, "max": 1.0, "count": 0},
        {"min": 0.0, "max": 1.0, "count": 3, "spacing": "log"},
        {"min": 0.0, "max": 1.0, "count": 3, "spacing": "cubic"},
        {"min": 0.0, "max": 1.0, "count": 3, "surprise": 1},
    ],
)
def test_resolve_grid_rejects_malformed_specs(spec):
    with pytest.raises(li.ConfigError):
        li.resolve_grid(spec)


def test_resolve_grid_collects_multiple_errors():
    with pytest.raises(li.ConfigError) as info:
        li.resolve_grid({"min": 5.0, "max": 1.0, "count": 0, "bogus": 1}, "g")
    assert len(info.value.errors) == 3
    assert all(msg.startswith("g:") for msg in info.value.errors)


# -- problem specs -----------------------------------------------------------


def test_build_problem_default_ids():
    pid, problem, cert = li.build_problem(
        {"generator": "least_squares", "n": 6, "d": 3, "spread": 1.0, "seed": 5}
    )
    assert pid == "least_squares-n6-d3-spread1-seed5"
    assert problem.n == 6 and problem.dimension == 3
    assert cert.x_star.shape == (3,)
    pid2, problem2, _ = li.build_problem({"generator": "logistic", "n": 5, "d": 2, "seed": 9})
    assert pid2 == "logistic-n5-d2-seed9"
    assert problem2.n == 5


def test_build_problem_custom_id_passes_through():
    pid, _, _ = li.build_problem(
        {"generator": "least_squares", "n": 4, "d": 2, "spread": 0.0, "seed": 1, "id": "tiny"}
    )
    assert pid == "tiny"


def test_build_problem_rejects_unknown_generator_and_keys():
    with pytest.raises(li.ConfigError, match="generator"):
        li.build_problem({"generator": "cubic", "n": 3, "d": 2, "seed": 0})
    with pytest.raises(li.ConfigError, match="unknown keys"):
        li.build_problem({"generator": "logistic", "n": 3, "d": 2, "seed": 0, "spread": 1.0})


def test_build_problem_collects_field_errors():
    with pytest.raises(li.ConfigError) as info:
        li.build_problem({"generator": "least_squares", "n": 0, "d": 2, "spread": -1.0, "seed": -3})
    joined = "\n".join(info.value.errors)
    assert "n:" in joined and "seed:" in joined and "spread:" in joined
    assert len(info.value.errors) == 3


def test_build_problem_rejects_bool_disguised_as_int():
    with pytest.raises(li.ConfigError, match="n:"):
        li.build_problem({"generator": "least_squares", "n": True, "d": 2, "spread": 1.0, "seed": 0})


def test_build_problem_from_file_round_trip(tmp_path):
    problem, cert = li.make_least_squares(n=5, d=2, spread=1.0, seed=3)
    path = tmp_path / "prob.json"
    li.save_problem(path, problem, cert)
    pid, loaded, loaded_cert = li.build_problem({"file": str(path)})
    assert pid == f"file:{path}"
    assert loaded.n == 5
    assert np.array_equal(loaded_cert.x_star, cert.x_star)
    pid2, _, _ = li.build_problem({"file": str(path), "id": "from-disk"})
    assert pid2 == "from-disk"


def test_build_problem_file_requires_certificate(tmp_path):
    problem, _ = li.make_least_squares(n=4, d=2, spread=1.0, seed=3)
    path = tmp_path / "nocert.json"
    li.save_problem(path, problem)
    with pytest.raises(li.ConfigError, match="certificate"):
        li.build_problem({"file": str(path)})


# -- x0 policies ---------------------------------------------------------------


def test_resolve_x0_zeros():
    _, problem, cert = li.build_problem(
        {"generator": "least_squares", "n": 4, "d": 3, "spread": 1.0, "seed": 2}
    )
    x0 = li.resolve_x0({"policy": "zeros"}, problem, cert)
    assert np.array_equal(x0, np.zeros(3))


def test_resolve_x0_offset_has_exact_distance():
    _, problem, cert = li.build_problem(
        {"generator": "least_squares", "n": 4, "d": 6, "spread": 1.0, "seed": 2}
    )
    x0 = li.resolve_x0({"policy": "offset", "distance": 2.5, "seed": 4}, problem, cert)
    assert float(np.linalg.norm(x0 - cert.x_star)) == pytest.approx(2.5, rel=1e-12)
    again = li.resolve_x0({"policy": "offset", "distance": 2.5, "seed": 4}, problem, cert)
    assert np.array_equal(x0, again)
    other = li.resolve_x0({"policy": "offset", "distance": 2.5, "seed": 5}, problem, cert)
    assert not np.array_equal(x0, other)


def test_resolve_x0_explicit_and_errors():
    _, problem, cert = li.build_problem(
        {"generator": "least_squares", "n": 4, "d": 2, "spread": 1.0, "seed": 2}
    )
    x0 = li.resolve_x0({"policy": "explicit", "values": [1.0, -2.0]}, problem, cert)
    assert x0.tolist() == [1.0, -2.0]
    with pytest.raises(li.ConfigError, match="length 2"):
        li.resolve_x0({"policy": "explicit", "values": [1.0]}, problem, cert)
    with pytest.raises(li.ConfigError, match="finite"):
        li.resolve_x0({"policy": "explicit", "values": [1.0, float("nan")]}, problem, cert)
    with pytest.raises(li.ConfigError, match="unknown policy"):
        li.resolve_x0({"policy": "warm"}, problem, cert)
    with pytest.raises(li.ConfigError):
        li.resolve_x0({"policy": "zeros", "extra": 1}, problem, cert)
    with pytest.raises(li.ConfigError):
        li.resolve_x0({}, problem, cert)


# -- run plans --------------------------------------------------------------------


def test_load_run_plan_happy_path():
    plan = li.load_run_plan(run_doc())
    assert plan.problem_id == "least_squares-n6-d3-spread1-seed5"
    assert plan.template.T == 50
    assert plan.template.batch_size == 1
    assert plan.n_seeds == 4 and plan.base_seed == 0
    assert plan.d_sq == pytest.approx(float(np.sum(plan.cert.x_star**2)))
    assert plan.l_variant == "as_printed"
    assert len(plan.config_hash) == 64


def test_load_run_plan_hash_tracks_content():
    assert li.load_run_plan(run_doc()).config_hash == li.load_run_plan(run_doc()).config_hash
    changed = li.load_run_plan(run_doc(T=51))
    assert changed.config_hash != li.load_run_plan(run_doc()).config_hash


def test_load_run_plan_from_file(tmp_path):
    import json

    path = tmp_path / "run.json"
    path.write_text(json.dumps(run_doc()))
    plan = li.load_run_plan(str(path))
    assert plan.template.T == 50


def test_load_run_plan_rejects_small_horizon():
    with pytest.raises(li.ConfigError, match="T >= 3"):
        li.load_run_plan(run_doc(T=2))


def test_load_run_plan_collects_all_violations():
    doc = run_doc(T=2, n_seeds=0, schedule={"variant": "mystery"})
    with pytest.raises(li.ConfigError) as info:
        li.load_run_plan(doc)
    joined = "\n".join(info.value.errors)
    assert "run.T" in joined
    assert "run.n_seeds" in joined
    assert "run.schedule" in joined
    assert len(info.value.errors) >= 3


def test_load_run_plan_rejects_unknown_top_level_keys():
    doc = run_doc()
    doc["extra"] = True
    with pytest.raises(li.ConfigError, match="unknown top-level keys"):
        li.load_run_plan(doc)


def test_load_run_plan_checks_schedule_window():
    with pytest.raises(li.ConfigError, match=r"\(0, 1\)"):
        li.load_run_plan(run_doc(schedule={"variant": "constant", "gamma": 100.0}))


def test_load_run_plan_rejects_oversized_batch():
    with pytest.raises(li.ConfigError, match="family size"):
        li.load_run_plan(run_doc(batch_size=7))


def test_load_run_plan_rejects_nonuniform_batch(tmp_path):
    design = np.ones((3, 1, 1))
    offsets = np.array([[0.0], [1.0], [-1.0]])
    problem = li.LeastSquaresProblem(design, offsets, weights=np.array([0.5, 0.25, 0.25]))
    cert = li.closed_form_certificate(problem)
    path = tmp_path / "weighted.json"
    li.save_problem(path, problem, cert)
    doc = run_doc(batch_size=2)
    doc["problem"] = {"file": str(path)}
    with pytest.raises(li.ConfigError, match="uniform weights"):
        li.load_run_plan(doc)


def test_load_run_plan_rejects_seed_range_overflow():
    with pytest.raises(li.ConfigError, match="64 bits"):
        li.load_run_plan(run_doc(base_seed=2**64 - 1, n_seeds=2))


def test_load_run_plan_x0_policy_flows_through():
    plan = li.load_run_plan(run_doc(x0={"policy": "offset", "distance": 1.5, "seed": 11}))
    assert plan.d_sq == pytest.approx(1.5**2, rel=1e-12)


# -- sweep plans --------------------------------------------------------------------


def test_load_sweep_plan_happy_path():
    plan = li.load_sweep_plan(sweep_doc())
    assert plan.T_grid == (10, 20)
    assert plan.b_grid == (1, 2)
    assert len(plan.entries) == 2
    assert len(plan.schedules) == 1
    assert isinstance(plan.schedules[0], li.PolynomialStep)
    assert plan.n_seeds == 3 and plan.base_seed == 1
    ids = [e[0] for e in plan.entries]
    assert ids[0].startswith("least_squares-n6")


def test_load_sweep_plan_rejects_batch_over_smallest_family():
    with pytest.raises(li.ConfigError, match="smallest family size 4"):
        li.load_sweep_plan(sweep_doc(b_grid=[1, 5]))


def test_load_sweep_plan_rejects_small_T():
    with pytest.raises(li.ConfigError, match="T_grid"):
        li.load_sweep_plan(sweep_doc(T_grid=[2, 10]))


def test_load_sweep_plan_reports_bad_schedule_position():
    bad = sweep_doc(
        schedules=[
            {"variant": "polynomial", "C": 2.0, "beta": 0.5},
            {"variant": "nope"},
        ]
    )
    with pytest.raises(li.ConfigError, match=r"schedules\[1\]"):
        li.load_sweep_plan(bad)


def test_load_sweep_plan_requires_sections():
    with pytest.raises(li.ConfigError) as info:
        li.load_sweep_plan({"problems": []})
    joined = "\n".join(info.value.errors)
    assert "problems" in joined and "sweep" in joined


# -- lemma plans ----------------------------------------------------------------------


def test_default_lemma_plan_entries_and_grids():
    plan = li.load_lemma_plan()
    ids = [e[0] for e in plan.entries]
    assert ids == [
        "least_squares-n20-d5-spread1-seed11",
        "least_squares-n16-d3-spread0-seed12",
        "logistic-n24-d4-seed13",
    ]
    grids = plan.grids
    assert grids["n_points"] == 200 and grids["n_pairs"] == 100
    assert grids["eps_grid"].size == 7
    assert grids["gamma_l_grid"].tolist() == [0.1, 0.5, 0.9]
    assert np.all(grids["weight_T_grid"] == np.rint(grids["weight_T_grid"]))
    assert grids["weight_T_grid"][0] == 2 and grids["weight_T_grid"][-1] == 5000
    assert grids["exponent_t_grid"].size == 400
    assert grids["exp_convexity_x_grid"].size == 41


def test_lemma_grid_overrides_merge_over_defaults():
    plan = li.load_lemma_plan(
        {
            "lemmas": {
                "n_points": 10,
                "n_pairs": 5,
                "problems": [
                    {"generator": "least_squares", "n": 4, "d": 2, "spread": 1.0, "seed": 1}
                ],
                "eps_grid": [0.5, 1.0],
            }
        }
    )
    assert plan.grids["n_points"] == 10
    assert plan.grids["eps_grid"].tolist() == [0.5, 1.0]
    # untouched keys keep their defaults
    assert plan.grids["gautschi_x_grid"].size == DEFAULT_LEMMA_CONFIG["gautschi_x_grid"]["count"]
    assert len(plan.entries) == 1


def test_lemma_grids_reject_domain_violations():
    with pytest.raises(li.ConfigError, match="gamma_l_grid"):
        resolve_lemma_grids({"gamma_l_grid": [0.5, 1.5]})
    with pytest.raises(li.ConfigError, match="eps_grid"):
        resolve_lemma_grids({"eps_grid": [-1.0, 1.0]})
    with pytest.raises(li.ConfigError, match="exponent_theta_grid"):
        resolve_lemma_grids({"exponent_theta_grid": [0.5, 3.0]})
    with pytest.raises(li.ConfigError, match="n_points"):
        resolve_lemma_grids({"n_points": 1})
    with pytest.raises(li.ConfigError, match="unknown keys"):
        resolve_lemma_grids({"mystery_grid": [1.0]})


def test_lemma_plan_rejects_unknown_top_level():
    with pytest.raises(li.ConfigError, match="top-level"):
        li.load_lemma_plan({"lemma": {}})


def test_config_error_carries_error_list():
    err = li.ConfigError(["a: bad", "b: worse"])
    assert err.errors == ["a: bad", "b: worse"]
    assert "a: bad" in str(err)
