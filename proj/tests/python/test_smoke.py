import json

import pytest

import dflbench


def test_topk_solver_picks_largest_scores():
    sol = dflbench.solve_topk(5, 2, [0.3, -1.0, 0.5, -2.0, 0.0])
    assert sol["status"] == "Optimal"
    assert sol["x"] == [1.0, 0.0, 1.0, 0.0, 0.0]


def test_shortest_path_and_knapsack():
    path = dflbench.solve_shortest_path(2, [1.0, 1.0, 1.0, 1.0])
    assert sum(path["x"]) == 2.0
    knap = dflbench.solve_knapsack([3, 4, 5], 7, [4.0, 5.0, 6.0])
    assert knap["objective"] == pytest.approx(9.0)


def test_qptl_gradient_matches_finite_differences():
    args = {"n": 6, "k": 2}
    c = [0.1, -0.2, 0.05, 0.3, -0.1, 0.0]
    up = [1.0, -0.5, 0.2, 0.0, 0.3, -0.7]
    _, grad = dflbench.qptl("topk", args, 1.0, c, up)
    h = 1e-5
    for i in range(len(c)):
        cp, cm = list(c), list(c)
        cp[i] += h
        cm[i] -= h
        vp, _ = dflbench.qptl("topk", args, 1.0, cp, up)
        vm, _ = dflbench.qptl("topk", args, 1.0, cm, up)
        fd = sum(u * (a - b) / (2 * h) for u, a, b in zip(up, vp, vm))
        assert grad[i] == pytest.approx(fd, abs=1e-6)


def test_config_errors_raise():
    with pytest.raises(dflbench.DflbenchError, match="method.delta"):
        dflbench.resolve_config({"problem": {"kind": "topk"}, "method": {"name": "IMLE"}})


def test_small_experiment_runs():
    cfg = {
        "problem": {"kind": "topk", "n_train": 40, "n_validation": 10, "n_test": 20},
        "method": {"name": ["DBB"], "delta": 1.0},
        "training": {"epochs": 2, "seeds": [0, 1]},
    }
    res = dflbench.run_experiment(cfg)
    assert res["csv"].startswith("problem,instance_setting,method")
    group = res["summary"]["groups"][0]
    assert group["method"] == "DBB" and group["n"] == 2
    assert json.dumps(res["summary"])


def test_presets_resolve():
    names = dflbench.preset_names()
    assert "topk_25" in names
    assert dflbench.resolve_config(dflbench.preset_config("topk_25"))["problem"]["kind"] == "topk"
