import math

import pytest

import iit


def test_balancing_functions():
    assert iit.log_balancing("min1", 1.0) == 0.0
    assert iit.log_balancing("sqrt", 2.0) == pytest.approx(1.0)
    for h in ["min1", "sqrt", "barker", "max1", "hc:1.5"]:
        for log_r in [-3.0, -0.2, 0.7, 4.0]:
            assert iit.log_balancing(h, log_r) == pytest.approx(log_r + iit.log_balancing(h, -log_r))


def test_toy_pushforward_is_a_distribution():
    keys, probs = iit.toy_pushforward("toy1", 6, 2, 1.0)
    assert len(keys) == len(probs) == 7
    assert sum(probs) == pytest.approx(1.0)
    assert probs[0] == pytest.approx(1.0 / (1.0 + math.exp(-1.0)) ** 6)


def test_expected_cost_endpoints():
    assert iit.expected_cost(0.5, 10, 1.0) == pytest.approx(10.0)
    assert iit.expected_cost(0.5, 10, 0.0) == pytest.approx(2.0)


def test_complexity_grid_rows():
    rows = iit.complexity_grid(5, 1.0, 0.0, 0.1, 0.05)
    assert len(rows) == 3
    assert all(len(r) == 6 and r[2] > 0 for r in rows)


def test_run_small_experiment_is_deterministic():
    config = {
        "kind": "tv-threshold",
        "seed": 7,
        "replicates": 2,
        "budget": 5000,
        "target": {"example": "toy1", "p": 10, "p1": 2, "theta": [2]},
        "samplers": [{"algorithm": "naive-iit"}, {"algorithm": "mh"}],
    }
    a = iit.run(config)
    b = iit.run(config, workers=2)
    assert a["csv"] == b["csv"]
    assert len(a["rows"]) == 4
    assert a["header"][-1] == "calls_spent"
    assert a["summary"]["total_calls"] == a["total_calls"]
    assert a["provenance"]["config"] == iit.normalize(config)


def test_config_errors_name_the_field():
    with pytest.raises(iit.ConfigError, match="'seed'"):
        iit.run({"kind": "estimate", "replicates": 1})
    with pytest.raises(ValueError):
        iit.normalize("{not json")


def test_recipes_and_analysis():
    assert "toy2 p=5" in iit.list_recipes()
    assert iit.recipe("abc")["kind"] == "abc"
    report = iit.analyze({"kind": "estimate", "seed": 1, "replicates": 1})
    assert report["exact"][0]["value"] == pytest.approx(0.3907118, rel=1e-6)
