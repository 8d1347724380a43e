import json
from pathlib import Path

import pytest

import flowdse

DATA = Path(__file__).resolve().parents[2] / "data"
DSM = str(DATA / "case_study_dsm.json")
CATALOG = str(DATA / "case_study_catalog.json")
SCENARIOS = str(DATA / "scenarios.json")


def test_count():
    assert flowdse.count_designs(DSM) == 11520


def test_design_connections():
    pairs = flowdse.design_connections(DSM, 0)
    assert pairs and all(len(p) == 2 for p in pairs)


def test_simulate_is_reproducible():
    a = flowdse.simulate(DSM, CATALOG, SCENARIOS, 7549, "3", duration_s=600, seed=3)
    b = flowdse.simulate(DSM, CATALOG, SCENARIOS, 7549, "3", duration_s=600, seed=3)
    assert a == b
    rec = a[0]
    assert 0 <= rec["performance"] <= 100
    assert rec["recipes"]["filletStrips"]["is_default"]


def test_bad_input_raises_value_error():
    with pytest.raises(ValueError):
        flowdse.simulate(DSM, CATALOG, SCENARIOS, 7549, "nope")


def test_roi_and_pareto():
    assert flowdse.roi_percent(100, 100, 0) == pytest.approx(200)
    assert flowdse.pareto_mask([[1, 1], [2, 2]], ["max", "max"]) == [False, True]


def test_explore_and_rank(tmp_path):
    config = {
        "dsm": DSM,
        "scenarios": SCENARIOS,
        "catalog": CATALOG,
        "sim": {"duration_s": 600, "seed": 1},
        "mode": "sample",
        "sample_k": 3,
        "sample_seed": 2,
        "scenario_ids": ["3", "8"],
        "workers": 2,
        "out_dir": str(tmp_path / "store"),
    }
    result = flowdse.explore(json.dumps(config))
    assert len(result["scores"]) == 3
    scores_csv = (tmp_path / "store" / "scores.csv").read_text()
    ranked = flowdse.rank(scores_csv, "roi")
    assert [r["roi"] for r in ranked] == sorted((r["roi"] for r in ranked), reverse=True)


def test_cli_in_process():
    code, out, _ = flowdse.run_cli(["count", "--dsm", DSM])
    assert code == 0 and out.strip() == "11520"
