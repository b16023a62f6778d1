import json
import math

import pytest

from blalab import bench


def test_registry_and_thresholds_cover_each_other():
    table = bench.load_thresholds()
    assert table["version"] == 1
    assert set(table["scenarios"]) == set(bench.scenario_ids())
    assert len(bench.scenario_ids()) == 11
    for limits in table["scenarios"].values():
        assert "runtime_s" in limits
        for op, _ in limits.values():
            assert op in ("<", "<=", ">", ">=", "==")


def test_unknown_scenario():
    with pytest.raises(bench.UnknownScenarioError, match="known"):
        bench.run_scenario("does_not_exist")


def test_evaluate_is_pure_and_strict():
    limits = {"err": ["<", 1e-3], "ok": ["==", True]}
    metrics = {"err": 1e-4, "ok": True}
    assert bench.evaluate(metrics, limits) == []
    assert metrics == {"err": 1e-4, "ok": True}
    assert bench.evaluate({"err": 1e-2, "ok": True}, limits) == ["err < 0.001 (got 0.01)"]
    assert len(bench.evaluate({"err": math.nan}, limits)) == 2


def test_metrics_are_deterministic(tmp_path):
    a = bench.run_scenario("lpm_accuracy", artifacts=tmp_path)
    b = bench.run_scenario("lpm_accuracy")
    strip = lambda m: {k: v for k, v in m.items() if k != "runtime_s"}
    assert strip(a.metrics) == strip(b.metrics)
    assert a.passed
    saved = json.loads((tmp_path / "lpm_accuracy" / "result.json").read_text())
    assert saved["pass"] is True and saved["config"]["thresholds_version"] == 1


def test_custom_thresholds_decide_the_verdict():
    table = {"version": 99, "scenarios": {"design_arithmetic": {"runtime_s": ["<", -1.0]}}}
    r = bench.run_scenario("design_arithmetic", thresholds=table)
    assert not r.passed and r.failures[0].startswith("runtime_s")


def test_report_csv(tmp_path):
    results = bench.run_all(["design_arithmetic"], report=tmp_path / "rep.csv")
    lines = (tmp_path / "rep.csv").read_text().splitlines()
    assert lines[0] == ",".join(bench.REPORT_HEADER)
    assert lines[1].startswith("design_arithmetic,PASS,")
    assert results[0].passed
