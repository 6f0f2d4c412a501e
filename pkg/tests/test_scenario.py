"""Scenario parsing and deterministic execution."""

from pathlib import Path

import pytest

from fedplane.errors import ScenarioError
from fedplane.scenario import parse_scenario, run_scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"

KUH = (SCENARIO_DIR / "kuh.scn").read_text()


class TestParser:
    def test_parses_bundled_scenario(self):
        scenario = parse_scenario(KUH)
        assert scenario.seed == 7
        assert [c.id for c in scenario.clusters] == ["kuh"]
        assert scenario.clusters[0].capacity.gpus == 2
        assert scenario.clusters[0].installed == {"workspace": "1.0.0"}
        assert scenario.script[0].name == "register-project"

    def test_duplicate_cluster_ids_rejected(self):
        with pytest.raises(ScenarioError):
            parse_scenario("cluster a gpus=1\ncluster a gpus=2\n")

    def test_commands_must_be_time_ordered(self):
        with pytest.raises(ScenarioError):
            parse_scenario("cluster a gpus=1\n10 sweep\n5 sweep\n")

    def test_unknown_command_rejected(self):
        with pytest.raises(ScenarioError):
            parse_scenario("0 frobnicate\n")

    def test_zero_length_partition_rejected(self):
        with pytest.raises(ScenarioError):
            parse_scenario("cluster a gpus=1\n0 partition a from=5 to=5\n")

    def test_partition_cannot_start_before_command(self):
        with pytest.raises(ScenarioError):
            parse_scenario("cluster a gpus=1\n10 partition a from=5 to=20\n")

    def test_negative_time_rejected(self):
        with pytest.raises(ScenarioError):
            parse_scenario("-1 sweep\n")

    def test_policy_directive(self):
        scenario = parse_scenario("policy interval=5 threshold=2 poll=15 mode=scheduled:60\n")
        assert scenario.policy.availability.interval == 5
        assert scenario.policy.availability.miss_threshold == 2
        assert scenario.policy.sync.mode == "scheduled"
        assert scenario.policy.sync.period == 60


class TestRunScenario:
    def test_empty_scenario_traces_initialization_only(self):
        trace = run_scenario(parse_scenario("seed 1\n"))
        assert trace.ok
        assert trace.kinds() == ["init", "scenario-end"]

    def test_kuh_scenario_grants_then_respawns_without_gpu(self):
        trace = run_scenario(parse_scenario(KUH))
        assert trace.ok, trace.failure
        kinds = trace.kinds()
        spawn = next(r for r in trace.records if r.kind == "pod-spawned")
        assert ("verdict", "GrantGpu") in spawn.fields
        assert kinds.index("pod-spawned") < kinds.index("booking-expired")
        assert "pod-respawned" in kinds

    def test_same_seed_same_bytes(self):
        scenario_text = KUH
        first = run_scenario(parse_scenario(scenario_text)).render()
        second = run_scenario(parse_scenario(scenario_text)).render()
        assert first == second

    def test_assert_failure_marks_trace_and_stops(self):
        text = (
            "cluster a gpus=1 cpu=4 mem=8\n"
            "0 register-project demo members=u1 gpus=1 cpu=1 mem=1\n"
            "5 assert project demo state=Rejected\n"
            "6 sweep\n"
        )
        trace = run_scenario(parse_scenario(text))
        assert not trace.ok
        assert "assert failed" in trace.failure
        kinds = trace.kinds()
        assert "assert-failed" in kinds
        assert kinds[-2] == "digest"  # violating state digest stamped
        assert "sweep" not in kinds  # run stopped at the failure

    def test_command_failures_recorded_and_run_continues(self):
        text = (
            "cluster a gpus=1 cpu=4 mem=8 bookable=1\n"
            "0 register-project demo members=u1 gpus=1 cpu=1 mem=1\n"
            "0 book u1 demo gpus=2 start=10 end=20\n"
            "5 assert project demo state=Placed\n"
        )
        trace = run_scenario(parse_scenario(text))
        assert trace.ok
        failed = next(r for r in trace.records if r.kind == "command-failed")
        assert ("op", "book") in failed.fields

    def test_golden_trace_matches(self):
        trace = run_scenario(parse_scenario(KUH))
        golden_path = GOLDEN_DIR / "kuh.trace"
        assert trace.render() == golden_path.read_text()

    def test_infeasible_registration_traced_with_reason(self):
        text = (
            "cluster a gpus=1 cpu=4 mem=8\n"
            "0 register-project big members=u1 gpus=2 cpu=1 mem=1\n"
        )
        trace = run_scenario(parse_scenario(text))
        record = next(r for r in trace.records if r.kind == "project-registered")
        assert ("outcome", "Infeasible") in record.fields
        assert ("reason", "gpus") in record.fields

    def test_publish_and_drift_assert(self):
        text = (
            "cluster a gpus=1 cpu=4 mem=8 apps=workspace:1.0.0\n"
            "0 partition a from=5 to=500\n"
            "10 publish workspace 1.1.0\n"
            "20 publish workspace 1.2.0\n"
            "400 assert drift a workspace behind=2 latest=1.2.0 installed=1.0.0\n"
            "500 advance\n"
            "501 assert drift a workspace behind=0 installed=1.2.0\n"
        )
        trace = run_scenario(parse_scenario(text))
        assert trace.ok, trace.failure
