"""Event log integrity: chaining, torn-tail recovery, corruption refusal,
and snapshot+replay equivalence through the store."""

import json

import pytest

from fedplane.clock import ManualClock
from fedplane.errors import LogCorruptionError
from fedplane.gateway.eventlog import (
    GENESIS,
    EventLog,
    canonical_bytes,
    load_latest_snapshot,
    write_snapshot,
)
from fedplane.gateway.store import Store
from fedplane.plane import PlaneConfig


def fill(store, projects=3):
    clock = store.clock
    store.apply(
        "root",
        "add-cluster",
        {"id": "c1", "capacity": {"gpus": 4, "cpu": 32, "mem": 128}, "bookable_gpus": 4},
    )
    for i in range(projects):
        clock.advance_to(clock.now() + 1)
        store.apply(
            "u1",
            "register-project",
            {
                "name": f"proj-{i}",
                "members": ["u1"],
                "request": {"gpus": 1, "cpu": 4, "mem": 16},
                "pin": None,
            },
        )


class TestEventLog:
    def test_append_read_roundtrip(self, tmp_path):
        log = EventLog(tmp_path / "events.log")
        log.append(at=1, actor="u1", kind="x", payload={"a": 1}, result_digest="d1")
        log.append(at=2, actor="u1", kind="y", payload={"b": 2}, result_digest="d2")
        fresh = EventLog(tmp_path / "events.log")
        records = fresh.read_all()
        assert [r.seq for r in records] == [1, 2]
        assert records[0].prev == GENESIS
        assert records[1].prev == records[0].chain()
        assert fresh.last_seq == 2

    def test_append_resumes_after_read(self, tmp_path):
        log = EventLog(tmp_path / "events.log")
        log.append(at=1, actor="a", kind="x", payload={}, result_digest="d")
        fresh = EventLog(tmp_path / "events.log")
        fresh.read_all()
        fresh.append(at=2, actor="a", kind="x", payload={}, result_digest="d")
        records = EventLog(tmp_path / "events.log").read_all()
        assert [r.seq for r in records] == [1, 2]

    def test_torn_tail_discarded_at_every_byte_offset(self, tmp_path):
        path = tmp_path / "events.log"
        log = EventLog(path)
        for i in range(4):
            log.append(at=i, actor="a", kind="x", payload={"i": i}, result_digest=f"d{i}")
        data = path.read_bytes()
        # record boundaries, recomputed by walking the frames
        boundaries = [0]
        offset = 0
        while offset < len(data):
            length = int.from_bytes(data[offset : offset + 4], "big")
            offset += 4 + length
            boundaries.append(offset)
        for cut in range(len(data) + 1):
            truncated = tmp_path / "cut.log"
            truncated.write_bytes(data[:cut])
            records = EventLog(truncated).read_all()
            expected = sum(1 for b in boundaries[1:] if b <= cut)
            assert len(records) == expected, f"cut at byte {cut}"

    def test_mid_log_tamper_refused_with_first_bad_seq(self, tmp_path):
        path = tmp_path / "events.log"
        log = EventLog(path)
        for i in range(3):
            log.append(at=i, actor="a", kind="x", payload={"i": i}, result_digest=f"d{i}")
        data = bytearray(path.read_bytes())
        # flip one byte inside the first record's body
        data[10] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(LogCorruptionError) as exc:
            EventLog(path).read_all()
        assert exc.value.seq == 1

    def test_snapshot_roundtrip_and_tmp_files_ignored(self, tmp_path):
        write_snapshot(tmp_path, 5, "chain5", {"version": 1}, {"k": {"status": 200, "body": {}}})
        (tmp_path / "snapshot-0000000009.json").write_text("{not json")
        snapshot = load_latest_snapshot(tmp_path)
        assert snapshot["covered_seq"] == 5
        assert snapshot["state"] == {"version": 1}


class TestStoreRecovery:
    def test_recovered_store_matches_original_digest(self, tmp_path):
        store = Store(tmp_path, ManualClock(), PlaneConfig(), snapshot_every=0)
        fill(store)
        digest = store.plane.digest()
        recovered = Store(tmp_path, ManualClock(), PlaneConfig(), snapshot_every=0)
        assert recovered.plane.digest() == digest

    def test_recovery_from_snapshot_plus_tail(self, tmp_path):
        store = Store(tmp_path, ManualClock(), PlaneConfig(), snapshot_every=2)
        fill(store, projects=5)
        digest = store.plane.digest()
        snapshots = list(tmp_path.glob("snapshot-*.json"))
        assert snapshots, "snapshot cadence should have produced files"
        recovered = Store(tmp_path, ManualClock(), PlaneConfig(), snapshot_every=2)
        assert recovered.plane.digest() == digest

    def test_truncation_at_every_record_boundary_recovers_prefix_state(self, tmp_path):
        store = Store(tmp_path, ManualClock(), PlaneConfig(), snapshot_every=0)
        fill(store, projects=4)
        log_path = tmp_path / "events.log"
        data = log_path.read_bytes()
        records = EventLog(log_path).read_all()
        # boundary offsets paired with the digest committed at that point
        offset = 0
        boundaries = [(0, None)]
        for record in records:
            length = int.from_bytes(data[offset : offset + 4], "big")
            offset += 4 + length
            boundaries.append((offset, record.result_digest))
        for cut, expected_digest in boundaries:
            workdir = tmp_path / f"boundary-{cut}"
            workdir.mkdir()
            (workdir / "events.log").write_bytes(data[:cut])
            recovered = Store(workdir, ManualClock(), PlaneConfig(), snapshot_every=0)
            if expected_digest is None:
                assert recovered.plane.version == 0
            else:
                assert recovered.plane.digest() == expected_digest

    def test_replay_digest_mismatch_refuses_startup(self, tmp_path):
        store = Store(tmp_path, ManualClock(), PlaneConfig(), snapshot_every=0)
        fill(store, projects=1)
        # rewrite the last record with a bogus result digest, re-chained
        # so only the digest check can catch it
        log_path = tmp_path / "events.log"
        records = EventLog(log_path).read_all()
        bodies = [r.body() for r in records]
        bodies[-1]["result_digest"] = "0" * 64
        log_path.unlink()
        rewritten = EventLog(log_path)
        for body in bodies:
            rewritten.append(
                at=body["at"],
                actor=body["actor"],
                kind=body["kind"],
                payload=body["payload"],
                result_digest=body["result_digest"],
                idempotency_key=body["idempotency_key"],
            )
        with pytest.raises(LogCorruptionError):
            Store(tmp_path, ManualClock(), PlaneConfig(), snapshot_every=0)

    def test_idempotency_table_survives_recovery(self, tmp_path):
        store = Store(tmp_path, ManualClock(), PlaneConfig(), snapshot_every=0)
        store.apply(
            "root",
            "add-cluster",
            {"id": "c1", "capacity": {"gpus": 1, "cpu": 1, "mem": 1}, "bookable_gpus": 1},
            idempotency_key="add-c1",
        )
        original = store.apply(
            "root",
            "add-cluster",
            {"id": "c1", "capacity": {"gpus": 1, "cpu": 1, "mem": 1}, "bookable_gpus": 1},
            idempotency_key="add-c1",
        )
        recovered = Store(tmp_path, ManualClock(), PlaneConfig(), snapshot_every=0)
        replayed = recovered.apply(
            "root",
            "add-cluster",
            {"id": "c1", "capacity": {"gpus": 1, "cpu": 1, "mem": 1}, "bookable_gpus": 1},
            idempotency_key="add-c1",
        )
        assert replayed == original
        assert recovered.log.last_seq == 1  # nothing re-applied

    def test_thousand_event_replay_matches_final_digest(self, tmp_path):
        store = Store(tmp_path, ManualClock(), PlaneConfig(), snapshot_every=0)
        store.apply(
            "root",
            "add-cluster",
            {"id": "c1", "capacity": {"gpus": 8, "cpu": 64, "mem": 256}, "bookable_gpus": 8},
        )
        store.apply(
            "u1",
            "register-project",
            {"name": "p", "members": ["u1"], "request": {"gpus": 0, "cpu": 0, "mem": 0}, "pin": None},
        )
        clock = store.clock
        for i in range(998):
            clock.advance_to(clock.now() + 1)
            if i % 3 == 0:
                store.apply(
                    "u1",
                    "request-booking",
                    {
                        "user": "u1",
                        "project": "p-0001",
                        "gpu_count": 1,
                        "start": clock.now(),
                        "end": clock.now() + 2,
                    },
                )
            elif i % 3 == 1:
                store.apply("system", "sweep", {})
            else:
                store.apply(
                    "system",
                    "record-heartbeat",
                    {"cluster": "c1", "at": clock.now()},
                )
        assert store.log.last_seq == 1000
        records = EventLog(tmp_path / "events.log").read_all()
        recovered = Store(tmp_path, ManualClock(), PlaneConfig(), snapshot_every=0)
        assert recovered.plane.digest() == records[-1].result_digest
