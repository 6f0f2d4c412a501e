"""Append-only, hash-chained event log with snapshot files.

Framing: every record is a 4-byte big-endian length followed by a
canonical-JSON body carrying (seq, at, actor, kind, payload,
idempotency_key, result_digest, prev). The chain digest of a record is
the SHA-256 of its body bytes; `prev` holds the previous record's chain,
anchored at a fixed genesis value.

A torn tail (partial frame from a crash mid-append) is silently
discarded on read; an integrity break anywhere before the tail is a
startup-refusing corruption error naming the first bad seq.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..errors import LogCorruptionError

GENESIS = hashlib.sha256(b"fedplane-genesis").hexdigest()
_LEN = struct.Struct(">I")
_SNAPSHOT_RE = re.compile(r"^snapshot-(\d{10})\.json$")


def canonical_bytes(value) -> bytes:
    return json.dumps(value, sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class EventRecord:
    seq: int
    at: int
    actor: str
    kind: str
    payload: dict
    idempotency_key: Optional[str]
    result_digest: str
    prev: str

    def body(self) -> dict:
        return {
            "seq": self.seq,
            "at": self.at,
            "actor": self.actor,
            "kind": self.kind,
            "payload": self.payload,
            "idempotency_key": self.idempotency_key,
            "result_digest": self.result_digest,
            "prev": self.prev,
        }

    def chain(self) -> str:
        return hashlib.sha256(canonical_bytes(self.body())).hexdigest()


class EventLog:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.last_seq = 0
        self.chain = GENESIS

    def append(
        self,
        at: int,
        actor: str,
        kind: str,
        payload: dict,
        result_digest: str,
        idempotency_key: Optional[str] = None,
    ) -> EventRecord:
        record = EventRecord(
            seq=self.last_seq + 1,
            at=at,
            actor=actor,
            kind=kind,
            payload=payload,
            idempotency_key=idempotency_key,
            result_digest=result_digest,
            prev=self.chain,
        )
        body = canonical_bytes(record.body())
        with open(self.path, "ab") as handle:
            handle.write(_LEN.pack(len(body)) + body)
            handle.flush()
            os.fsync(handle.fileno())
        self.last_seq = record.seq
        self.chain = record.chain()
        return record

    def read_all(self) -> list[EventRecord]:
        """Read and verify the whole log. Discards a torn trailing
        record; raises LogCorruptionError on any earlier integrity
        break. Leaves the log positioned for appends."""
        records: list[EventRecord] = []
        self.last_seq = 0
        self.chain = GENESIS
        if not self.path.exists():
            return records
        data = self.path.read_bytes()
        offset = 0
        while offset < len(data):
            if offset + _LEN.size > len(data):
                break  # torn length header
            (length,) = _LEN.unpack_from(data, offset)
            start = offset + _LEN.size
            if start + length > len(data):
                break  # torn body
            body_bytes = data[start : start + length]
            offset = start + length
            next_seq = self.last_seq + 1
            try:
                body = json.loads(body_bytes)
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise LogCorruptionError(next_seq, f"undecodable record body: {exc}") from None
            try:
                record = EventRecord(
                    seq=body["seq"],
                    at=body["at"],
                    actor=body["actor"],
                    kind=body["kind"],
                    payload=body["payload"],
                    idempotency_key=body["idempotency_key"],
                    result_digest=body["result_digest"],
                    prev=body["prev"],
                )
            except (KeyError, TypeError) as exc:
                raise LogCorruptionError(next_seq, f"malformed record: {exc}") from None
            if record.seq != next_seq:
                raise LogCorruptionError(next_seq, f"sequence gap: found seq {record.seq}")
            if record.prev != self.chain:
                raise LogCorruptionError(next_seq, "hash chain break")
            if canonical_bytes(record.body()) != body_bytes:
                raise LogCorruptionError(next_seq, "non-canonical record encoding")
            records.append(record)
            self.last_seq = record.seq
            self.chain = record.chain()
        return records


def snapshot_path(data_dir: str | Path, covered_seq: int) -> Path:
    return Path(data_dir) / f"snapshot-{covered_seq:010d}.json"


def write_snapshot(data_dir: str | Path, covered_seq: int, chain: str, state: dict, idempotency: dict) -> Path:
    path = snapshot_path(data_dir, covered_seq)
    tmp = path.with_suffix(".json.tmp")
    tmp.write_bytes(
        canonical_bytes(
            {
                "covered_seq": covered_seq,
                "chain": chain,
                "state": state,
                "idempotency": idempotency,
            }
        )
    )
    tmp.replace(path)
    return path


def load_latest_snapshot(data_dir: str | Path) -> Optional[dict]:
    """Newest parseable snapshot, or None. A half-written snapshot is
    skipped in favor of an older one (the log covers the difference)."""
    candidates = []
    directory = Path(data_dir)
    if not directory.exists():
        return None
    for entry in directory.iterdir():
        match = _SNAPSHOT_RE.match(entry.name)
        if match:
            candidates.append((int(match.group(1)), entry))
    for _, path in sorted(candidates, reverse=True):
        try:
            snapshot = json.loads(path.read_bytes())
            if {"covered_seq", "chain", "state", "idempotency"} <= set(snapshot):
                return snapshot
        except (json.JSONDecodeError, OSError):
            continue
    return None
