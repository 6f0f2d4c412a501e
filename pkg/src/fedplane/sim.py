"""Deterministic discrete-event harness standing in for the remote
clusters: it emits their heartbeats, fires booking expiries, drives
release polls, and injects network partitions.

Strictly single-threaded: one event fires at a time, ordered by
(time, seq), and handlers may only schedule into the present or future.
Replaying the same inputs yields a byte-identical trace.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Optional

from .clock import ManualClock
from .errors import SimulationError, ValidationError
from .model import ClusterId, PodPhase, ResourceVector
from .monitor import Heartbeat
from .plane import ControlPlane, SweepReport
from .releases import UpgradeAction

HEARTBEAT_DUE = "heartbeat-due"
BOOKING_EXPIRY = "booking-expiry"
POLL_DUE = "poll-due"
PARTITION_START = "partition-start"
PARTITION_END = "partition-end"
CUSTOM = "custom"


class SimClock(ManualClock):
    """Simulated seconds plus a monotone sequence counter; (time, seq)
    totally orders everything that happens."""

    def __init__(self, start: int = 0):
        super().__init__(start)
        self.seq = 0

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq


@dataclass(frozen=True)
class SimEvent:
    at: int
    seq: int
    kind: str
    target: str = ""
    label: str = ""


@dataclass
class TraceRecord:
    at: int
    seq: int
    kind: str
    fields: tuple[tuple[str, object], ...] = ()

    def render(self) -> str:
        parts = [f"{self.at} {self.seq} {self.kind}"]
        for key, value in self.fields:
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, (int, float)):
                text = str(value)
            else:
                text = str(value)
                if any(ch in text for ch in ' \t"') or text == "":
                    text = json.dumps(text)
            parts.append(f"{key}={text}")
        return " ".join(parts)


@dataclass
class Trace:
    records: list[TraceRecord] = field(default_factory=list)
    ok: bool = True
    failure: Optional[str] = None

    def render(self) -> str:
        return "\n".join(record.render() for record in self.records) + "\n"

    def kinds(self) -> list[str]:
        return [record.kind for record in self.records]


class Simulation:
    """Owns the event queue and the simulated-network state (partitions)
    for one control plane. The plane itself stays pure control-plane
    state; everything network-ish lives here.

    Mutations triggered by events go through `ops` (record_heartbeat,
    sweep, poll_cluster). That is the plane itself by default; the
    gateway substitutes a logging wrapper so simulated heartbeats and
    sweeps land in its event log like any other mutation."""

    def __init__(self, plane: ControlPlane, clock: Optional[SimClock] = None, ops=None):
        self.plane = plane
        self.ops = ops if ops is not None else plane
        self.clock = clock or SimClock()
        self.trace = Trace()
        self._queue: list[tuple[int, int, SimEvent]] = []
        self.partitions: dict[ClusterId, list[list[int]]] = {}
        plane.on_booking_granted.append(self._on_booking_granted)

    # ------------------------------------------------------------------
    # scheduling

    def schedule(self, at: int, kind: str, target: str = "", label: str = "") -> SimEvent:
        if at < self.clock.now():
            raise SimulationError(
                f"cannot schedule {kind} at {at}: simulated time is already {self.clock.now()}"
            )
        event = SimEvent(at=at, seq=self.clock.next_seq(), kind=kind, target=target, label=label)
        heapq.heappush(self._queue, (event.at, event.seq, event))
        return event

    def _on_booking_granted(self, booking) -> None:
        self.schedule(booking.end, BOOKING_EXPIRY, target=booking.id)

    def _next_multiple(self, step: int) -> int:
        now = self.clock.now()
        return (now // step + 1) * step

    def _poll_step(self) -> int:
        policy = self.plane.config.sync
        # Scheduled mode only ever applies at multiples of the period, so
        # that is the only cadence worth firing at.
        return policy.period if policy.mode == "scheduled" else policy.poll_interval

    def attach_cluster(self, cluster_id: ClusterId) -> None:
        """Start the periodic heartbeat and release-poll loops for a
        cluster already registered with the plane."""
        self.schedule(
            self._next_multiple(self.plane.config.availability.interval),
            HEARTBEAT_DUE,
            target=cluster_id,
        )
        self.schedule(self._next_multiple(self._poll_step()), POLL_DUE, target=cluster_id)

    def add_cluster(
        self,
        cluster_id: ClusterId,
        capacity: ResourceVector,
        bookable_gpus: int,
        installed: Optional[dict[str, str]] = None,
        display_name: str = "",
    ):
        cluster = self.plane.add_cluster(
            cluster_id,
            display_name or cluster_id,
            capacity,
            bookable_gpus,
            installed,
            now=self.clock.now(),
        )
        self.attach_cluster(cluster_id)
        self.record(
            "cluster-added",
            ("cluster", cluster_id),
            ("gpus", capacity.gpus),
            ("cpu", capacity.cpu_cores),
            ("mem", capacity.memory_gib),
            ("bookable", bookable_gpus),
        )
        return cluster

    # ------------------------------------------------------------------
    # partitions

    def partition(self, cluster_id: ClusterId, start: int, end: int) -> None:
        """Suppress the cluster's heartbeats and polls strictly inside
        (start, end). Overlapping partitions merge into one interval."""
        if start >= end:
            raise ValidationError("partition requires from < to")
        self.plane._cluster(cluster_id)  # noqa: SLF001 - existence check
        intervals = self.partitions.setdefault(cluster_id, [])
        merged = [start, end]
        keep = []
        for lo, hi in intervals:
            if merged[0] < hi and merged[1] > lo:
                merged[0] = min(merged[0], lo)
                merged[1] = max(merged[1], hi)
            else:
                keep.append([lo, hi])
        keep.append(merged)
        keep.sort()
        self.partitions[cluster_id] = keep
        self.schedule(max(start, self.clock.now()), PARTITION_START, target=cluster_id)
        self.schedule(end, PARTITION_END, target=cluster_id)
        self.record(
            "partition-scheduled", ("cluster", cluster_id), ("from", start), ("to", end)
        )

    def is_partitioned(self, cluster_id: ClusterId, t: int) -> bool:
        return any(lo < t < hi for lo, hi in self.partitions.get(cluster_id, []))

    # ------------------------------------------------------------------
    # event loop

    def advance_to(self, t: int) -> list[SimEvent]:
        """Fire every event with at <= t in (at, seq) order, then settle
        the clock at t. Returns the fired events."""
        if t < self.clock.now():
            raise SimulationError(f"cannot advance to {t}: now is {self.clock.now()}")
        fired = []
        while self._queue and self._queue[0][0] <= t:
            _, _, event = heapq.heappop(self._queue)
            self.clock.advance_to(event.at)
            self._dispatch(event)
            fired.append(event)
        self.clock.advance_to(t)
        return fired

    def _dispatch(self, event: SimEvent) -> None:
        now = event.at
        if event.kind == HEARTBEAT_DUE:
            if not self.is_partitioned(event.target, now):
                self._emit_heartbeat(event.target, now)
            self.schedule(
                now + self.plane.config.availability.interval, HEARTBEAT_DUE, event.target
            )
        elif event.kind == BOOKING_EXPIRY:
            self.record_sweep(self.ops.sweep(now), now)
        elif event.kind == POLL_DUE:
            if not self.is_partitioned(event.target, now):
                actions = self.ops.poll_cluster(event.target, now)
                self.record_upgrades(actions)
            self.schedule(now + self._poll_step(), POLL_DUE, event.target)
        elif event.kind == PARTITION_START:
            self.record("partition-start", ("cluster", event.target))
        elif event.kind == PARTITION_END:
            self.record("partition-end", ("cluster", event.target))
            if not self.is_partitioned(event.target, now):
                self._emit_heartbeat(event.target, now)
        elif event.kind == CUSTOM:
            self.record("custom", ("label", event.label))

    def _emit_heartbeat(self, cluster_id: ClusterId, now: int) -> None:
        gpus_in_use = 0
        pods_running = 0
        for pod in self.plane.pods.values():
            if pod.cluster != cluster_id:
                continue
            if pod.phase in (PodPhase.RUNNING, PodPhase.RESPAWNED):
                pods_running += 1
                if pod.gpu_grant is not None and pod.phase == PodPhase.RUNNING:
                    gpus_in_use += pod.gpu_grant.gpus
        result = self.ops.record_heartbeat(
            Heartbeat(
                cluster=cluster_id,
                at=now,
                gpus_in_use=gpus_in_use,
                pods_running=pods_running,
                committed=self.plane.committed[cluster_id],
            )
        )
        if result.accepted:
            self.record(
                "heartbeat",
                ("cluster", cluster_id),
                ("gpus_in_use", gpus_in_use),
                ("pods_running", pods_running),
                ("rejoined", result.rejoined),
            )
            self.record_upgrades(list(result.upgrades))

    # ------------------------------------------------------------------
    # trace

    def record(self, kind: str, *fields: tuple[str, object]) -> TraceRecord:
        entry = TraceRecord(
            at=self.clock.now(), seq=self.clock.next_seq(), kind=kind, fields=tuple(fields)
        )
        self.trace.records.append(entry)
        return entry

    def record_sweep(self, report: SweepReport, now: int) -> None:
        for booking_id in report.expired:
            self.record("booking-expired", ("booking", booking_id))
        for action in report.respawns:
            self.record(
                "pod-respawned",
                ("old", action.old_pod),
                ("new", action.new_pod),
                ("booking", action.booking),
                ("cluster", action.cluster),
            )

    def record_upgrades(self, actions: list[UpgradeAction]) -> None:
        for action in actions:
            self.record(
                "upgrade-applied",
                ("cluster", action.cluster),
                ("app", action.app),
                ("from", action.from_version or "none"),
                ("to", action.to_version),
            )

    def record_digest(self) -> None:
        self.record("digest", ("state", self.plane.digest()))
