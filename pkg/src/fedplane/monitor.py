"""Heartbeat ingestion, availability derivation, and the federation
status snapshot the dashboard renders.

Availability is a fixed-threshold missed-heartbeat detector: a cluster is
Unavailable once the gap since its last accepted heartbeat exceeds
interval * miss_threshold, and flips back on the first accepted
heartbeat. Per-cluster metric history is a bounded ring buffer.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .errors import NotFoundError
from .model import Availability, AvailabilityPolicy, ClusterId, ResourceVector

HISTORY_LIMIT = 1000


@dataclass(frozen=True)
class Heartbeat:
    cluster: ClusterId
    at: int
    gpus_in_use: int = 0
    pods_running: int = 0
    committed: ResourceVector = field(default_factory=ResourceVector)


@dataclass
class ClusterRecord:
    last_accepted: Optional[int] = None
    history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_LIMIT))

    def latest(self) -> Optional[Heartbeat]:
        return self.history[-1] if self.history else None


class MonitorStore:
    """Accepted heartbeats per cluster. Late or duplicate heartbeats are
    dropped so accepted timestamps are strictly increasing."""

    def __init__(self):
        self.records: dict[ClusterId, ClusterRecord] = {}

    def register(self, cluster: ClusterId) -> None:
        self.records.setdefault(cluster, ClusterRecord())

    def forget(self, cluster: ClusterId) -> None:
        self.records.pop(cluster, None)

    def record_heartbeat(self, hb: Heartbeat) -> tuple[bool, str]:
        """Returns (accepted, reason); reason is set only on drops."""
        record = self.records.get(hb.cluster)
        if record is None:
            raise NotFoundError("cluster", hb.cluster)
        if record.last_accepted is not None and hb.at <= record.last_accepted:
            return False, "stale"
        record.last_accepted = hb.at
        record.history.append(hb)
        return True, ""

    def last_heartbeat(self, cluster: ClusterId) -> Optional[int]:
        record = self.records.get(cluster)
        if record is None:
            raise NotFoundError("cluster", cluster)
        return record.last_accepted

    def availability(
        self, cluster: ClusterId, now: int, policy: AvailabilityPolicy
    ) -> Availability:
        last = self.last_heartbeat(cluster)
        if last is None or now - last > policy.interval * policy.miss_threshold:
            return Availability.UNAVAILABLE
        return Availability.AVAILABLE

    def staleness(self, cluster: ClusterId, now: int) -> Optional[int]:
        last = self.last_heartbeat(cluster)
        return None if last is None else now - last

    def window_utilization(
        self, cluster: ClusterId, now: int, policy: AvailabilityPolicy, bookable_gpus: int
    ) -> float:
        """Mean booked-GPU usage over heartbeats inside the detector
        window, as a fraction of the bookable pool."""
        if bookable_gpus <= 0:
            return 0.0
        record = self.records.get(cluster)
        if record is None:
            raise NotFoundError("cluster", cluster)
        window_start = now - policy.interval * policy.miss_threshold
        samples = [hb.gpus_in_use for hb in record.history if hb.at > window_start and hb.at <= now]
        if not samples:
            return 0.0
        return sum(samples) / len(samples) / bookable_gpus
