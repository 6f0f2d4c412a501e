"""Durable, linearized operation layer over the control plane.

One writer lock serializes every mutation; each successful operation is
appended to the hash-chained event log before the lock is released, so
no reader observes state that is not yet durable. Replaying the log from
genesis (or from the newest snapshot) reproduces the exact state digest,
which recovery verifies record by record.

Mutating operations are idempotent under a client-supplied idempotency
key: a replayed key returns the original response without re-applying.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Optional

from ..clock import Clock
from ..errors import LogCorruptionError, NotFoundError, ValidationError
from ..model import Booking, Project, ResourceVector, WorkspacePod
from ..monitor import Heartbeat
from ..plane import ControlPlane, PlaneConfig
from .eventlog import EventLog, load_latest_snapshot, write_snapshot


def booking_to_dict(booking: Booking) -> dict:
    return {
        "id": booking.id,
        "user": booking.user,
        "project": booking.project,
        "cluster": booking.cluster,
        "gpu_count": booking.gpu_count,
        "start": booking.start,
        "end": booking.end,
        "status": booking.status.value,
    }


def pod_to_dict(pod: WorkspacePod) -> dict:
    return {
        "id": pod.id,
        "user": pod.user,
        "project": pod.project,
        "cluster": pod.cluster,
        "gpu_grant": {"booking": pod.gpu_grant.booking, "gpus": pod.gpu_grant.gpus}
        if pod.gpu_grant
        else None,
        "phase": pod.phase.value,
    }


def project_to_dict(project: Project, plane: ControlPlane) -> dict:
    namespace = plane.namespaces.get(project.id)
    decision = plane.decisions.get(project.id)
    return {
        "id": project.id,
        "name": project.name,
        "members": sorted(project.members),
        "request": project.request.to_dict(),
        "placement": project.placement,
        "state": project.state.value,
        "namespace": {
            "cluster": namespace.cluster,
            "quota": namespace.quota.to_dict(),
            "apps": {
                slot: {"name": a.name, "version": a.version, "state": a.state.value}
                for slot, a in sorted(namespace.apps.items())
            },
        }
        if namespace
        else None,
        "decision": decision.to_dict() if decision else None,
    }


class Store:
    def __init__(
        self,
        data_dir: str | Path,
        clock: Clock,
        plane_config: Optional[PlaneConfig] = None,
        snapshot_every: int = 100,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self.snapshot_every = snapshot_every
        self.lock = threading.RLock()
        self.plane = ControlPlane(plane_config or PlaneConfig())
        self.idempotency: dict[str, dict] = {}
        self.log = EventLog(self.data_dir / "events.log")
        self._handlers = {
            "add-cluster": self._op_add_cluster,
            "register-project": self._op_register_project,
            "delete-project": self._op_delete_project,
            "request-booking": self._op_request_booking,
            "cancel-booking": self._op_cancel_booking,
            "spawn-workspace": self._op_spawn_workspace,
            "publish-release": self._op_publish_release,
            "record-heartbeat": self._op_record_heartbeat,
            "poll-cluster": self._op_poll_cluster,
            "sweep": self._op_sweep,
        }
        self.recover()

    # ------------------------------------------------------------------
    # recovery

    def recover(self) -> None:
        """Snapshot plus log replay. Each replayed record must reproduce
        the digest it recorded; a mismatch means the log and the code
        disagree and the store refuses to serve."""
        with self.lock:
            records = self.log.read_all()  # verifies the chain from genesis
            snapshot = load_latest_snapshot(self.data_dir)
            replay_from = 0
            if snapshot is not None:
                self.plane.load_state_dict(snapshot["state"])
                self.idempotency = dict(snapshot["idempotency"])
                replay_from = snapshot["covered_seq"]
            for record in records:
                if record.seq <= replay_from:
                    continue
                status, body, _ = self._execute(record.kind, record.at, record.actor, record.payload)
                if record.idempotency_key:
                    self.idempotency[record.idempotency_key] = {
                        "status": status,
                        "body": self._stamp_version(body),
                    }
                digest = self.plane.digest()
                if digest != record.result_digest:
                    raise LogCorruptionError(
                        record.seq,
                        f"replay digest mismatch: {digest} != {record.result_digest}",
                    )

    # ------------------------------------------------------------------
    # the write path

    def apply(
        self,
        actor: str,
        kind: str,
        payload: dict,
        idempotency_key: Optional[str] = None,
    ) -> tuple[int, dict]:
        """Validate, execute, then append to the log; the original
        response is replayed verbatim for a known idempotency key."""
        with self.lock:
            if idempotency_key and idempotency_key in self.idempotency:
                stored = self.idempotency[idempotency_key]
                return stored["status"], stored["body"]
            status, body, _ = self._commit(actor, kind, payload, idempotency_key)
            return status, body

    def apply_system(self, kind: str, payload: dict):
        """Internal mutation path for the simulator: logged like any
        other operation, but hands back the native result object."""
        with self.lock:
            _, _, native = self._commit("system", kind, payload, None)
            return native

    def _commit(self, actor: str, kind: str, payload: dict, idempotency_key: Optional[str]):
        at = self.clock.now()
        status, body, native = self._execute(kind, at, actor, payload)
        body = self._stamp_version(body)
        self.log.append(
            at=at,
            actor=actor,
            kind=kind,
            payload=payload,
            result_digest=self.plane.digest(),
            idempotency_key=idempotency_key,
        )
        if idempotency_key:
            self.idempotency[idempotency_key] = {"status": status, "body": body}
        if self.snapshot_every and self.log.last_seq % self.snapshot_every == 0:
            self.write_snapshot()
        return status, body, native

    def _stamp_version(self, body: dict) -> dict:
        # Every mutating response carries the state version it produced.
        stamped = dict(body)
        stamped["state_version"] = self.plane.version
        return stamped

    def write_snapshot(self) -> Path:
        with self.lock:
            return write_snapshot(
                self.data_dir,
                self.log.last_seq,
                self.log.chain,
                self.plane.state_dict(),
                self.idempotency,
            )

    def _execute(self, kind: str, at: int, actor: str, payload: dict):
        handler = self._handlers.get(kind)
        if handler is None:
            raise ValidationError(f"unknown operation kind {kind!r}")
        return handler(at, actor, payload)

    # ------------------------------------------------------------------
    # operation handlers: validate before the first mutation, so a raise
    # leaves the plane untouched and nothing is logged.

    def _op_add_cluster(self, at: int, actor: str, payload: dict):
        cluster = self.plane.add_cluster(
            payload["id"],
            payload.get("display_name") or payload["id"],
            ResourceVector.from_dict(payload["capacity"]),
            payload["bookable_gpus"],
            payload.get("installed") or {},
            now=at,
        )
        body = {
            "id": cluster.id,
            "display_name": cluster.display_name,
            "capacity": cluster.capacity.to_dict(),
            "bookable_gpus": cluster.bookable_gpus,
            "installed": dict(sorted(cluster.installed.items())),
        }
        return 201, body, cluster

    def _op_register_project(self, at: int, actor: str, payload: dict):
        project, decision = self.plane.register_project(
            payload["name"],
            set(payload["members"]),
            ResourceVector.from_dict(payload["request"]),
            now=at,
            pin=payload.get("pin"),
        )
        return 201, project_to_dict(project, self.plane), (project, decision)

    def _op_delete_project(self, at: int, actor: str, payload: dict):
        self.plane.delete_project(payload["project"], now=at)
        return 200, {"deleted": payload["project"]}, None

    def _op_request_booking(self, at: int, actor: str, payload: dict):
        booking = self.plane.request_booking(
            payload["user"],
            payload["project"],
            payload["gpu_count"],
            payload["start"],
            payload["end"],
            now=at,
        )
        return 201, booking_to_dict(booking), booking

    def _op_cancel_booking(self, at: int, actor: str, payload: dict):
        booking, respawns = self.plane.cancel_booking(
            payload["booking"], payload["by"], now=at, admin=payload.get("admin", False)
        )
        body = booking_to_dict(booking)
        body["respawned_pods"] = [action.new_pod for action in respawns]
        return 200, body, (booking, respawns)

    def _op_spawn_workspace(self, at: int, actor: str, payload: dict):
        pod, admission = self.plane.spawn_workspace(
            payload["user"], payload["project"], payload["wants_gpu"], now=at
        )
        body = pod_to_dict(pod)
        body["admission"] = {
            "verdict": admission.verdict,
            "booking": admission.booking,
            "gpus": admission.gpus,
        }
        return 201, body, (pod, admission)

    def _op_publish_release(self, at: int, actor: str, payload: dict):
        release = self.plane.publish_release(
            payload["app"], payload["version"], payload["digest"], now=at
        )
        body = {
            "app": release.app,
            "version": release.version,
            "digest": release.digest,
            "published_at": release.published_at,
        }
        return 201, body, release

    def _op_record_heartbeat(self, at: int, actor: str, payload: dict):
        result = self.plane.record_heartbeat(
            Heartbeat(
                cluster=payload["cluster"],
                at=payload.get("at", at),
                gpus_in_use=payload.get("gpus_in_use", 0),
                pods_running=payload.get("pods_running", 0),
                committed=ResourceVector.from_dict(payload.get("committed", {})),
            )
        )
        body = {
            "accepted": result.accepted,
            "reason": result.reason,
            "rejoined": result.rejoined,
            "upgrades": [u.to_dict() for u in result.upgrades],
        }
        return 200, body, result

    def _op_poll_cluster(self, at: int, actor: str, payload: dict):
        if payload["cluster"] not in self.plane.clusters:
            raise NotFoundError("cluster", payload["cluster"])
        actions = self.plane.poll_cluster(
            payload["cluster"], now=at, force=payload.get("force", False)
        )
        return 200, {"upgrades": [a.to_dict() for a in actions]}, actions

    def _op_sweep(self, at: int, actor: str, payload: dict):
        report = self.plane.sweep(now=at)
        body = {
            "expired": list(report.expired),
            "respawns": [
                {"old_pod": r.old_pod, "new_pod": r.new_pod, "booking": r.booking}
                for r in report.respawns
            ],
        }
        return 200, body, report


class StoreSimOps:
    """Adapter handed to a Simulation so event-driven mutations flow
    through the store's log instead of hitting the plane directly."""

    def __init__(self, store: Store):
        self.store = store

    def record_heartbeat(self, hb: Heartbeat):
        return self.store.apply_system(
            "record-heartbeat",
            {
                "cluster": hb.cluster,
                "at": hb.at,
                "gpus_in_use": hb.gpus_in_use,
                "pods_running": hb.pods_running,
                "committed": hb.committed.to_dict(),
            },
        )

    def sweep(self, now: int):
        return self.store.apply_system("sweep", {})

    def poll_cluster(self, cluster_id: str, now: int, force: bool = False):
        return self.store.apply_system("poll-cluster", {"cluster": cluster_id, "force": force})
