"""The federation store: single owner of all mutable control-plane state.

Every mutation is a deterministic function of (current state, operation
arguments); identifiers come from persistent counters and all time is an
explicit argument. That makes the plane replayable from an event log and
byte-stable across runs. The optimistic `version` counter increments on
every effective mutation and backs stale-decision detection for
placement commits.

Concurrency: one logical writer. Callers (gateway, simulator) serialize
mutations themselves; reads between mutations see consistent state.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Optional

from . import booking as booking_ops
from . import releases as release_ops
from .booking import (
    DEFAULT_MAX_BOOKING_SECONDS,
    DEFAULT_MAX_FUTURE_BOOKINGS_PER_USER,
    AdmissionRequest,
    AdmissionResult,
    BookingCalendar,
)
from .errors import (
    AuthorizationError,
    ConflictError,
    NotFoundError,
    StaleDecisionError,
    ValidationError,
)
from .model import (
    DEFAULT_APP_SLOTS,
    AppSlot,
    AppState,
    AuthDecision,
    Availability,
    AvailabilityPolicy,
    Booking,
    BookingId,
    BookingStatus,
    Cluster,
    ClusterId,
    GpuGrant,
    Namespace,
    PodId,
    PodPhase,
    Project,
    ProjectId,
    ProjectState,
    ResourceVector,
    UserId,
    WorkspacePod,
    authorize,
    validate_identifier,
)
from .monitor import Heartbeat, MonitorStore
from .releases import ReleaseRegistry, SyncPolicy, UpgradeAction
from .scheduler import (
    ClusterLoadView,
    Outcome,
    PlacementDecision,
    ScoreEntry,
    place_project,
)


@dataclass(frozen=True)
class PlaneConfig:
    availability: AvailabilityPolicy = AvailabilityPolicy()
    sync: SyncPolicy = SyncPolicy()
    max_booking_seconds: int = DEFAULT_MAX_BOOKING_SECONDS
    max_future_bookings_per_user: int = DEFAULT_MAX_FUTURE_BOOKINGS_PER_USER


@dataclass(frozen=True)
class RespawnAction:
    cluster: ClusterId
    booking: BookingId
    old_pod: PodId
    new_pod: PodId
    at: int


@dataclass(frozen=True)
class SweepReport:
    expired: tuple[BookingId, ...] = ()
    respawns: tuple[RespawnAction, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.expired and not self.respawns


@dataclass(frozen=True)
class HeartbeatResult:
    accepted: bool
    reason: str = ""
    rejoined: bool = False
    upgrades: tuple[UpgradeAction, ...] = ()


class ControlPlane:
    def __init__(self, config: PlaneConfig | None = None):
        self.config = config or PlaneConfig()
        self.version = 0
        self.clusters: dict[ClusterId, Cluster] = {}
        self.committed: dict[ClusterId, ResourceVector] = {}
        self.calendars: dict[ClusterId, BookingCalendar] = {}
        self.projects: dict[ProjectId, Project] = {}
        self.project_names: dict[str, ProjectId] = {}
        self.namespaces: dict[ProjectId, Namespace] = {}
        self.bookings: dict[BookingId, Booking] = {}
        self.pods: dict[PodId, WorkspacePod] = {}
        self.decisions: dict[ProjectId, PlacementDecision] = {}
        self.pending_intents: dict[ClusterId, list[dict]] = {}
        self.monitor = MonitorStore()
        self.registry = ReleaseRegistry()
        self._counters = {"project": 0, "booking": 0, "pod": 0}
        # Notification hooks (not state): the simulator uses these to
        # schedule expiry events for freshly granted bookings.
        self.on_booking_granted: list[Callable[[Booking], None]] = []

    # ------------------------------------------------------------------
    # plumbing

    def _bump(self) -> None:
        self.version += 1

    def _next_id(self, kind: str, prefix: str) -> str:
        self._counters[kind] += 1
        return f"{prefix}-{self._counters[kind]:04d}"

    def _cluster(self, cluster_id: ClusterId) -> Cluster:
        cluster = self.clusters.get(cluster_id)
        if cluster is None:
            raise NotFoundError("cluster", cluster_id)
        return cluster

    def _project(self, project_id: ProjectId) -> Project:
        project = self.projects.get(project_id)
        if project is None:
            raise NotFoundError("project", project_id)
        return project

    def _booking(self, booking_id: BookingId) -> Booking:
        found = self.bookings.get(booking_id)
        if found is None:
            raise NotFoundError("booking", booking_id)
        return found

    def authorize(self, user: UserId, project_id: ProjectId, action: str) -> AuthDecision:
        return authorize(user, project_id, action, self.projects)

    def _require_member(self, user: UserId, project_id: ProjectId, action: str) -> None:
        decision = self.authorize(user, project_id, action)
        if not decision.allowed:
            raise AuthorizationError(decision.reason)

    # ------------------------------------------------------------------
    # clusters and monitoring

    def add_cluster(
        self,
        cluster_id: ClusterId,
        display_name: str,
        capacity: ResourceVector,
        bookable_gpus: int,
        installed: Optional[dict[str, str]] = None,
        now: int = 0,
    ) -> Cluster:
        if cluster_id in self.clusters:
            raise ConflictError(f"cluster {cluster_id!r} already registered")
        for app, version in (installed or {}).items():
            release_ops.parse_version(version)
            if not app:
                raise ValidationError("application name must be non-empty")
        cluster = Cluster(
            id=cluster_id,
            display_name=display_name,
            capacity=capacity,
            bookable_gpus=bookable_gpus,
            installed=dict(installed or {}),
        )
        self.clusters[cluster_id] = cluster
        self.committed[cluster_id] = ResourceVector()
        self.calendars[cluster_id] = BookingCalendar(
            cluster=cluster_id, bookable_capacity=bookable_gpus
        )
        self.monitor.register(cluster_id)
        self.pending_intents.setdefault(cluster_id, [])
        self._bump()
        # Registration is itself proof of liveness: seed the heartbeat
        # history so a fresh cluster is immediately placeable.
        self.record_heartbeat(Heartbeat(cluster=cluster_id, at=now))
        return cluster

    def availability(self, cluster_id: ClusterId, now: int) -> Availability:
        self._cluster(cluster_id)
        return self.monitor.availability(cluster_id, now, self.config.availability)

    def record_heartbeat(self, hb: Heartbeat) -> HeartbeatResult:
        cluster = self._cluster(hb.cluster)
        was_available = (
            self.monitor.availability(hb.cluster, hb.at, self.config.availability)
            == Availability.AVAILABLE
        )
        accepted, reason = self.monitor.record_heartbeat(hb)
        if not accepted:
            return HeartbeatResult(accepted=False, reason=reason)
        cluster.last_heartbeat = hb.at
        self._bump()
        if was_available:
            return HeartbeatResult(accepted=True)
        # First heartbeat after an outage (or ever): flush reconciliation
        # intents that queued up while the cluster was unreachable, then
        # force a rejoin poll so missed releases apply at once.
        self._replay_intents(hb.cluster, hb.at)
        upgrades = self.poll_cluster(hb.cluster, hb.at, force=True)
        return HeartbeatResult(accepted=True, rejoined=True, upgrades=tuple(upgrades))

    # ------------------------------------------------------------------
    # placement

    def load_views(self, now: int) -> list[ClusterLoadView]:
        views = []
        for cluster_id, cluster in self.clusters.items():
            views.append(
                ClusterLoadView(
                    cluster=cluster_id,
                    capacity=cluster.capacity,
                    committed=self.committed[cluster_id],
                    available=self.availability(cluster_id, now) == Availability.AVAILABLE,
                )
            )
        return views

    def create_project(self, name: str, members: set[UserId], request: ResourceVector) -> Project:
        if not name:
            raise ValidationError("project name must be non-empty")
        if name in self.project_names:
            raise ConflictError(f"project name {name!r} already registered")
        if not members:
            raise ValidationError("project members must be non-empty")
        for member in members:
            validate_identifier(member, "user id")
        project = Project(
            id=self._next_id("project", "p"),
            name=name,
            members=frozenset(members),
            request=request,
        )
        self.projects[project.id] = project
        self.project_names[name] = project.id
        self._bump()
        return project

    def place(self, project_id: ProjectId, now: int, pin: Optional[ClusterId] = None) -> PlacementDecision:
        """Score the federation for one project. Pure read: the returned
        decision must be committed (or the project rejected) separately."""
        project = self._project(project_id)
        views = self.load_views(now)
        if pin is not None:
            self._cluster(pin)
            # A pin bypasses scoring, never feasibility: the pinned
            # cluster must still be available and fit the request.
            views = [v for v in views if v.cluster == pin]
        return place_project(views, project, state_version=self.version)

    def register_project(
        self,
        name: str,
        members: set[UserId],
        request: ResourceVector,
        now: int,
        pin: Optional[ClusterId] = None,
    ) -> tuple[Project, PlacementDecision]:
        """The gateway's admission composite: create, score exactly once,
        then commit or reject."""
        project = self.create_project(name, members, request)
        decision = self.place(project.id, now, pin)
        self.decisions[project.id] = decision
        if decision.placed:
            self.commit_placement(decision, now)
        else:
            project.state = ProjectState.REJECTED
            self._bump()
        return project, decision

    def commit_placement(self, decision: PlacementDecision, now: int) -> Project:
        if not decision.placed or decision.cluster is None:
            raise ValidationError("cannot commit an infeasible placement decision")
        if decision.state_version != self.version:
            raise StaleDecisionError(
                f"decision computed at version {decision.state_version}, "
                f"store is at {self.version}"
            )
        project = self._project(decision.project)
        if project.state == ProjectState.PLACED:
            raise ConflictError(f"project {project.id} is already placed")
        cluster = self._cluster(decision.cluster)
        free = cluster.capacity - self.committed[cluster.id]
        if not project.request <= free:
            raise ConflictError(f"cluster {cluster.id} can no longer fit the request")
        project.placement = cluster.id
        project.state = ProjectState.PLACED
        self.committed[cluster.id] = self.committed[cluster.id] + project.request
        self.namespaces[project.id] = Namespace(
            project=project.id,
            cluster=cluster.id,
            quota=project.request,
            apps={
                slot: AppSlot(name=slot, version=self._slot_version(cluster, slot))
                for slot in DEFAULT_APP_SLOTS
            },
        )
        self._bump()
        self._enqueue_intent(cluster.id, {"kind": "reconcile-namespace", "project": project.id}, now)
        return project

    def _slot_version(self, cluster: Cluster, app: str) -> str:
        if app in cluster.installed:
            return cluster.installed[app]
        latest = self.registry.latest(app)
        return latest.version if latest else "0.0.0"

    def _enqueue_intent(self, cluster_id: ClusterId, intent: dict, now: int) -> None:
        self.pending_intents.setdefault(cluster_id, []).append(intent)
        if self.availability(cluster_id, now) == Availability.AVAILABLE:
            self._replay_intents(cluster_id, now)

    def _replay_intents(self, cluster_id: ClusterId, now: int) -> int:
        intents = self.pending_intents.get(cluster_id, [])
        if not intents:
            return 0
        self.pending_intents[cluster_id] = []
        for intent in intents:
            if intent["kind"] == "reconcile-namespace":
                self._reconcile_namespace(intent["project"])
        self._bump()
        return len(intents)

    def _reconcile_namespace(self, project_id: ProjectId) -> None:
        namespace = self.namespaces.get(project_id)
        if namespace is None:
            return  # project deleted while the intent was pending
        cluster = self._cluster(namespace.cluster)
        for slot in sorted(namespace.apps):
            app = namespace.apps[slot]
            app.version = self._slot_version(cluster, app.name)
            app.state = AppState.READY

    def change_quota(self, project_id: ProjectId, request: ResourceVector, now: int) -> Project:
        """Resize in place when the current cluster still fits the new
        request; otherwise re-place the project wholesale. Infeasible
        changes are rejected without touching existing state."""
        project = self._project(project_id)
        if project.state == ProjectState.PLACED:
            assert project.placement is not None
            cluster = self._cluster(project.placement)
            free_without_self = cluster.capacity - (
                self.committed[cluster.id] - project.request
            )
            if request <= free_without_self:
                self.committed[cluster.id] = (
                    self.committed[cluster.id] - project.request + request
                )
                project.request = request
                self.namespaces[project_id].quota = request
                self._bump()
                return project
        # Trial placement against views with this project's own share
        # removed; nothing mutates unless some cluster fits.
        shadow = Project(id=project.id, name=project.name, members=project.members, request=request)
        trial_views = []
        for view in self.load_views(now):
            committed = view.committed
            if view.cluster == project.placement:
                committed = committed - project.request
            trial_views.append(
                ClusterLoadView(
                    cluster=view.cluster,
                    capacity=view.capacity,
                    committed=committed,
                    available=view.available,
                )
            )
        trial = place_project(trial_views, shadow)
        if not trial.placed:
            raise ConflictError(
                f"no cluster can satisfy the new request (blocked on {trial.reason})"
            )
        if project.state == ProjectState.PLACED:
            self._release_placement(project)
        project.request = request
        self._bump()
        decision = self.place(project_id, now)
        self.decisions[project_id] = decision
        self.commit_placement(decision, now)
        return project

    def _release_placement(self, project: Project) -> None:
        assert project.placement is not None
        self.committed[project.placement] = (
            self.committed[project.placement] - project.request
        )
        self.namespaces.pop(project.id, None)
        project.placement = None
        project.state = ProjectState.PENDING
        self._bump()

    def delete_project(self, project_id: ProjectId, now: int) -> None:
        """Admin-only at the gateway. Cascades: live bookings cancelled,
        pods terminated, namespace and committed capacity released."""
        project = self._project(project_id)
        for booking_id in sorted(self.bookings):
            booking = self.bookings[booking_id]
            if booking.project == project_id and booking.status in (
                BookingStatus.GRANTED,
                BookingStatus.ACTIVE,
            ):
                booking.transition(BookingStatus.CANCELLED)
                self.calendars[booking.cluster].remove(booking_id)
        for pod in self.pods.values():
            if pod.project == project_id and pod.phase != PodPhase.TERMINATING:
                pod.gpu_grant = None
                pod.phase = PodPhase.TERMINATING
        if project.state == ProjectState.PLACED:
            self._release_placement(project)
        self.namespaces.pop(project_id, None)
        self.decisions.pop(project_id, None)
        self.project_names.pop(project.name, None)
        del self.projects[project_id]
        self._bump()

    # ------------------------------------------------------------------
    # bookings and workspaces

    def request_booking(
        self,
        user: UserId,
        project_id: ProjectId,
        gpu_count: int,
        start: int,
        end: int,
        now: int,
    ) -> Booking:
        self._require_member(user, project_id, "book")
        project = self._project(project_id)
        if project.state != ProjectState.PLACED or project.placement is None:
            raise ValidationError("project is not placed on any cluster")
        violations = []
        if not isinstance(gpu_count, int) or isinstance(gpu_count, bool) or gpu_count < 1:
            violations.append("gpu_count must be an integer >= 1")
        for label, value in (("start", start), ("end", end)):
            if not isinstance(value, int) or isinstance(value, bool):
                violations.append(f"{label} must be an integer timestamp")
        if not violations:
            if start >= end:
                violations.append("booking interval must satisfy start < end")
            elif start < now:
                violations.append("booking may not start in the past")
            elif end - start > self.config.max_booking_seconds:
                violations.append(
                    f"booking exceeds the maximum duration of "
                    f"{self.config.max_booking_seconds} seconds"
                )
        if violations:
            raise ValidationError(violations)
        future = sum(
            1
            for b in self.bookings.values()
            if b.user == user
            and b.status in (BookingStatus.GRANTED, BookingStatus.ACTIVE)
            and b.end > now
        )
        if future >= self.config.max_future_bookings_per_user:
            raise ConflictError(
                f"user {user!r} already holds {future} live bookings "
                f"(limit {self.config.max_future_bookings_per_user})"
            )
        calendar = self.calendars[project.placement]
        booking_ops.check_booking_fits(calendar, gpu_count, start, end)
        booking = Booking(
            id=self._next_id("booking", "b"),
            user=user,
            project=project_id,
            cluster=project.placement,
            gpu_count=gpu_count,
            start=start,
            end=end,
        )
        self.bookings[booking.id] = booking
        calendar.add(booking)
        self._bump()
        for hook in self.on_booking_granted:
            hook(booking)
        return booking

    def cancel_booking(
        self, booking_id: BookingId, by: UserId, now: int, admin: bool = False
    ) -> tuple[Booking, list[RespawnAction]]:
        booking = self._booking(booking_id)
        project = self.projects.get(booking.project)
        is_member = project is not None and by in project.members
        if not (admin or by == booking.user or is_member):
            raise AuthorizationError("not a member")
        was_active = booking.status == BookingStatus.ACTIVE
        booking.transition(BookingStatus.CANCELLED)
        self.calendars[booking.cluster].remove(booking_id)
        self._bump()
        respawns = self._respawn_pods_for(booking_id, now) if was_active else []
        return booking, respawns

    def spawn_workspace(
        self, user: UserId, project_id: ProjectId, wants_gpu: bool, now: int
    ) -> tuple[WorkspacePod, AdmissionResult]:
        self._require_member(user, project_id, "spawn-workspace")
        project = self._project(project_id)
        if project.state != ProjectState.PLACED or project.placement is None:
            raise ValidationError("project is not placed on any cluster")
        granted_elsewhere = frozenset(
            pod.gpu_grant.booking
            for pod in self.pods.values()
            if pod.phase == PodPhase.RUNNING and pod.gpu_grant is not None
        )
        request = AdmissionRequest(
            user=user, project=project_id, cluster=project.placement, wants_gpu=wants_gpu, now=now
        )
        result = booking_ops.admit(
            request, self.calendars.get(project.placement), granted_elsewhere
        )
        if result.verdict == "Reject":
            raise ConflictError(f"GPU admission rejected: {result.reason}")
        grant = None
        if result.granted_gpu:
            assert result.booking is not None
            grant = GpuGrant(booking=result.booking, gpus=result.gpus)
        pod = WorkspacePod(
            id=self._next_id("pod", "pod"),
            user=user,
            project=project_id,
            cluster=project.placement,
            gpu_grant=grant,
        )
        self.pods[pod.id] = pod
        self._bump()
        return pod, result

    def sweep(self, now: int) -> SweepReport:
        """Expire every live booking whose end has passed and respawn the
        pods that were riding on them, GPU-less. Idempotent at fixed now;
        freed GPUs are immediately visible to overlap math."""
        expired: list[BookingId] = []
        for cluster_id in sorted(self.calendars):
            calendar = self.calendars[cluster_id]
            for booking in calendar.live_entries():
                if booking.end <= now:
                    booking.transition(BookingStatus.EXPIRED)
                    calendar.remove(booking.id)
                    expired.append(booking.id)
        actions: list[RespawnAction] = []
        for booking_id in expired:
            actions.extend(self._respawn_pods_for(booking_id, now))
        if expired:
            self._bump()
        return SweepReport(expired=tuple(expired), respawns=tuple(actions))

    def _respawn_pods_for(self, booking_id: BookingId, now: int) -> list[RespawnAction]:
        actions = []
        for pod_id in sorted(self.pods):
            pod = self.pods[pod_id]
            if (
                pod.phase == PodPhase.RUNNING
                and pod.gpu_grant is not None
                and pod.gpu_grant.booking == booking_id
            ):
                pod.gpu_grant = None
                pod.phase = PodPhase.TERMINATING
                replacement = WorkspacePod(
                    id=self._next_id("pod", "pod"),
                    user=pod.user,
                    project=pod.project,
                    cluster=pod.cluster,
                    gpu_grant=None,
                    phase=PodPhase.RESPAWNED,
                )
                self.pods[replacement.id] = replacement
                self._bump()
                actions.append(
                    RespawnAction(
                        cluster=pod.cluster,
                        booking=booking_id,
                        old_pod=pod.id,
                        new_pod=replacement.id,
                        at=now,
                    )
                )
        return actions

    # ------------------------------------------------------------------
    # releases

    def publish_release(self, app: str, version: str, digest: str, now: int):
        release = self.registry.publish(app, version, digest, now)
        self._bump()
        return release

    def poll_cluster(self, cluster_id: ClusterId, now: int, force: bool = False) -> list[UpgradeAction]:
        cluster = self._cluster(cluster_id)
        if not force and self.availability(cluster_id, now) != Availability.AVAILABLE:
            return []
        actions = release_ops.poll(cluster, self.registry, self.config.sync, now, force=force)
        if actions:
            upgraded = {action.app: action.to_version for action in actions}
            for project_id in sorted(self.namespaces):
                namespace = self.namespaces[project_id]
                if namespace.cluster != cluster_id:
                    continue
                for slot in sorted(namespace.apps):
                    app = namespace.apps[slot]
                    if app.name in upgraded:
                        app.version = upgraded[app.name]
            self._bump()
        return actions

    def drift_report(self) -> dict:
        return release_ops.drift_report(self.registry, self.clusters)

    # ------------------------------------------------------------------
    # status

    def federation_snapshot(self, now: int) -> dict:
        clusters = []
        for cluster_id in sorted(self.clusters):
            cluster = self.clusters[cluster_id]
            committed = self.committed[cluster_id]
            clusters.append(
                {
                    "id": cluster_id,
                    "display_name": cluster.display_name,
                    "availability": self.availability(cluster_id, now).value,
                    "capacity": cluster.capacity.to_dict(),
                    "committed": committed.to_dict(),
                    "free": (cluster.capacity - committed).to_dict(),
                    "bookable_gpus": cluster.bookable_gpus,
                    "bookable_utilization": self.monitor.window_utilization(
                        cluster_id, now, self.config.availability, cluster.bookable_gpus
                    ),
                    "staleness": self.monitor.staleness(cluster_id, now),
                    "installed": dict(sorted(cluster.installed.items())),
                }
            )
        projects = []
        for project_id in sorted(self.projects):
            project = self.projects[project_id]
            namespace = self.namespaces.get(project_id)
            projects.append(
                {
                    "id": project_id,
                    "name": project.name,
                    "state": project.state.value,
                    "placement": project.placement,
                    "request": project.request.to_dict(),
                    "apps": {
                        slot: {
                            "name": app.name,
                            "version": app.version,
                            "state": app.state.value,
                        }
                        for slot, app in sorted(namespace.apps.items())
                    }
                    if namespace
                    else {},
                }
            )
        return {
            "at": now,
            "state_version": self.version,
            "clusters": clusters,
            "projects": projects,
        }

    # ------------------------------------------------------------------
    # serialization

    def state_dict(self) -> dict:
        return {
            "version": self.version,
            "counters": dict(self._counters),
            "clusters": {
                cid: {
                    "display_name": c.display_name,
                    "capacity": c.capacity.to_dict(),
                    "bookable_gpus": c.bookable_gpus,
                    "last_heartbeat": c.last_heartbeat,
                    "installed": dict(sorted(c.installed.items())),
                }
                for cid, c in sorted(self.clusters.items())
            },
            "cluster_order": list(self.clusters),
            "committed": {cid: vec.to_dict() for cid, vec in sorted(self.committed.items())},
            "projects": {
                pid: {
                    "name": p.name,
                    "members": sorted(p.members),
                    "request": p.request.to_dict(),
                    "placement": p.placement,
                    "state": p.state.value,
                }
                for pid, p in sorted(self.projects.items())
            },
            "namespaces": {
                pid: {
                    "cluster": ns.cluster,
                    "quota": ns.quota.to_dict(),
                    "apps": {
                        slot: {"name": a.name, "version": a.version, "state": a.state.value}
                        for slot, a in sorted(ns.apps.items())
                    },
                }
                for pid, ns in sorted(self.namespaces.items())
            },
            "bookings": {
                bid: {
                    "user": b.user,
                    "project": b.project,
                    "cluster": b.cluster,
                    "gpu_count": b.gpu_count,
                    "start": b.start,
                    "end": b.end,
                    "status": b.status.value,
                }
                for bid, b in sorted(self.bookings.items())
            },
            "pods": {
                pid: {
                    "user": p.user,
                    "project": p.project,
                    "cluster": p.cluster,
                    "gpu_grant": {"booking": p.gpu_grant.booking, "gpus": p.gpu_grant.gpus}
                    if p.gpu_grant
                    else None,
                    "phase": p.phase.value,
                }
                for pid, p in sorted(self.pods.items())
            },
            "decisions": {pid: d.to_dict() for pid, d in sorted(self.decisions.items())},
            "pending_intents": {
                cid: list(intents) for cid, intents in sorted(self.pending_intents.items())
            },
            "monitor": {
                cid: {
                    "last_accepted": record.last_accepted,
                    "history": [
                        {
                            "at": hb.at,
                            "gpus_in_use": hb.gpus_in_use,
                            "pods_running": hb.pods_running,
                            "committed": hb.committed.to_dict(),
                        }
                        for hb in record.history
                    ],
                }
                for cid, record in sorted(self.monitor.records.items())
            },
            "registry": {
                app: [
                    {"version": r.version, "digest": r.digest, "published_at": r.published_at}
                    for r in history
                ]
                for app, history in sorted(self.registry.releases.items())
            },
        }

    def load_state_dict(self, state: dict) -> None:
        self.__init__(self.config)
        self.version = state["version"]
        self._counters = dict(state["counters"])
        for cid in state.get("cluster_order", sorted(state["clusters"])):
            raw = state["clusters"][cid]
            self.clusters[cid] = Cluster(
                id=cid,
                display_name=raw["display_name"],
                capacity=ResourceVector.from_dict(raw["capacity"]),
                bookable_gpus=raw["bookable_gpus"],
                last_heartbeat=raw["last_heartbeat"],
                installed=dict(raw["installed"]),
            )
        self.committed = {
            cid: ResourceVector.from_dict(vec) for cid, vec in state["committed"].items()
        }
        for pid, raw in state["projects"].items():
            self.projects[pid] = Project(
                id=pid,
                name=raw["name"],
                members=frozenset(raw["members"]),
                request=ResourceVector.from_dict(raw["request"]),
                placement=raw["placement"],
                state=ProjectState(raw["state"]),
            )
            self.project_names[raw["name"]] = pid
        for pid, raw in state["namespaces"].items():
            self.namespaces[pid] = Namespace(
                project=pid,
                cluster=raw["cluster"],
                quota=ResourceVector.from_dict(raw["quota"]),
                apps={
                    slot: AppSlot(name=a["name"], version=a["version"], state=AppState(a["state"]))
                    for slot, a in raw["apps"].items()
                },
            )
        for bid, raw in state["bookings"].items():
            self.bookings[bid] = Booking(
                id=bid,
                user=raw["user"],
                project=raw["project"],
                cluster=raw["cluster"],
                gpu_count=raw["gpu_count"],
                start=raw["start"],
                end=raw["end"],
                status=BookingStatus(raw["status"]),
            )
        for cid, cluster in self.clusters.items():
            self.calendars[cid] = BookingCalendar(
                cluster=cid, bookable_capacity=cluster.bookable_gpus
            )
        for bid, booking in self.bookings.items():
            if booking.status in (BookingStatus.GRANTED, BookingStatus.ACTIVE):
                self.calendars[booking.cluster].add(booking)
        for pod_id, raw in state["pods"].items():
            grant = raw["gpu_grant"]
            self.pods[pod_id] = WorkspacePod(
                id=pod_id,
                user=raw["user"],
                project=raw["project"],
                cluster=raw["cluster"],
                gpu_grant=GpuGrant(booking=grant["booking"], gpus=grant["gpus"])
                if grant
                else None,
                phase=PodPhase(raw["phase"]),
            )
        for pid, raw in state["decisions"].items():
            self.decisions[pid] = PlacementDecision(
                project=raw["project"],
                outcome=Outcome(raw["outcome"]),
                cluster=raw["cluster"],
                reason=raw["reason"],
                score_trace=tuple(
                    ScoreEntry(
                        cluster=entry["cluster"],
                        feasible=entry["feasible"],
                        leftover=ResourceVector.from_dict(entry["leftover"]),
                    )
                    for entry in raw["score_trace"]
                ),
                state_version=raw["state_version"],
            )
        self.pending_intents = {
            cid: list(intents) for cid, intents in state["pending_intents"].items()
        }
        for cid, raw in state["monitor"].items():
            self.monitor.register(cid)
            record = self.monitor.records[cid]
            record.last_accepted = raw["last_accepted"]
            for hb in raw["history"]:
                record.history.append(
                    Heartbeat(
                        cluster=cid,
                        at=hb["at"],
                        gpus_in_use=hb["gpus_in_use"],
                        pods_running=hb["pods_running"],
                        committed=ResourceVector.from_dict(hb["committed"]),
                    )
                )
        for app, history in state["registry"].items():
            self.registry.releases[app] = [
                release_ops.Release(
                    app=app,
                    version=r["version"],
                    digest=r["digest"],
                    published_at=r["published_at"],
                )
                for r in history
            ]

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.state_dict()).encode()).hexdigest()

    def project_digest(self, project_id: ProjectId) -> str:
        """Digest of every piece of state keyed by one project: its
        record, namespace, bookings, and its members' pods. Used by the
        isolation property tests."""
        project = self.projects.get(project_id)
        state = self.state_dict()
        scoped = {
            "project": state["projects"].get(project_id),
            "namespace": state["namespaces"].get(project_id),
            "bookings": {
                bid: raw for bid, raw in state["bookings"].items() if raw["project"] == project_id
            },
            "pods": {
                pid: raw for pid, raw in state["pods"].items() if raw["project"] == project_id
            },
            "committed_share": state["projects"].get(project_id, {}).get("request"),
            "decision": state["decisions"].get(project_id),
            "members": sorted(project.members) if project else None,
        }
        return hashlib.sha256(canonical_json(scoped).encode()).hexdigest()


def canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))
