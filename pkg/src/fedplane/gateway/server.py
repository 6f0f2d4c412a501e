"""HTTP/JSON API over the federation store.

Error mapping: validation -> 400, authorization Deny -> 403,
not-found -> 404, conflict or stale decision -> 409. Unauthenticated
requests get 401. Mutating endpoints honor the `Idempotency-Key`
header: a replayed key returns the original response unchanged.
"""

from __future__ import annotations

from typing import Optional

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse

from ..booking import max_overlap
from ..clock import ManualClock, WallClock
from ..errors import (
    AuthorizationError,
    BookingConflictError,
    ConflictError,
    ControlPlaneError,
    NotFoundError,
    ValidationError,
)
from ..model import ResourceVector
from ..sim import SimClock, Simulation
from .auth import Identity, TokenTable
from .config import GatewayConfig
from .store import Store, StoreSimOps, booking_to_dict, pod_to_dict, project_to_dict


def _status_for(exc: ControlPlaneError) -> int:
    if isinstance(exc, AuthorizationError):
        return 403
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, ConflictError):
        return 409
    if isinstance(exc, ValidationError):
        return 400
    return 500


def _error_body(exc: ControlPlaneError) -> dict:
    body = {"error": type(exc).__name__, "detail": str(exc)}
    if isinstance(exc, ValidationError):
        body["violations"] = exc.violations
    if isinstance(exc, BookingConflictError):
        body["conflict"] = {
            "start": exc.start,
            "end": exc.end,
            "capacity": exc.capacity,
            "requested": exc.requested,
        }
    return body


class Gateway:
    """Bundles the store, token table, and (in simulated mode) the
    embedded simulation behind the FastAPI app."""

    def __init__(
        self,
        store: Store,
        tokens: TokenTable,
        simulation: Optional[Simulation] = None,
    ):
        self.store = store
        self.tokens = tokens
        self.simulation = simulation

    @property
    def plane(self):
        return self.store.plane


def build_gateway(config: GatewayConfig) -> Gateway:
    tokens = TokenTable()
    tokens_path = config.resolved_tokens_path()
    if tokens_path is not None:
        tokens = TokenTable.from_file(tokens_path)
    if config.clock == "simulated":
        clock = SimClock()
        store = Store(
            config.resolved_data_dir(),
            clock,
            config.plane_config(),
            snapshot_every=config.snapshot_every,
        )
        simulation = Simulation(store.plane, clock=clock, ops=StoreSimOps(store))
        for cluster_id in store.plane.clusters:
            simulation.attach_cluster(cluster_id)
        for booking in store.plane.bookings.values():
            if booking.status.value in ("Granted", "Active"):
                simulation.schedule(max(booking.end, clock.now()), "booking-expiry", booking.id)
        return Gateway(store, tokens, simulation)
    store = Store(
        config.resolved_data_dir(),
        WallClock(),
        config.plane_config(),
        snapshot_every=config.snapshot_every,
    )
    return Gateway(store, tokens)


def create_app(gateway: Gateway) -> FastAPI:
    app = FastAPI(title="fedplane gateway", docs_url=None, redoc_url=None)
    store = gateway.store
    plane = gateway.plane

    @app.exception_handler(ControlPlaneError)
    async def control_plane_error(request: Request, exc: ControlPlaneError):
        return JSONResponse(status_code=_status_for(exc), content=_error_body(exc))

    def identity(authorization: Optional[str] = Header(default=None)) -> Identity:
        token = None
        if authorization and authorization.startswith("Bearer "):
            token = authorization.removeprefix("Bearer ")
        resolved = gateway.tokens.resolve(token)
        if resolved is None:
            raise AuthenticationRequired()
        return resolved

    class AuthenticationRequired(Exception):
        pass

    @app.exception_handler(AuthenticationRequired)
    async def authentication_required(request: Request, exc: AuthenticationRequired):
        return JSONResponse(
            status_code=401, content={"error": "Unauthenticated", "detail": "unknown bearer token"}
        )

    def require_admin(actor: Identity) -> None:
        if not actor.admin:
            raise AuthorizationError("federation-admin role required")

    def require_member(actor: Identity, project_id: str, action: str) -> None:
        """Admins get read access everywhere; everyone else must be a
        member. Membership itself is the plane's equal-privileges rule."""
        if actor.admin:
            if project_id not in plane.projects:
                raise NotFoundError("project", project_id)
            return
        decision = plane.authorize(actor.user, project_id, action)
        if not decision.allowed:
            raise AuthorizationError(decision.reason)

    def body_of(payload: Optional[dict]) -> dict:
        if payload is None or not isinstance(payload, dict):
            raise ValidationError("request body must be a JSON object")
        return payload

    # ------------------------------------------------------------- projects

    @app.post("/projects")
    def create_project(
        payload: dict = None,
        actor: Identity = Depends(identity),
        idempotency_key: Optional[str] = Header(default=None, alias="Idempotency-Key"),
    ):
        data = body_of(payload)
        members = data.get("members")
        if not isinstance(members, list) or not members:
            raise ValidationError("members must be a non-empty list")
        if not actor.admin and actor.user not in members:
            raise ValidationError("the registering user must be a project member")
        request = ResourceVector.from_dict(data.get("request") or {})
        status, body = store.apply(
            actor.user,
            "register-project",
            {
                "name": data.get("name", ""),
                "members": sorted(set(members)),
                "request": request.to_dict(),
                "pin": data.get("pin"),
            },
            idempotency_key,
        )
        return JSONResponse(status_code=status, content=body)

    @app.get("/projects/{project_id}")
    def get_project(project_id: str, actor: Identity = Depends(identity)):
        require_member(actor, project_id, "view-project")
        return project_to_dict(plane.projects[project_id], plane)

    @app.delete("/projects/{project_id}")
    def delete_project(
        project_id: str,
        actor: Identity = Depends(identity),
        idempotency_key: Optional[str] = Header(default=None, alias="Idempotency-Key"),
    ):
        require_admin(actor)
        status, body = store.apply(
            actor.user, "delete-project", {"project": project_id}, idempotency_key
        )
        return JSONResponse(status_code=status, content=body)

    @app.get("/projects")
    def list_projects(actor: Identity = Depends(identity)):
        visible = [
            project_to_dict(project, plane)
            for project in plane.projects.values()
            if actor.admin or actor.user in project.members
        ]
        return {"projects": sorted(visible, key=lambda p: p["id"])}

    # ------------------------------------------------------------- clusters

    @app.get("/clusters")
    def list_clusters(actor: Identity = Depends(identity)):
        return {
            "clusters": [
                {
                    "id": cluster.id,
                    "display_name": cluster.display_name,
                    "capacity": cluster.capacity.to_dict(),
                    "bookable_gpus": cluster.bookable_gpus,
                    "installed": dict(sorted(cluster.installed.items())),
                }
                for cluster in plane.clusters.values()
            ]
        }

    @app.post("/clusters")
    def add_cluster(
        payload: dict = None,
        actor: Identity = Depends(identity),
        idempotency_key: Optional[str] = Header(default=None, alias="Idempotency-Key"),
    ):
        require_admin(actor)
        data = body_of(payload)
        capacity = ResourceVector.from_dict(data.get("capacity") or {})
        bookable = data.get("bookable_gpus", capacity.gpus)
        status, body = store.apply(
            actor.user,
            "add-cluster",
            {
                "id": data.get("id", ""),
                "display_name": data.get("display_name"),
                "capacity": capacity.to_dict(),
                "bookable_gpus": bookable,
                "installed": data.get("installed") or {},
            },
            idempotency_key,
        )
        if gateway.simulation is not None:
            gateway.simulation.attach_cluster(body["id"])
        return JSONResponse(status_code=status, content=body)

    @app.get("/federation/status")
    def federation_status(actor: Identity = Depends(identity)):
        with store.lock:
            return plane.federation_snapshot(store.clock.now())

    @app.get("/clusters/{cluster_id}/drift")
    def cluster_drift(cluster_id: str, actor: Identity = Depends(identity)):
        if cluster_id not in plane.clusters:
            raise NotFoundError("cluster", cluster_id)
        return {"cluster": cluster_id, "drift": plane.drift_report()[cluster_id]}

    @app.get("/clusters/{cluster_id}/calendar")
    def cluster_calendar(cluster_id: str, actor: Identity = Depends(identity)):
        calendar = plane.calendars.get(cluster_id)
        if calendar is None:
            raise NotFoundError("cluster", cluster_id)
        return {
            "cluster": cluster_id,
            "bookable_capacity": calendar.bookable_capacity,
            "entries": [booking_to_dict(b) for b in calendar.live_entries()],
        }

    @app.post("/clusters/{cluster_id}/heartbeat")
    def cluster_heartbeat(
        cluster_id: str,
        payload: dict = None,
        actor: Identity = Depends(identity),
    ):
        require_admin(actor)
        data = payload if isinstance(payload, dict) else {}
        status, body = store.apply(
            actor.user,
            "record-heartbeat",
            {
                "cluster": cluster_id,
                "at": data.get("at", store.clock.now()),
                "gpus_in_use": data.get("gpus_in_use", 0),
                "pods_running": data.get("pods_running", 0),
                "committed": data.get("committed", {}),
            },
        )
        return JSONResponse(status_code=status, content=body)

    @app.post("/clusters/{cluster_id}/poll")
    def cluster_poll(cluster_id: str, actor: Identity = Depends(identity)):
        require_admin(actor)
        status, body = store.apply(actor.user, "poll-cluster", {"cluster": cluster_id})
        return JSONResponse(status_code=status, content=body)

    # ------------------------------------------------------------- bookings

    @app.post("/bookings")
    def create_booking(
        payload: dict = None,
        actor: Identity = Depends(identity),
        idempotency_key: Optional[str] = Header(default=None, alias="Idempotency-Key"),
    ):
        data = body_of(payload)
        status, body = store.apply(
            actor.user,
            "request-booking",
            {
                "user": actor.user,
                "project": data.get("project", ""),
                "gpu_count": data.get("gpu_count", data.get("gpus", 0)),
                "start": data.get("start"),
                "end": data.get("end"),
            },
            idempotency_key,
        )
        return JSONResponse(status_code=status, content=body)

    @app.get("/bookings")
    def list_bookings(
        user: Optional[str] = None,
        project: Optional[str] = None,
        actor: Identity = Depends(identity),
    ):
        if project is not None:
            require_member(actor, project, "list-bookings")
        results = []
        for booking_id in sorted(plane.bookings):
            booking = plane.bookings[booking_id]
            if user is not None and booking.user != user:
                continue
            if project is not None and booking.project != project:
                continue
            if project is None and not actor.admin:
                owner = plane.projects.get(booking.project)
                if owner is None or actor.user not in owner.members:
                    continue
            results.append(booking_to_dict(booking))
        return {"bookings": results}

    @app.delete("/bookings/{booking_id}")
    def cancel_booking(
        booking_id: str,
        actor: Identity = Depends(identity),
        idempotency_key: Optional[str] = Header(default=None, alias="Idempotency-Key"),
    ):
        status, body = store.apply(
            actor.user,
            "cancel-booking",
            {"booking": booking_id, "by": actor.user, "admin": actor.admin},
            idempotency_key,
        )
        return JSONResponse(status_code=status, content=body)

    # ------------------------------------------------------------- workspaces

    @app.post("/workspaces")
    def spawn_workspace(
        payload: dict = None,
        actor: Identity = Depends(identity),
        idempotency_key: Optional[str] = Header(default=None, alias="Idempotency-Key"),
    ):
        data = body_of(payload)
        status, body = store.apply(
            actor.user,
            "spawn-workspace",
            {
                "user": actor.user,
                "project": data.get("project", ""),
                "wants_gpu": bool(data.get("wants_gpu", False)),
            },
            idempotency_key,
        )
        return JSONResponse(status_code=status, content=body)

    @app.get("/workspaces")
    def list_workspaces(
        project: Optional[str] = None,
        actor: Identity = Depends(identity),
    ):
        if project is not None:
            require_member(actor, project, "list-workspaces")
        results = []
        for pod_id in sorted(plane.pods):
            pod = plane.pods[pod_id]
            if project is not None and pod.project != project:
                continue
            if project is None and not actor.admin:
                owner = plane.projects.get(pod.project)
                if owner is None or actor.user not in owner.members:
                    continue
            results.append(pod_to_dict(pod))
        return {"workspaces": results}

    # ------------------------------------------------------------- releases

    @app.post("/releases")
    def publish_release(
        payload: dict = None,
        actor: Identity = Depends(identity),
        idempotency_key: Optional[str] = Header(default=None, alias="Idempotency-Key"),
    ):
        require_admin(actor)
        data = body_of(payload)
        app_name = data.get("app", "")
        version = data.get("version", "")
        status, body = store.apply(
            actor.user,
            "publish-release",
            {
                "app": app_name,
                "version": version,
                "digest": data.get("digest") or f"sha256:{app_name}-{version}",
            },
            idempotency_key,
        )
        return JSONResponse(status_code=status, content=body)

    @app.get("/releases")
    def list_releases(actor: Identity = Depends(identity)):
        return {
            "releases": {
                app: [
                    {"version": r.version, "digest": r.digest, "published_at": r.published_at}
                    for r in history
                ]
                for app, history in sorted(plane.registry.releases.items())
            }
        }

    # ------------------------------------------------------------- admin ops

    @app.post("/sweep")
    def manual_sweep(actor: Identity = Depends(identity)):
        require_admin(actor)
        status, body = store.apply(actor.user, "sweep", {})
        return JSONResponse(status_code=status, content=body)

    # ------------------------------------------------------------- simulation

    @app.post("/sim/advance")
    def sim_advance(payload: dict = None, actor: Identity = Depends(identity)):
        require_admin(actor)
        if gateway.simulation is None:
            raise ValidationError("gateway is not running a simulated clock")
        data = body_of(payload)
        to = data.get("to")
        if not isinstance(to, int):
            raise ValidationError("'to' must be an integer timestamp")
        with store.lock:
            fired = gateway.simulation.advance_to(to)
        return {"now": store.clock.now(), "fired": len(fired)}

    @app.post("/sim/partition")
    def sim_partition(payload: dict = None, actor: Identity = Depends(identity)):
        require_admin(actor)
        if gateway.simulation is None:
            raise ValidationError("gateway is not running a simulated clock")
        data = body_of(payload)
        with store.lock:
            gateway.simulation.partition(
                data.get("cluster", ""), data.get("from"), data.get("to")
            )
        return {"partitions": gateway.simulation.partitions.get(data.get("cluster", ""), [])}

    return app


def serve(config: GatewayConfig) -> None:
    """Recover state and serve HTTP until interrupted. Refuses to start
    on a corrupt event log, reporting the first bad seq."""
    import uvicorn

    gateway = build_gateway(config)
    app = create_app(gateway)
    host, _, port = config.listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
