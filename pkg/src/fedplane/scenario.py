"""Line-oriented scenario files and their deterministic execution.

Format: blank lines and `#` comments are ignored. Header directives
(no leading time) configure the run; every other line is one timed
command, `<time> <command> <args...>`, with times non-decreasing.

    seed 42
    policy interval=10 threshold=3 poll=30 mode=auto
    cluster kuh gpus=2 cpu=64 mem=388 bookable=2 apps=workspace:1.0.0
    0   register-project brain-mets members=u1,u2 gpus=2 cpu=16 mem=64
    5   book u1 brain-mets gpus=2 start=10 end=200
    10  spawn u1 brain-mets gpu=yes
    200 assert pod pod-0002 phase=Respawned gpus=0

Command failures (conflicts, denials) become `command-failed` records
and the run continues; a failed `assert` stops the run and stamps the
trace with the violating state digest.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from typing import Optional

from .errors import ControlPlaneError, ScenarioError
from .model import AvailabilityPolicy, ResourceVector
from .plane import ControlPlane, PlaneConfig
from .releases import SyncPolicy
from .sim import Simulation, Trace


@dataclass(frozen=True)
class ClusterSpec:
    id: str
    capacity: ResourceVector
    bookable_gpus: int
    installed: dict[str, str] = field(default_factory=dict)
    display_name: str = ""


@dataclass(frozen=True)
class Command:
    at: int
    name: str
    args: tuple[str, ...]
    kwargs: dict[str, str]
    line: int

    def text(self) -> str:
        parts = [self.name, *self.args]
        parts.extend(f"{k}={v}" for k, v in self.kwargs.items())
        return " ".join(parts)


@dataclass
class Scenario:
    seed: int = 0
    clusters: list[ClusterSpec] = field(default_factory=list)
    script: list[Command] = field(default_factory=list)
    policy: Optional[PlaneConfig] = None


COMMANDS = {
    "register-project",
    "book",
    "cancel-booking",
    "spawn",
    "partition",
    "publish",
    "sweep",
    "advance",
    "assert",
}


def _split_kv(tokens: list[str]) -> tuple[list[str], dict[str, str]]:
    args, kwargs = [], {}
    for token in tokens:
        if "=" in token:
            key, value = token.split("=", 1)
            kwargs[key] = value
        else:
            args.append(token)
    return args, kwargs


def _int(value: str, what: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ScenarioError(f"line {line}: {what} must be an integer, got {value!r}") from None


def _parse_apps(raw: str, line: int) -> dict[str, str]:
    installed = {}
    for part in raw.split(","):
        if not part:
            continue
        if ":" not in part:
            raise ScenarioError(f"line {line}: apps entries look like name:version, got {part!r}")
        app, version = part.split(":", 1)
        installed[app] = version
    return installed


def parse_scenario(text: str) -> Scenario:
    scenario = Scenario()
    policy_kwargs: dict[str, str] = {}
    seen_clusters: set[str] = set()
    last_at: Optional[int] = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = shlex.split(stripped)
        head = tokens[0]
        if head == "seed":
            if len(tokens) != 2:
                raise ScenarioError(f"line {line_no}: seed takes one integer")
            scenario.seed = _int(tokens[1], "seed", line_no)
            continue
        if head == "policy":
            _, policy_kwargs = _split_kv(tokens[1:])
            continue
        if head == "cluster":
            args, kwargs = _split_kv(tokens[1:])
            if len(args) != 1:
                raise ScenarioError(f"line {line_no}: cluster takes exactly one id")
            cluster_id = args[0]
            if cluster_id in seen_clusters:
                raise ScenarioError(f"line {line_no}: duplicate cluster id {cluster_id!r}")
            seen_clusters.add(cluster_id)
            gpus = _int(kwargs.get("gpus", "0"), "gpus", line_no)
            scenario.clusters.append(
                ClusterSpec(
                    id=cluster_id,
                    capacity=ResourceVector(
                        gpus=gpus,
                        cpu_cores=_int(kwargs.get("cpu", "0"), "cpu", line_no),
                        memory_gib=_int(kwargs.get("mem", "0"), "mem", line_no),
                    ),
                    bookable_gpus=_int(kwargs.get("bookable", str(gpus)), "bookable", line_no),
                    installed=_parse_apps(kwargs.get("apps", ""), line_no),
                    display_name=kwargs.get("name", cluster_id),
                )
            )
            continue
        # Everything else is a timed command.
        at = _int(head, "command time", line_no)
        if at < 0:
            raise ScenarioError(f"line {line_no}: command time must be >= 0")
        if last_at is not None and at < last_at:
            raise ScenarioError(f"line {line_no}: commands must be time-ordered ({at} < {last_at})")
        last_at = at
        if len(tokens) < 2:
            raise ScenarioError(f"line {line_no}: timed line needs a command")
        name = tokens[1]
        if name not in COMMANDS:
            raise ScenarioError(f"line {line_no}: unknown command {name!r}")
        args, kwargs = _split_kv(tokens[2:])
        command = Command(at=at, name=name, args=tuple(args), kwargs=kwargs, line=line_no)
        _validate_command(command)
        scenario.script.append(command)
    if policy_kwargs:
        scenario.policy = _parse_policy(policy_kwargs)
    return scenario


def _parse_policy(kwargs: dict[str, str]) -> PlaneConfig:
    mode_raw = kwargs.get("mode", "auto")
    if mode_raw.startswith("scheduled:"):
        mode, period = "scheduled", int(mode_raw.split(":", 1)[1])
    elif mode_raw in ("auto", "scheduled"):
        mode, period = mode_raw, int(kwargs.get("period", "0"))
    else:
        raise ScenarioError(f"unknown sync mode {mode_raw!r}")
    return PlaneConfig(
        availability=AvailabilityPolicy(
            interval=int(kwargs.get("interval", "10")),
            miss_threshold=int(kwargs.get("threshold", "3")),
        ),
        sync=SyncPolicy(mode=mode, period=period, poll_interval=int(kwargs.get("poll", "30"))),
        max_booking_seconds=int(kwargs.get("max_booking", str(14 * 86400))),
        max_future_bookings_per_user=int(kwargs.get("max_future", "4")),
    )


def _validate_command(cmd: Command) -> None:
    need = {
        "register-project": 1,
        "book": 2,
        "cancel-booking": 2,
        "spawn": 2,
        "partition": 1,
        "publish": 2,
        "sweep": 0,
        "advance": 0,
    }
    if cmd.name in need and len(cmd.args) != need[cmd.name]:
        raise ScenarioError(
            f"line {cmd.line}: {cmd.name} takes {need[cmd.name]} positional argument(s)"
        )
    if cmd.name == "partition":
        start = _int(cmd.kwargs.get("from", ""), "from", cmd.line)
        end = _int(cmd.kwargs.get("to", ""), "to", cmd.line)
        if start >= end:
            raise ScenarioError(f"line {cmd.line}: partition requires from < to")
        if start < cmd.at:
            raise ScenarioError(f"line {cmd.line}: partition cannot start before the command time")
    if cmd.name == "assert" and not cmd.args:
        raise ScenarioError(f"line {cmd.line}: assert needs a subject")


def run_scenario(scenario: Scenario, config: Optional[PlaneConfig] = None) -> Trace:
    """Execute the script against a fresh control plane. Deterministic
    for a fixed scenario: the returned trace is byte-identical across
    runs."""
    plane = ControlPlane(config or scenario.policy or PlaneConfig())
    sim = Simulation(plane)
    sim.record("init", ("seed", scenario.seed))
    for spec in scenario.clusters:
        sim.add_cluster(
            spec.id,
            spec.capacity,
            spec.bookable_gpus,
            spec.installed,
            display_name=spec.display_name,
        )
    for command in scenario.script:
        sim.advance_to(command.at)
        if command.name == "assert":
            ok, detail = _check_assert(sim, command)
            if ok:
                sim.record("assert-ok", ("expr", command.text()))
            else:
                sim.record("assert-failed", ("expr", command.text()), ("detail", detail))
                sim.record_digest()
                sim.trace.ok = False
                sim.trace.failure = f"line {command.line}: assert failed: {detail}"
                break
            continue
        try:
            _execute(sim, command)
        except ControlPlaneError as exc:
            sim.record(
                "command-failed",
                ("op", command.name),
                ("error", type(exc).__name__),
                ("detail", str(exc)),
            )
        sim.record_digest()
    sim.record("scenario-end", ("ok", sim.trace.ok))
    return sim.trace


def _request_vector(kwargs: dict[str, str], line: int) -> ResourceVector:
    return ResourceVector(
        gpus=_int(kwargs.get("gpus", "0"), "gpus", line),
        cpu_cores=_int(kwargs.get("cpu", "0"), "cpu", line),
        memory_gib=_int(kwargs.get("mem", "0"), "mem", line),
    )


def _project_id(sim: Simulation, name: str):
    from .errors import NotFoundError

    project_id = sim.plane.project_names.get(name)
    if project_id is None:
        raise NotFoundError("project", name)
    return project_id


def _execute(sim: Simulation, cmd: Command) -> None:
    plane = sim.plane
    now = sim.clock.now()
    if cmd.name == "register-project":
        name = cmd.args[0]
        members = set(filter(None, cmd.kwargs.get("members", "").split(",")))
        project, decision = plane.register_project(
            name, members, _request_vector(cmd.kwargs, cmd.line), now, pin=cmd.kwargs.get("pin")
        )
        fields = [
            ("project", project.id),
            ("name", name),
            ("outcome", decision.outcome.value),
        ]
        if decision.placed:
            fields.append(("cluster", decision.cluster))
        else:
            fields.append(("reason", decision.reason))
        sim.record("project-registered", *fields)
    elif cmd.name == "book":
        user, project_name = cmd.args
        booking = plane.request_booking(
            user,
            _project_id(sim, project_name),
            _int(cmd.kwargs.get("gpus", "1"), "gpus", cmd.line),
            _int(cmd.kwargs.get("start", ""), "start", cmd.line),
            _int(cmd.kwargs.get("end", ""), "end", cmd.line),
            now,
        )
        sim.record(
            "booking-granted",
            ("booking", booking.id),
            ("user", user),
            ("project", booking.project),
            ("cluster", booking.cluster),
            ("gpus", booking.gpu_count),
            ("start", booking.start),
            ("end", booking.end),
        )
    elif cmd.name == "cancel-booking":
        user, booking_id = cmd.args
        booking, respawns = plane.cancel_booking(booking_id, user, now)
        sim.record("booking-cancelled", ("booking", booking.id), ("by", user))
        for action in respawns:
            sim.record(
                "pod-respawned",
                ("old", action.old_pod),
                ("new", action.new_pod),
                ("booking", action.booking),
                ("cluster", action.cluster),
            )
    elif cmd.name == "spawn":
        user, project_name = cmd.args
        wants_gpu = cmd.kwargs.get("gpu", "no") in ("yes", "true", "1")
        pod, admission = plane.spawn_workspace(user, _project_id(sim, project_name), wants_gpu, now)
        fields = [
            ("pod", pod.id),
            ("user", user),
            ("project", pod.project),
            ("verdict", admission.verdict),
        ]
        if admission.granted_gpu:
            fields.extend([("booking", admission.booking), ("gpus", admission.gpus)])
        sim.record("pod-spawned", *fields)
    elif cmd.name == "partition":
        sim.partition(
            cmd.args[0],
            _int(cmd.kwargs["from"], "from", cmd.line),
            _int(cmd.kwargs["to"], "to", cmd.line),
        )
    elif cmd.name == "publish":
        app, version = cmd.args
        digest = cmd.kwargs.get("digest", f"sha256:{app}-{version}")
        release = plane.publish_release(app, version, digest, now)
        sim.record(
            "release-published", ("app", release.app), ("version", release.version)
        )
    elif cmd.name == "sweep":
        sim.record_sweep(plane.sweep(now), now)
    elif cmd.name == "advance":
        pass  # advance_to already ran for this command's time
    else:  # pragma: no cover - parser rejects unknown commands
        raise ScenarioError(f"unknown command {cmd.name!r}")


def _check_assert(sim: Simulation, cmd: Command) -> tuple[bool, str]:
    plane = sim.plane
    now = sim.clock.now()
    subject = cmd.args[0]
    try:
        if subject == "project":
            project = plane._project(_project_id(sim, cmd.args[1]))  # noqa: SLF001
            checks = {"state": project.state.value, "cluster": project.placement or "none"}
        elif subject == "booking":
            checks_booking = plane._booking(cmd.args[1])  # noqa: SLF001
            checks = {"status": checks_booking.status.value}
        elif subject == "pod":
            pod = plane.pods.get(cmd.args[1])
            if pod is None:
                return False, f"pod {cmd.args[1]} does not exist"
            checks = {
                "phase": pod.phase.value,
                "gpus": str(pod.gpu_grant.gpus if pod.gpu_grant else 0),
            }
        elif subject == "cluster":
            cluster = plane._cluster(cmd.args[1])  # noqa: SLF001
            checks = {"available": str(plane.availability(cluster.id, now).value == "Available").lower()}
            for app, version in cluster.installed.items():
                checks[app] = version
        elif subject == "drift":
            report = plane.drift_report()
            entry = report.get(cmd.args[1], {}).get(cmd.args[2])
            if entry is None:
                return False, f"no drift entry for {cmd.args[1]}/{cmd.args[2]}"
            checks = {
                "behind": str(entry["behind_by"]),
                "latest": entry["latest"],
                "installed": entry["installed"],
            }
        elif subject == "overlap":
            from .booking import max_overlap

            cal = plane.calendars.get(cmd.args[1])
            if cal is None:
                return False, f"no calendar for cluster {cmd.args[1]}"
            peak = max_overlap(
                cal,
                _int(cmd.kwargs["start"], "start", cmd.line),
                _int(cmd.kwargs["end"], "end", cmd.line),
            )
            checks = {"max": str(peak), "start": cmd.kwargs["start"], "end": cmd.kwargs["end"]}
        else:
            return False, f"unknown assert subject {subject!r}"
    except ControlPlaneError as exc:
        return False, str(exc)
    for key, expected in cmd.kwargs.items():
        if subject == "overlap" and key in ("start", "end"):
            continue
        actual = checks.get(key)
        if actual is None:
            return False, f"unknown assert key {key!r} for {subject}"
        if str(actual) != expected:
            return False, f"{subject} {key}: expected {expected!r}, got {actual!r}"
    return True, ""
