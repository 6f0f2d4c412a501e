"""Shared domain types: resource vectors, identities, and the
project-scoped authorization rule.

Every other module depends on this one and on nothing else. Values are
immutable once constructed unless a field is explicitly a lifecycle field
(booking status, pod phase, namespace app state); those are mutated only
by their owning module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

from .errors import InvalidTransitionError, NotFoundError, ValidationError

# Opaque identifiers. Case-sensitive strings, max 63 chars, never reused
# after deletion within one control-plane lifetime.
ClusterId = str
ProjectId = str
UserId = str
BookingId = str
PodId = str

MAX_IDENTIFIER_LEN = 63

# Application slots every namespace is provisioned with. Slot name doubles
# as the opaque application name it hosts.
DEFAULT_APP_SLOTS = (
    "workspace",
    "experiment-tracker",
    "object-store",
    "image-archive",
    "annotation",
    "pipeline-engine",
)


def validate_identifier(value: str, kind: str = "identifier") -> str:
    if not isinstance(value, str) or not value:
        raise ValidationError(f"{kind} must be a non-empty string")
    if len(value) > MAX_IDENTIFIER_LEN:
        raise ValidationError(f"{kind} exceeds {MAX_IDENTIFIER_LEN} characters")
    return value


@dataclass(frozen=True)
class ResourceVector:
    """(GPUs, CPU cores, memory GiB) triple used for capacity, requests,
    and allocations. Components are non-negative integers; comparison is
    the componentwise partial order."""

    gpus: int = 0
    cpu_cores: int = 0
    memory_gib: int = 0

    def __post_init__(self):
        violations = validate_resource_vector(self.gpus, self.cpu_cores, self.memory_gib)
        if violations:
            raise ValidationError(violations)

    def __le__(self, other: "ResourceVector") -> bool:
        return (
            self.gpus <= other.gpus
            and self.cpu_cores <= other.cpu_cores
            and self.memory_gib <= other.memory_gib
        )

    def __ge__(self, other: "ResourceVector") -> bool:
        return other.__le__(self)

    def __add__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(
            self.gpus + other.gpus,
            self.cpu_cores + other.cpu_cores,
            self.memory_gib + other.memory_gib,
        )

    def __sub__(self, other: "ResourceVector") -> "ResourceVector":
        """Exact componentwise difference; raises if any component would
        go negative (that would mean an accounting invariant broke)."""
        return ResourceVector(
            self.gpus - other.gpus,
            self.cpu_cores - other.cpu_cores,
            self.memory_gib - other.memory_gib,
        )

    def saturating_sub(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(
            max(0, self.gpus - other.gpus),
            max(0, self.cpu_cores - other.cpu_cores),
            max(0, self.memory_gib - other.memory_gib),
        )

    def to_dict(self) -> dict:
        return {"gpus": self.gpus, "cpu_cores": self.cpu_cores, "memory_gib": self.memory_gib}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ResourceVector":
        if not isinstance(data, Mapping):
            raise ValidationError("resource vector must be an object")
        known = {
            "gpus": "gpus",
            "cpu_cores": "cpu_cores",
            "cpu": "cpu_cores",
            "memory_gib": "memory_gib",
            "mem": "memory_gib",
        }
        parsed = {"gpus": 0, "cpu_cores": 0, "memory_gib": 0}
        for key, raw in data.items():
            if key not in known:
                raise ValidationError(f"unknown resource component {key!r}")
            if not isinstance(raw, int) or isinstance(raw, bool):
                raise ValidationError(f"resource component {key!r} must be an integer")
            parsed[known[key]] = raw
        return cls(**parsed)


def validate_resource_vector(gpus: object, cpu_cores: object, memory_gib: object) -> list[str]:
    """Total function: returns every violated constraint for the raw
    components (empty list means ok). The zero vector is legal; a project
    may hold only storage apps."""
    violations = []
    for name, value in (("gpus", gpus), ("cpu_cores", cpu_cores), ("memory_gib", memory_gib)):
        if not isinstance(value, int) or isinstance(value, bool):
            violations.append(f"{name} must be an integer")
        elif value < 0:
            violations.append(f"{name} must be >= 0")
    return violations


class Availability(str, Enum):
    AVAILABLE = "Available"
    UNAVAILABLE = "Unavailable"


@dataclass
class Cluster:
    """A federated member: capacity, heartbeat freshness, installed
    application versions."""

    id: ClusterId
    display_name: str
    capacity: ResourceVector
    bookable_gpus: int
    last_heartbeat: Optional[int] = None
    installed: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        validate_identifier(self.id, "cluster id")
        if not isinstance(self.bookable_gpus, int) or isinstance(self.bookable_gpus, bool):
            raise ValidationError("bookable_gpus must be an integer")
        if not 0 <= self.bookable_gpus <= self.capacity.gpus:
            raise ValidationError("bookable_gpus must satisfy 0 <= bookable_gpus <= capacity.gpus")

    def availability(self, now: int, policy: "AvailabilityPolicy") -> Availability:
        """Pure function of the last accepted heartbeat, current time, and
        the monitor policy. Unavailable until the first heartbeat arrives."""
        if self.last_heartbeat is None:
            return Availability.UNAVAILABLE
        if now - self.last_heartbeat > policy.interval * policy.miss_threshold:
            return Availability.UNAVAILABLE
        return Availability.AVAILABLE


@dataclass(frozen=True)
class AvailabilityPolicy:
    """Fixed-threshold missed-heartbeat detector settings."""

    interval: int = 10
    miss_threshold: int = 3

    def __post_init__(self):
        if self.interval <= 0:
            raise ValidationError("heartbeat interval must be > 0")
        if self.miss_threshold < 1:
            raise ValidationError("miss_threshold must be >= 1")


class ProjectState(str, Enum):
    PENDING = "Pending"
    PLACED = "Placed"
    REJECTED = "Rejected"


@dataclass
class Project:
    """A tenant: members share identical privileges over the project's
    resources; placement binds it to exactly one cluster."""

    id: ProjectId
    name: str
    members: frozenset[UserId]
    request: ResourceVector
    placement: Optional[ClusterId] = None
    state: ProjectState = ProjectState.PENDING

    def __post_init__(self):
        validate_identifier(self.id, "project id")
        if not self.name:
            raise ValidationError("project name must be non-empty")
        if not self.members:
            raise ValidationError("project members must be non-empty")
        for member in self.members:
            validate_identifier(member, "user id")
        if (self.state == ProjectState.PLACED) != (self.placement is not None):
            raise ValidationError("state is Placed iff placement is set")


class AppState(str, Enum):
    DEPLOYING = "Deploying"
    READY = "Ready"


@dataclass
class AppSlot:
    name: str
    version: str
    state: AppState = AppState.DEPLOYING


@dataclass
class Namespace:
    """Isolated per-project environment. quota copies the project request
    at placement time and stays immutable until an explicit quota change."""

    project: ProjectId
    cluster: ClusterId
    quota: ResourceVector
    apps: dict[str, AppSlot] = field(default_factory=dict)


class BookingStatus(str, Enum):
    GRANTED = "Granted"
    ACTIVE = "Active"
    EXPIRED = "Expired"
    CANCELLED = "Cancelled"


# Legal lifecycle moves. Granted->Expired covers a reservation whose end
# passes unused; everything else is the admit/sweep/cancel triangle.
_BOOKING_TRANSITIONS = {
    (BookingStatus.GRANTED, BookingStatus.ACTIVE),
    (BookingStatus.GRANTED, BookingStatus.CANCELLED),
    (BookingStatus.GRANTED, BookingStatus.EXPIRED),
    (BookingStatus.ACTIVE, BookingStatus.EXPIRED),
    (BookingStatus.ACTIVE, BookingStatus.CANCELLED),
}


@dataclass
class Booking:
    """A time-bounded GPU reservation over the half-open interval
    [start, end) in integer simulated seconds."""

    id: BookingId
    user: UserId
    project: ProjectId
    cluster: ClusterId
    gpu_count: int
    start: int
    end: int
    status: BookingStatus = BookingStatus.GRANTED

    def __post_init__(self):
        validate_identifier(self.id, "booking id")
        if not isinstance(self.gpu_count, int) or self.gpu_count < 1:
            raise ValidationError("gpu_count must be >= 1")
        if not (isinstance(self.start, int) and isinstance(self.end, int)):
            raise ValidationError("booking interval bounds must be integers")
        if self.start >= self.end:
            raise ValidationError("booking interval must satisfy start < end")

    def covers(self, t: int) -> bool:
        return self.start <= t < self.end

    def transition(self, new_status: BookingStatus) -> None:
        if (self.status, new_status) not in _BOOKING_TRANSITIONS:
            raise InvalidTransitionError(
                f"booking {self.id}: illegal transition {self.status.value} -> {new_status.value}"
            )
        self.status = new_status


class PodPhase(str, Enum):
    RUNNING = "Running"
    TERMINATING = "Terminating"
    RESPAWNED = "Respawned"


@dataclass
class GpuGrant:
    booking: BookingId
    gpus: int


@dataclass
class WorkspacePod:
    """A user workspace instance. The GPU grant is present only while the
    referenced booking is Active; a Respawned pod never holds one."""

    id: PodId
    user: UserId
    project: ProjectId
    cluster: ClusterId
    gpu_grant: Optional[GpuGrant] = None
    phase: PodPhase = PodPhase.RUNNING

    def __post_init__(self):
        validate_identifier(self.id, "pod id")
        if self.phase == PodPhase.RESPAWNED and self.gpu_grant is not None:
            raise ValidationError("a Respawned pod has no gpu_grant")


class Verdict(str, Enum):
    ALLOW = "Allow"
    DENY = "Deny"


@dataclass(frozen=True)
class AuthDecision:
    verdict: Verdict
    reason: str = ""

    def __post_init__(self):
        if self.verdict == Verdict.DENY and not self.reason:
            raise ValidationError("a Deny verdict must carry a reason")

    @property
    def allowed(self) -> bool:
        return self.verdict == Verdict.ALLOW


ALLOW = AuthDecision(Verdict.ALLOW)


def authorize(
    user: UserId,
    project: ProjectId,
    action: str,
    registry: Mapping[ProjectId, Project],
) -> AuthDecision:
    """Equal-privileges rule: Allow iff the user is a member of the
    project. The action name never influences the verdict among
    project-scoped actions; unknown projects raise, they do not Deny."""
    if project not in registry:
        raise NotFoundError("project", project)
    del action  # all project-scoped actions carry identical privileges
    if user in registry[project].members:
        return ALLOW
    return AuthDecision(Verdict.DENY, "not a member")
