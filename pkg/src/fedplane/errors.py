"""Exception hierarchy shared by every control-plane module.

The gateway maps these onto HTTP statuses: ValidationError -> 400,
AuthorizationError -> 403, NotFoundError -> 404, ConflictError -> 409.
"""

from __future__ import annotations


class ControlPlaneError(Exception):
    """Base class for all control-plane failures."""


class ValidationError(ControlPlaneError):
    """Malformed or contract-violating input. Carries every violation found."""

    def __init__(self, violations: list[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = violations
        super().__init__("; ".join(violations))


class NotFoundError(ControlPlaneError):
    """Referenced entity does not exist. Distinct from an authorization Deny."""

    def __init__(self, kind: str, ident: str):
        self.kind = kind
        self.ident = ident
        super().__init__(f"{kind} {ident!r} not found")


class AuthorizationError(ControlPlaneError):
    """Actor is not allowed to perform the operation."""


class ConflictError(ControlPlaneError):
    """State conflict: capacity exhausted, stale decision, duplicate, or
    an illegal lifecycle transition. Retriable where the message says so."""


class BookingConflictError(ConflictError):
    """Capacity conflict on a booking calendar, naming the earliest
    conflicting sub-interval [start, end)."""

    def __init__(self, start: int, end: int, capacity: int, requested: int):
        self.start = start
        self.end = end
        self.capacity = capacity
        self.requested = requested
        super().__init__(
            f"booking conflicts on [{start},{end}): "
            f"request of {requested} exceeds capacity {capacity}"
        )


class StaleDecisionError(ConflictError):
    """Placement decision was computed against an older state version."""


class InvalidTransitionError(ConflictError):
    """Lifecycle transition not permitted from the current status."""


class SimulationError(ControlPlaneError):
    """Programming error inside the simulator, e.g. scheduling into the past."""


class ScenarioError(ValidationError):
    """Scenario file failed to parse or validate."""


class LogCorruptionError(ControlPlaneError):
    """Event log integrity failure (hash-chain break or digest mismatch)."""

    def __init__(self, seq: int, detail: str):
        self.seq = seq
        super().__init__(f"event log corrupt at seq {seq}: {detail}")
