"""Per-cluster GPU reservation calendar and the admission checks used at
workspace spawn.

A calendar holds only live reservations (Granted or Active). The safety
invariant: at every instant, the sum of reserved GPUs over entries
covering that instant never exceeds the cluster's bookable capacity.
Expired and cancelled entries leave the calendar immediately, so freed
GPUs show up in overlap math at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import BookingConflictError, NotFoundError, ValidationError
from .model import Booking, BookingId, BookingStatus, ClusterId

# Reservation policy defaults: equitable-use guards, both configurable.
DEFAULT_MAX_BOOKING_SECONDS = 14 * 86400
DEFAULT_MAX_FUTURE_BOOKINGS_PER_USER = 4


@dataclass
class BookingCalendar:
    cluster: ClusterId
    bookable_capacity: int
    entries: dict[BookingId, Booking] = field(default_factory=dict)

    def live_entries(self) -> list[Booking]:
        """Entries in deterministic (start, end, id) order."""
        return sorted(self.entries.values(), key=lambda b: (b.start, b.end, b.id))

    def add(self, booking: Booking) -> None:
        self.entries[booking.id] = booking

    def remove(self, booking_id: BookingId) -> None:
        self.entries.pop(booking_id, None)


def max_overlap(cal: BookingCalendar, start: int, end: int) -> int:
    """Maximum over t in [start, end) of the summed gpu_count of entries
    covering t, by a sweep over entry endpoints clamped to the window."""
    if start >= end:
        raise ValidationError("overlap query interval must satisfy start < end")
    events: list[tuple[int, int]] = []
    for entry in cal.entries.values():
        if entry.start < end and entry.end > start:
            events.append((max(entry.start, start), entry.gpu_count))
            if entry.end < end:
                events.append((entry.end, -entry.gpu_count))
    # Releases sort before acquisitions at the same instant: half-open
    # intervals that abut do not overlap.
    events.sort()
    load = 0
    peak = 0
    for _, delta in events:
        load += delta
        peak = max(peak, load)
    return peak


def conflict_window(
    cal: BookingCalendar, gpu_count: int, start: int, end: int
) -> Optional[tuple[int, int]]:
    """Earliest maximal sub-interval of [start, end) where adding
    gpu_count would exceed capacity, or None if the request fits."""
    boundaries = {start, end}
    for entry in cal.entries.values():
        if entry.start < end and entry.end > start:
            boundaries.add(max(entry.start, start))
            if entry.end < end:
                boundaries.add(entry.end)
    points = sorted(boundaries)
    conflict_start: Optional[int] = None
    conflict_end: Optional[int] = None
    for left, right in zip(points, points[1:]):
        # Segment edges are entry endpoints, so covering the left edge
        # means covering the whole segment.
        load = sum(entry.gpu_count for entry in cal.entries.values() if entry.covers(left))
        if load + gpu_count > cal.bookable_capacity:
            if conflict_start is None:
                conflict_start = left
                conflict_end = right
            elif conflict_end == left:
                conflict_end = right
            else:
                break  # earliest maximal run found
        elif conflict_start is not None:
            break
    if conflict_start is None:
        return None
    assert conflict_end is not None
    return conflict_start, conflict_end


def check_booking_fits(cal: BookingCalendar, gpu_count: int, start: int, end: int) -> None:
    """Raise BookingConflictError naming the earliest conflicting
    sub-interval if the reservation would break the capacity invariant."""
    window = conflict_window(cal, gpu_count, start, end)
    if window is not None:
        raise BookingConflictError(window[0], window[1], cal.bookable_capacity, gpu_count)


@dataclass(frozen=True)
class AdmissionRequest:
    user: str
    project: str
    cluster: ClusterId
    wants_gpu: bool
    now: int


@dataclass(frozen=True)
class AdmissionResult:
    """GrantGpu carries the booking backing the grant; GrantNoGpu is the
    unconditional CPU-only path; Reject names why GPU access was denied."""

    verdict: str  # "GrantGpu" | "GrantNoGpu" | "Reject"
    booking: Optional[BookingId] = None
    gpus: int = 0
    reason: str = ""

    @property
    def granted_gpu(self) -> bool:
        return self.verdict == "GrantGpu"


def select_covering_booking(
    cal: BookingCalendar,
    user: str,
    project: str,
    now: int,
    exclude: frozenset[BookingId] = frozenset(),
) -> Optional[Booking]:
    """The user's own booking covering now, earliest end first (smallest
    id on ties). Bookings already backing a live pod are excluded so one
    reservation never grants twice."""
    candidates = [
        entry
        for entry in cal.entries.values()
        if entry.user == user
        and entry.project == project
        and entry.covers(now)
        and entry.status in (BookingStatus.GRANTED, BookingStatus.ACTIVE)
        and entry.id not in exclude
    ]
    if not candidates:
        return None
    return min(candidates, key=lambda b: (b.end, b.id))


def admit(
    req: AdmissionRequest,
    cal: Optional[BookingCalendar],
    granted_elsewhere: frozenset[BookingId] = frozenset(),
) -> AdmissionResult:
    """GPU admission check at pod spawn. A first admitted use flips the
    booking Granted -> Active."""
    if cal is None:
        raise NotFoundError("cluster", req.cluster)
    if not req.wants_gpu:
        return AdmissionResult(verdict="GrantNoGpu")
    booking = select_covering_booking(cal, req.user, req.project, req.now, granted_elsewhere)
    if booking is None:
        return AdmissionResult(verdict="Reject", reason="no valid booking")
    if booking.status == BookingStatus.GRANTED:
        booking.transition(BookingStatus.ACTIVE)
    return AdmissionResult(verdict="GrantGpu", booking=booking.id, gpus=booking.gpu_count)
