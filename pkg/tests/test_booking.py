"""Booking calendar, admission, and sweep semantics, checked against a
brute-force overlap oracle that samples every endpoint instant."""

import random

import pytest

from fedplane.booking import (
    AdmissionRequest,
    BookingCalendar,
    admit,
    check_booking_fits,
    conflict_window,
    max_overlap,
)
from fedplane.errors import BookingConflictError, NotFoundError, ValidationError
from fedplane.model import Booking, BookingStatus


def entry(bid, gpus, start, end, user="u1", project="p-0001", status=BookingStatus.GRANTED):
    booking = Booking(
        id=bid, user=user, project=project, cluster="c1",
        gpu_count=gpus, start=start, end=end,
    )
    booking.status = status
    return booking


def calendar(capacity, *bookings):
    cal = BookingCalendar(cluster="c1", bookable_capacity=capacity)
    for booking in bookings:
        cal.add(booking)
    return cal


def brute_overlap(cal, start, end):
    """Oracle: evaluate the load at every endpoint instant inside the
    window (plus the window start) by direct summation."""
    instants = {start}
    for booking in cal.entries.values():
        for t in (booking.start, booking.end):
            if start <= t < end:
                instants.add(t)
    peak = 0
    for t in instants:
        load = sum(b.gpu_count for b in cal.entries.values() if b.start <= t < b.end)
        peak = max(peak, load)
    return peak


class TestMaxOverlap:
    def test_empty_calendar(self):
        assert max_overlap(calendar(2), 0, 100) == 0

    def test_overlapping_pair(self):
        # Endpoint events at 0, 5, 10, 15: peak load 3 inside [5, 10).
        cal = calendar(4, entry("b1", 1, 0, 10), entry("b2", 2, 5, 15))
        assert max_overlap(cal, 0, 15) == 3

    def test_abutting_half_open_intervals_do_not_stack(self):
        cal = calendar(2, entry("b1", 1, 0, 5), entry("b2", 1, 5, 10))
        assert max_overlap(cal, 0, 10) == 1

    def test_window_clamps_entries(self):
        cal = calendar(4, entry("b1", 2, 0, 100))
        assert max_overlap(cal, 50, 60) == 2
        assert max_overlap(cal, 100, 110) == 0

    def test_invalid_window(self):
        with pytest.raises(ValidationError):
            max_overlap(calendar(2), 10, 10)

    def test_matches_brute_force_on_random_calendars(self):
        rng = random.Random(7)
        for _ in range(500):
            cal = calendar(10)
            for i in range(rng.randint(0, 12)):
                start = rng.randint(0, 50)
                cal.add(entry(f"b{i}", rng.randint(1, 3), start, start + rng.randint(1, 20)))
            lo = rng.randint(0, 40)
            hi = lo + rng.randint(1, 30)
            assert max_overlap(cal, lo, hi) == brute_overlap(cal, lo, hi)


class TestConflictWindow:
    def test_fits_on_empty_calendar(self):
        assert conflict_window(calendar(2), 1, 0, 10) is None

    def test_reports_earliest_conflicting_subinterval(self):
        cal = calendar(2, entry("b1", 1, 0, 10), entry("b2", 1, 5, 15))
        assert conflict_window(cal, 1, 6, 9) == (6, 9)

    def test_conflict_window_is_maximal_run(self):
        cal = calendar(2, entry("b1", 2, 10, 20))
        assert conflict_window(cal, 1, 0, 30) == (10, 20)

    def test_earliest_run_wins_when_disjoint(self):
        cal = calendar(2, entry("b1", 2, 10, 20), entry("b2", 2, 40, 50))
        assert conflict_window(cal, 1, 0, 60) == (10, 20)

    def test_oversized_request_conflicts_everywhere(self):
        assert conflict_window(calendar(2), 3, 5, 8) == (5, 8)

    def test_check_raises_with_window(self):
        cal = calendar(2, entry("b1", 1, 0, 10), entry("b2", 1, 5, 15))
        with pytest.raises(BookingConflictError) as exc:
            check_booking_fits(cal, 1, 6, 9)
        assert (exc.value.start, exc.value.end) == (6, 9)

    def test_abutting_booking_fits(self):
        cal = calendar(2, entry("b1", 1, 0, 10))
        assert conflict_window(cal, 2, 10, 20) is None


class TestAdmit:
    def request(self, wants_gpu=True, now=150, user="u1"):
        return AdmissionRequest(
            user=user, project="p-0001", cluster="c1", wants_gpu=wants_gpu, now=now
        )

    def test_covering_booking_grants_and_activates(self):
        booking = entry("b1", 2, 100, 200)
        cal = calendar(2, booking)
        result = admit(self.request(), cal)
        assert result.granted_gpu
        assert result.booking == "b1" and result.gpus == 2
        assert booking.status == BookingStatus.ACTIVE

    def test_no_booking_rejects(self):
        result = admit(self.request(), calendar(2))
        assert result.verdict == "Reject"
        assert result.reason == "no valid booking"

    def test_wants_no_gpu_always_grants_cpu_only(self):
        result = admit(self.request(wants_gpu=False), calendar(2))
        assert result.verdict == "GrantNoGpu"

    def test_earliest_end_wins_among_covering_bookings(self):
        long_booking = entry("b1", 1, 100, 200)
        short_booking = entry("b2", 1, 140, 160)
        cal = calendar(2, long_booking, short_booking)
        result = admit(self.request(now=150), cal)
        assert result.booking == "b2"

    def test_booking_outside_now_not_eligible(self):
        cal = calendar(2, entry("b1", 1, 100, 200))
        assert admit(self.request(now=200), cal).verdict == "Reject"
        assert admit(self.request(now=99), cal).verdict == "Reject"

    def test_other_users_bookings_not_eligible(self):
        cal = calendar(2, entry("b1", 1, 100, 200, user="someone-else"))
        assert admit(self.request(), cal).verdict == "Reject"

    def test_booking_already_backing_a_pod_not_granted_twice(self):
        cal = calendar(2, entry("b1", 1, 100, 200))
        result = admit(self.request(), cal, granted_elsewhere=frozenset({"b1"}))
        assert result.verdict == "Reject"

    def test_unknown_cluster_is_not_found(self):
        with pytest.raises(NotFoundError):
            admit(self.request(), None)
