"""Injected time source. Primary-component logic never reads the wall
clock directly; all time flows through one of these."""

from __future__ import annotations

import time


class Clock:
    def now(self) -> int:
        raise NotImplementedError


class WallClock(Clock):
    """Live mode: wall time truncated to integer seconds."""

    def now(self) -> int:
        return int(time.time())


class ManualClock(Clock):
    """Simulated mode: time moves only when told to, never backwards."""

    def __init__(self, start: int = 0):
        self._now = start

    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> None:
        if t < self._now:
            raise ValueError(f"clock cannot move backwards: {t} < {self._now}")
        self._now = t
