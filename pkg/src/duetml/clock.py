"""Clock abstraction so hermetic runs produce byte-identical journals.

Live runs use the system clock; scripted (fixture-driven) runs use a
logical clock that starts at a fixed epoch and advances 1 ms per reading.
"""

from __future__ import annotations

import threading
import time


class Clock:
    def now_ms(self) -> int:
        raise NotImplementedError

    def elapsed_s(self, start_ms: int) -> float:
        return (self.now_ms() - start_ms) / 1000.0


class SystemClock(Clock):
    def now_ms(self) -> int:
        return int(time.time() * 1000)


class LogicalClock(Clock):
    """Deterministic clock: each reading advances by a fixed step."""

    def __init__(self, epoch_ms: int = 0, step_ms: int = 1):
        self._t = epoch_ms
        self._step = step_ms
        self._lock = threading.Lock()

    def now_ms(self) -> int:
        with self._lock:
            t = self._t
            self._t += self._step
            return t
