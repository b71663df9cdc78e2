"""Per-backend request rate limiting.

The limiter keeps the timestamps of the last R grants and admits a request
only when fewer than R grants fall inside the trailing 60-second window, so
the hard guarantee is: no more than R grants in any sliding 60 s window under
a monotone clock. A burst of R goes through instantly after an idle minute;
the next request waits until the oldest grant leaves the window. Waiting is
the contract, not an error.
"""

from __future__ import annotations

import threading
from collections import deque
from typing import Callable

WINDOW_SECONDS = 60.0


class RateLimiter:
    """Sliding-window limiter admitting at most ``requests_per_minute`` grants
    in any 60 s window. A ``None`` rate means unbounded."""

    def __init__(
        self,
        requests_per_minute: int | None,
        clock: Callable[[], float] | None = None,
    ):
        if requests_per_minute is not None and requests_per_minute < 1:
            raise ValueError("requests_per_minute must be >= 1")
        self.rate = requests_per_minute
        self._clock = clock
        self._grants: deque[float] = deque()
        self._lock = threading.Lock()

    def _now(self) -> float:
        if self._clock is not None:
            return self._clock()
        import time

        return time.monotonic()

    def try_acquire(self, now: float | None = None) -> float:
        """Grant a permit (returns 0.0) or report how long to wait.

        The grant is recorded atomically with the check, so concurrent
        callers cannot oversubscribe the window.
        """
        if self.rate is None:
            return 0.0
        if now is None:
            now = self._now()
        with self._lock:
            # compare as grant + window <= now (not now - window) so boundary
            # rounding matches what callers compute from grant timestamps
            while self._grants and self._grants[0] + WINDOW_SECONDS <= now:
                self._grants.popleft()
            if len(self._grants) < self.rate:
                self._grants.append(now)
                return 0.0
            return self._grants[0] + WINDOW_SECONDS - now

    def acquire(self, sleep: Callable[[float], None] | None = None) -> None:
        """Block (via ``sleep``) until a permit is granted."""
        if sleep is None:
            import time

            sleep = time.sleep
        while True:
            wait = self.try_acquire()
            if wait <= 0:
                return
            sleep(wait)
