from __future__ import annotations

import random

import pytest

from evalforge.gateway.ratelimit import RateLimiter
from tests.conftest import FakeClock


def drain(limiter: RateLimiter, clock: FakeClock) -> float:
    """Advance the clock until a permit is granted; returns the grant time."""
    while True:
        wait = limiter.try_acquire(clock())
        if wait <= 0:
            return clock()
        clock.advance(wait)


def test_unlimited_when_rate_absent():
    clock = FakeClock()
    limiter = RateLimiter(None, clock)
    assert all(limiter.try_acquire() == 0.0 for _ in range(10_000))


def test_burst_of_r_granted_instantly():
    clock = FakeClock()
    limiter = RateLimiter(60, clock)
    assert all(limiter.try_acquire() == 0.0 for _ in range(60))
    assert limiter.try_acquire() > 0.0


def test_capacity_one_second_grant_at_sixty_seconds():
    clock = FakeClock()
    limiter = RateLimiter(1, clock)
    assert limiter.try_acquire() == 0.0  # t=0
    granted_at = drain(limiter, clock)
    assert granted_at == pytest.approx(60.0, abs=1e-3)


def test_rate_must_be_positive():
    with pytest.raises(ValueError):
        RateLimiter(0)


def sliding_window_ok(grants: list[float], rate: int, window: float = 60.0) -> bool:
    # anchoring windows at grant times covers the sliding maximum
    for i, start in enumerate(grants):
        count = sum(1 for g in grants[i:] if g < start + window)
        if count > rate:
            return False
    return True


@pytest.mark.parametrize("rate", [1, 10, 60])
def test_sliding_window_never_exceeds_rate(rate):
    rng = random.Random(rate * 7919)
    clock = FakeClock()
    limiter = RateLimiter(rate, clock)
    grants = []
    for _ in range(rate * 8):
        clock.advance(rng.choice([0.0, 0.0, 0.01, 0.5, 3.0, 40.0]))
        grants.append(drain(limiter, clock))
    assert sliding_window_ok(grants, rate)
    assert grants == sorted(grants)


def test_idle_minute_restores_full_burst():
    clock = FakeClock()
    limiter = RateLimiter(5, clock)
    for _ in range(5):
        assert limiter.try_acquire() == 0.0
    clock.advance(61)
    for _ in range(5):
        assert limiter.try_acquire() == 0.0


def test_acquire_blocks_via_injected_sleep():
    clock = FakeClock()
    limiter = RateLimiter(1, clock)
    naps: list[float] = []

    def fake_sleep(seconds: float) -> None:
        naps.append(seconds)
        clock.advance(seconds)

    limiter.acquire(sleep=fake_sleep)
    limiter.acquire(sleep=fake_sleep)
    assert naps and sum(naps) == pytest.approx(60.0, abs=1e-3)
