"""Threshold-or-timeout batch formation over a bounded queue."""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Generic, TypeVar

T = TypeVar("T")


class Closed(Exception):
    """Upstream finished and the queue is drained."""


class SystemClock:
    def now(self) -> float:
        return time.monotonic()

    def wait_until(self, cond: threading.Condition, deadline: float | None) -> None:
        cond.wait(None if deadline is None else max(0.0, deadline - self.now()))


class SimulatedClock:
    """Deterministic clock for single-threaded tests.

    ``wait_until`` does not block: it jumps simulated time to the deadline, as
    if nothing else happened in the meantime.
    """

    def __init__(self, start: float = 0.0) -> None:
        self.t = start

    def now(self) -> float:
        return self.t

    def advance(self, seconds: float) -> None:
        self.t += seconds

    def wait_until(self, cond: threading.Condition, deadline: float | None) -> None:
        if deadline is None:
            raise RuntimeError("simulated wait without deadline would block forever")
        self.t = max(self.t, deadline)


@dataclass(frozen=True)
class Batch(Generic[T]):
    items: list[T]
    reason: str  # "threshold", "timeout" or "drain"
    flushed_at: float
    oldest_wait: float


class BatchQueue(Generic[T]):
    """Bounded FIFO whose consumers take items in batches.

    A batch is released when ``threshold`` items are queued, or when the batch
    timer reaches ``max_wait``. The timer starts at the enqueue time of the
    oldest queued item, or at the previous flush if that is later. After
    ``close()`` remaining items are released without waiting.
    """

    def __init__(self, capacity: int, clock=None) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.clock = clock or SystemClock()
        self._items: deque[tuple[float, T]] = deque()
        self._cond = threading.Condition()
        self._closed = False
        self._last_flush = float("-inf")
        self.max_depth = 0
        self.items_in = 0
        self.items_out = 0
        self.flushes = {"threshold": 0, "timeout": 0, "drain": 0}

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)

    def put(self, item: T) -> None:
        with self._cond:
            while len(self._items) >= self.capacity and not self._closed:
                self._cond.wait()
            if self._closed:
                raise Closed("put on a closed queue")
            self._items.append((self.clock.now(), item))
            self.items_in += 1
            self.max_depth = max(self.max_depth, len(self._items))
            self._cond.notify_all()

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def _take(self, n: int, reason: str, now: float) -> Batch[T]:
        taken = [self._items.popleft() for _ in range(min(n, len(self._items)))]
        self._last_flush = now
        self.items_out += len(taken)
        self.flushes[reason] += 1
        self._cond.notify_all()
        return Batch([item for _, item in taken], reason, now, now - taken[0][0])

    def collect_batch(self, threshold: int, max_wait: float) -> Batch[T]:
        """Block until a batch is due; ``max_wait`` is in seconds.

        Raises:
            Closed: the queue was closed and holds no items.
        """
        if threshold < 1:
            raise ValueError("threshold must be >= 1")
        with self._cond:
            while True:
                now = self.clock.now()
                if len(self._items) >= threshold:
                    return self._take(threshold, "threshold", now)
                if self._items:
                    deadline = max(self._items[0][0], self._last_flush) + max_wait
                    if now >= deadline:
                        return self._take(threshold, "timeout", now)
                    if self._closed:
                        return self._take(threshold, "drain", now)
                    self.clock.wait_until(self._cond, deadline)
                elif self._closed:
                    raise Closed()
                else:
                    self.clock.wait_until(self._cond, None)
