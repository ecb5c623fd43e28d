"""Peer-to-peer work stealing over per-worker deques.

Tasks are dealt round-robin. A worker pops from the front of its own deque;
once that is empty it steals the last task of the peer holding the most
remaining tasks (ties go to the lowest worker index). There is no master:
each worker runs the steal protocol itself.
"""

from __future__ import annotations

import heapq
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable, Sequence


@dataclass(frozen=True)
class Completion:
    task: int  # index into the input sequence
    worker: int
    stolen_from: int | None
    start: float
    end: float


class WorkerQueueSet:
    def __init__(self, n_tasks: int, workers: int):
        if workers < 1:
            raise ValueError("need at least one worker")
        self.queues = [deque(range(w, n_tasks, workers)) for w in range(workers)]
        self._locks = [threading.Lock() for _ in range(workers)]

    def pop_own(self, worker: int) -> int | None:
        with self._locks[worker]:
            q = self.queues[worker]
            return q.popleft() if q else None

    def pick_victim(self, thief: int) -> int | None:
        best, best_len = None, 0
        for w, q in enumerate(self.queues):
            if w != thief and len(q) > best_len:
                best, best_len = w, len(q)
        return best

    def steal(self, thief: int) -> tuple[int, int] | None:
        """Take the last task of the fullest peer; ``(task, victim)`` or None when all are empty."""
        while True:
            victim = self.pick_victim(thief)
            if victim is None:
                return None
            with self._locks[victim]:
                q = self.queues[victim]
                if q:
                    return q.pop(), victim
            # the victim drained between the look and the lock; look again

    def remaining(self) -> int:
        return sum(len(q) for q in self.queues)


def run_pool(items: Sequence[Any], fn: Callable[[Any], Any], workers: int = 1,
             stealing: bool = True) -> tuple[list[Any], list[Completion]]:
    """Run ``fn`` over ``items`` on threads; results come back in input order.

    ``fn`` should contain its own failures; an exception escaping it is
    stored as that item's result.
    """
    queues = WorkerQueueSet(len(items), workers)
    results: list[Any] = [None] * len(items)
    log: list[Completion] = []
    log_lock = threading.Lock()
    origin = time.monotonic()

    def worker(w: int) -> None:
        while True:
            task, victim = queues.pop_own(w), None
            if task is None:
                if not stealing:
                    return
                got = queues.steal(w)
                if got is None:
                    return
                task, victim = got
            start = time.monotonic() - origin
            try:
                results[task] = fn(items[task])
            except Exception as exc:  # recorded, never aborts the pool
                results[task] = exc
            with log_lock:
                log.append(Completion(task, w, victim, start, time.monotonic() - origin))

    threads = [threading.Thread(target=worker, args=(w,), name=f"worker-{w}") for w in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return results, log


@dataclass
class Simulation:
    makespan: float
    log: list[Completion]
    retired: list[float]  # when each worker found no work left

    @property
    def steals(self) -> int:
        return sum(1 for c in self.log if c.stolen_from is not None)


def simulate(latencies: Sequence[float], workers: int, stealing: bool = True,
             steal_cost: float = 0.0) -> Simulation:
    """Discrete-event run of the same protocol on a simulated clock.

    Workers act in order of the time they become free (ties by index), so
    every steal sees the queue state at that instant.
    """
    queues = WorkerQueueSet(len(latencies), workers)
    free = [(0.0, w) for w in range(workers)]
    heapq.heapify(free)
    log: list[Completion] = []
    retired = [0.0] * workers
    while free:
        now, w = heapq.heappop(free)
        task, victim = queues.pop_own(w), None
        start = now
        if task is None:
            got = queues.steal(w) if stealing else None
            if got is None:
                retired[w] = now
                continue
            task, victim = got
            start = now + steal_cost
        end = start + latencies[task]
        log.append(Completion(task, w, victim, start, end))
        heapq.heappush(free, (end, w))
    makespan = max((c.end for c in log), default=0.0)
    return Simulation(makespan, log, retired)
