"""
Phase timing for CLI runs.

Per-phase durations are kept in memory only; the totals end up in the run
manifest.
"""

import time
from collections import defaultdict
from contextlib import contextmanager
from functools import wraps
from typing import Dict, Iterator, List

import numpy as np


class SimpleCounter:
    """Monotone event count"""

    def __init__(self, name: str, description: str):
        self.name, self.description = name, description
        self.value = 0

    def inc(self, amount: int = 1) -> None:
        if amount < 0:
            raise ValueError("counter increments must be non-negative")
        self.value += amount


class SimpleHistogram:
    """Durations of one phase; keeps the most recent ``window`` observations"""

    def __init__(self, name: str, description: str, window: int = 1000):
        self.name, self.description = name, description
        self.window = window
        self._values: List[float] = []
        self._dropped_total = 0.0

    def observe(self, value: float) -> None:
        self._values.append(float(value))
        if len(self._values) > self.window:
            self._dropped_total += self._values.pop(0)

    def get_stats(self) -> Dict[str, float]:
        if not self._values:
            return {"count": 0, "sum": self._dropped_total, "avg": 0.0, "min": 0.0, "max": 0.0}
        values = np.asarray(self._values)
        return {
            "count": int(values.size),
            "sum": float(values.sum() + self._dropped_total),
            "avg": float(values.mean()),
            "min": float(values.min()),
            "max": float(values.max()),
        }


class PhaseTimer:
    """Wall-clock seconds per named phase (trie, radii, prune, simulate, ...)"""

    def __init__(self):
        self._phases: Dict[str, SimpleHistogram] = defaultdict(lambda: SimpleHistogram("phase", "seconds"))
        self.runs = SimpleCounter("phases_total", "Timed phases")

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self._phases[name].observe(time.perf_counter() - start)
            self.runs.inc()

    def record(self, name: str, seconds: float) -> None:
        self._phases[name].observe(seconds)
        self.runs.inc()

    def timings(self) -> Dict[str, float]:
        """Total seconds per phase"""
        return {name: histogram.get_stats()["sum"] for name, histogram in self._phases.items()}

    def summary(self) -> Dict[str, Dict[str, float]]:
        return {name: histogram.get_stats() for name, histogram in self._phases.items()}


def timed(timer: PhaseTimer, name: str):
    """Decorator timing every call of the wrapped function under ``name``"""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            with timer.phase(name):
                return func(*args, **kwargs)
        return wrapper
    return decorator
