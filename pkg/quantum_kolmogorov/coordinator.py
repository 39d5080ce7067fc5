"""SweepCoordinator for quantum_kolmogorov."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from .const import DOMAIN, LOGGER
from .exceptions import InvalidParameterError

T = TypeVar("T")
R = TypeVar("R")


class SweepCoordinator:
    """Class to fan a parameter sweep out to a worker pool."""

    def __init__(self, jobs: int = 1, name: str = DOMAIN) -> None:
        """Initialize."""
        if jobs < 1:
            raise InvalidParameterError(f"jobs must be at least 1, got {jobs}")
        self.jobs = jobs
        self.name = name

    def map(self, fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
        """Evaluate fn on every item; results come back in input order."""
        LOGGER.debug("%s sweep: %d items on %d workers", self.name, len(items), self.jobs)
        if self.jobs == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(
            max_workers=self.jobs, thread_name_prefix=self.name
        ) as executor:
            # map re-raises the first failing job's exception unchanged
            return list(executor.map(fn, items))
