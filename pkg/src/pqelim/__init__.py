"""Concurrent priority queue built around a split skiplist, an
elimination array, and a combining server thread."""

from .api import (
    DEFAULT_CORE,
    PriorityQueue,
    QueueStats,
    ThreadHandle,
    available_cores,
    make_core,
)
from .params import KEY_MAX, KEY_MIN, MAXINT, QueueConfig

__all__ = [
    "DEFAULT_CORE",
    "KEY_MAX",
    "KEY_MIN",
    "MAXINT",
    "PriorityQueue",
    "QueueConfig",
    "QueueStats",
    "ThreadHandle",
    "available_cores",
    "make_core",
]

__version__ = "0.1.0"
