"""Public queue facade.

Selects the compiled core when the extension imported cleanly, else
the pure-Python core; PQELIM_CORE=py|c forces one.  The facade owns
thread registration (dense ids feed the elimination array and the
per-thread stamp counters), the serving thread's lifecycle, and the
key-domain guard.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass

from .params import KEY_MAX, KEY_MIN, MAXINT, QueueConfig
from .pycore import PyQueueCore

try:
    from ._ccore import CQueueCore
except ImportError:
    CQueueCore = None

DEFAULT_CORE = "py"
if CQueueCore is not None and os.environ.get("PQELIM_CORE", "").lower() != "py":
    DEFAULT_CORE = "c"


def available_cores() -> tuple[str, ...]:
    return ("c", "py") if CQueueCore is not None else ("py",)


def make_core(config: QueueConfig | None = None, core: str = "auto"):
    """Bare core instance; most callers want PriorityQueue instead."""
    if core == "auto":
        core = DEFAULT_CORE
    if core == "c":
        if CQueueCore is None:
            raise RuntimeError("compiled core is not available")
        return CQueueCore(config or QueueConfig())
    if core == "py":
        return PyQueueCore(config or QueueConfig())
    raise ValueError(f"unknown core {core!r}")


@dataclass
class QueueStats:
    """Merged operation counters; the elimination pairs are split by
    which side completed the CAS so the breakdown sums exactly."""

    add_par: int = 0
    add_elim: int = 0
    add_srv: int = 0
    rem_elim: int = 0
    rem_srv: int = 0
    head_moves: int = 0
    chop_heads: int = 0
    anomalies: int = 0

    @property
    def adds(self) -> int:
        return self.add_par + self.add_elim + self.add_srv

    @property
    def removes(self) -> int:
        return self.rem_elim + self.rem_srv

    @classmethod
    def from_raw(cls, raw: dict[str, int]) -> "QueueStats":
        return cls(
            add_par=raw["add_par"],
            add_elim=raw["add_elim_hand"] + raw["add_elim_posted"],
            add_srv=raw["add_srv"],
            rem_elim=raw["rem_elim_take"] + raw["rem_elim_handed"],
            rem_srv=raw["rem_srv"],
            head_moves=raw["head_moves"],
            chop_heads=raw["chop_heads"],
            anomalies=raw["anomalies"],
        )


class ThreadHandle:
    """Registration token; holds the dense id client ops need."""

    __slots__ = ("tid", "_queue")

    def __init__(self, tid: int, queue: "PriorityQueue") -> None:
        self.tid = tid
        self._queue = queue

    def __enter__(self) -> "ThreadHandle":
        return self

    def __exit__(self, *exc) -> None:
        self._queue.unregister(self)


class PriorityQueue:
    """Concurrent priority queue with integer keys in [4, 2**32 - 2].

    Usable between start() and stop(); every client thread registers
    for an id first.  remove_min returns None on an empty queue.
    """

    def __init__(self, config: QueueConfig | None = None, core: str = "auto") -> None:
        self.config = config or QueueConfig()
        self.core_name = DEFAULT_CORE if core == "auto" else core
        self.core = make_core(self.config, self.core_name)
        self._ids = list(range(self.config.max_threads - 1, -1, -1))
        self._reg_lock = threading.Lock()
        self._server: threading.Thread | None = None

    # -- lifecycle ----------------------------------------------------- --

    def start(self) -> "PriorityQueue":
        if self._server is not None:
            raise RuntimeError("already started")
        self.core.server_reset()
        self._server = threading.Thread(
            target=self.core.server_loop, name="pqelim-server", daemon=True
        )
        self._server.start()
        return self

    def stop(self) -> None:
        """Stop serving.  Requests already posted are answered before
        the serving thread exits; do not start new operations after
        calling this."""
        if self._server is None:
            raise RuntimeError("not started")
        self.core.server_stop()
        self._server.join()
        self._server = None

    def __enter__(self) -> "PriorityQueue":
        return self.start()

    def __exit__(self, *exc) -> None:
        if self._server is not None:
            self.stop()

    # -- registration --------------------------------------------------- --

    def register(self) -> ThreadHandle:
        with self._reg_lock:
            if not self._ids:
                raise RuntimeError("all thread ids in use")
            return ThreadHandle(self._ids.pop(), self)

    def unregister(self, handle: ThreadHandle) -> None:
        with self._reg_lock:
            self._ids.append(handle.tid)

    # -- operations ------------------------------------------------------ --

    def add(self, handle: ThreadHandle, value: int) -> None:
        if not KEY_MIN <= value <= KEY_MAX:
            raise ValueError(f"value must be in [{KEY_MIN}, {KEY_MAX}]")
        if self._server is None:
            raise RuntimeError("queue is not running")
        self.core.add(handle.tid, value)

    def remove_min(self, handle: ThreadHandle) -> int | None:
        if self._server is None:
            raise RuntimeError("queue is not running")
        raw = self.core.remove_min(handle.tid)
        return None if raw == MAXINT else raw

    def drain(self, handle: ThreadHandle) -> list[int]:
        """Pop until empty; mainly for tests and teardown checks."""
        out = []
        while True:
            v = self.remove_min(handle)
            if v is None:
                return out
            out.append(v)

    def stats(self) -> QueueStats:
        return QueueStats.from_raw(self.core.stats())
