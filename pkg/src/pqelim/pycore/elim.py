"""Elimination array: one 64-bit word per slot.

Adders with small values hand them straight to waiting removers;
anything else parks in a slot until the serving thread consumes it.
Every transition is classified against the allowed-edge table as it
happens, and each matched hand-off records the value against the
minimum cache observed at the decision point, so protocol and safety
violations surface as counters instead of silent corruption.
"""

from __future__ import annotations

import threading

from ..params import ALLOWED_EDGES, OP_EMPTY, classify_edge, pack_slot


class ElimArray:
    __slots__ = (
        "size",
        "slots",
        "_lock",
        "edge_counts",
        "other_edges",
        "first_violation",
        "_audit",
        "_audit_cap",
        "audit_total",
    )

    def __init__(self, size: int, audit_capacity: int = 0) -> None:
        self.size = size
        self.slots = [pack_slot(OP_EMPTY, 0)] * size
        self._lock = threading.Lock()
        self.edge_counts = dict.fromkeys(ALLOWED_EDGES, 0)
        self.other_edges = 0
        self.first_violation: tuple[int, int] | None = None
        self._audit: list[tuple[int, int]] = []
        self._audit_cap = audit_capacity
        self.audit_total = 0

    def load(self, i: int) -> int:
        return self.slots[i]

    def cas(self, i: int, old: int, new: int) -> bool:
        with self._lock:
            if self.slots[i] != old:
                return False
            self._record(old, new)
            self.slots[i] = new
            return True

    def store(self, i: int, new: int) -> None:
        """Unconditional write by the slot's current owner."""
        with self._lock:
            self._record(self.slots[i], new)
            self.slots[i] = new

    def poke(self, i: int, word: int) -> None:
        """Test hook; bypasses the edge log."""
        self.slots[i] = word

    def _record(self, old: int, new: int) -> None:
        label = classify_edge(old, new)
        if label is None:
            self.other_edges += 1
            if self.first_violation is None:
                self.first_violation = (old, new)
        else:
            self.edge_counts[label] += 1

    def audit(self, value: int, observed_min: int) -> None:
        """Log one matched pair: the handed value and the minimum cache
        read by the validating side."""
        with self._lock:
            self.audit_total += 1
            if len(self._audit) < self._audit_cap:
                self._audit.append((value, observed_min))

    def audit_pairs(self) -> list[tuple[int, int]]:
        with self._lock:
            return list(self._audit)
