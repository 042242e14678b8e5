"""Reference queues: a binary heap and a plain skiplist, each behind a
single mutex.

They share the core calling convention (dense thread id in, raw MAXINT
for empty) so the benchmark drives every implementation with the same
worker loop, and the heap doubles as the sequential oracle in tests.
"""

from __future__ import annotations

import heapq
import random
import threading

from .params import MAX_LEVEL, MAXINT


class LockedHeap:
    """heapq guarded by one lock."""

    def __init__(self) -> None:
        self._heap: list[int] = []
        self._lock = threading.Lock()

    def add(self, tid: int, v: int) -> bool:
        with self._lock:
            heapq.heappush(self._heap, v)
        return True

    def remove_min(self, tid: int) -> int:
        with self._lock:
            if not self._heap:
                return MAXINT
            return heapq.heappop(self._heap)

    def __len__(self) -> int:
        return len(self._heap)


class _Node:
    __slots__ = ("key", "count", "next")

    def __init__(self, key: int, top: int) -> None:
        self.key = key
        self.count = 1
        self.next: list[_Node | None] = [None] * (top + 1)


class LockedSkiplist:
    """Sequential skiplist with counted duplicates behind one lock.

    Same bucket layout as the concurrent queue's list, minus all the
    synchronization; useful as a like-for-like structural baseline.
    """

    def __init__(self, seed: int = 0x5EED) -> None:
        self._head = _Node(-1, MAX_LEVEL)
        self._rng = random.Random(seed)
        self._lock = threading.Lock()

    def _draw_level(self) -> int:
        r = self._rng.getrandbits(MAX_LEVEL) | (1 << MAX_LEVEL)
        return (r & -r).bit_length() - 1

    def add(self, tid: int, v: int) -> bool:
        with self._lock:
            preds: list[_Node] = [self._head] * (MAX_LEVEL + 1)
            pred = self._head
            for i in range(MAX_LEVEL, -1, -1):
                curr = pred.next[i]
                while curr is not None and curr.key < v:
                    pred = curr
                    curr = pred.next[i]
                preds[i] = pred
            curr = preds[0].next[0]
            if curr is not None and curr.key == v:
                curr.count += 1
                return True
            node = _Node(v, self._draw_level())
            for i in range(len(node.next)):
                node.next[i] = preds[i].next[i]
                preds[i].next[i] = node
            return True

    def remove_min(self, tid: int) -> int:
        with self._lock:
            node = self._head.next[0]
            if node is None:
                return MAXINT
            node.count -= 1
            if node.count == 0:
                # the minimum is the first node at every level it owns
                for i in range(len(node.next)):
                    self._head.next[i] = node.next[i]
            return node.key

    def __len__(self) -> int:
        n = 0
        node = self._head.next[0]
        while node is not None:
            n += node.count
            node = node.next[0]
        return n
