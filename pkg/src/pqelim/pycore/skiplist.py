"""Skiplist split into a sequential part and a parallel part.

The sequential part (reached from `head_seq`) is owned by the serving
thread: it consumes buckets front to back between `curr_seq` and
`last_seq` without synchronization.  The parallel part (reached from
`head_par`) takes concurrent inserts through `add_par`.  `move_head`
detaches a fresh front of the parallel part and installs it as the new
sequential part; `chop_head` gives an unconsumed remnant back.

Every bucket holds one key with a multiplicity counter, so duplicate
inserts never grow the list.  `min_value` caches the smallest live key
(MAXINT when the structure is empty) and is never above the true
minimum: inserts lower it before they become visible, and only the
serving thread raises it.

CPython's GIL makes single attribute loads/stores atomic; the one lock
`_cas` backs the compare-and-swap steps that the compiled core does
with hardware CAS.
"""

from __future__ import annotations

import random
import threading
import time

from ..params import MAX_LEVEL, MAXINT, adapt_batch_size


class Bucket:
    __slots__ = ("key", "counter", "top", "next")

    def __init__(self, key: int, top: int, counter: int = 0) -> None:
        self.key = key
        self.counter = counter
        self.top = top
        self.next: list[Bucket | None] = [None] * (top + 1)


class SwmrLock:
    """Single-writer/multi-reader lock with a generation timestamp.

    One word holds (reader count << 32) | timestamp.  The timestamp is
    even when no writer is inside and odd while one is; it grows by one
    on every writer acquire and every writer release, so two equal
    reads of an even timestamp bracket a writer-free interval.  A
    pending-writer flag stalls new readers so the writer gets in.
    """

    __slots__ = ("_state", "_pending", "_mutex")

    def __init__(self) -> None:
        self._state = 0
        self._pending = False
        self._mutex = threading.Lock()

    @property
    def timestamp(self) -> int:
        return self._state & MAXINT

    def acquire_read(self) -> None:
        while True:
            if not self._pending:
                with self._mutex:
                    s = self._state
                    if not (s & 1) and not self._pending:
                        self._state = s + (1 << 32)
                        return
            time.sleep(0)

    def release_read(self) -> None:
        with self._mutex:
            self._state -= 1 << 32

    def acquire_write(self) -> None:
        self._pending = True
        while True:
            with self._mutex:
                s = self._state
                if (s >> 32) == 0 and not (s & 1):
                    self._state = s + 1
                    return
            time.sleep(0)

    def release_write(self) -> None:
        with self._mutex:
            self._state += 1
        self._pending = False


class DualSkiplist:
    def __init__(
        self,
        *,
        seed: int,
        batch_initial: int,
        batch_min: int,
        batch_max: int,
        batch_low_water: int,
        batch_high_water: int,
    ) -> None:
        self.tail = Bucket(MAXINT, MAX_LEVEL)
        self.head_par = Bucket(0, MAX_LEVEL)
        self.head_seq = Bucket(0, MAX_LEVEL)
        for i in range(MAX_LEVEL + 1):
            self.head_par.next[i] = self.tail
            self.head_seq.next[i] = self.tail
        self.curr_seq: Bucket | None = None
        self.last_seq: Bucket = self.head_par
        self.min_value = MAXINT
        self.lock = SwmrLock()
        self._cas = threading.Lock()
        self._rng = random.Random(seed)
        self.batch_size = batch_initial
        self.batch_min = batch_min
        self.batch_max = batch_max
        self.batch_low_water = batch_low_water
        self.batch_high_water = batch_high_water
        self.insertions_since_move = 0
        self.head_moves = 0
        self.chop_heads = 0
        self.anomalies = 0

    # -- primitive steps ------------------------------------------------

    def _draw_level(self) -> int:
        r = self._rng.getrandbits(MAX_LEVEL) | (1 << MAX_LEVEL)
        return (r & -r).bit_length() - 1

    def _cas_next(self, bucket: Bucket, level: int, old: Bucket, new: Bucket) -> bool:
        with self._cas:
            if bucket.next[level] is old:
                bucket.next[level] = new
                return True
        return False

    def _bump_counter(self, bucket: Bucket, delta: int) -> None:
        with self._cas:
            bucket.counter += delta

    def _lower_min(self, v: int) -> None:
        with self._cas:
            if v < self.min_value:
                self.min_value = v

    # -- searches ---------------------------------------------------- --

    def find(self, head, v, preds=None, succs=None):
        """Position the per-level neighbors of key v below `head`.

        Returns the bucket holding v, or None.  Reads are raw; callers
        that need a stable answer validate with the lock timestamp.
        """
        pred = head
        curr = None
        for i in range(MAX_LEVEL, -1, -1):
            curr = pred.next[i]
            while curr.key < v:
                pred = curr
                curr = pred.next[i]
            if preds is not None:
                preds[i] = pred
            if succs is not None:
                succs[i] = curr
        return curr if curr.key == v else None

    def clean_find(self, v, preds, succs):
        """One search attempt validated against head moves.

        On success the read lock is held by the caller and the result
        is consistent: equal timestamps around the search mean no
        writer section ran, and holding the read lock keeps it so.
        """
        t = self.lock.timestamp
        if t & 1:
            return False, None
        found = self.find(self.head_par, v, preds, succs)
        self.lock.acquire_read()
        if self.lock.timestamp != t:
            self.lock.release_read()
            return False, None
        return True, found

    # -- parallel-part insert ---------------------------------------- --

    def add_par(self, v: int) -> bool:
        """Insert v into the parallel part; False if v belongs to the
        sequential part and must go through the serving thread."""
        preds: list = [None] * (MAX_LEVEL + 1)
        succs: list = [None] * (MAX_LEVEL + 1)
        b = None
        while True:
            if v <= self.last_seq.key:
                return False
            ok, found = self.clean_find(v, preds, succs)
            if not ok:
                time.sleep(0)
                continue
            # Boundary is stable while the read lock is held; the entry
            # check above may have raced a head move, so decide here.
            if v <= self.last_seq.key:
                self.lock.release_read()
                return False
            if found is not None:
                self._bump_counter(found, 1)
                self.lock.release_read()
                return True
            if b is None:
                b = Bucket(v, self._draw_level(), counter=1)
            for i in range(b.top + 1):
                b.next[i] = succs[i]
            if self._cas_next(preds[0], 0, succs[0], b):
                break
            self.lock.release_read()
        # Linked at level 0: the element is visible, so publish it in
        # the minimum cache before anything else.
        self._lower_min(v)
        level = 1
        while level <= b.top:
            b.next[level] = succs[level]
            if self._cas_next(preds[level], level, succs[level], b):
                level += 1
                continue
            self.lock.release_read()
            while True:
                ok, found = self.clean_find(v, preds, succs)
                if ok:
                    break
                time.sleep(0)
            if found is not b:
                # A head move carried the bucket away (or it was
                # consumed); stop with a capped but contiguous tower.
                self.lock.release_read()
                return True
        self.lock.release_read()
        return True

    def add_par_server(self, v: int) -> None:
        """Parallel-part insert from the serving thread.

        No read lock: the serving thread is the only head mover, so
        the part boundary cannot shift underneath it.  Races with
        client inserts are absorbed by the link CASes.
        """
        preds: list = [None] * (MAX_LEVEL + 1)
        succs: list = [None] * (MAX_LEVEL + 1)
        b = None
        while True:
            found = self.find(self.head_par, v, preds, succs)
            if found is not None:
                self._lower_min(v)
                self._bump_counter(found, 1)
                return
            if b is None:
                b = Bucket(v, self._draw_level(), counter=1)
            for i in range(b.top + 1):
                b.next[i] = succs[i]
            self._lower_min(v)
            if self._cas_next(preds[0], 0, succs[0], b):
                break
        level = 1
        while level <= b.top:
            b.next[level] = succs[level]
            if self._cas_next(preds[level], level, succs[level], b):
                level += 1
            else:
                self.find(self.head_par, v, preds, succs)

    # -- sequential-part operations (serving thread only) ------------- --

    def add_seq(self, v: int) -> None:
        """Insert v into the sequential part.  Caller guarantees the
        part exists and v <= last_seq.key."""
        preds: list = [None] * (MAX_LEVEL + 1)
        succs: list = [None] * (MAX_LEVEL + 1)
        found = self.find(self.head_seq, v, preds, succs)
        # Lower the cache before the element becomes visible so it is
        # never above the true minimum.
        self._lower_min(v)
        if found is not None:
            found.counter += 1
            target = found
        else:
            b = Bucket(v, self._draw_level(), counter=1)
            for i in range(b.top + 1):
                b.next[i] = succs[i]
            for i in range(b.top + 1):
                preds[i].next[i] = b
            target = b
        if v < self.curr_seq.key:
            self.curr_seq = target
        self.insertions_since_move += 1

    def remove_seq(self) -> int:
        """Take the minimum from the sequential part, pulling a new
        front from the parallel part when needed.  MAXINT when empty."""
        if self.min_value == MAXINT:
            return MAXINT
        if self.curr_seq is None:
            self.move_head()
            if self.curr_seq is None:
                # min_value != MAXINT guarantees parallel work to move;
                # count it if that ever breaks instead of crashing.
                self.anomalies += 1
                return MAXINT
        curr = self.curr_seq
        key = curr.key
        curr.counter -= 1
        if curr.counter == 0:
            while curr is not self.last_seq:
                curr = curr.next[0]
                self.curr_seq = curr
                if curr.counter > 0:
                    self.min_value = curr.key
                    return key
            self.move_head()
        return key

    def move_head(self) -> bool:
        """Replace the sequential part with a fresh front of the
        parallel part.  False (and an empty-structure state) when there
        is nothing to move."""
        n = self._next_batch()
        self.lock.acquire_write()
        self.curr_seq = None
        pred = self.head_par
        curr = pred.next[0]
        moved = 0
        first = None
        while moved < n and curr is not self.tail:
            # Consumed buckets (counter 0) can sit anywhere in the
            # parallel chain: a chopped remnant keeps the holes left
            # behind when the consume point was rewound by a
            # sequential-part insert.  They carry no copies, so they
            # must never become the consume point or the advertised
            # minimum; sweep them along with the batch.
            c = curr.counter
            moved += c
            if first is None and c > 0:
                first = curr
            pred = curr
            curr = curr.next[0]
        if first is None:
            self.last_seq = self.head_par
            self.min_value = MAXINT
            self.lock.release_write()
            return False
        self.curr_seq = first
        self.min_value = first.key
        self.last_seq = pred
        for i in range(MAX_LEVEL, -1, -1):
            self.head_seq.next[i] = self.head_par.next[i]
        preds: list = [None] * (MAX_LEVEL + 1)
        succs: list = [None] * (MAX_LEVEL + 1)
        self.find(self.head_seq, pred.key + 1, preds, succs)
        for i in range(MAX_LEVEL, -1, -1):
            preds[i].next[i] = self.tail
            self.head_par.next[i] = succs[i]
        self.lock.release_write()
        self.head_moves += 1
        return True

    def chop_head(self) -> bool:
        """Return the unconsumed remnant of the sequential part to the
        parallel part.  False when there is no sequential part."""
        if self.curr_seq is None:
            return False
        preds: list = [None] * (MAX_LEVEL + 1)
        self.find(self.head_seq, self.last_seq.key + 1, preds, None)
        succs: list = [None] * (MAX_LEVEL + 1)
        self.find(self.head_seq, self.curr_seq.key, None, succs)
        self.lock.acquire_write()
        for i in range(MAX_LEVEL, -1, -1):
            # Stitch the remnant's per-level tails onto the parallel
            # chains (writes into consumed buckets are harmless).
            preds[i].next[i] = self.head_par.next[i]
        self.last_seq = self.head_par
        self.curr_seq = None
        for i in range(MAX_LEVEL, -1, -1):
            if succs[i] is not self.tail:
                self.head_par.next[i] = succs[i]
        self.lock.release_write()
        self.chop_heads += 1
        return True

    def _next_batch(self) -> int:
        self.batch_size = adapt_batch_size(
            self.batch_size,
            self.insertions_since_move,
            low=self.batch_low_water,
            high=self.batch_high_water,
            floor=self.batch_min,
            ceiling=self.batch_max,
        )
        self.insertions_since_move = 0
        return self.batch_size
