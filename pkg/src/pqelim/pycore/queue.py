"""Pure-Python queue core.

Same surface as the compiled core (`pqelim._ccore.CQueueCore`): client
ops take a dense thread id, raw results use MAXINT as the empty
sentinel, and the serving thread runs `server_loop` until
`server_stop`.  Correctness rests on the GIL for single loads/stores
plus the explicit CAS locks in the skiplist and the array; the layout
of every protocol step matches the compiled core so both pass the same
suite.
"""

from __future__ import annotations

import time

from .. import _rng
from ..params import (
    MAXINT,
    OP_EMPTY,
    OP_INPROG,
    OP_REMREQ,
    OP_TAKEN,
    QueueConfig,
    STAMP_COUNT_MASK,
    is_key,
    make_stamp,
    pack_slot,
    unpack_slot,
)
from .elim import ElimArray
from .skiplist import DualSkiplist

# Per-thread counter rows; the serving thread owns the last row.
ADD_PAR = 0
ADD_ELIM_HAND = 1
ADD_ELIM_POSTED = 2
ADD_SRV = 3
REM_ELIM_TAKE = 4
REM_ELIM_HANDED = 5
REM_SRV = 6
N_COUNTERS = 7

STAT_KEYS = (
    "add_par",
    "add_elim_hand",
    "add_elim_posted",
    "add_srv",
    "rem_elim_take",
    "rem_elim_handed",
    "rem_srv",
    "head_moves",
    "chop_heads",
    "anomalies",
)


class PyQueueCore:
    def __init__(self, config: QueueConfig | None = None) -> None:
        cfg = config or QueueConfig()
        self.cfg = cfg
        self.sl = DualSkiplist(
            seed=cfg.seed,
            batch_initial=cfg.batch_initial,
            batch_min=cfg.batch_min,
            batch_max=cfg.batch_max,
            batch_low_water=cfg.batch_low_water,
            batch_high_water=cfg.batch_high_water,
        )
        self.elim = ElimArray(cfg.elim_size, cfg.audit_capacity)
        self._ctr = [[0] * N_COUNTERS for _ in range(cfg.max_threads + 1)]
        self._op_count = [0] * cfg.max_threads
        self._idle_scans = 0
        self._stop = False

    # -- client operations ------------------------------------------- --

    def add(self, tid: int, v: int) -> bool:
        sl = self.sl
        if v <= sl.min_value:
            # Likely a new minimum: it belongs near the serving thread,
            # so try to hand it to a waiting remover first.
            rounds = self.cfg.max_elim_min
        else:
            if sl.add_par(v):
                self._ctr[tid][ADD_PAR] += 1
                return True
            rounds = self.cfg.max_elim
        elim = self.elim
        size = elim.size
        row = self._ctr[tid]
        pos = (tid + 1) % size
        for _ in range(rounds):
            word = elim.load(pos)
            wv, _ws = unpack_slot(word)
            if wv == OP_REMREQ:
                m = sl.min_value
                if v <= m and elim.cas(pos, word, pack_slot(v, 0)):
                    elim.audit(v, m)
                    row[ADD_ELIM_HAND] += 1
                    row[REM_ELIM_HANDED] += 1
                    return True
            pos += 1
            if pos == size:
                pos = 0
        if sl.add_par(v):
            row[ADD_PAR] += 1
            return True
        scanned = 0
        while True:
            word = elim.load(pos)
            wv, _ws = unpack_slot(word)
            if wv == OP_REMREQ:
                m = sl.min_value
                if v <= m and elim.cas(pos, word, pack_slot(v, 0)):
                    elim.audit(v, m)
                    row[ADD_ELIM_HAND] += 1
                    row[REM_ELIM_HANDED] += 1
                    return True
            elif word == 0:
                stamp = self._next_stamp(tid)
                if elim.cas(pos, 0, pack_slot(v, stamp)):
                    while True:
                        wv, _ws = unpack_slot(elim.load(pos))
                        if wv == OP_TAKEN:
                            break
                        time.sleep(0)
                    elim.store(pos, pack_slot(OP_EMPTY, 0))
                    # Whoever took it (remover or server) counted it.
                    return True
            pos += 1
            if pos == size:
                pos = 0
            scanned += 1
            if scanned % size == 0:
                time.sleep(0)

    def remove_min(self, tid: int) -> int:
        sl = self.sl
        elim = self.elim
        size = elim.size
        row = self._ctr[tid]
        pos = (tid + 1) % size
        scanned = 0
        while True:
            word = elim.load(pos)
            wv, ws = unpack_slot(word)
            if ws != 0 and is_key(wv):
                m = sl.min_value
                if wv <= m and elim.cas(pos, word, pack_slot(OP_TAKEN, 0)):
                    elim.audit(wv, m)
                    row[REM_ELIM_TAKE] += 1
                    row[ADD_ELIM_POSTED] += 1
                    return wv
            elif word == 0:
                stamp = self._next_stamp(tid)
                if elim.cas(pos, 0, pack_slot(OP_REMREQ, stamp)):
                    while True:
                        wv, _ws = unpack_slot(elim.load(pos))
                        if wv != OP_REMREQ and wv != OP_INPROG:
                            break
                        time.sleep(0)
                    elim.store(pos, pack_slot(OP_EMPTY, 0))
                    return wv
            pos += 1
            if pos == size:
                pos = 0
            scanned += 1
            if scanned % size == 0:
                time.sleep(0)

    def _next_stamp(self, tid: int) -> int:
        c = (self._op_count[tid] + 1) & STAMP_COUNT_MASK
        if c == 0:
            c = 1
        self._op_count[tid] = c
        return make_stamp(tid, c)

    # -- serving thread ----------------------------------------------- --

    def scan_once(self) -> int:
        """One full pass over the array on the calling thread."""
        if self.cfg.strategy == "lazy":
            handled, remreq_seen = self._scan_lazy()
        else:
            handled, remreq_seen = self._scan_eager()
        if remreq_seen == 0:
            self._idle_scans += 1
            if self._idle_scans >= self.cfg.chop_idle_scans:
                self.sl.chop_head()
                self._idle_scans = 0
        else:
            self._idle_scans = 0
        return handled

    def _scan_eager(self) -> tuple[int, int]:
        elim = self.elim
        sl = self.sl
        srow = self._ctr[self.cfg.max_threads]
        handled = 0
        remreq_seen = 0
        for i in range(elim.size):
            word = elim.load(i)
            wv, ws = unpack_slot(word)
            if wv == OP_REMREQ:
                remreq_seen += 1
                if elim.cas(i, word, pack_slot(OP_INPROG, 0)):
                    out = sl.remove_seq()
                    elim.store(i, pack_slot(out, 0))
                    srow[REM_SRV] += 1
                    handled += 1
            elif ws != 0 and is_key(wv):
                if elim.cas(i, word, pack_slot(OP_INPROG, 0)):
                    self._server_add(wv)
                    elim.store(i, pack_slot(OP_TAKEN, 0))
                    srow[ADD_SRV] += 1
                    handled += 1
        return handled, remreq_seen

    def _scan_lazy(self) -> tuple[int, int]:
        elim = self.elim
        sl = self.sl
        srow = self._ctr[self.cfg.max_threads]
        handled = 0
        remreq_seen = 0
        for i in range(elim.size):
            word = elim.load(i)
            wv, ws = unpack_slot(word)
            if wv == OP_REMREQ:
                remreq_seen += 1
                if sl.curr_seq is None and sl.min_value != MAXINT:
                    sl.move_head()
                if sl.curr_seq is not None:
                    # Answer straight from the cached minimum and do the
                    # structural removal afterwards; nothing can touch
                    # the sequential part in between.
                    if elim.cas(i, word, pack_slot(sl.min_value, 0)):
                        sl.remove_seq()
                        srow[REM_SRV] += 1
                        handled += 1
                else:
                    if elim.cas(i, word, pack_slot(OP_INPROG, 0)):
                        out = sl.remove_seq()
                        elim.store(i, pack_slot(out, 0))
                        srow[REM_SRV] += 1
                        handled += 1
            elif ws != 0 and is_key(wv):
                if elim.cas(i, word, pack_slot(OP_INPROG, 0)):
                    if sl.curr_seq is not None and wv <= sl.last_seq.key:
                        sl._lower_min(wv)
                        elim.store(i, pack_slot(OP_TAKEN, 0))
                        sl.add_seq(wv)
                    else:
                        sl.add_par_server(wv)
                        elim.store(i, pack_slot(OP_TAKEN, 0))
                    srow[ADD_SRV] += 1
                    handled += 1
        return handled, remreq_seen

    def _server_add(self, v: int) -> None:
        sl = self.sl
        if sl.curr_seq is not None and v <= sl.last_seq.key:
            sl.add_seq(v)
        else:
            sl.add_par_server(v)

    def server_loop(self) -> None:
        """Scan until stopped, then drain already-posted requests."""
        idle = 0
        while not self._stop:
            if self.scan_once():
                idle = 0
                time.sleep(0)
            else:
                idle += 1
                time.sleep(0 if idle < 10 else 0.0002)
        quiet = 0
        while quiet < 2:
            self.scan_once()
            quiet = quiet + 1 if self._pending_requests() == 0 else 0

    def server_stop(self) -> None:
        self._stop = True

    def server_reset(self) -> None:
        """Clear a previous stop so the loop can be started again.
        Call before the serving thread launches, never concurrently
        with server_stop."""
        self._stop = False

    def _pending_requests(self) -> int:
        n = 0
        for i in range(self.elim.size):
            wv, ws = unpack_slot(self.elim.load(i))
            if wv == OP_REMREQ or (ws != 0 and is_key(wv)):
                n += 1
        return n

    # -- benchmark worker --------------------------------------------- --

    def bench_worker(
        self, tid: int, seed: int, p_add: float, deadline: float
    ) -> tuple[int, int, int, int]:
        state = _rng.worker_state(seed, tid)
        threshold = _rng.coin_threshold(p_add)
        ops = adds = removes = hits = 0
        while time.monotonic() < deadline:
            state, r = _rng.splitmix64(state)
            if (r >> 11) < threshold:
                state, r = _rng.splitmix64(state)
                self.add(tid, _rng.draw_key(r))
                adds += 1
            else:
                if self.remove_min(tid) != MAXINT:
                    hits += 1
                removes += 1
            ops += 1
        return ops, adds, removes, hits

    # -- structural access (tests, stats) ------------------------------ --

    @property
    def elim_size(self) -> int:
        return self.elim.size

    @property
    def max_threads(self) -> int:
        return self.cfg.max_threads

    def add_par(self, tid: int, v: int) -> bool:
        return self.sl.add_par(v)

    def add_seq(self, v: int) -> None:
        self.sl.add_seq(v)

    def remove_seq(self) -> int:
        return self.sl.remove_seq()

    def move_head(self) -> bool:
        return self.sl.move_head()

    def chop_head(self) -> bool:
        return self.sl.chop_head()

    def min_value(self) -> int:
        return self.sl.min_value

    def last_seq_key(self) -> int:
        return self.sl.last_seq.key

    def has_seq_part(self) -> bool:
        return self.sl.curr_seq is not None

    def lock_timestamp(self) -> int:
        return self.sl.lock.timestamp

    def batch_size(self) -> int:
        return self.sl.batch_size

    def set_batch_size(self, n: int) -> None:
        self.sl.batch_size = n

    def insertions_since_move(self) -> int:
        return self.sl.insertions_since_move

    def set_insertions_since_move(self, n: int) -> None:
        self.sl.insertions_since_move = n

    def dump_level(self, part: str, level: int) -> list[tuple[int, int]]:
        sl = self.sl
        head = sl.head_seq if part == "seq" else sl.head_par
        out = []
        node = head.next[level]
        while node is not sl.tail:
            out.append((node.key, node.counter))
            node = node.next[level]
        return out

    def slot_peek(self, i: int) -> tuple[int, int]:
        return unpack_slot(self.elim.load(i))

    def slot_poke(self, i: int, value: int, stamp: int) -> None:
        self.elim.poke(i, pack_slot(value, stamp))

    def stats(self) -> dict[str, int]:
        out = dict.fromkeys(STAT_KEYS, 0)
        for row in self._ctr:
            out["add_par"] += row[ADD_PAR]
            out["add_elim_hand"] += row[ADD_ELIM_HAND]
            out["add_elim_posted"] += row[ADD_ELIM_POSTED]
            out["add_srv"] += row[ADD_SRV]
            out["rem_elim_take"] += row[REM_ELIM_TAKE]
            out["rem_elim_handed"] += row[REM_ELIM_HANDED]
            out["rem_srv"] += row[REM_SRV]
        out["head_moves"] = self.sl.head_moves
        out["chop_heads"] = self.sl.chop_heads
        out["anomalies"] = self.sl.anomalies
        return out

    def edge_counts(self) -> dict[str, int]:
        out = dict(self.elim.edge_counts)
        out["other"] = self.elim.other_edges
        return out

    def edge_violations(self) -> tuple[int, tuple[int, int] | None]:
        return self.elim.other_edges, self.elim.first_violation

    def audit_pairs(self) -> list[tuple[int, int]]:
        return self.elim.audit_pairs()

    def audit_total(self) -> int:
        return self.elim.audit_total
