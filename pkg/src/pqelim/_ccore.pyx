# cython: language_level=3, boundscheck=False, wraparound=False
"""Cython face of the compiled core.

Thin by design: every method body is one C call with the GIL released,
so eight client threads and the serving thread really run in parallel.
The exposed surface matches pqelim.pycore.PyQueueCore.
"""

from libc.stdint cimport int64_t, uint8_t, uint32_t, uint64_t
from libc.stdlib cimport free, malloc

from .params import ALLOWED_EDGES, KEY_MAX, KEY_MIN, QueueConfig

cdef extern from "pqe_core.h" nogil:
    ctypedef struct pqe_t
    ctypedef struct pqe_config_t:
        int max_threads
        int elim_size
        int max_elim
        int max_elim_min
        int chop_idle_scans
        int lazy
        uint32_t batch_initial
        uint32_t batch_min
        uint32_t batch_max
        uint32_t batch_low_water
        uint32_t batch_high_water
        uint64_t seed
        int64_t audit_capacity

    enum:
        PQE_MAXINT
        PQE_CTR_COUNT
        PQE_STATS_COUNT
        PQE_EDGE_COUNT
        PQE_MAX_THREADS

    pqe_t *pqe_create(const pqe_config_t *cfg)
    void pqe_destroy(pqe_t *q)
    int pqe_add(pqe_t *q, int tid, uint32_t value)
    uint32_t pqe_remove_min(pqe_t *q, int tid)
    void pqe_server_loop(pqe_t *q)
    void pqe_server_stop(pqe_t *q)
    void pqe_server_reset(pqe_t *q)
    int pqe_server_scan_once(pqe_t *q)
    int pqe_sl_add_par(pqe_t *q, int tid, uint32_t v)
    void pqe_sl_add_seq(pqe_t *q, uint32_t v)
    uint32_t pqe_sl_remove_seq(pqe_t *q)
    int pqe_sl_move_head(pqe_t *q)
    int pqe_sl_chop_head(pqe_t *q)
    uint32_t pqe_min_value(pqe_t *q)
    uint32_t pqe_last_seq_key(pqe_t *q)
    int pqe_has_seq_part(pqe_t *q)
    uint64_t pqe_lock_timestamp(pqe_t *q)
    uint32_t pqe_batch_size(pqe_t *q)
    void pqe_set_batch_size(pqe_t *q, uint32_t n)
    uint64_t pqe_insertions_since_move(pqe_t *q)
    void pqe_set_insertions_since_move(pqe_t *q, uint64_t n)
    uint32_t pqe_adapt_batch_size(uint32_t current, uint64_t insertions,
                                  uint32_t low, uint32_t high,
                                  uint32_t floor_, uint32_t ceiling)
    long pqe_dump_level(pqe_t *q, int part, int level, uint32_t *keys,
                        uint32_t *counts, long cap)
    int pqe_elim_size(pqe_t *q)
    uint64_t pqe_slot_peek(pqe_t *q, int i)
    void pqe_slot_poke(pqe_t *q, int i, uint64_t word)
    void pqe_stats(pqe_t *q, uint64_t *out)
    void pqe_edge_counts(pqe_t *q, uint64_t *out)
    uint64_t pqe_edge_first_violation(pqe_t *q, uint64_t *old_word,
                                      uint64_t *new_word)
    int64_t pqe_audit_total(pqe_t *q)
    int64_t pqe_audit_fetch(pqe_t *q, uint64_t *out, int64_t cap)
    void pqe_bench_worker(pqe_t *q, int tid, uint64_t seed, double p_add,
                          double deadline, uint64_t *out)
    void pqe_gen_ops(uint64_t seed, int tid, long count, double p_add,
                     uint8_t *is_add, uint32_t *keys)

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


def adapt_batch_size(current, insertions, *, low, high, floor, ceiling):
    return pqe_adapt_batch_size(current, insertions, low, high, floor, ceiling)


def gen_ops(seed, tid, count, p_add):
    """First `count` ops of a worker stream as (is_add, key) pairs."""
    cdef long n = count
    cdef uint8_t *flags = <uint8_t *>malloc(n * sizeof(uint8_t))
    cdef uint32_t *keys = <uint32_t *>malloc(n * sizeof(uint32_t))
    if flags == NULL or keys == NULL:
        free(flags)
        free(keys)
        raise MemoryError
    pqe_gen_ops(seed, tid, n, p_add, flags, keys)
    try:
        return [(bool(flags[i]), keys[i]) for i in range(n)]
    finally:
        free(flags)
        free(keys)


cdef class CQueueCore:
    cdef pqe_t *q
    cdef readonly object cfg

    def __cinit__(self, config=None):
        cfg = config if config is not None else QueueConfig()
        cdef pqe_config_t c
        c.max_threads = cfg.max_threads
        c.elim_size = cfg.elim_size
        c.max_elim = cfg.max_elim
        c.max_elim_min = cfg.max_elim_min
        c.chop_idle_scans = cfg.chop_idle_scans
        c.lazy = 1 if cfg.strategy == "lazy" else 0
        c.batch_initial = cfg.batch_initial
        c.batch_min = cfg.batch_min
        c.batch_max = cfg.batch_max
        c.batch_low_water = cfg.batch_low_water
        c.batch_high_water = cfg.batch_high_water
        c.seed = cfg.seed
        c.audit_capacity = cfg.audit_capacity
        self.q = pqe_create(&c)
        if self.q == NULL:
            raise MemoryError("pqe_create failed")
        self.cfg = cfg

    def __dealloc__(self):
        if self.q != NULL:
            pqe_destroy(self.q)
            self.q = NULL

    cdef inline int _check_tid(self, int tid) except -1:
        if tid < 0 or tid >= self.cfg.max_threads:
            raise ValueError(f"tid {tid} out of range")
        return 0

    # -- client operations ------------------------------------------- --

    def add(self, int tid, uint32_t v):
        self._check_tid(tid)
        if v < KEY_MIN or v > KEY_MAX:
            raise ValueError("value outside key domain")
        cdef int r
        with nogil:
            r = pqe_add(self.q, tid, v)
        return bool(r)

    def remove_min(self, int tid):
        self._check_tid(tid)
        cdef uint32_t r
        with nogil:
            r = pqe_remove_min(self.q, tid)
        return r

    # -- serving thread ----------------------------------------------- --

    def server_loop(self):
        with nogil:
            pqe_server_loop(self.q)

    def server_stop(self):
        pqe_server_stop(self.q)

    def server_reset(self):
        pqe_server_reset(self.q)

    def scan_once(self):
        cdef int r
        with nogil:
            r = pqe_server_scan_once(self.q)
        return r

    # -- benchmark worker --------------------------------------------- --

    def bench_worker(self, int tid, uint64_t seed, double p_add,
                     double deadline):
        self._check_tid(tid)
        cdef uint64_t out[4]
        with nogil:
            pqe_bench_worker(self.q, tid, seed, p_add, deadline, out)
        return out[0], out[1], out[2], out[3]

    # -- structural access (tests, stats) ------------------------------ --

    @property
    def elim_size(self):
        return pqe_elim_size(self.q)

    @property
    def max_threads(self):
        return self.cfg.max_threads

    def add_par(self, int tid, uint32_t v):
        self._check_tid(tid)
        cdef int r
        with nogil:
            r = pqe_sl_add_par(self.q, tid, v)
        return bool(r)

    def add_seq(self, uint32_t v):
        with nogil:
            pqe_sl_add_seq(self.q, v)

    def remove_seq(self):
        cdef uint32_t r
        with nogil:
            r = pqe_sl_remove_seq(self.q)
        return r

    def move_head(self):
        cdef int r
        with nogil:
            r = pqe_sl_move_head(self.q)
        return bool(r)

    def chop_head(self):
        cdef int r
        with nogil:
            r = pqe_sl_chop_head(self.q)
        return bool(r)

    def min_value(self):
        return pqe_min_value(self.q)

    def last_seq_key(self):
        return pqe_last_seq_key(self.q)

    def has_seq_part(self):
        return bool(pqe_has_seq_part(self.q))

    def lock_timestamp(self):
        return pqe_lock_timestamp(self.q)

    def batch_size(self):
        return pqe_batch_size(self.q)

    def set_batch_size(self, uint32_t n):
        pqe_set_batch_size(self.q, n)

    def insertions_since_move(self):
        return pqe_insertions_since_move(self.q)

    def set_insertions_since_move(self, uint64_t n):
        pqe_set_insertions_since_move(self.q, n)

    def dump_level(self, part, int level):
        cdef int p = 0 if part == "seq" else 1
        cdef long cap = 4096
        cdef long n
        cdef uint32_t *keys
        cdef uint32_t *counts
        while True:
            keys = <uint32_t *>malloc(cap * sizeof(uint32_t))
            counts = <uint32_t *>malloc(cap * sizeof(uint32_t))
            if keys == NULL or counts == NULL:
                free(keys)
                free(counts)
                raise MemoryError
            n = pqe_dump_level(self.q, p, level, keys, counts, cap)
            if n >= 0:
                try:
                    return [(keys[i], counts[i]) for i in range(n)]
                finally:
                    free(keys)
                    free(counts)
            free(keys)
            free(counts)
            cap *= 4

    def slot_peek(self, int i):
        cdef uint64_t w = pqe_slot_peek(self.q, i)
        return (w >> 32) & 0xFFFFFFFF, w & 0xFFFFFFFF

    def slot_poke(self, int i, uint32_t value, uint32_t stamp):
        pqe_slot_poke(self.q, i, (<uint64_t>value << 32) | stamp)

    def stats(self):
        cdef uint64_t out[PQE_STATS_COUNT]
        pqe_stats(self.q, out)
        return {STAT_KEYS[k]: out[k] for k in range(PQE_STATS_COUNT)}

    def edge_counts(self):
        cdef uint64_t out[PQE_EDGE_COUNT]
        pqe_edge_counts(self.q, out)
        result = {ALLOWED_EDGES[i]: out[i] for i in range(PQE_EDGE_COUNT - 1)}
        result["other"] = out[PQE_EDGE_COUNT - 1]
        return result

    def edge_violations(self):
        cdef uint64_t ow = 0
        cdef uint64_t nw = 0
        cdef uint64_t n = pqe_edge_first_violation(self.q, &ow, &nw)
        if n == 0:
            return 0, None
        return n, (ow, nw)

    def audit_total(self):
        return pqe_audit_total(self.q)

    def audit_pairs(self):
        cdef int64_t cap = pqe_audit_total(self.q)
        if cap <= 0:
            return []
        cdef uint64_t *buf = <uint64_t *>malloc(cap * sizeof(uint64_t))
        if buf == NULL:
            raise MemoryError
        cdef int64_t n = pqe_audit_fetch(self.q, buf, cap)
        try:
            return [((buf[i] >> 32) & 0xFFFFFFFF, buf[i] & 0xFFFFFFFF)
                    for i in range(n)]
        finally:
            free(buf)
