/* See pqe_core.h for the surface and pycore/ for the annotated twin.
 *
 * Concurrency scheme, in brief:
 *   - Parallel-part inserts link buckets with per-level pointer CASes
 *     while holding the read side of a timestamped single-writer lock;
 *     searches run outside the lock and are validated by timestamp
 *     equality (even timestamps bracket writer-free intervals).
 *   - The serving thread is the only writer: head moves and chops take
 *     the write side, sequential-part consumption needs no lock at all.
 *   - min_value is only lowered by inserts (CAS loop, before the
 *     element becomes visible) and only raised by the serving thread,
 *     so it never exceeds the true minimum; elimination validates
 *     against it at the decision read, which is the hand-off pair's
 *     linearization point.
 *   - Buckets come from per-thread bump arenas owned by the queue and
 *     are freed wholesale in pqe_destroy; stale searches may walk
 *     retired buckets, which stay allocated and key-ordered.
 */

#define _GNU_SOURCE

#include "pqe_core.h"

#include <sched.h>
#include <stdlib.h>
#include <string.h>
#include <time.h>

#define LD_RLX(p) __atomic_load_n((p), __ATOMIC_RELAXED)
#define LD_ACQ(p) __atomic_load_n((p), __ATOMIC_ACQUIRE)
#define ST_RLX(p, v) __atomic_store_n((p), (v), __ATOMIC_RELAXED)
#define ST_REL(p, v) __atomic_store_n((p), (v), __ATOMIC_RELEASE)
#define FADD_RLX(p, v) __atomic_fetch_add((p), (v), __ATOMIC_RELAXED)

#if defined(__x86_64__) || defined(__i386__)
#define cpu_relax() __builtin_ia32_pause()
#elif defined(__aarch64__)
#define cpu_relax() __asm__ __volatile__("yield")
#else
#define cpu_relax() ((void)0)
#endif

typedef struct {
    unsigned spins;
} backoff_t;

static inline void backoff_reset(backoff_t *b) { b->spins = 0; }

static inline void backoff_wait(backoff_t *b) {
    /* escalate to the scheduler quickly: spinners starve the serving
     * thread on small machines */
    if (++b->spins < 16)
        cpu_relax();
    else
        sched_yield();
}

static inline int cas_u64(uint64_t *p, uint64_t expect, uint64_t want) {
    return __atomic_compare_exchange_n(p, &expect, want, 0, __ATOMIC_ACQ_REL,
                                       __ATOMIC_ACQUIRE);
}

static inline int cas_u32(uint32_t *p, uint32_t expect, uint32_t want) {
    return __atomic_compare_exchange_n(p, &expect, want, 0, __ATOMIC_ACQ_REL,
                                       __ATOMIC_ACQUIRE);
}

static inline int cas_ptr(void **p, void *expect, void *want) {
    return __atomic_compare_exchange_n(p, &expect, want, 0, __ATOMIC_ACQ_REL,
                                       __ATOMIC_ACQUIRE);
}

/* ---- structures ----------------------------------------------------- */

typedef struct bucket {
    uint32_t key;
    uint32_t top;
    uint64_t counter;
    struct bucket *next[]; /* top + 1 entries */
} bucket_t;

typedef struct chunk {
    struct chunk *next;
    size_t used;
    size_t cap;
    /* data follows */
} chunk_t;

typedef struct {
    chunk_t *arena;
    uint64_t rng;
    uint32_t op_count;
    uint64_t ctr[PQE_CTR_COUNT];
    char pad[64];
} __attribute__((aligned(64))) tslot_t;

typedef struct {
    uint64_t word;
    char pad[56];
} __attribute__((aligned(64))) eslot_t;

struct pqe {
    /* hot shared words, each on its own line */
    __attribute__((aligned(64))) uint64_t lock_state; /* readers<<32 | ts */
    __attribute__((aligned(64))) uint32_t writer_pending;
    __attribute__((aligned(64))) uint32_t min_value;
    __attribute__((aligned(64))) bucket_t *last_seq;
    __attribute__((aligned(64))) bucket_t *curr_seq;
    __attribute__((aligned(64))) uint32_t stop_flag;

    __attribute__((aligned(64))) bucket_t *head_seq;
    bucket_t *head_par;
    bucket_t *tail;
    eslot_t *slots;
    tslot_t *threads; /* max_threads + 1, last is the serving thread */
    int elim_size;
    int max_threads;
    int max_elim;
    int max_elim_min;
    int chop_idle_scans;
    int lazy;
    int idle_scans;
    uint32_t batch_size;
    uint32_t batch_min, batch_max, batch_low_water, batch_high_water;
    uint64_t insertions_since_move;
    uint64_t head_moves;
    uint64_t chop_heads;
    uint64_t anomalies;
    uint64_t edges[PQE_EDGE_COUNT];
    uint32_t violation_claimed;
    uint64_t violation_old, violation_new;
    uint64_t *audit_buf;
    int64_t audit_cap;
    int64_t audit_idx;
};

/* ---- rng (identical to pqelim._rng) --------------------------------- */

#define GOLDEN 0x9E3779B97F4A7C15ULL

static inline uint64_t sm64(uint64_t *state) {
    uint64_t z = (*state += GOLDEN);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

static inline uint32_t draw_key(uint64_t r) {
    return PQE_KEY_MIN + (uint32_t)(r % (uint64_t)(PQE_KEY_MAX - PQE_KEY_MIN + 1));
}

void pqe_gen_ops(uint64_t seed, int tid, long count, double p_add,
                 uint8_t *is_add, uint32_t *keys) {
    uint64_t state = seed + ((uint64_t)tid + 1) * GOLDEN;
    uint64_t threshold = (uint64_t)(p_add * 9007199254740992.0);
    for (long i = 0; i < count; i++) {
        uint64_t r = sm64(&state);
        if ((r >> 11) < threshold) {
            is_add[i] = 1;
            keys[i] = draw_key(sm64(&state));
        } else {
            is_add[i] = 0;
            keys[i] = 0;
        }
    }
}

/* ---- arena ----------------------------------------------------------- */

static bucket_t *bucket_new(pqe_t *q, int slot, uint32_t key, uint32_t top,
                            uint64_t count) {
    size_t sz = sizeof(bucket_t) + ((size_t)top + 1) * sizeof(bucket_t *);
    sz = (sz + 15) & ~(size_t)15;
    tslot_t *t = &q->threads[slot];
    chunk_t *c = t->arena;
    if (!c || c->used + sz > c->cap) {
        size_t cap = 1 << 16;
        if (cap < sz)
            cap = sz;
        chunk_t *nc = malloc(sizeof(chunk_t) + cap);
        nc->next = t->arena;
        nc->used = 0;
        nc->cap = cap;
        t->arena = nc;
        c = nc;
    }
    bucket_t *b = (bucket_t *)((char *)(c + 1) + c->used);
    c->used += sz;
    b->key = key;
    b->top = top;
    ST_RLX(&b->counter, count);
    return b;
}

static uint32_t draw_level(pqe_t *q, int slot) {
    uint64_t r = sm64(&q->threads[slot].rng) | (1ULL << PQE_MAX_LEVEL);
    return (uint32_t)__builtin_ctzll(r);
}

/* ---- timestamped single-writer lock ---------------------------------- */

static inline uint64_t lock_ts(pqe_t *q) {
    return LD_ACQ(&q->lock_state) & PQE_MAXINT;
}

static void lock_acquire_read(pqe_t *q) {
    backoff_t b;
    backoff_reset(&b);
    for (;;) {
        if (!LD_ACQ(&q->writer_pending)) {
            uint64_t s = LD_ACQ(&q->lock_state);
            if (!(s & 1) && cas_u64(&q->lock_state, s, s + (1ULL << 32)))
                return;
        }
        backoff_wait(&b);
    }
}

static void lock_release_read(pqe_t *q) {
    __atomic_fetch_sub(&q->lock_state, 1ULL << 32, __ATOMIC_RELEASE);
}

static void lock_acquire_write(pqe_t *q) {
    ST_REL(&q->writer_pending, 1);
    backoff_t b;
    backoff_reset(&b);
    for (;;) {
        uint64_t s = LD_ACQ(&q->lock_state);
        if ((s >> 32) == 0 && !(s & 1) && cas_u64(&q->lock_state, s, s + 1))
            return; /* timestamp now odd */
        backoff_wait(&b);
    }
}

static void lock_release_write(pqe_t *q) {
    __atomic_fetch_add(&q->lock_state, 1, __ATOMIC_RELEASE); /* even again */
    ST_REL(&q->writer_pending, 0);
}

/* ---- skiplist -------------------------------------------------------- */

static bucket_t *sl_find(bucket_t *head, uint32_t v, bucket_t **preds,
                         bucket_t **succs) {
    bucket_t *pred = head;
    bucket_t *curr = NULL;
    for (int i = PQE_MAX_LEVEL; i >= 0; i--) {
        curr = LD_ACQ(&pred->next[i]);
        while (curr->key < v) {
            pred = curr;
            curr = LD_ACQ(&pred->next[i]);
        }
        if (preds)
            preds[i] = pred;
        if (succs)
            succs[i] = curr;
    }
    return curr->key == v ? curr : NULL;
}

static void lower_min(pqe_t *q, uint32_t v) {
    for (;;) {
        uint32_t m = LD_ACQ(&q->min_value);
        if (m <= v || cas_u32(&q->min_value, m, v))
            return;
    }
}

/* One validated search attempt; on success the read lock is held. */
static int clean_find(pqe_t *q, uint32_t v, bucket_t **preds, bucket_t **succs,
                      bucket_t **found) {
    uint64_t t = lock_ts(q);
    if (t & 1)
        return 0;
    *found = sl_find(q->head_par, v, preds, succs);
    lock_acquire_read(q);
    if (lock_ts(q) != t) {
        lock_release_read(q);
        return 0;
    }
    return 1;
}

int pqe_sl_add_par(pqe_t *q, int tid, uint32_t v) {
    bucket_t *preds[PQE_MAX_LEVEL + 1];
    bucket_t *succs[PQE_MAX_LEVEL + 1];
    bucket_t *found;
    bucket_t *b = NULL;
    backoff_t bo;
    backoff_reset(&bo);
    for (;;) {
        if (v <= LD_ACQ(&q->last_seq)->key)
            return 0;
        if (!clean_find(q, v, preds, succs, &found)) {
            backoff_wait(&bo);
            continue;
        }
        /* Boundary is stable under the read lock; the unlocked check
         * above may have raced a head move, so decide here. */
        if (v <= LD_ACQ(&q->last_seq)->key) {
            lock_release_read(q);
            return 0;
        }
        if (found) {
            FADD_RLX(&found->counter, 1);
            lock_release_read(q);
            return 1;
        }
        if (!b)
            b = bucket_new(q, tid, v, draw_level(q, tid), 1);
        for (uint32_t i = 0; i <= b->top; i++)
            ST_RLX(&b->next[i], succs[i]);
        if (cas_ptr((void **)&preds[0]->next[0], succs[0], b))
            break;
        lock_release_read(q);
    }
    /* Linked at level 0: the element is visible, so publish it in the
     * minimum cache before anything else. */
    lower_min(q, v);
    for (uint32_t i = 1; i <= b->top;) {
        ST_RLX(&b->next[i], succs[i]);
        if (cas_ptr((void **)&preds[i]->next[i], succs[i], b)) {
            i++;
            continue;
        }
        lock_release_read(q);
        backoff_reset(&bo);
        while (!clean_find(q, v, preds, succs, &found))
            backoff_wait(&bo);
        if (found != b) {
            /* a head move carried the bucket away (or it was consumed);
             * stop with a capped but contiguous tower */
            lock_release_read(q);
            return 1;
        }
    }
    lock_release_read(q);
    return 1;
}

/* Parallel-part insert from the serving thread: no read lock needed
 * because the serving thread is the only head mover. */
static void sl_add_par_server(pqe_t *q, uint32_t v) {
    bucket_t *preds[PQE_MAX_LEVEL + 1];
    bucket_t *succs[PQE_MAX_LEVEL + 1];
    bucket_t *b = NULL;
    int srv = q->max_threads;
    for (;;) {
        bucket_t *found = sl_find(q->head_par, v, preds, succs);
        if (found) {
            lower_min(q, v);
            FADD_RLX(&found->counter, 1);
            return;
        }
        if (!b)
            b = bucket_new(q, srv, v, draw_level(q, srv), 1);
        for (uint32_t i = 0; i <= b->top; i++)
            ST_RLX(&b->next[i], succs[i]);
        lower_min(q, v);
        if (cas_ptr((void **)&preds[0]->next[0], succs[0], b))
            break;
    }
    for (uint32_t i = 1; i <= b->top;) {
        ST_RLX(&b->next[i], succs[i]);
        if (cas_ptr((void **)&preds[i]->next[i], succs[i], b))
            i++;
        else
            sl_find(q->head_par, v, preds, succs);
    }
}

void pqe_sl_add_seq(pqe_t *q, uint32_t v) {
    bucket_t *preds[PQE_MAX_LEVEL + 1];
    bucket_t *succs[PQE_MAX_LEVEL + 1];
    bucket_t *found = sl_find(q->head_seq, v, preds, succs);
    /* lower the cache before the element becomes visible */
    lower_min(q, v);
    bucket_t *target;
    if (found) {
        FADD_RLX(&found->counter, 1);
        target = found;
    } else {
        bucket_t *b =
            bucket_new(q, q->max_threads, v, draw_level(q, q->max_threads), 1);
        for (uint32_t i = 0; i <= b->top; i++)
            ST_RLX(&b->next[i], succs[i]);
        for (uint32_t i = 0; i <= b->top; i++)
            ST_REL(&preds[i]->next[i], b);
        target = b;
    }
    if (v < LD_RLX(&q->curr_seq)->key)
        ST_RLX(&q->curr_seq, target);
    q->insertions_since_move++;
}

uint32_t pqe_adapt_batch_size(uint32_t current, uint64_t insertions,
                              uint32_t low, uint32_t high, uint32_t floor_,
                              uint32_t ceiling) {
    uint32_t next;
    if (insertions > high)
        next = current / 2;
    else if (insertions < low)
        next = current * 2;
    else
        next = current;
    if (next < floor_)
        next = floor_;
    if (next > ceiling)
        next = ceiling;
    return next;
}

static uint32_t next_batch(pqe_t *q) {
    q->batch_size = pqe_adapt_batch_size(
        q->batch_size, q->insertions_since_move, q->batch_low_water,
        q->batch_high_water, q->batch_min, q->batch_max);
    q->insertions_since_move = 0;
    return q->batch_size;
}

int pqe_sl_move_head(pqe_t *q) {
    uint32_t n = next_batch(q);
    lock_acquire_write(q);
    ST_RLX(&q->curr_seq, NULL);
    bucket_t *pred = q->head_par;
    bucket_t *curr = LD_ACQ(&pred->next[0]);
    uint64_t moved = 0;
    bucket_t *first = NULL;
    while (moved < n && curr != q->tail) {
        /* Consumed buckets (counter 0) can sit anywhere in the parallel
         * chain: a chopped remnant keeps the holes left behind when the
         * consume point was rewound by a sequential-part insert.  They
         * carry no copies, so they must never become the consume point
         * or the advertised minimum; sweep them along with the batch. */
        uint64_t c = LD_RLX(&curr->counter);
        moved += c;
        if (!first && c > 0)
            first = curr;
        pred = curr;
        curr = LD_ACQ(&curr->next[0]);
    }
    if (!first) {
        ST_REL(&q->last_seq, q->head_par);
        ST_REL(&q->min_value, PQE_MAXINT);
        lock_release_write(q);
        return 0;
    }
    ST_RLX(&q->curr_seq, first);
    ST_REL(&q->min_value, first->key);
    ST_REL(&q->last_seq, pred);
    for (int i = PQE_MAX_LEVEL; i >= 0; i--)
        ST_REL(&q->head_seq->next[i], LD_ACQ(&q->head_par->next[i]));
    bucket_t *preds[PQE_MAX_LEVEL + 1];
    bucket_t *succs[PQE_MAX_LEVEL + 1];
    sl_find(q->head_seq, pred->key + 1, preds, succs);
    for (int i = PQE_MAX_LEVEL; i >= 0; i--) {
        ST_REL(&preds[i]->next[i], q->tail);
        ST_REL(&q->head_par->next[i], succs[i]);
    }
    lock_release_write(q);
    q->head_moves++;
    return 1;
}

int pqe_sl_chop_head(pqe_t *q) {
    bucket_t *cs = LD_RLX(&q->curr_seq);
    if (!cs)
        return 0;
    bucket_t *preds[PQE_MAX_LEVEL + 1];
    bucket_t *succs[PQE_MAX_LEVEL + 1];
    sl_find(q->head_seq, LD_RLX(&q->last_seq)->key + 1, preds, NULL);
    sl_find(q->head_seq, cs->key, NULL, succs);
    lock_acquire_write(q);
    for (int i = PQE_MAX_LEVEL; i >= 0; i--) {
        /* stitch the remnant's per-level tails onto the parallel
         * chains (writes into consumed buckets are harmless) */
        ST_REL(&preds[i]->next[i], LD_ACQ(&q->head_par->next[i]));
    }
    ST_REL(&q->last_seq, q->head_par);
    ST_RLX(&q->curr_seq, NULL);
    for (int i = PQE_MAX_LEVEL; i >= 0; i--) {
        if (succs[i] != q->tail)
            ST_REL(&q->head_par->next[i], succs[i]);
    }
    lock_release_write(q);
    q->chop_heads++;
    return 1;
}

uint32_t pqe_sl_remove_seq(pqe_t *q) {
    if (LD_ACQ(&q->min_value) == PQE_MAXINT)
        return PQE_MAXINT;
    if (!LD_RLX(&q->curr_seq)) {
        pqe_sl_move_head(q);
        if (!LD_RLX(&q->curr_seq)) {
            /* min_value != MAXINT guarantees parallel work to move;
             * count it if that ever breaks instead of crashing */
            q->anomalies++;
            return PQE_MAXINT;
        }
    }
    bucket_t *curr = LD_RLX(&q->curr_seq);
    uint32_t key = curr->key;
    if (FADD_RLX(&curr->counter, (uint64_t)-1) == 1) {
        while (curr != LD_RLX(&q->last_seq)) {
            curr = LD_ACQ(&curr->next[0]);
            ST_RLX(&q->curr_seq, curr);
            if (LD_RLX(&curr->counter) > 0) {
                ST_REL(&q->min_value, curr->key);
                return key;
            }
        }
        pqe_sl_move_head(q);
    }
    return key;
}

/* ---- elimination array ----------------------------------------------- */

static inline uint64_t slot_word(uint32_t value, uint32_t stamp) {
    return ((uint64_t)value << 32) | stamp;
}

static inline uint32_t slot_value(uint64_t w) { return (uint32_t)(w >> 32); }
static inline uint32_t slot_stamp(uint64_t w) { return (uint32_t)w; }

static inline int is_key(uint32_t v) {
    return v >= PQE_KEY_MIN && v <= PQE_KEY_MAX;
}

static inline int is_response(uint32_t v) {
    return is_key(v) || v == PQE_MAXINT;
}

static int classify_edge(uint64_t oldw, uint64_t neww) {
    uint32_t ov = slot_value(oldw), os = slot_stamp(oldw);
    uint32_t nv = slot_value(neww), ns = slot_stamp(neww);
    if (ov == PQE_OP_EMPTY && os == 0) {
        if (nv == PQE_OP_REMREQ && ns != 0)
            return PQE_EDGE_EMPTY_REMREQ;
        if (is_key(nv) && ns != 0)
            return PQE_EDGE_EMPTY_POSTED;
    } else if (ov == PQE_OP_REMREQ && os != 0) {
        if (nv == PQE_OP_INPROG && ns == 0)
            return PQE_EDGE_REMREQ_INPROG;
        if (is_response(nv) && ns == 0)
            return PQE_EDGE_REMREQ_VALUE;
    } else if (is_key(ov) && os != 0) {
        if (nv == PQE_OP_TAKEN && ns == 0)
            return PQE_EDGE_POSTED_TAKEN;
        if (nv == PQE_OP_INPROG && ns == 0)
            return PQE_EDGE_POSTED_INPROG;
    } else if (ov == PQE_OP_INPROG && os == 0) {
        if (is_response(nv) && ns == 0)
            return PQE_EDGE_INPROG_VALUE;
        if (nv == PQE_OP_TAKEN && ns == 0)
            return PQE_EDGE_INPROG_TAKEN;
    } else if (is_response(ov) && os == 0) {
        if (nv == PQE_OP_EMPTY && ns == 0)
            return PQE_EDGE_VALUE_EMPTY;
    } else if (ov == PQE_OP_TAKEN && os == 0) {
        if (nv == PQE_OP_EMPTY && ns == 0)
            return PQE_EDGE_TAKEN_EMPTY;
    }
    return PQE_EDGE_OTHER;
}

static void record_edge(pqe_t *q, uint64_t oldw, uint64_t neww) {
    int cls = classify_edge(oldw, neww);
    FADD_RLX(&q->edges[cls], 1);
    if (cls == PQE_EDGE_OTHER && cas_u32(&q->violation_claimed, 0, 1)) {
        ST_RLX(&q->violation_old, oldw);
        ST_RLX(&q->violation_new, neww);
    }
}

static inline uint64_t slot_load(pqe_t *q, int i) {
    return LD_ACQ(&q->slots[i].word);
}

static int slot_cas(pqe_t *q, int i, uint64_t oldw, uint64_t neww) {
    if (cas_u64(&q->slots[i].word, oldw, neww)) {
        record_edge(q, oldw, neww);
        return 1;
    }
    return 0;
}

/* unconditional write by the slot's current owner */
static void slot_put(pqe_t *q, int i, uint64_t neww) {
    uint64_t oldw = LD_RLX(&q->slots[i].word);
    record_edge(q, oldw, neww);
    ST_REL(&q->slots[i].word, neww);
}

static void audit_pair(pqe_t *q, uint32_t value, uint32_t observed_min) {
    int64_t idx = __atomic_fetch_add(&q->audit_idx, 1, __ATOMIC_RELAXED);
    if (q->audit_buf && idx < q->audit_cap)
        q->audit_buf[idx] = slot_word(value, observed_min);
}

static uint32_t next_stamp(pqe_t *q, int tid) {
    tslot_t *t = &q->threads[tid];
    uint32_t c = (t->op_count + 1) & 0xFFFFFF;
    if (c == 0)
        c = 1;
    t->op_count = c;
    return ((uint32_t)tid << 24) | c;
}

/* ---- client operations ------------------------------------------------ */

uint32_t pqe_remove_min(pqe_t *q, int tid) {
    tslot_t *t = &q->threads[tid];
    int size = q->elim_size;
    int pos = (tid + 1) % size;
    int scanned = 0;
    backoff_t bo;
    backoff_reset(&bo);
    for (;;) {
        uint64_t w = slot_load(q, pos);
        uint32_t wv = slot_value(w), ws = slot_stamp(w);
        if (ws != 0 && is_key(wv)) {
            uint32_t m = LD_ACQ(&q->min_value);
            if (wv <= m && slot_cas(q, pos, w, slot_word(PQE_OP_TAKEN, 0))) {
                audit_pair(q, wv, m);
                FADD_RLX(&t->ctr[PQE_CTR_REM_ELIM_TAKE], 1);
                FADD_RLX(&t->ctr[PQE_CTR_ADD_ELIM_POSTED], 1);
                return wv;
            }
        } else if (w == 0) {
            uint32_t stamp = next_stamp(q, tid);
            if (slot_cas(q, pos, 0, slot_word(PQE_OP_REMREQ, stamp))) {
                backoff_t wait;
                backoff_reset(&wait);
                for (;;) {
                    w = slot_load(q, pos);
                    wv = slot_value(w);
                    if (wv != PQE_OP_REMREQ && wv != PQE_OP_INPROG)
                        break;
                    backoff_wait(&wait);
                }
                slot_put(q, pos, slot_word(PQE_OP_EMPTY, 0));
                return wv;
            }
        }
        pos++;
        if (pos == size)
            pos = 0;
        if (++scanned % size == 0)
            backoff_wait(&bo);
    }
}

int pqe_add(pqe_t *q, int tid, uint32_t v) {
    tslot_t *t = &q->threads[tid];
    int rounds;
    if (v <= LD_ACQ(&q->min_value)) {
        /* likely a new minimum: it belongs near the serving thread, so
         * try to hand it to a waiting remover first */
        rounds = q->max_elim_min;
    } else {
        if (pqe_sl_add_par(q, tid, v)) {
            FADD_RLX(&t->ctr[PQE_CTR_ADD_PAR], 1);
            return 1;
        }
        rounds = q->max_elim;
    }
    int size = q->elim_size;
    int pos = (tid + 1) % size;
    for (int r = 0; r < rounds; r++) {
        uint64_t w = slot_load(q, pos);
        if (slot_value(w) == PQE_OP_REMREQ) {
            uint32_t m = LD_ACQ(&q->min_value);
            if (v <= m && slot_cas(q, pos, w, slot_word(v, 0))) {
                audit_pair(q, v, m);
                FADD_RLX(&t->ctr[PQE_CTR_ADD_ELIM_HAND], 1);
                FADD_RLX(&t->ctr[PQE_CTR_REM_ELIM_HANDED], 1);
                return 1;
            }
        }
        pos++;
        if (pos == size)
            pos = 0;
    }
    if (pqe_sl_add_par(q, tid, v)) {
        FADD_RLX(&t->ctr[PQE_CTR_ADD_PAR], 1);
        return 1;
    }
    int scanned = 0;
    backoff_t bo;
    backoff_reset(&bo);
    for (;;) {
        uint64_t w = slot_load(q, pos);
        uint32_t wv = slot_value(w);
        if (wv == PQE_OP_REMREQ) {
            uint32_t m = LD_ACQ(&q->min_value);
            if (v <= m && slot_cas(q, pos, w, slot_word(v, 0))) {
                audit_pair(q, v, m);
                FADD_RLX(&t->ctr[PQE_CTR_ADD_ELIM_HAND], 1);
                FADD_RLX(&t->ctr[PQE_CTR_REM_ELIM_HANDED], 1);
                return 1;
            }
        } else if (w == 0) {
            uint32_t stamp = next_stamp(q, tid);
            if (slot_cas(q, pos, 0, slot_word(v, stamp))) {
                backoff_t wait;
                backoff_reset(&wait);
                while (slot_value(slot_load(q, pos)) != PQE_OP_TAKEN)
                    backoff_wait(&wait);
                slot_put(q, pos, slot_word(PQE_OP_EMPTY, 0));
                /* whoever took it (remover or server) counted it */
                return 1;
            }
        }
        pos++;
        if (pos == size)
            pos = 0;
        if (++scanned % size == 0)
            backoff_wait(&bo);
    }
}

/* ---- serving thread --------------------------------------------------- */

static void server_add(pqe_t *q, uint32_t v) {
    if (LD_RLX(&q->curr_seq) && v <= LD_RLX(&q->last_seq)->key)
        pqe_sl_add_seq(q, v);
    else
        sl_add_par_server(q, v);
}

static int scan_eager(pqe_t *q, int *remreq_seen) {
    tslot_t *srv = &q->threads[q->max_threads];
    int handled = 0;
    for (int i = 0; i < q->elim_size; i++) {
        uint64_t w = slot_load(q, i);
        uint32_t wv = slot_value(w), ws = slot_stamp(w);
        if (wv == PQE_OP_REMREQ) {
            (*remreq_seen)++;
            if (slot_cas(q, i, w, slot_word(PQE_OP_INPROG, 0))) {
                uint32_t out = pqe_sl_remove_seq(q);
                slot_put(q, i, slot_word(out, 0));
                FADD_RLX(&srv->ctr[PQE_CTR_REM_SRV], 1);
                handled++;
            }
        } else if (ws != 0 && is_key(wv)) {
            if (slot_cas(q, i, w, slot_word(PQE_OP_INPROG, 0))) {
                server_add(q, wv);
                slot_put(q, i, slot_word(PQE_OP_TAKEN, 0));
                FADD_RLX(&srv->ctr[PQE_CTR_ADD_SRV], 1);
                handled++;
            }
        }
    }
    return handled;
}

static int scan_lazy(pqe_t *q, int *remreq_seen) {
    tslot_t *srv = &q->threads[q->max_threads];
    int handled = 0;
    for (int i = 0; i < q->elim_size; i++) {
        uint64_t w = slot_load(q, i);
        uint32_t wv = slot_value(w), ws = slot_stamp(w);
        if (wv == PQE_OP_REMREQ) {
            (*remreq_seen)++;
            if (!LD_RLX(&q->curr_seq) && LD_ACQ(&q->min_value) != PQE_MAXINT)
                pqe_sl_move_head(q);
            if (LD_RLX(&q->curr_seq)) {
                /* answer straight from the cached minimum; the
                 * structural removal follows before the next slot */
                uint32_t reply = LD_ACQ(&q->min_value);
                if (slot_cas(q, i, w, slot_word(reply, 0))) {
                    pqe_sl_remove_seq(q);
                    FADD_RLX(&srv->ctr[PQE_CTR_REM_SRV], 1);
                    handled++;
                }
            } else if (slot_cas(q, i, w, slot_word(PQE_OP_INPROG, 0))) {
                uint32_t out = pqe_sl_remove_seq(q);
                slot_put(q, i, slot_word(out, 0));
                FADD_RLX(&srv->ctr[PQE_CTR_REM_SRV], 1);
                handled++;
            }
        } else if (ws != 0 && is_key(wv)) {
            if (slot_cas(q, i, w, slot_word(PQE_OP_INPROG, 0))) {
                if (LD_RLX(&q->curr_seq) && wv <= LD_RLX(&q->last_seq)->key) {
                    lower_min(q, wv);
                    slot_put(q, i, slot_word(PQE_OP_TAKEN, 0));
                    pqe_sl_add_seq(q, wv);
                } else {
                    sl_add_par_server(q, wv);
                    slot_put(q, i, slot_word(PQE_OP_TAKEN, 0));
                }
                FADD_RLX(&srv->ctr[PQE_CTR_ADD_SRV], 1);
                handled++;
            }
        }
    }
    return handled;
}

int pqe_server_scan_once(pqe_t *q) {
    int remreq_seen = 0;
    int handled = q->lazy ? scan_lazy(q, &remreq_seen) : scan_eager(q, &remreq_seen);
    if (remreq_seen == 0) {
        if (++q->idle_scans >= q->chop_idle_scans) {
            pqe_sl_chop_head(q);
            q->idle_scans = 0;
        }
    } else {
        q->idle_scans = 0;
    }
    return handled;
}

static int pending_requests(pqe_t *q) {
    int n = 0;
    for (int i = 0; i < q->elim_size; i++) {
        uint64_t w = slot_load(q, i);
        uint32_t wv = slot_value(w), ws = slot_stamp(w);
        if (wv == PQE_OP_REMREQ || (ws != 0 && is_key(wv)))
            n++;
    }
    return n;
}

void pqe_server_loop(pqe_t *q) {
    int idle = 0;
    while (!LD_ACQ(&q->stop_flag)) {
        if (pqe_server_scan_once(q))
            idle = 0;
        else
            idle++;
        if (idle > 2)
            sched_yield();
        else if (idle)
            cpu_relax();
    }
    /* drain: answer requests posted before the stop was requested */
    int quiet = 0;
    while (quiet < 2) {
        pqe_server_scan_once(q);
        quiet = pending_requests(q) == 0 ? quiet + 1 : 0;
    }
}

void pqe_server_stop(pqe_t *q) { ST_REL(&q->stop_flag, 1); }

void pqe_server_reset(pqe_t *q) { ST_REL(&q->stop_flag, 0); }

/* ---- benchmark worker -------------------------------------------------- */

double pqe_monotonic(void) {
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return (double)ts.tv_sec + (double)ts.tv_nsec * 1e-9;
}

void pqe_bench_worker(pqe_t *q, int tid, uint64_t seed, double p_add,
                      double deadline, uint64_t out[4]) {
    uint64_t state = seed + ((uint64_t)tid + 1) * GOLDEN;
    uint64_t threshold = (uint64_t)(p_add * 9007199254740992.0);
    uint64_t ops = 0, adds = 0, removes = 0, hits = 0;
    while (pqe_monotonic() < deadline) {
        uint64_t r = sm64(&state);
        if ((r >> 11) < threshold) {
            pqe_add(q, tid, draw_key(sm64(&state)));
            adds++;
        } else {
            if (pqe_remove_min(q, tid) != PQE_MAXINT)
                hits++;
            removes++;
        }
        ops++;
    }
    out[0] = ops;
    out[1] = adds;
    out[2] = removes;
    out[3] = hits;
}

/* ---- lifecycle, observers ---------------------------------------------- */

pqe_t *pqe_create(const pqe_config_t *cfg) {
    if (cfg->max_threads < 1 || cfg->max_threads > PQE_MAX_THREADS)
        return NULL;
    pqe_t *q = aligned_alloc(64, (sizeof(pqe_t) + 63) & ~(size_t)63);
    if (!q)
        return NULL;
    memset(q, 0, sizeof(*q));
    q->max_threads = cfg->max_threads;
    q->elim_size = cfg->elim_size > 0 ? cfg->elim_size : 2 * cfg->max_threads;
    q->max_elim = cfg->max_elim;
    q->max_elim_min = cfg->max_elim_min;
    q->chop_idle_scans = cfg->chop_idle_scans;
    q->lazy = cfg->lazy;
    q->batch_size = cfg->batch_initial;
    q->batch_min = cfg->batch_min;
    q->batch_max = cfg->batch_max;
    q->batch_low_water = cfg->batch_low_water;
    q->batch_high_water = cfg->batch_high_water;
    q->min_value = PQE_MAXINT;

    size_t nslots = (size_t)q->elim_size;
    q->slots = aligned_alloc(64, nslots * sizeof(eslot_t));
    memset(q->slots, 0, nslots * sizeof(eslot_t));
    size_t nthreads = (size_t)q->max_threads + 1;
    q->threads = aligned_alloc(64, nthreads * sizeof(tslot_t));
    memset(q->threads, 0, nthreads * sizeof(tslot_t));
    for (size_t i = 0; i < nthreads; i++)
        q->threads[i].rng = cfg->seed + (i + 1) * GOLDEN;

    if (cfg->audit_capacity > 0) {
        q->audit_cap = cfg->audit_capacity;
        q->audit_buf = malloc((size_t)q->audit_cap * sizeof(uint64_t));
    }

    q->tail = bucket_new(q, q->max_threads, PQE_MAXINT, PQE_MAX_LEVEL, 0);
    q->head_par = bucket_new(q, q->max_threads, 0, PQE_MAX_LEVEL, 0);
    q->head_seq = bucket_new(q, q->max_threads, 0, PQE_MAX_LEVEL, 0);
    for (int i = 0; i <= PQE_MAX_LEVEL; i++) {
        q->tail->next[i] = NULL;
        q->head_par->next[i] = q->tail;
        q->head_seq->next[i] = q->tail;
    }
    q->last_seq = q->head_par;
    q->curr_seq = NULL;
    return q;
}

void pqe_destroy(pqe_t *q) {
    if (!q)
        return;
    for (int i = 0; i <= q->max_threads; i++) {
        chunk_t *c = q->threads[i].arena;
        while (c) {
            chunk_t *n = c->next;
            free(c);
            c = n;
        }
    }
    free(q->threads);
    free(q->slots);
    free(q->audit_buf);
    free(q);
}

uint32_t pqe_min_value(pqe_t *q) { return LD_ACQ(&q->min_value); }

uint32_t pqe_last_seq_key(pqe_t *q) { return LD_ACQ(&q->last_seq)->key; }

int pqe_has_seq_part(pqe_t *q) { return LD_RLX(&q->curr_seq) != NULL; }

uint64_t pqe_lock_timestamp(pqe_t *q) { return lock_ts(q); }

uint32_t pqe_batch_size(pqe_t *q) { return q->batch_size; }

void pqe_set_batch_size(pqe_t *q, uint32_t n) { q->batch_size = n; }

uint64_t pqe_insertions_since_move(pqe_t *q) { return q->insertions_since_move; }

void pqe_set_insertions_since_move(pqe_t *q, uint64_t n) {
    q->insertions_since_move = n;
}

long pqe_dump_level(pqe_t *q, int part, int level, uint32_t *keys,
                    uint32_t *counts, long cap) {
    bucket_t *head = part == 0 ? q->head_seq : q->head_par;
    long n = 0;
    for (bucket_t *b = LD_ACQ(&head->next[level]); b != q->tail;
         b = LD_ACQ(&b->next[level])) {
        if (n >= cap)
            return -1;
        keys[n] = b->key;
        counts[n] = (uint32_t)LD_RLX(&b->counter);
        n++;
    }
    return n;
}

int pqe_elim_size(pqe_t *q) { return q->elim_size; }

uint64_t pqe_slot_peek(pqe_t *q, int i) { return slot_load(q, i); }

void pqe_slot_poke(pqe_t *q, int i, uint64_t word) {
    /* test hook; bypasses the edge log */
    ST_REL(&q->slots[i].word, word);
}

void pqe_stats(pqe_t *q, uint64_t out[PQE_STATS_COUNT]) {
    for (int k = 0; k < PQE_CTR_COUNT; k++)
        out[k] = 0;
    for (int i = 0; i <= q->max_threads; i++)
        for (int k = 0; k < PQE_CTR_COUNT; k++)
            out[k] += LD_RLX(&q->threads[i].ctr[k]);
    out[PQE_CTR_COUNT] = q->head_moves;
    out[PQE_CTR_COUNT + 1] = q->chop_heads;
    out[PQE_CTR_COUNT + 2] = q->anomalies;
}

void pqe_edge_counts(pqe_t *q, uint64_t out[PQE_EDGE_COUNT]) {
    for (int i = 0; i < PQE_EDGE_COUNT; i++)
        out[i] = LD_RLX(&q->edges[i]);
}

uint64_t pqe_edge_first_violation(pqe_t *q, uint64_t *old_word,
                                  uint64_t *new_word) {
    *old_word = LD_RLX(&q->violation_old);
    *new_word = LD_RLX(&q->violation_new);
    return LD_RLX(&q->edges[PQE_EDGE_OTHER]);
}

int64_t pqe_audit_total(pqe_t *q) {
    return __atomic_load_n(&q->audit_idx, __ATOMIC_RELAXED);
}

int64_t pqe_audit_fetch(pqe_t *q, uint64_t *out, int64_t cap) {
    int64_t n = pqe_audit_total(q);
    if (n > q->audit_cap)
        n = q->audit_cap;
    if (n > cap)
        n = cap;
    for (int64_t i = 0; i < n; i++)
        out[i] = q->audit_buf[i];
    return n;
}
