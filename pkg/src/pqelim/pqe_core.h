/* Compiled queue core: split skiplist + elimination array + server.
 *
 * Mirrors the pure-Python core's surface one to one so the Cython
 * wrapper can expose an identical class.  All functions are safe to
 * call without the GIL; `pqe_t` is opaque and all cross-thread state
 * inside it is accessed with __atomic builtins.
 */

#ifndef PQE_CORE_H
#define PQE_CORE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define PQE_MAXINT 0xFFFFFFFFu
#define PQE_KEY_MIN 4u
#define PQE_KEY_MAX 0xFFFFFFFEu
#define PQE_MAX_LEVEL 20
#define PQE_MAX_THREADS 256

enum {
    PQE_OP_EMPTY = 0,
    PQE_OP_REMREQ = 1,
    PQE_OP_TAKEN = 2,
    PQE_OP_INPROG = 3
};

enum {
    PQE_CTR_ADD_PAR = 0,
    PQE_CTR_ADD_ELIM_HAND,
    PQE_CTR_ADD_ELIM_POSTED,
    PQE_CTR_ADD_SRV,
    PQE_CTR_REM_ELIM_TAKE,
    PQE_CTR_REM_ELIM_HANDED,
    PQE_CTR_REM_SRV,
    PQE_CTR_COUNT
};

/* stats layout: the 7 counters above, then head_moves, chop_heads,
 * anomalies */
#define PQE_STATS_COUNT (PQE_CTR_COUNT + 3)

/* slot-transition classes, canonical order, "other" last */
enum {
    PQE_EDGE_EMPTY_REMREQ = 0,
    PQE_EDGE_EMPTY_POSTED,
    PQE_EDGE_REMREQ_INPROG,
    PQE_EDGE_REMREQ_VALUE,
    PQE_EDGE_POSTED_TAKEN,
    PQE_EDGE_POSTED_INPROG,
    PQE_EDGE_INPROG_VALUE,
    PQE_EDGE_INPROG_TAKEN,
    PQE_EDGE_VALUE_EMPTY,
    PQE_EDGE_TAKEN_EMPTY,
    PQE_EDGE_OTHER,
    PQE_EDGE_COUNT
};

typedef struct pqe pqe_t;

typedef struct pqe_config {
    int max_threads;
    int elim_size;
    int max_elim;
    int max_elim_min;
    int chop_idle_scans;
    int lazy;
    uint32_t batch_initial;
    uint32_t batch_min;
    uint32_t batch_max;
    uint32_t batch_low_water;
    uint32_t batch_high_water;
    uint64_t seed;
    int64_t audit_capacity;
} pqe_config_t;

pqe_t *pqe_create(const pqe_config_t *cfg);
void pqe_destroy(pqe_t *q);

/* client operations; tid is a dense id in [0, max_threads) */
int pqe_add(pqe_t *q, int tid, uint32_t value);
uint32_t pqe_remove_min(pqe_t *q, int tid);

/* serving thread */
void pqe_server_loop(pqe_t *q);
void pqe_server_stop(pqe_t *q);
/* Clear a previous stop before relaunching the loop; never call
 * concurrently with pqe_server_stop. */
void pqe_server_reset(pqe_t *q);
int pqe_server_scan_once(pqe_t *q);

/* structural operations with serving-thread semantics (tests) */
int pqe_sl_add_par(pqe_t *q, int tid, uint32_t v);
void pqe_sl_add_seq(pqe_t *q, uint32_t v);
uint32_t pqe_sl_remove_seq(pqe_t *q);
int pqe_sl_move_head(pqe_t *q);
int pqe_sl_chop_head(pqe_t *q);

/* observers and test hooks */
uint32_t pqe_min_value(pqe_t *q);
uint32_t pqe_last_seq_key(pqe_t *q);
int pqe_has_seq_part(pqe_t *q);
uint64_t pqe_lock_timestamp(pqe_t *q);
uint32_t pqe_batch_size(pqe_t *q);
void pqe_set_batch_size(pqe_t *q, uint32_t n);
uint64_t pqe_insertions_since_move(pqe_t *q);
void pqe_set_insertions_since_move(pqe_t *q, uint64_t n);
uint32_t pqe_adapt_batch_size(uint32_t current, uint64_t insertions,
                              uint32_t low, uint32_t high, uint32_t floor_,
                              uint32_t ceiling);

/* part: 0 = sequential, 1 = parallel; returns bucket count, or -1 when
 * cap is too small */
long pqe_dump_level(pqe_t *q, int part, int level, uint32_t *keys,
                    uint32_t *counts, long cap);

int pqe_elim_size(pqe_t *q);
uint64_t pqe_slot_peek(pqe_t *q, int i);
void pqe_slot_poke(pqe_t *q, int i, uint64_t word);

void pqe_stats(pqe_t *q, uint64_t out[PQE_STATS_COUNT]);
void pqe_edge_counts(pqe_t *q, uint64_t out[PQE_EDGE_COUNT]);
/* returns the violation count; fills the first offending pair if any */
uint64_t pqe_edge_first_violation(pqe_t *q, uint64_t *old_word,
                                  uint64_t *new_word);
int64_t pqe_audit_total(pqe_t *q);
/* entries are (value << 32) | observed_min; returns entries copied */
int64_t pqe_audit_fetch(pqe_t *q, uint64_t *out, int64_t cap);

/* benchmark worker: mixes adds and removes from a splitmix64 stream
 * until the monotonic clock passes deadline;
 * out = {ops, adds, removes, hits} where hits counts removes that
 * returned a value (conservation checks need successes, not attempts) */
void pqe_bench_worker(pqe_t *q, int tid, uint64_t seed, double p_add,
                      double deadline, uint64_t out[4]);
double pqe_monotonic(void);
/* first `count` ops of a worker stream, for cross-language checks */
void pqe_gen_ops(uint64_t seed, int tid, long count, double p_add,
                 uint8_t *is_add, uint32_t *keys);

#ifdef __cplusplus
}
#endif

#endif /* PQE_CORE_H */
