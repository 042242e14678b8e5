/* Standalone stress driver for the compiled core.
 *
 * Runs worker threads against a queue with a live serving thread and
 * verifies multiset conservation and a clean slot-transition log.
 * Meant for sanitizer builds:
 *
 *   gcc -O1 -g -fsanitize=thread -Isrc/pqelim \
 *       tools/stress_main.c src/pqelim/pqe_core.c -lpthread -o stress
 *   ./stress [threads] [seconds] [p_add] [lazy]
 *
 * Exits 0 on a clean run, 1 on any invariant failure.
 */

#include <pthread.h>
#include <stdio.h>
#include <stdlib.h>

#include "pqe_core.h"

#define CHUNK 256

typedef struct {
    pqe_t *q;
    int tid;
    uint64_t seed;
    double p_add;
    double deadline;
    uint64_t ops, adds, hits; /* hits = removes that returned a key */
} worker_arg_t;

static void *worker_main(void *p) {
    worker_arg_t *a = (worker_arg_t *)p;
    uint8_t is_add[CHUNK];
    uint32_t keys[CHUNK];
    uint64_t chunk = 0;
    while (pqe_monotonic() < a->deadline) {
        pqe_gen_ops(a->seed + chunk * 0x9E3779B97F4A7C15ull, a->tid, CHUNK,
                    a->p_add, is_add, keys);
        chunk++;
        for (int i = 0; i < CHUNK; i++) {
            if (is_add[i]) {
                pqe_add(a->q, a->tid, keys[i]);
                a->adds++;
            } else if (pqe_remove_min(a->q, a->tid) != PQE_MAXINT) {
                a->hits++;
            }
            a->ops++;
        }
    }
    return NULL;
}

static void *server_main(void *p) {
    pqe_server_loop((pqe_t *)p);
    return NULL;
}

int main(int argc, char **argv) {
    int threads = argc > 1 ? atoi(argv[1]) : 4;
    double seconds = argc > 2 ? atof(argv[2]) : 2.0;
    double p_add = argc > 3 ? atof(argv[3]) : 0.5;
    int lazy = argc > 4 ? atoi(argv[4]) : 0;

    pqe_config_t cfg = {
        .max_threads = threads,
        .elim_size = 2 * threads,
        .max_elim = 4,
        .max_elim_min = 32,
        .chop_idle_scans = 16,
        .lazy = lazy,
        .batch_initial = 8,
        .batch_min = 8,
        .batch_max = 65536,
        .batch_low_water = 100,
        .batch_high_water = 1000,
        .seed = 0x5EED,
        .audit_capacity = 1 << 16,
    };
    pqe_t *q = pqe_create(&cfg);
    if (!q) {
        fprintf(stderr, "create failed\n");
        return 1;
    }

    /* prefill through the public op so the stats breakdown covers it;
     * safe before the serving thread starts because an empty queue
     * never takes the hand-to-remover path */
    uint64_t prefill = 256;
    for (uint64_t i = 0; i < prefill; i++)
        pqe_add(q, 0, PQE_KEY_MIN + (uint32_t)(i * 37 % 1024));

    pthread_t server;
    pthread_create(&server, NULL, server_main, q);

    worker_arg_t *args = calloc((size_t)threads, sizeof(*args));
    pthread_t *tids = calloc((size_t)threads, sizeof(*tids));
    double deadline = pqe_monotonic() + seconds;
    for (int i = 0; i < threads; i++) {
        args[i] = (worker_arg_t){.q = q, .tid = i, .seed = 7,
                                 .p_add = p_add, .deadline = deadline};
        pthread_create(&tids[i], NULL, worker_main, &args[i]);
    }
    for (int i = 0; i < threads; i++)
        pthread_join(tids[i], NULL);
    pqe_server_stop(q);
    pthread_join(server, NULL);

    uint64_t ops = 0, adds = 0, hits = 0;
    for (int i = 0; i < threads; i++) {
        ops += args[i].ops;
        adds += args[i].adds;
        hits += args[i].hits;
    }

    int rc = 0;

    uint64_t stats[PQE_STATS_COUNT];
    pqe_stats(q, stats);
    uint64_t stat_adds = stats[PQE_CTR_ADD_PAR] + stats[PQE_CTR_ADD_ELIM_HAND] +
                         stats[PQE_CTR_ADD_ELIM_POSTED] + stats[PQE_CTR_ADD_SRV];
    uint64_t stat_rems = stats[PQE_CTR_REM_ELIM_TAKE] +
                         stats[PQE_CTR_REM_ELIM_HANDED] + stats[PQE_CTR_REM_SRV];
    if (stat_adds != adds + prefill) {
        fprintf(stderr, "FAIL add breakdown: %llu != %llu\n",
                (unsigned long long)stat_adds, (unsigned long long)(adds + prefill));
        rc = 1;
    }
    /* the remove columns count answered requests, empty answers included */
    if (stat_rems != ops - adds) {
        fprintf(stderr, "FAIL remove breakdown: %llu != %llu\n",
                (unsigned long long)stat_rems, (unsigned long long)(ops - adds));
        rc = 1;
    }
    if (stats[PQE_CTR_COUNT + 2] != 0) {
        fprintf(stderr, "FAIL anomalies: %llu\n",
                (unsigned long long)stats[PQE_CTR_COUNT + 2]);
        rc = 1;
    }

    uint64_t old_w = 0, new_w = 0;
    uint64_t violations = pqe_edge_first_violation(q, &old_w, &new_w);
    if (violations) {
        fprintf(stderr, "FAIL slot transitions: %llu bad, first %llx -> %llx\n",
                (unsigned long long)violations, (unsigned long long)old_w,
                (unsigned long long)new_w);
        rc = 1;
    }

    int64_t audit_n = pqe_audit_total(q);
    if (audit_n > 0) {
        int64_t cap = audit_n < cfg.audit_capacity ? audit_n : cfg.audit_capacity;
        uint64_t *pairs = malloc((size_t)cap * sizeof(uint64_t));
        int64_t got = pqe_audit_fetch(q, pairs, cap);
        for (int64_t i = 0; i < got; i++) {
            uint32_t value = (uint32_t)(pairs[i] >> 32);
            uint32_t m = (uint32_t)pairs[i];
            if (value > m) {
                fprintf(stderr,
                        "FAIL elimination safety: %u above minimum %u\n", value,
                        m);
                rc = 1;
                break;
            }
        }
        free(pairs);
    }

    /* conservation: every key that went in came back to a worker or
     * comes out now */
    pqe_server_reset(q);
    pthread_t server2;
    pthread_create(&server2, NULL, server_main, q);
    uint64_t drained = 0;
    while (pqe_remove_min(q, 0) != PQE_MAXINT)
        drained++;
    pqe_server_stop(q);
    pthread_join(server2, NULL);
    if (adds + prefill != hits + drained) {
        fprintf(stderr, "FAIL conservation: %llu in, %llu out\n",
                (unsigned long long)(adds + prefill),
                (unsigned long long)(hits + drained));
        rc = 1;
    }

    printf("ops=%llu adds=%llu hits=%llu drained=%llu violations=%llu "
           "audit=%lld rc=%d\n",
           (unsigned long long)ops, (unsigned long long)adds,
           (unsigned long long)hits, (unsigned long long)drained,
           (unsigned long long)violations, (long long)audit_n, rc);

    pqe_destroy(q);
    free(args);
    free(tids);
    return rc;
}
