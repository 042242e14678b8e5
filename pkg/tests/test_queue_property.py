"""Behavioral equivalence with an oracle queue.

Single-client scripts must match a locked heap answer for answer (with
one client and the serving thread the queue is a sequential priority
queue); concurrent runs are checked by multiset accounting, which any
interleaving must satisfy.
"""

import threading
from collections import Counter

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from pqelim._rng import gen_ops, gen_prefill
from pqelim.baselines import LockedHeap
from pqelim.params import KEY_MIN, MAXINT

ops_strategy = st.lists(
    st.one_of(
        st.integers(min_value=KEY_MIN, max_value=KEY_MIN + 30),
        st.none(),  # None = remove_min
    ),
    max_size=150,
)


@settings(
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
@given(script=ops_strategy)
def test_single_client_matches_locked_heap(started_queue, script):
    q = started_queue()
    oracle = LockedHeap()
    with q.register() as h:
        for step in script:
            if step is None:
                raw = q.remove_min(h)
                want = oracle.remove_min(0)
                assert raw == (None if want == MAXINT else want)
            else:
                q.add(h, step)
                oracle.add(0, step)
        for got in q.drain(h):
            assert got == oracle.remove_min(0)
        assert oracle.remove_min(0) == MAXINT
    q.stop()


def test_long_seeded_script_matches_locked_heap(started_queue):
    q = started_queue()
    oracle = LockedHeap()
    with q.register() as h:
        for key in gen_prefill(99, 500):
            q.add(h, key)
            oracle.add(0, key)
        for is_add, key in gen_ops(3, 0, 8000, 0.45):
            if is_add:
                q.add(h, key)
                oracle.add(0, key)
            else:
                raw = q.remove_min(h)
                want = oracle.remove_min(0)
                assert raw == (None if want == MAXINT else want)
        left = q.drain(h)
    assert left == sorted(left)
    assert Counter(left) == Counter(
        iter(lambda: oracle.remove_min(0), MAXINT)
    )


def test_concurrent_multiset_accounting(started_queue):
    q = started_queue()
    n, per = 6, 800
    added = [Counter() for _ in range(n)]
    removed = [Counter() for _ in range(n)]
    barrier = threading.Barrier(n)

    def worker(w):
        with q.register() as h:
            barrier.wait()
            for is_add, key in gen_ops(1234, w, per, 0.55):
                if is_add:
                    q.add(h, key)
                    added[w][key] += 1
                else:
                    got = q.remove_min(h)
                    if got is not None:
                        removed[w][got] += 1

    threads = [threading.Thread(target=worker, args=(w,)) for w in range(n)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    with q.register() as h:
        left = q.drain(h)
    assert left == sorted(left)
    assert sum(added, Counter()) == sum(removed, Counter()) + Counter(left)
    other, first = q.core.edge_violations()
    assert (other, first) == (0, None)
    assert q.stats().anomalies == 0


def test_drain_is_sorted_after_concurrent_adds(started_queue):
    q = started_queue()
    n = 5
    barrier = threading.Barrier(n)

    def worker(w):
        with q.register() as h:
            barrier.wait()
            for is_add, key in gen_ops(77, w, 500, 1.0):
                q.add(h, key)

    threads = [threading.Thread(target=worker, args=(w,)) for w in range(n)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    with q.register() as h:
        left = q.drain(h)
    assert len(left) == n * 500
    assert left == sorted(left)
    want = Counter()
    for w in range(n):
        for _, key in gen_ops(77, w, 500, 1.0):
            want[key] += 1
    assert Counter(left) == want
