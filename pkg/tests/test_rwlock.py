"""Single-writer/multi-reader lock with generation timestamps."""

import threading
import time

from pqelim.params import KEY_MIN
from pqelim.pycore.skiplist import SwmrLock


def test_timestamp_starts_even_and_zero():
    lock = SwmrLock()
    assert lock.timestamp == 0


def test_writer_flips_parity_twice():
    lock = SwmrLock()
    lock.acquire_write()
    assert lock.timestamp == 1  # odd while a writer is inside
    lock.release_write()
    assert lock.timestamp == 2  # even again, one generation later


def test_readers_do_not_touch_timestamp():
    lock = SwmrLock()
    lock.acquire_read()
    lock.acquire_read()
    assert lock.timestamp == 0
    lock.release_read()
    lock.release_read()
    assert lock.timestamp == 0


def test_equal_even_timestamps_bracket_no_writer():
    # The validation idiom: read ts, do work, re-read under the read
    # lock; equality of even values proves no write section ran.
    lock = SwmrLock()
    t0 = lock.timestamp
    lock.acquire_read()
    assert lock.timestamp == t0
    lock.release_read()
    lock.acquire_write()
    lock.release_write()
    assert lock.timestamp != t0


def test_writer_waits_for_readers():
    lock = SwmrLock()
    lock.acquire_read()
    acquired = threading.Event()

    def writer():
        lock.acquire_write()
        acquired.set()
        lock.release_write()

    th = threading.Thread(target=writer)
    th.start()
    time.sleep(0.02)
    assert not acquired.is_set()
    lock.release_read()
    th.join(timeout=5)
    assert acquired.is_set()


def test_pending_writer_stalls_new_readers():
    lock = SwmrLock()
    lock.acquire_read()
    got_write = threading.Event()
    got_read = threading.Event()

    def writer():
        lock.acquire_write()
        got_write.set()
        time.sleep(0.02)
        lock.release_write()

    def late_reader():
        # Started while a writer is pending: must not slip in first.
        while not lock._pending:
            time.sleep(0.001)
        lock.acquire_read()
        got_read.set()
        lock.release_read()

    tw = threading.Thread(target=writer)
    tr = threading.Thread(target=late_reader)
    tw.start()
    tr.start()
    time.sleep(0.02)
    assert not got_write.is_set()
    assert not got_read.is_set()
    lock.release_read()
    tw.join(timeout=5)
    tr.join(timeout=5)
    assert got_write.is_set() and got_read.is_set()


def test_reader_churn_under_writers():
    lock = SwmrLock()
    stop = threading.Event()
    inside = [0]
    bad = []

    def reader():
        while not stop.is_set():
            lock.acquire_read()
            if lock.timestamp & 1:
                bad.append("reader saw odd timestamp")
            lock.release_read()

    def writer():
        for _ in range(200):
            lock.acquire_write()
            inside[0] += 1
            if inside[0] != 1:
                bad.append("two writers inside")
            inside[0] -= 1
            lock.release_write()

    readers = [threading.Thread(target=reader) for _ in range(3)]
    writers = [threading.Thread(target=writer) for _ in range(2)]
    for th in readers + writers:
        th.start()
    for th in writers:
        th.join()
    stop.set()
    for th in readers:
        th.join()
    assert not bad
    assert lock.timestamp == 2 * 400


def test_core_write_sections_bump_timestamp(bare_core):
    # Head moves and chops are the only writer sections; each one must
    # advance the generation by exactly two and end on an even value.
    core = bare_core()
    t0 = core.lock_timestamp()
    assert t0 % 2 == 0
    core.add_par(0, KEY_MIN + 10)
    core.add_par(0, KEY_MIN + 20)
    assert core.move_head() is True
    t1 = core.lock_timestamp()
    assert t1 == t0 + 2
    assert core.chop_head() is True
    t2 = core.lock_timestamp()
    assert t2 == t1 + 2
    # Failed chop (no sequential part) is not a write section.
    assert core.chop_head() is False
    assert core.lock_timestamp() == t2
