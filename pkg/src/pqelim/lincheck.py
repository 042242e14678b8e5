"""Linearizability checking for priority-queue histories.

A history is a list of ticked operation records.  The checker searches
for a total order that (a) keeps every operation inside its
invoke/response window, (b) respects each thread's program order, and
(c) replays correctly against a sorted multiset: add(v) inserts v,
remove_min returns the current minimum or empty-None on an empty
multiset.  The search is a DFS over per-thread progress vectors with
memoization (the multiset state is a function of the vector, so a
revisited vector can be pruned).  Budgets make the verdict three-way:
accepted with a witness order, rejected with the deepest stuck prefix,
or inconclusive when the state budget runs out.
"""

from __future__ import annotations

import heapq
import random
import threading
from collections import Counter
from dataclasses import dataclass, field

from .params import KEY_MIN

DEFAULT_BUDGET = 10_000_000


@dataclass(frozen=True)
class OpRecord:
    thread_id: int
    op: str  # "add" | "remove"
    arg: int | None  # add only
    result: int | None  # remove: key or None for empty; add: None
    invoke_tick: int
    response_tick: int


@dataclass
class CheckResult:
    ok: bool | None  # None = state budget exhausted
    witness: list[int] = field(default_factory=list)
    states_explored: int = 0
    failure: dict | None = None

    def __bool__(self) -> bool:
        return self.ok is True


def check_history(records: list[OpRecord], budget: int = DEFAULT_BUDGET) -> CheckResult:
    total = len(records)
    if total == 0:
        return CheckResult(ok=True)

    by_thread: dict[int, list[int]] = {}
    for idx, rec in enumerate(records):
        by_thread.setdefault(rec.thread_id, []).append(idx)
    tids = sorted(by_thread)
    tindex = {tid: k for k, tid in enumerate(tids)}
    seqs = []
    for tid in tids:
        seq = sorted(by_thread[tid], key=lambda i: records[i].invoke_tick)
        for a, b in zip(seq, seq[1:]):
            if records[a].response_tick > records[b].invoke_tick:
                raise ValueError(f"thread {tid} has overlapping operations")
        seqs.append(seq)
    nthreads = len(seqs)
    lens = [len(s) for s in seqs]

    progress = [0] * nthreads
    counts: Counter = Counter()
    heap: list[int] = []
    live_total = 0

    def current_min() -> int | None:
        while heap and counts[heap[0]] == 0:
            heapq.heappop(heap)
        return heap[0] if heap else None

    def can_apply(rec: OpRecord) -> bool:
        if rec.op == "add":
            return True
        if rec.result is None:
            return live_total == 0
        return live_total > 0 and current_min() == rec.result

    def apply_op(rec: OpRecord) -> None:
        nonlocal live_total
        if rec.op == "add":
            counts[rec.arg] += 1
            heapq.heappush(heap, rec.arg)
            live_total += 1
        elif rec.result is not None:
            counts[rec.result] -= 1
            live_total -= 1

    def undo_op(rec: OpRecord) -> None:
        nonlocal live_total
        if rec.op == "add":
            counts[rec.arg] -= 1
            live_total -= 1
        elif rec.result is not None:
            counts[rec.result] += 1
            heapq.heappush(heap, rec.result)
            live_total += 1

    def eligible_threads() -> list[int]:
        """Threads whose next op may linearize first: nothing pending
        finished before that op was invoked."""
        pend = [
            (records[seqs[t][progress[t]]].response_tick, t)
            for t in range(nthreads)
            if progress[t] < lens[t]
        ]
        pend.sort()
        r1 = pend[0][0]
        r2 = pend[1][0] if len(pend) > 1 else None
        out = []
        for resp, t in pend:
            bound = r2 if resp == r1 else r1
            if bound is None or records[seqs[t][progress[t]]].invoke_tick < bound:
                out.append(t)
        return out

    def diagnose() -> dict:
        elig = set(eligible_threads())
        pending = []
        for t in range(nthreads):
            if progress[t] >= lens[t]:
                continue
            rec = records[seqs[t][progress[t]]]
            if t not in elig:
                why = "blocked by real-time order"
            elif rec.op == "add":
                why = "applicable"
            elif rec.result is None:
                why = f"returned empty but {live_total} values live"
            else:
                why = f"returned {rec.result}, expected minimum {current_min()}"
            pending.append({"thread": tids[t], "record": seqs[t][progress[t]], "why": why})
        return {"linearized": list(order), "pending": pending}

    order: list[int] = []
    stack: list[tuple[list[int], int]] = []
    visited: set[tuple[int, ...]] = set()
    explored = 0
    best_depth = -1
    best_failure: dict | None = None

    def push_frame() -> bool:
        nonlocal explored, best_depth, best_failure
        key = tuple(progress)
        if key in visited:
            stack.append(([], 0))
            return True
        visited.add(key)
        explored += 1
        if explored > budget:
            return False
        choices = [
            t for t in eligible_threads() if can_apply(records[seqs[t][progress[t]]])
        ]
        if not choices and len(order) > best_depth:
            best_depth = len(order)
            best_failure = diagnose()
        stack.append((choices, 0))
        return True

    if not push_frame():
        return CheckResult(ok=None, states_explored=explored)
    while True:
        choices, i = stack[-1]
        if i < len(choices):
            stack[-1] = (choices, i + 1)
            t = choices[i]
            idx = seqs[t][progress[t]]
            apply_op(records[idx])
            progress[t] += 1
            order.append(idx)
            if len(order) == total:
                return CheckResult(ok=True, witness=list(order), states_explored=explored)
            if not push_frame():
                return CheckResult(ok=None, states_explored=explored)
        else:
            stack.pop()
            if not stack:
                return CheckResult(
                    ok=False, states_explored=explored, failure=best_failure
                )
            idx = order.pop()
            rec = records[idx]
            progress[tindex[rec.thread_id]] -= 1
            undo_op(rec)


# -- recording ----------------------------------------------------------- --


class _Ticker:
    __slots__ = ("_v", "_lock")

    def __init__(self) -> None:
        self._v = 0
        self._lock = threading.Lock()

    def tick(self) -> int:
        with self._lock:
            self._v += 1
            return self._v


def record_run(
    queue,
    *,
    n_threads: int,
    ops_per_thread: int,
    p_add: float,
    seed: int,
    key_span: int = 16,
    prefill: int = 0,
) -> list[OpRecord]:
    """Run a concurrent window against a started PriorityQueue and
    return its ticked history.

    Keys come from a deliberately small span so minima collide and the
    empty path gets exercised.  Prefill ops are recorded too (as thread
    -1, sequential before the window) so the checker sees them.
    """
    ticker = _Ticker()
    records: list[OpRecord] = []
    rec_lock = threading.Lock()

    def run_ops(handle, label: int, rng: random.Random, count: int, is_add_only: bool):
        local = []
        for _ in range(count):
            if is_add_only or rng.random() < p_add:
                arg = KEY_MIN + rng.randrange(key_span)
                t0 = ticker.tick()
                queue.add(handle, arg)
                t1 = ticker.tick()
                local.append(OpRecord(label, "add", arg, None, t0, t1))
            else:
                t0 = ticker.tick()
                out = queue.remove_min(handle)
                t1 = ticker.tick()
                local.append(OpRecord(label, "remove", None, out, t0, t1))
        with rec_lock:
            records.extend(local)

    if prefill:
        with queue.register() as h:
            run_ops(h, -1, random.Random(seed ^ 0xF00D), prefill, True)

    barrier = threading.Barrier(n_threads)
    workers = []
    for w in range(n_threads):
        handle = queue.register()

        def body(h=handle, label=w):
            barrier.wait()
            try:
                run_ops(h, label, random.Random((seed << 8) + label), ops_per_thread, False)
            finally:
                queue.unregister(h)

        workers.append(threading.Thread(target=body))
    for th in workers:
        th.start()
    for th in workers:
        th.join()
    records.sort(key=lambda r: r.invoke_tick)
    return records


# -- serialization ------------------------------------------------------- --


def format_history(records: list[OpRecord]) -> str:
    """One record per line: thread op arg invoke response result."""
    lines = []
    for r in records:
        arg = "-" if r.arg is None else str(r.arg)
        if r.op == "add":
            result = "ok"
        else:
            result = "empty" if r.result is None else str(r.result)
        lines.append(f"{r.thread_id} {r.op} {arg} {r.invoke_tick} {r.response_tick} {result}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_history(text: str) -> list[OpRecord]:
    records = []
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"line {ln}: expected 6 fields, got {len(parts)}")
        tid, op, arg, inv, resp, result = parts
        if op not in ("add", "remove"):
            raise ValueError(f"line {ln}: unknown op {op!r}")
        records.append(
            OpRecord(
                thread_id=int(tid),
                op=op,
                arg=None if arg == "-" else int(arg),
                result=None if result in ("ok", "empty") else int(result),
                invoke_tick=int(inv),
                response_tick=int(resp),
            )
        )
    return records
