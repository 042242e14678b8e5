"""Throughput benchmark and its CLI.

Workers mix adds and removes from per-thread splitmix64 streams (coin
flip with probability p for add, keys uniform over the full domain)
against a queue preloaded with `prefill` keys, for a fixed wall-clock
time.  One CSV row per run; the breakdown columns come from the
queue's writer-side counters, so add_par + add_elim + add_srv equals
the add count exactly (baselines report zeros there).

The queue runs on its compiled core or the pure-Python one
(--core c|py, or --compare-cores to measure both and print the ratio);
baselines are driven by the same generator through the same loop shape.
"""

from __future__ import annotations

import argparse
import sys
import threading
import time
from dataclasses import dataclass

from . import _rng
from .api import PriorityQueue, available_cores
from .baselines import LockedHeap, LockedSkiplist
from .params import QueueConfig

CSV_HEADER = (
    "impl,threads,p,prefill,seconds,seed,ops,ops_per_sec,"
    "add_par,add_elim,add_srv,rem_elim,rem_srv,head_moves,chop_heads,headmove_pct"
)

IMPLS = ("pqe", "locked-heap", "locked-skiplist")


@dataclass
class RunResult:
    impl: str
    threads: int
    p: float
    prefill: int
    seconds: float
    seed: int
    ops: int
    add_par: int = 0
    add_elim: int = 0
    add_srv: int = 0
    rem_elim: int = 0
    rem_srv: int = 0
    head_moves: int = 0
    chop_heads: int = 0

    @property
    def ops_per_sec(self) -> float:
        return self.ops / self.seconds if self.seconds > 0 else 0.0

    @property
    def removes(self) -> int:
        return self.rem_elim + self.rem_srv

    @property
    def headmove_pct(self) -> float:
        return 100.0 * self.head_moves / self.removes if self.removes else 0.0

    def csv_row(self) -> str:
        return (
            f"{self.impl},{self.threads},{self.p},{self.prefill},"
            f"{self.seconds},{self.seed},{self.ops},{self.ops_per_sec:.1f},"
            f"{self.add_par},{self.add_elim},{self.add_srv},"
            f"{self.rem_elim},{self.rem_srv},{self.head_moves},"
            f"{self.chop_heads},{self.headmove_pct:.4f}"
        )


def parse_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("missing or wrong CSV header")
    cols = CSV_HEADER.split(",")
    out = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(cols):
            raise ValueError(f"bad row: {line!r}")
        row: dict = dict(zip(cols, parts))
        for k in ("threads", "prefill", "seed", "ops", "add_par", "add_elim",
                  "add_srv", "rem_elim", "rem_srv", "head_moves", "chop_heads"):
            row[k] = int(row[k])
        for k in ("p", "seconds", "ops_per_sec", "headmove_pct"):
            row[k] = float(row[k])
        out.append(row)
    return out


def drive_worker(queue_like, tid: int, seed: int, p_add: float, deadline: float):
    """Python twin of the compiled benchmark worker, for queues without
    a native one."""
    state = _rng.worker_state(seed, tid)
    threshold = _rng.coin_threshold(p_add)
    ops = adds = removes = 0
    while time.monotonic() < deadline:
        state, r = _rng.splitmix64(state)
        if (r >> 11) < threshold:
            state, r = _rng.splitmix64(state)
            queue_like.add(tid, _rng.draw_key(r))
            adds += 1
        else:
            queue_like.remove_min(tid)
            removes += 1
        ops += 1
    return ops, adds, removes


def _timed_workers(n: int, seconds: float, body) -> list:
    """Start n workers, release them together, give them a common
    absolute deadline, and collect their (ops, adds, removes)."""
    barrier = threading.Barrier(n + 1)
    deadline_box = [0.0]
    results: list = [None] * n
    def run(i: int) -> None:
        barrier.wait()
        results[i] = body(i, deadline_box[0])
    workers = [threading.Thread(target=run, args=(i,)) for i in range(n)]
    for w in workers:
        w.start()
    deadline_box[0] = time.monotonic() + seconds
    barrier.wait()
    for w in workers:
        w.join()
    return results


def _run_pqe(threads, p, prefill, seconds, seed, strategy, core, elim_size) -> RunResult:
    cfg = QueueConfig(
        max_threads=threads, strategy=strategy, seed=seed, elim_size=elim_size
    )
    q = PriorityQueue(cfg, core=core)
    q.start()
    h = q.register()
    for key in _rng.gen_prefill(seed, prefill):
        q.add(h, key)
    q.unregister(h)
    handles = [q.register() for _ in range(threads)]
    core_obj = q.core

    def body(i: int, deadline: float):
        return core_obj.bench_worker(handles[i].tid, seed, p, deadline)

    results = _timed_workers(threads, seconds, body)
    q.stop()
    stats = q.stats()
    return RunResult(
        impl="pqe",
        threads=threads,
        p=p,
        prefill=prefill,
        seconds=seconds,
        seed=seed,
        ops=sum(r[0] for r in results),
        add_par=stats.add_par,
        add_elim=stats.add_elim,
        add_srv=stats.add_srv,
        rem_elim=stats.rem_elim,
        rem_srv=stats.rem_srv,
        head_moves=stats.head_moves,
        chop_heads=stats.chop_heads,
    )


def _run_baseline(impl, threads, p, prefill, seconds, seed) -> RunResult:
    q = LockedHeap() if impl == "locked-heap" else LockedSkiplist(seed=seed)
    for key in _rng.gen_prefill(seed, prefill):
        q.add(0, key)

    def body(i: int, deadline: float):
        return drive_worker(q, i, seed, p, deadline)

    results = _timed_workers(threads, seconds, body)
    return RunResult(
        impl=impl,
        threads=threads,
        p=p,
        prefill=prefill,
        seconds=seconds,
        seed=seed,
        ops=sum(r[0] for r in results),
    )


def run_benchmark(
    impl: str,
    *,
    threads: int,
    p: float,
    prefill: int,
    seconds: float,
    seed: int,
    strategy: str = "eager",
    core: str = "auto",
    elim_size: int = 0,
) -> RunResult:
    if impl == "pqe":
        return _run_pqe(threads, p, prefill, seconds, seed, strategy, core, elim_size)
    if impl in ("locked-heap", "locked-skiplist"):
        return _run_baseline(impl, threads, p, prefill, seconds, seed)
    raise ValueError(f"unknown impl {impl!r}")


def _parse_sweep(text: str, cast):
    return [cast(part) for part in text.split(",") if part.strip()]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="pqelim-bench",
        description="Throughput benchmark for the concurrent priority queue "
        "and its locked baselines.",
    )
    ap.add_argument("--impl", choices=IMPLS, default="pqe")
    ap.add_argument("--threads", type=int, default=4, help="worker thread count")
    ap.add_argument("--p", type=float, default=0.5, help="probability an op is an add")
    ap.add_argument("--prefill", type=int, default=2000)
    ap.add_argument("--seconds", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="-", help="CSV path, - for stdout")
    ap.add_argument("--sweep-threads", default="", help="comma list overriding --threads")
    ap.add_argument("--sweep-p", default="", help="comma list overriding --p")
    ap.add_argument("--strategy", choices=["eager", "lazy"], default="eager")
    ap.add_argument("--elim-size", type=int, default=0,
                    help="elimination slots for --impl pqe "
                    "(0 means twice the thread count)")
    ap.add_argument("--core", choices=["auto", "c", "py"], default="auto",
                    help="queue core for --impl pqe")
    ap.add_argument("--compare-cores", action="store_true",
                    help="run every available core and report the ratio")
    args = ap.parse_args(argv)

    thread_list = _parse_sweep(args.sweep_threads, int) or [args.threads]
    p_list = _parse_sweep(args.sweep_p, float) or [args.p]
    if min(thread_list) < 1:
        ap.error("threads must be >= 1")
    if not all(0.0 <= p <= 1.0 for p in p_list):
        ap.error("p must be in [0, 1]")
    if args.elim_size < 0:
        ap.error("elim-size must be >= 0")

    lines = [CSV_HEADER]
    compared: dict[tuple, dict[str, float]] = {}
    for threads in thread_list:
        for p in p_list:
            if args.compare_cores and args.impl == "pqe":
                for core in available_cores():
                    r = run_benchmark(
                        "pqe", threads=threads, p=p, prefill=args.prefill,
                        seconds=args.seconds, seed=args.seed,
                        strategy=args.strategy, core=core,
                        elim_size=args.elim_size,
                    )
                    r.impl = f"pqe-{core}"
                    lines.append(r.csv_row())
                    compared.setdefault((threads, p), {})[core] = r.ops_per_sec
                    print(f"# {r.impl} threads={threads} p={p} "
                          f"ops/s={r.ops_per_sec:.0f}", file=sys.stderr)
            else:
                r = run_benchmark(
                    args.impl, threads=threads, p=p, prefill=args.prefill,
                    seconds=args.seconds, seed=args.seed,
                    strategy=args.strategy, core=args.core,
                    elim_size=args.elim_size,
                )
                lines.append(r.csv_row())
                print(f"# {r.impl} threads={threads} p={p} "
                      f"ops/s={r.ops_per_sec:.0f}", file=sys.stderr)

    for (threads, p), cores in compared.items():
        if "c" in cores and "py" in cores and cores["py"] > 0:
            print(f"# core speedup threads={threads} p={p}: "
                  f"c/py = {cores['c'] / cores['py']:.2f}x", file=sys.stderr)

    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
