"""splitmix64 streams shared by the benchmark and tests.

The compiled core carries the same generator in C; both lanes must
produce identical op sequences for a given seed, so keep every masking
step 64-bit exact.
"""

from __future__ import annotations

from .params import KEY_MAX, KEY_MIN

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_KEY_SPAN = KEY_MAX - KEY_MIN + 1
_COIN_ONE = 1 << 53


def splitmix64(state: int) -> tuple[int, int]:
    """Advance one step; returns (new_state, 64-bit output)."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def worker_state(seed: int, thread_id: int) -> int:
    return (seed + (thread_id + 1) * _GOLDEN) & _MASK64


def coin_threshold(p_add: float) -> int:
    """Integer threshold t such that a 53-bit draw < t means 'add'."""
    return int(p_add * _COIN_ONE)


def draw_key(r: int) -> int:
    return KEY_MIN + r % _KEY_SPAN


def gen_ops(seed: int, thread_id: int, count: int, p_add: float) -> list[tuple[bool, int]]:
    """First `count` ops of a worker stream as (is_add, key) pairs.

    Removes carry key 0.  A remove consumes only the coin draw, an add
    consumes the coin draw plus one key draw, matching the benchmark
    workers in both cores.
    """
    state = worker_state(seed, thread_id)
    threshold = coin_threshold(p_add)
    out = []
    for _ in range(count):
        state, r = splitmix64(state)
        if (r >> 11) < threshold:
            state, r = splitmix64(state)
            out.append((True, draw_key(r)))
        else:
            out.append((False, 0))
    return out


def gen_prefill(seed: int, count: int) -> list[int]:
    """Keys used to preload a queue before a timed run."""
    state = (seed ^ 0xA5A5A5A5A5A5A5A5) & _MASK64
    keys = []
    for _ in range(count):
        state, r = splitmix64(state)
        keys.append(draw_key(r))
    return keys
