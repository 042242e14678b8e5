"""Shared constants, slot word codec, and tuning knobs.

Keys live in [KEY_MIN, KEY_MAX]; the values below KEY_MIN are opcodes
that share the key's 32-bit space inside elimination slots, and MAXINT
doubles as the empty-queue sentinel.  A slot is a single 64-bit word,
value in the high half, stamp in the low half, so every protocol step
is one atomic compare-and-swap.
"""

from __future__ import annotations

from dataclasses import dataclass

MAXINT = 0xFFFFFFFF
KEY_MIN = 4
KEY_MAX = MAXINT - 1

OP_EMPTY = 0
OP_REMREQ = 1
OP_TAKEN = 2
OP_INPROG = 3

MAX_LEVEL = 20

STAMP_ID_BITS = 8
STAMP_COUNT_BITS = 24
STAMP_COUNT_MASK = (1 << STAMP_COUNT_BITS) - 1
MAX_THREADS_LIMIT = 1 << STAMP_ID_BITS

BATCH_MIN = 8
BATCH_MAX = 65536
BATCH_INITIAL = 8
BATCH_LOW_WATER = 100
BATCH_HIGH_WATER = 1000

# Slot-transition labels, in canonical order.  POSTED is a pending add
# (admissible key, stamp != 0); VALUE is a response (key or MAXINT,
# stamp == 0).  Anything not matching one of these ten is recorded
# under "other" and counts as a protocol violation.
ALLOWED_EDGES = (
    "EMPTY->REMREQ",
    "EMPTY->POSTED",
    "REMREQ->INPROG",
    "REMREQ->VALUE",
    "POSTED->TAKEN",
    "POSTED->INPROG",
    "INPROG->VALUE",
    "INPROG->TAKEN",
    "VALUE->EMPTY",
    "TAKEN->EMPTY",
)


def is_key(v: int) -> bool:
    return KEY_MIN <= v <= KEY_MAX


def is_response(v: int) -> bool:
    return is_key(v) or v == MAXINT


def pack_slot(value: int, stamp: int) -> int:
    return ((value & MAXINT) << 32) | (stamp & MAXINT)


def unpack_slot(word: int) -> tuple[int, int]:
    return (word >> 32) & MAXINT, word & MAXINT


def make_stamp(thread_id: int, op_count: int) -> int:
    """Stamp for a posted request: never 0, unique per thread until the
    24-bit op counter wraps."""
    return ((thread_id & (MAX_THREADS_LIMIT - 1)) << STAMP_COUNT_BITS) | (
        op_count & STAMP_COUNT_MASK
    )


def classify_edge(old_word: int, new_word: int) -> str | None:
    """Label a slot transition, or None when it matches no allowed edge."""
    ov, os_ = unpack_slot(old_word)
    nv, ns = unpack_slot(new_word)
    if ov == OP_EMPTY and os_ == 0:
        if nv == OP_REMREQ and ns != 0:
            return "EMPTY->REMREQ"
        if is_key(nv) and ns != 0:
            return "EMPTY->POSTED"
    elif ov == OP_REMREQ and os_ != 0:
        if nv == OP_INPROG and ns == 0:
            return "REMREQ->INPROG"
        if is_response(nv) and ns == 0:
            return "REMREQ->VALUE"
    elif is_key(ov) and os_ != 0:
        if nv == OP_TAKEN and ns == 0:
            return "POSTED->TAKEN"
        if nv == OP_INPROG and ns == 0:
            return "POSTED->INPROG"
    elif ov == OP_INPROG and os_ == 0:
        if is_response(nv) and ns == 0:
            return "INPROG->VALUE"
        if nv == OP_TAKEN and ns == 0:
            return "INPROG->TAKEN"
    elif is_response(ov) and os_ == 0:
        if nv == OP_EMPTY and ns == 0:
            return "VALUE->EMPTY"
    elif ov == OP_TAKEN and os_ == 0:
        if nv == OP_EMPTY and ns == 0:
            return "TAKEN->EMPTY"
    return None


def adapt_batch_size(
    current: int,
    insertions: int,
    *,
    low: int = BATCH_LOW_WATER,
    high: int = BATCH_HIGH_WATER,
    floor: int = BATCH_MIN,
    ceiling: int = BATCH_MAX,
) -> int:
    """Batch size for the next head move.

    Halve when the finished epoch absorbed many sequential insertions
    (the sequential part was too wide), double when it absorbed few,
    hold in between; always clamp to [floor, ceiling].
    """
    if insertions > high:
        nxt = current // 2
    elif insertions < low:
        nxt = current * 2
    else:
        nxt = current
    return max(floor, min(ceiling, nxt))


@dataclass
class QueueConfig:
    """Construction-time knobs for either core."""

    max_threads: int = 8
    elim_size: int = 0  # 0 means 2 * max_threads
    max_elim: int = 4
    max_elim_min: int = 32
    chop_idle_scans: int = 16
    batch_initial: int = BATCH_INITIAL
    batch_min: int = BATCH_MIN
    batch_max: int = BATCH_MAX
    batch_low_water: int = BATCH_LOW_WATER
    batch_high_water: int = BATCH_HIGH_WATER
    strategy: str = "eager"
    seed: int = 0x5EED
    audit_capacity: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.max_threads <= MAX_THREADS_LIMIT:
            raise ValueError(f"max_threads must be in [1, {MAX_THREADS_LIMIT}]")
        if self.elim_size == 0:
            self.elim_size = 2 * self.max_threads
        if self.elim_size < 1:
            raise ValueError("elim_size must be positive")
        if self.strategy not in ("eager", "lazy"):
            raise ValueError("strategy must be 'eager' or 'lazy'")
        if self.max_elim < 0 or self.max_elim_min < 0:
            raise ValueError("elimination round counts must be >= 0")
        if self.chop_idle_scans < 1:
            raise ValueError("chop_idle_scans must be >= 1")
        if not self.batch_min <= self.batch_initial <= self.batch_max:
            raise ValueError("batch_initial outside [batch_min, batch_max]")
        if self.audit_capacity < 0:
            raise ValueError("audit_capacity must be >= 0")
